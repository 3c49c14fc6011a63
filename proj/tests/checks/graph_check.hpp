#pragma once

// Finite-difference checks of whole model graphs at 64-bit.

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "duodet/model/model.hpp"
#include "oracles/gradcheck.hpp"

namespace checks {

using duodet::ForwardContext;
using duodet::ModelParams;
using duodet::RngStream;
using duodet::nn::Tape;
using duodet::nn::Tensor;
using duodet::nn::Var;

inline Tensor<double> normal_tensor(std::vector<int> shape, RngStream& rng, double scale = 1.0)
{
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) {
        v = scale * rng.normal();
    }
    return t;
}

/// A scalar function of named params plus free inputs.
struct GraphCheck {
    using Builder = std::function<Var(ForwardContext<double>&, const std::vector<Var>&)>;

    ModelParams<double> params;
    std::vector<Tensor<double>> inputs;
    Builder build;
    bool training = true;

    double eval()
    {
        Tape<double> tape(false);
        ForwardContext<double> ctx{tape, params, training};
        std::vector<Var> in;
        for (const auto& x : inputs) {
            in.push_back(tape.constant(x));
        }
        return tape.value(build(ctx, in))[0];
    }

    struct Grads {
        std::vector<Tensor<double>> inputs;
        std::map<std::string, Tensor<double>> params;
    };

    Grads analytic()
    {
        Tape<double> tape;
        ForwardContext<double> ctx{tape, params, training};
        std::vector<Var> in;
        for (const auto& x : inputs) {
            in.push_back(tape.input(x));
        }
        Var out = build(ctx, in);
        tape.backward(out);
        Grads g;
        for (Var v : in) {
            g.inputs.push_back(tape.grad(v));
        }
        g.params = tape.param_grads();
        return g;
    }

    /// `per_input` coordinates of each input, plus `param_picks` coordinates
    /// over parameters whose name starts with one of `prefixes`.
    oracle::GradResult run(RngStream& rng, int per_input, int param_picks, const std::vector<std::string>& prefixes)
    {
        const auto g = analytic();
        oracle::GradResult total;
        auto f = [this] { return eval(); };
        for (std::size_t k = 0; k < inputs.size() && per_input > 0; ++k) {
            oracle::merge(total, oracle::check_tensor(f, inputs[k], g.inputs[k], per_input, rng,
                                                      "input" + std::to_string(k)));
        }
        std::vector<std::string> names;
        for (const auto& [name, grad] : g.params) {
            for (const auto& p : prefixes) {
                if (name.rfind(p, 0) == 0) {
                    names.push_back(name);
                    break;
                }
            }
        }
        for (int k = 0; k < param_picks && !names.empty(); ++k) {
            const auto& name = names[rng.uniform_int(0, static_cast<int>(names.size()) - 1)];
            oracle::merge(total, oracle::check_tensor(f, params[name], g.params.at(name), 1, rng, name));
        }
        return total;
    }
};

/// Weights drawn once per scale so eval() and analytic() see the same projection.
struct Projection {
    std::array<Tensor<double>, 3> w;

    Var apply(Tape<double>& tape, const duodet::Pyramid<Var>& pyr) const
    {
        Var acc = duodet::nn::dot_const(tape, pyr[0], w[0]);
        for (int s = 1; s < 3; ++s) {
            acc = duodet::nn::add(tape, acc, duodet::nn::dot_const(tape, pyr[s], w[s]));
        }
        return acc;
    }
};

inline Projection make_projection(const std::array<std::vector<int>, 3>& shapes, RngStream& rng)
{
    Projection p;
    for (int s = 0; s < 3; ++s) {
        p.w[s] = normal_tensor(shapes[s], rng);
    }
    return p;
}

}   // namespace checks
