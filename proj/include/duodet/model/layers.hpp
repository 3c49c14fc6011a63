#pragma once

#include <string>

#include "duodet/model/params.hpp"
#include "duodet/nn/ops.hpp"

namespace duodet {

using nn::Tape;
using nn::Tensor;
using nn::Var;

/// What a forward pass reads from and records into.
template <typename T>
struct ForwardContext {
    Tape<T>& tape;
    ModelParams<T>& params;
    bool training = false;

    Var p(const std::string& name)
    {
        const auto& e = params.entry(name);
        return tape.param(name, e.value, e.trainable);
    }
};

/// conv (no bias) + batch norm parameters under `name`.
template <typename T>
void add_conv_bn(ModelParams<T>& params, const std::string& name, int cin, int cout, int k, std::uint64_t seed)
{
    params.add(name + ".conv.weight", fan_in_uniform<T>({cout, cin, k, k}, cin * k * k, seed, name + ".conv.weight"));
    params.add(name + ".bn.gamma", Tensor<T>({cout}, T(1)));
    params.add(name + ".bn.beta", Tensor<T>({cout}, T(0)));
    params.add(name + ".bn.running_mean", Tensor<T>({cout}, T(0)), false);
    params.add(name + ".bn.running_var", Tensor<T>({cout}, T(1)), false);
}

template <typename T>
Var conv_bn(ForwardContext<T>& ctx, const std::string& name, Var x, int stride, bool activate)
{
    const int k = ctx.params[name + ".conv.weight"].dim(2);
    Var y = nn::conv2d(ctx.tape, x, ctx.p(name + ".conv.weight"), Var{}, stride, k / 2);
    y = nn::batch_norm(ctx.tape, y, ctx.p(name + ".bn.gamma"), ctx.p(name + ".bn.beta"),
                       ctx.params[name + ".bn.running_mean"], ctx.params[name + ".bn.running_var"], ctx.training);
    return activate ? nn::silu(ctx.tape, y) : y;
}

/// Linear layer [dout, din] + bias, fan-in uniform.
template <typename T>
void add_linear(ModelParams<T>& params, const std::string& name, int din, int dout, std::uint64_t seed)
{
    params.add(name + ".weight", fan_in_uniform<T>({dout, din}, din, seed, name + ".weight"));
    params.add(name + ".bias", fan_in_uniform<T>({dout}, din, seed, name + ".bias"));
}

template <typename T>
Var linear(ForwardContext<T>& ctx, const std::string& name, Var x)
{
    return nn::linear(ctx.tape, x, ctx.p(name + ".weight"), ctx.p(name + ".bias"));
}

}   // namespace duodet
