#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "duodet/nn/tensor.hpp"

namespace duodet::nn {

/// Handle to a value recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape. Ops append nodes in evaluation order; backward()
/// walks them in reverse. Nodes that do not depend on a gradient-requiring leaf
/// keep no backward closure.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int self)>;

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    /// Value with no gradient.
    Var constant(Tensor<T> v) { return add_node(std::move(v), false, {}, {}); }

    /// Input that collects a gradient (used by gradient checks on inputs).
    Var input(Tensor<T> v) { return add_node(std::move(v), grad_enabled_, {}, {}); }

    /// Named parameter leaf; gradients are gathered per name by param_grads().
    Var param(const std::string& name, const Tensor<T>& v, bool trainable = true)
    {
        Var out = add_node(v, grad_enabled_ && trainable, {}, {});
        if (grad_enabled_ && trainable) {
            nodes_[out.id].param_name = name;
        }
        return out;
    }

    /// Records an op result. `backward` runs only when some parent needs a gradient.
    Var record(Tensor<T> value, const std::vector<Var>& parents, BackwardFn backward)
    {
        bool needs = false;
        if (grad_enabled_) {
            for (Var p : parents) {
                needs = needs || nodes_[p.id].requires_grad;
            }
        }
        return add_node(std::move(value), needs, needs ? std::move(backward) : BackwardFn{}, {});
    }

    const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
    const std::vector<int>& shape(Var v) const { return nodes_.at(v.id).value.shape; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient buffer of `v`, zero-allocated on first access.
    Tensor<T>& grad(Var v) { return grad(v.id); }
    Tensor<T>& grad(int id)
    {
        auto& n = nodes_[id];
        if (n.grad.data.size() != n.value.data.size()) {
            n.grad = Tensor<T>(n.value.shape);
        }
        return n.grad;
    }
    bool has_grad(int id) const { return !nodes_[id].grad.data.empty(); }

    /// Accumulates `g` into the gradient of `v` if it takes one.
    void accumulate(Var v, const Tensor<T>& g)
    {
        if (!nodes_[v.id].requires_grad) {
            return;
        }
        auto& dst = grad(v).data;
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += g.data[i];
        }
    }

    /// Seeds d(root)/d(root) with ones and propagates to all leaves.
    void backward(Var root)
    {
        if (!nodes_[root.id].requires_grad) {
            return;
        }
        auto& g = grad(root);
        std::fill(g.data.begin(), g.data.end(), T(1));
        for (int id = root.id; id >= 0; --id) {
            auto& n = nodes_[id];
            if (n.backward && has_grad(id)) {
                n.backward(*this, id);
            }
        }
    }

    /// Sum of gradients per parameter name (a parameter used twice gets both).
    std::map<std::string, Tensor<T>> param_grads() const
    {
        std::map<std::string, Tensor<T>> out;
        for (const auto& n : nodes_) {
            if (n.param_name.empty() || n.grad.data.empty()) {
                continue;
            }
            auto [it, inserted] = out.try_emplace(n.param_name, n.grad);
            if (!inserted) {
                for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                    it->second.data[i] += n.grad.data[i];
                }
            }
        }
        return out;
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        BackwardFn backward;
        std::string param_name;
    };

    Var add_node(Tensor<T> v, bool requires_grad, BackwardFn fn, std::string name)
    {
        nodes_.push_back(Node{std::move(v), {}, requires_grad, std::move(fn), std::move(name)});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    bool grad_enabled_;
    std::deque<Node> nodes_;
};

}   // namespace duodet::nn
