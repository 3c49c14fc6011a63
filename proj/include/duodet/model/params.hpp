#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "duodet/augment/rng.hpp"
#include "duodet/core/error.hpp"
#include "duodet/nn/tensor.hpp"

namespace duodet {

/// Branch tags partitioning the parameter set; the tag is the name prefix before '.'.
inline const std::vector<std::string>& branch_tags()
{
    static const std::vector<std::string> tags{"backbone_rgb", "backbone_tir", "fusion",       "neck",
                                               "head_main",    "head_aux_pre", "head_aux_post"};
    return tags;
}

inline std::string branch_of(const std::string& name)
{
    return name.substr(0, name.find('.'));
}

inline bool is_aux_branch(const std::string& tag)
{
    return tag.rfind("head_aux_", 0) == 0;
}

template <typename T>
struct ParamEntry {
    std::string name;
    nn::Tensor<T> value;
    bool trainable = true;   // false for normalization running statistics

    friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

/// Named, ordered arrays of the whole model (learnable weights plus
/// normalization buffers), addressable by branch tag.
template <typename T>
class ModelParams {
public:
    nn::Tensor<T>& add(const std::string& name, nn::Tensor<T> value, bool trainable = true)
    {
        if (index_.contains(name)) {
            throw ValidationError("duplicate parameter " + name);
        }
        index_[name] = entries_.size();
        entries_.push_back({name, std::move(value), trainable});
        return entries_.back().value;
    }

    bool contains(const std::string& name) const { return index_.contains(name); }

    nn::Tensor<T>& operator[](const std::string& name) { return entry(name).value; }
    const nn::Tensor<T>& operator[](const std::string& name) const { return entry(name).value; }

    ParamEntry<T>& entry(const std::string& name)
    {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw ValidationError("unknown parameter " + name);
        }
        return entries_[it->second];
    }
    const ParamEntry<T>& entry(const std::string& name) const { return const_cast<ModelParams*>(this)->entry(name); }

    const std::vector<ParamEntry<T>>& entries() const { return entries_; }
    std::vector<ParamEntry<T>>& entries() { return entries_; }

    std::size_t size() const { return entries_.size(); }

    /// Element count, optionally restricted to one branch tag.
    std::size_t count(const std::string& tag = {}) const
    {
        std::size_t n = 0;
        for (const auto& e : entries_) {
            if (tag.empty() || branch_of(e.name) == tag) {
                n += e.value.numel();
            }
        }
        return n;
    }

    std::set<std::string> tags() const
    {
        std::set<std::string> out;
        for (const auto& e : entries_) {
            out.insert(branch_of(e.name));
        }
        return out;
    }

    /// Copy without entries whose tag matches `pred`.
    template <typename Pred>
    ModelParams without(Pred pred) const
    {
        ModelParams out;
        for (const auto& e : entries_) {
            if (!pred(branch_of(e.name))) {
                out.add(e.name, e.value, e.trainable);
            }
        }
        return out;
    }

    template <typename U>
    ModelParams<U> cast() const
    {
        ModelParams<U> out;
        for (const auto& e : entries_) {
            out.add(e.name, e.value.template cast<U>(), e.trainable);
        }
        return out;
    }

    friend bool operator==(const ModelParams& a, const ModelParams& b) { return a.entries_ == b.entries_; }

private:
    std::vector<ParamEntry<T>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return h;
}

}   // namespace detail

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], seeded per parameter name so
/// values do not depend on construction order.
template <typename T>
nn::Tensor<T> fan_in_uniform(std::vector<int> shape, int fan_in, std::uint64_t seed, const std::string& name)
{
    nn::Tensor<T> t(std::move(shape));
    RngStream rng(seed, detail::fnv1a(name), 0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data) {
        v = static_cast<T>(rng.uniform(-bound, bound));
    }
    return t;
}

}   // namespace duodet
