#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "duodet/core/error.hpp"

namespace duodet::nn {

/// Storage aligned to Eigen's widest packet, so vectorized kernels see the same
/// alignment on every run and results do not depend on heap layout.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense row-major array. Feature maps are NCHW, token sequences [B, N, D].
template <typename T>
struct Tensor {
    std::vector<int> shape;
    AlignedVector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)), data(count(shape), fill) {}
    Tensor(std::vector<int> s, const std::vector<T>& d) : shape(std::move(s)), data(d.begin(), d.end())
    {
        if (data.size() != count(shape)) {
            throw ValidationError("tensor data size does not match shape");
        }
    }

    static std::size_t count(const std::vector<int>& s)
    {
        return std::accumulate(s.begin(), s.end(), std::size_t{1},
                               [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(i < 0 ? shape.size() + i : i); }
    bool empty() const { return data.empty(); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    /// NCHW accessor.
    T& at(int n, int c, int y, int x) { return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x]; }
    const T& at(int n, int c, int y, int x) const
    {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }

    template <typename U>
    Tensor<U> cast() const
    {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline std::string shape_string(const std::vector<int>& s)
{
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += (i ? "," : "") + std::to_string(s[i]);
    }
    return out + "]";
}

}   // namespace duodet::nn
