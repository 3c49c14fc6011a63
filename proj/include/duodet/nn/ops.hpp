#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "duodet/nn/tape.hpp"
#include "duodet/nn/tensor.hpp"

namespace duodet::nn {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const MatrixRM<T>>;

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw ValidationError(what);
    }
}

}   // namespace detail

template <typename T>
Var add(Tape<T>& tape, Var a, Var b)
{
    const auto& va = tape.value(a);
    const auto& vb = tape.value(b);
    detail::require(va.shape == vb.shape, "add: shape mismatch " + shape_string(va.shape) + " vs " +
                                              shape_string(vb.shape));
    Tensor<T> out(va.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = va[i] + vb[i];
    }
    return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
        const auto g = t.grad(self);
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

template <typename T>
Var scale(Tape<T>& tape, Var a, T factor)
{
    Tensor<T> out = tape.value(a);
    for (auto& v : out.data) {
        v *= factor;
    }
    return tape.record(std::move(out), {a}, [a, factor](Tape<T>& t, int self) {
        Tensor<T> g = t.grad(self);
        for (auto& v : g.data) {
            v *= factor;
        }
        t.accumulate(a, g);
    });
}

/// (a + b) / 2, evaluated exactly as written.
template <typename T>
Var mean2(Tape<T>& tape, Var a, Var b)
{
    const auto& va = tape.value(a);
    const auto& vb = tape.value(b);
    detail::require(va.shape == vb.shape, "mean2: shape mismatch");
    Tensor<T> out(va.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = (va[i] + vb[i]) / T(2);
    }
    return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
        Tensor<T> g = t.grad(self);
        for (auto& v : g.data) {
            v /= T(2);
        }
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

template <typename T>
Var silu(Tape<T>& tape, Var a)
{
    const auto& va = tape.value(a);
    Tensor<T> out(va.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = va[i] / (T(1) + std::exp(-va[i]));
    }
    return tape.record(std::move(out), {a}, [a](Tape<T>& t, int self) {
        const auto& x = t.value(a);
        const auto& g = t.grad(self);
        Tensor<T> dx(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            const T s = T(1) / (T(1) + std::exp(-x[i]));
            dx[i] = g[i] * s * (T(1) + x[i] * (T(1) - s));
        }
        t.accumulate(a, dx);
    });
}

/// Sum of all elements (scalar of shape [1]).
template <typename T>
Var sum(Tape<T>& tape, Var a)
{
    const auto& va = tape.value(a);
    T s = 0;
    for (const auto& v : va.data) {
        s += v;
    }
    return tape.record(Tensor<T>({1}, s), {a}, [a](Tape<T>& t, int self) {
        const T g = t.grad(self)[0];
        t.accumulate(a, Tensor<T>(t.shape(a), g));
    });
}

/// Sum of a * w for a fixed weight tensor `w` (random projections in gradient checks).
template <typename T>
Var dot_const(Tape<T>& tape, Var a, Tensor<T> w)
{
    const auto& va = tape.value(a);
    detail::require(va.shape == w.shape, "dot_const: shape mismatch");
    T s = 0;
    for (std::size_t i = 0; i < va.numel(); ++i) {
        s += va[i] * w[i];
    }
    return tape.record(Tensor<T>({1}, s), {a}, [a, w = std::move(w)](Tape<T>& t, int self) {
        Tensor<T> g = w;
        const T gs = t.grad(self)[0];
        for (auto& v : g.data) {
            v *= gs;
        }
        t.accumulate(a, g);
    });
}

namespace detail {

template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* cols)
{
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        row[oy * wo + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                                ? x[(static_cast<std::size_t>(ci) * h + iy) * w + ix]
                                                : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* cols, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* dx)
{
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        continue;
                    }
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) {
                            dx[(static_cast<std::size_t>(ci) * h + iy) * w + ix] += row[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

}   // namespace detail

/// 2-D convolution, square kernel. x: [N,Cin,H,W], w: [Cout,Cin,k,k], optional bias [Cout].
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var bias, int stride, int pad)
{
    const auto& vx = tape.value(x);
    const auto& vw = tape.value(w);
    detail::require(vx.rank() == 4 && vw.rank() == 4, "conv2d: expects NCHW input and OIHW weight");
    const int n = vx.dim(0), cin = vx.dim(1), h = vx.dim(2), wd = vx.dim(3);
    const int cout = vw.dim(0), k = vw.dim(2);
    detail::require(vw.dim(1) == cin, "conv2d: channel mismatch, input has " + std::to_string(cin) +
                                          ", weight expects " + std::to_string(vw.dim(1)));
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (wd + 2 * pad - k) / stride + 1;
    const int kk = cin * k * k;
    const int hw = ho * wo;

    auto cols = std::make_shared<AlignedVector<T>>(static_cast<std::size_t>(n) * kk * hw);
    Tensor<T> out({n, cout, ho, wo});
    ConstMapMat<T> wm(vw.data.data(), cout, kk);
    for (int b = 0; b < n; ++b) {
        T* cb = cols->data() + static_cast<std::size_t>(b) * kk * hw;
        detail::im2col(vx.data.data() + static_cast<std::size_t>(b) * cin * h * wd, cin, h, wd, k, stride, pad, ho,
                       wo, cb);
        MapMat<T> om(out.data.data() + static_cast<std::size_t>(b) * cout * hw, cout, hw);
        om.noalias() = wm * ConstMapMat<T>(cb, kk, hw);
    }
    if (bias.valid()) {
        const auto& vb = tape.value(bias);
        for (int b = 0; b < n; ++b) {
            for (int co = 0; co < cout; ++co) {
                T* o = out.data.data() + (static_cast<std::size_t>(b) * cout + co) * hw;
                for (int i = 0; i < hw; ++i) {
                    o[i] += vb[co];
                }
            }
        }
    }
    std::vector<Var> parents{x, w};
    if (bias.valid()) {
        parents.push_back(bias);
    }
    return tape.record(std::move(out), parents,
                       [=](Tape<T>& t, int self) {
                           const auto& g = t.grad(self);
                           if (t.requires_grad(w)) {
                               auto& gw = t.grad(w);
                               MapMat<T> gwm(gw.data.data(), cout, kk);
                               for (int b = 0; b < n; ++b) {
                                   ConstMapMat<T> gm(g.data.data() + static_cast<std::size_t>(b) * cout * hw, cout,
                                                     hw);
                                   gwm.noalias() +=
                                       gm * ConstMapMat<T>(cols->data() + static_cast<std::size_t>(b) * kk * hw, kk,
                                                           hw).transpose();
                               }
                           }
                           if (bias.valid() && t.requires_grad(bias)) {
                               auto& gb = t.grad(bias);
                               for (int b = 0; b < n; ++b) {
                                   for (int co = 0; co < cout; ++co) {
                                       const T* gp = g.data.data() + (static_cast<std::size_t>(b) * cout + co) * hw;
                                       T s = 0;
                                       for (int i = 0; i < hw; ++i) {
                                           s += gp[i];
                                       }
                                       gb[co] += s;
                                   }
                               }
                           }
                           if (t.requires_grad(x)) {
                               const auto& vw2 = t.value(w);
                               ConstMapMat<T> wm2(vw2.data.data(), cout, kk);
                               auto& gx = t.grad(x);
                               MatrixRM<T> dcols(kk, hw);
                               for (int b = 0; b < n; ++b) {
                                   ConstMapMat<T> gm(g.data.data() + static_cast<std::size_t>(b) * cout * hw, cout,
                                                     hw);
                                   dcols.noalias() = wm2.transpose() * gm;
                                   detail::col2im(dcols.data(), cin, h, wd, k, stride, pad, ho, wo,
                                                  gx.data.data() + static_cast<std::size_t>(b) * cin * h * wd);
                               }
                           }
                       });
}

/// Batch normalization over (N,H,W) per channel. In training mode batch
/// statistics are used and the running buffers are updated in place; in
/// inference mode the running buffers are used.
template <typename T>
Var batch_norm(Tape<T>& tape, Var x, Var gamma, Var beta, Tensor<T>& running_mean, Tensor<T>& running_var,
               bool training, T momentum = T(0.1), T eps = T(1e-3))
{
    const auto& vx = tape.value(x);
    const int n = vx.dim(0), c = vx.dim(1), hw = vx.dim(2) * vx.dim(3);
    const std::size_t m = static_cast<std::size_t>(n) * hw;
    detail::require(static_cast<int>(running_mean.numel()) == c, "batch_norm: channel mismatch");
    const auto& vg = tape.value(gamma);
    const auto& vb = tape.value(beta);

    auto xhat = std::make_shared<Tensor<T>>(vx.shape);
    auto inv_std = std::make_shared<std::vector<T>>(c);
    Tensor<T> out(vx.shape);
    for (int ch = 0; ch < c; ++ch) {
        T mean = 0;
        T var = 0;
        if (training) {
            for (int b = 0; b < n; ++b) {
                const T* p = vx.data.data() + (static_cast<std::size_t>(b) * c + ch) * hw;
                for (int i = 0; i < hw; ++i) {
                    mean += p[i];
                }
            }
            mean /= static_cast<T>(m);
            for (int b = 0; b < n; ++b) {
                const T* p = vx.data.data() + (static_cast<std::size_t>(b) * c + ch) * hw;
                for (int i = 0; i < hw; ++i) {
                    var += (p[i] - mean) * (p[i] - mean);
                }
            }
            var /= static_cast<T>(m);
            const T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
            running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * mean;
            running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * unbiased;
        } else {
            mean = running_mean[ch];
            var = running_var[ch];
        }
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[ch] = is;
        for (int b = 0; b < n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
            for (int i = 0; i < hw; ++i) {
                const T xh = (vx[off + i] - mean) * is;
                (*xhat)[off + i] = xh;
                out[off + i] = vg[ch] * xh + vb[ch];
            }
        }
    }
    return tape.record(std::move(out), {x, gamma, beta}, [=](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const auto& vg2 = t.value(gamma);
        Tensor<T> dgamma({c});
        Tensor<T> dbeta({c});
        Tensor<T> dx(xhat->shape);
        for (int ch = 0; ch < c; ++ch) {
            T sum_g = 0;
            T sum_gx = 0;
            for (int b = 0; b < n; ++b) {
                const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
                for (int i = 0; i < hw; ++i) {
                    sum_g += g[off + i];
                    sum_gx += g[off + i] * (*xhat)[off + i];
                }
            }
            dgamma[ch] = sum_gx;
            dbeta[ch] = sum_g;
            const T scale = vg2[ch] * (*inv_std)[ch];
            for (int b = 0; b < n; ++b) {
                const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
                for (int i = 0; i < hw; ++i) {
                    if (training) {
                        dx[off + i] = scale * (g[off + i] - sum_g / static_cast<T>(m) -
                                               (*xhat)[off + i] * sum_gx / static_cast<T>(m));
                    } else {
                        dx[off + i] = scale * g[off + i];
                    }
                }
            }
        }
        t.accumulate(gamma, dgamma);
        t.accumulate(beta, dbeta);
        t.accumulate(x, dx);
    });
}

/// [B,C,H,W] -> [B,H*W,C]; token k is position (k / W, k % W).
template <typename T>
Tensor<T> tokens_from_map(const Tensor<T>& f)
{
    const int b = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
    Tensor<T> out({b, hw, c});
    for (int n = 0; n < b; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            for (int k = 0; k < hw; ++k) {
                out[(static_cast<std::size_t>(n) * hw + k) * c + ch] = f[(static_cast<std::size_t>(n) * c + ch) * hw + k];
            }
        }
    }
    return out;
}

/// [B,H*W,C] -> [B,C,H,W].
template <typename T>
Tensor<T> map_from_tokens(const Tensor<T>& tok, int h, int w)
{
    const int b = tok.dim(0), hw = tok.dim(1), c = tok.dim(2);
    if (hw != h * w) {
        throw ValidationError("map_from_tokens: token count " + std::to_string(hw) + " != " + std::to_string(h) +
                              "x" + std::to_string(w));
    }
    Tensor<T> out({b, c, h, w});
    for (int n = 0; n < b; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            for (int k = 0; k < hw; ++k) {
                out[(static_cast<std::size_t>(n) * c + ch) * hw + k] = tok[(static_cast<std::size_t>(n) * hw + k) * c + ch];
            }
        }
    }
    return out;
}

template <typename T>
Var to_tokens(Tape<T>& tape, Var f)
{
    const auto s = tape.shape(f);
    return tape.record(tokens_from_map(tape.value(f)), {f}, [f, s](Tape<T>& t, int self) {
        t.accumulate(f, map_from_tokens(t.grad(self), s[2], s[3]));
    });
}

template <typename T>
Var from_tokens(Tape<T>& tape, Var tok, int h, int w)
{
    return tape.record(map_from_tokens(tape.value(tok), h, w), {tok},
                       [tok](Tape<T>& t, int self) { t.accumulate(tok, tokens_from_map(t.grad(self))); });
}

/// Affine map over the last dimension: y = x W^T + b, W: [Dout, Din].
template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var b)
{
    const auto& vx = tape.value(x);
    const auto& vw = tape.value(w);
    const int din = vx.dim(-1);
    const int dout = vw.dim(0);
    detail::require(vw.dim(1) == din, "linear: input width " + std::to_string(din) + " != weight width " +
                                          std::to_string(vw.dim(1)));
    const int rows = static_cast<int>(vx.numel() / din);
    auto shape = vx.shape;
    shape.back() = dout;
    Tensor<T> out(shape);
    MapMat<T> om(out.data.data(), rows, dout);
    om.noalias() = ConstMapMat<T>(vx.data.data(), rows, din) * ConstMapMat<T>(vw.data.data(), dout, din).transpose();
    const auto& vb = tape.value(b);
    for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < dout; ++j) {
            om(r, j) += vb[j];
        }
    }
    return tape.record(std::move(out), {x, w, b}, [=](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        ConstMapMat<T> gm(g.data.data(), rows, dout);
        ConstMapMat<T> xm(t.value(x).data.data(), rows, din);
        if (t.requires_grad(w)) {
            MapMat<T>(t.grad(w).data.data(), dout, din).noalias() += gm.transpose() * xm;
        }
        if (t.requires_grad(b)) {
            auto& gb = t.grad(b);
            for (int r = 0; r < rows; ++r) {
                for (int j = 0; j < dout; ++j) {
                    gb[j] += gm(r, j);
                }
            }
        }
        if (t.requires_grad(x)) {
            MapMat<T>(t.grad(x).data.data(), rows, din).noalias() +=
                gm * ConstMapMat<T>(t.value(w).data.data(), dout, din);
        }
    });
}

/// Concatenation along the last dimension.
template <typename T>
Var concat_last(Tape<T>& tape, Var a, Var b)
{
    const auto& va = tape.value(a);
    const auto& vb = tape.value(b);
    const int da = va.dim(-1), db = vb.dim(-1);
    detail::require(va.numel() / da == vb.numel() / db, "concat_last: leading dims differ");
    const std::size_t rows = va.numel() / da;
    auto shape = va.shape;
    shape.back() = da + db;
    Tensor<T> out(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(va.data.data() + r * da, da, out.data.data() + r * (da + db));
        std::copy_n(vb.data.data() + r * db, db, out.data.data() + r * (da + db) + da);
    }
    return tape.record(std::move(out), {a, b}, [=](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        Tensor<T> ga(t.shape(a));
        Tensor<T> gb(t.shape(b));
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(g.data.data() + r * (da + db), da, ga.data.data() + r * da);
            std::copy_n(g.data.data() + r * (da + db) + da, db, gb.data.data() + r * db);
        }
        t.accumulate(a, ga);
        t.accumulate(b, gb);
    });
}

/// Row-stochastic attention matrices captured for inspection: [B, heads, N, N].
template <typename T>
struct AttentionProbe {
    Tensor<T> weights;
};

/// Multi-head scaled dot-product attention on [B,N,D] sequences (no projections).
/// Per head h: A = softmax(Q_h K_h^T / sqrt(D/heads)), out_h = A V_h.
template <typename T>
Var multi_head_attention(Tape<T>& tape, Var q, Var k, Var v, int heads, AttentionProbe<T>* probe = nullptr)
{
    const auto& vq = tape.value(q);
    const auto& vk = tape.value(k);
    const auto& vv = tape.value(v);
    detail::require(vq.shape == vk.shape && vk.shape == vv.shape, "attention: Q/K/V shape mismatch");
    const int bsz = vq.dim(0), n = vq.dim(1), d = vq.dim(2);
    detail::require(heads > 0 && d % heads == 0, "attention: width " + std::to_string(d) +
                                                     " not divisible by heads " + std::to_string(heads));
    const int dh = d / heads;
    const T inv = T(1) / std::sqrt(static_cast<T>(dh));
    using Stride = Eigen::OuterStride<>;
    using HeadMap = Eigen::Map<const MatrixRM<T>, 0, Stride>;
    using HeadMapMut = Eigen::Map<MatrixRM<T>, 0, Stride>;

    auto attn = std::make_shared<std::vector<MatrixRM<T>>>(static_cast<std::size_t>(bsz) * heads);
    Tensor<T> out(vq.shape);
    for (int b = 0; b < bsz; ++b) {
        for (int h = 0; h < heads; ++h) {
            const std::size_t off = static_cast<std::size_t>(b) * n * d + h * dh;
            HeadMap qh(vq.data.data() + off, n, dh, Stride(d));
            HeadMap kh(vk.data.data() + off, n, dh, Stride(d));
            HeadMap vh(vv.data.data() + off, n, dh, Stride(d));
            MatrixRM<T> s = (qh * kh.transpose()) * inv;
            for (int i = 0; i < n; ++i) {
                const T mx = s.row(i).maxCoeff();
                s.row(i) = (s.row(i).array() - mx).exp();
                s.row(i) /= s.row(i).sum();
            }
            HeadMapMut oh(out.data.data() + off, n, dh, Stride(d));
            oh.noalias() = s * vh;
            (*attn)[static_cast<std::size_t>(b) * heads + h] = std::move(s);
        }
    }
    if (probe) {
        probe->weights = Tensor<T>({bsz, heads, n, n});
        for (std::size_t i = 0; i < attn->size(); ++i) {
            std::copy_n((*attn)[i].data(), static_cast<std::size_t>(n) * n,
                        probe->weights.data.data() + i * n * n);
        }
    }
    return tape.record(std::move(out), {q, k, v}, [=](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const auto& q2 = t.value(q);
        const auto& k2 = t.value(k);
        const auto& v2 = t.value(v);
        Tensor<T> dq(q2.shape), dk(k2.shape), dv(v2.shape);
        for (int b = 0; b < bsz; ++b) {
            for (int h = 0; h < heads; ++h) {
                const std::size_t off = static_cast<std::size_t>(b) * n * d + h * dh;
                const auto& a = (*attn)[static_cast<std::size_t>(b) * heads + h];
                HeadMap gh(g.data.data() + off, n, dh, Stride(d));
                HeadMap qh(q2.data.data() + off, n, dh, Stride(d));
                HeadMap kh(k2.data.data() + off, n, dh, Stride(d));
                HeadMap vh(v2.data.data() + off, n, dh, Stride(d));
                HeadMapMut(dv.data.data() + off, n, dh, Stride(d)).noalias() = a.transpose() * gh;
                MatrixRM<T> da = gh * vh.transpose();
                MatrixRM<T> ds(n, n);
                for (int i = 0; i < n; ++i) {
                    const T dot = (da.row(i).array() * a.row(i).array()).sum();
                    ds.row(i) = a.row(i).array() * (da.row(i).array() - dot);
                }
                ds *= inv;
                HeadMapMut(dq.data.data() + off, n, dh, Stride(d)).noalias() = ds * kh;
                HeadMapMut(dk.data.data() + off, n, dh, Stride(d)).noalias() = ds.transpose() * qh;
            }
        }
        t.accumulate(q, dq);
        t.accumulate(k, dk);
        t.accumulate(v, dv);
    });
}

}   // namespace duodet::nn
