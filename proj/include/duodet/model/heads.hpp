#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "duodet/core/box.hpp"
#include "duodet/model/backbone.hpp"

namespace duodet {

/// The four heads. aux_pre_* read the per-modality pyramids before fusion,
/// aux_post reads the fused pyramid before the neck, main reads the neck output.
enum class HeadTag { main, aux_pre_rgb, aux_pre_tir, aux_post };

inline std::string head_prefix(HeadTag tag)
{
    switch (tag) {
    case HeadTag::main: return "head_main";
    case HeadTag::aux_pre_rgb: return "head_aux_pre.rgb";
    case HeadTag::aux_pre_tir: return "head_aux_pre.tir";
    case HeadTag::aux_post: return "head_aux_post";
    }
    throw ValidationError("unknown head tag");
}

inline HeadTag parse_head_tag(const std::string& s)
{
    if (s == "main") return HeadTag::main;
    if (s == "aux_pre_rgb") return HeadTag::aux_pre_rgb;
    if (s == "aux_pre_tir") return HeadTag::aux_pre_tir;
    if (s == "aux_post") return HeadTag::aux_post;
    throw ValidationError("unknown head tag '" + s + "'");
}

inline int prediction_channels(const ModelConfig& cfg)
{
    return 5 + cfg.num_classes;
}

/// Logit of the 0.01 prior used to start objectness and class outputs.
inline constexpr double kPriorLogit = -4.59511985013459;

template <typename T>
void add_head_params(ModelParams<T>& params, const ModelConfig& cfg, HeadTag tag, std::uint64_t seed)
{
    const std::string pre = head_prefix(tag);
    const int hc = cfg.head_channels;
    const int out = prediction_channels(cfg);
    for (int s = 0; s < 3; ++s) {
        const std::string sc = pre + "." + kScaleNames[s];
        add_conv_bn(params, sc + ".conv1", cfg.channels[s], hc, 3, seed);
        add_conv_bn(params, sc + ".conv2", hc, hc, 3, seed);
        params.add(sc + ".pred.weight", fan_in_uniform<T>({out, hc, 1, 1}, hc, seed, sc + ".pred.weight"));
        Tensor<T> bias({out}, T(0));
        for (int c = 4; c < out; ++c) {
            bias[c] = static_cast<T>(kPriorLogit);
        }
        params.add(sc + ".pred.bias", std::move(bias));
    }
}

/// Per scale: two 3x3 conv-bn-silu layers, then a 1x1 projection to
/// [tx, ty, tw, th, objectness, class logits...].
template <typename T>
Pyramid<Var> head_forward(ForwardContext<T>& ctx, const ModelConfig& cfg, const FeaturePyramid& pyr, HeadTag tag)
{
    const std::string pre = head_prefix(tag);
    Pyramid<Var> out;
    for (int s = 0; s < 3; ++s) {
        const auto& shape = ctx.tape.shape(pyr[s]);
        if (shape.size() != 4 || shape[1] != cfg.channels[s]) {
            throw ValidationError("head_forward: " + std::string(kScaleNames[s]) + " has shape " +
                                  nn::shape_string(shape) + ", expected " + std::to_string(cfg.channels[s]) +
                                  " channels");
        }
        const std::string sc = pre + "." + kScaleNames[s];
        Var x = conv_bn(ctx, sc + ".conv1", pyr[s], 1, true);
        x = conv_bn(ctx, sc + ".conv2", x, 1, true);
        out[s] = nn::conv2d(ctx.tape, x, ctx.p(sc + ".pred.weight"), ctx.p(sc + ".pred.bias"), 1, 0);
    }
    return out;
}

inline double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

/// Box decoded from one cell's offsets at the given stride (center form).
inline CenterBox decode_cell(double tx, double ty, double tw, double th, int row, int col, int stride)
{
    return {(col + sigmoid(tx)) * stride, (row + sigmoid(ty)) * stride, std::exp(tw) * stride,
            std::exp(th) * stride};
}

/// Inverse of decode_cell. The in-cell offset is clamped to (0,1) so a center on
/// a cell border stays finite.
inline std::array<double, 4> encode_cell(const BoundingBox& b, int row, int col, int stride)
{
    const auto c = to_center(b);
    constexpr double eps = 1e-9;
    const double fx = std::clamp(c.cx / stride - col, eps, 1 - eps);
    const double fy = std::clamp(c.cy / stride - row, eps, 1 - eps);
    return {std::log(fx / (1 - fx)), std::log(fy / (1 - fy)), std::log(c.w / stride), std::log(c.h / stride)};
}

/// Scored boxes for image `n` of a batch of raw predictions, clipped to the frame.
template <typename T>
std::vector<BoundingBox> decode(const Pyramid<Tensor<T>>& raw, int n, double conf_thresh)
{
    std::vector<BoundingBox> out;
    for (int s = 0; s < 3; ++s) {
        const auto& r = raw[s];
        const int ch = r.dim(1), h = r.dim(2), w = r.dim(3);
        const int stride = kStrides[s];
        const double frame_w = static_cast<double>(w) * stride;
        const double frame_h = static_cast<double>(h) * stride;
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                int best = 0;
                double best_logit = -std::numeric_limits<double>::infinity();
                for (int c = 5; c < ch; ++c) {
                    if (static_cast<double>(r.at(n, c, i, j)) > best_logit) {
                        best_logit = r.at(n, c, i, j);
                        best = c - 5;
                    }
                }
                const double score = sigmoid(r.at(n, 4, i, j)) * sigmoid(best_logit);
                if (!(score >= conf_thresh)) {
                    continue;
                }
                const auto cb = decode_cell(r.at(n, 0, i, j), r.at(n, 1, i, j), r.at(n, 2, i, j), r.at(n, 3, i, j), i,
                                            j, stride);
                auto clipped = clip_box(to_corner(cb, best, score), frame_w, frame_h, 0.0);
                if (clipped) {
                    out.push_back(*clipped);
                }
            }
        }
    }
    return out;
}

struct ScaleTargets {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> positive;          // h*w
    std::vector<std::array<double, 4>> box;      // target corners in pixels
    std::vector<int> cls;

    std::size_t cell(int i, int j) const { return static_cast<std::size_t>(i) * w + j; }
};

/// Per-image training targets at the three scales.
struct TargetMap {
    std::array<ScaleTargets, 3> scales;
    int dropped = 0;     // boxes that found no free cell
    int assigned = 0;
};

/// Scale whose size bracket contains the box's longer side: <64 px P3, <128 px P4, else P5.
inline int scale_for_box(const BoundingBox& b)
{
    const double side = std::max(b.width(), b.height());
    return side < 64 ? 0 : (side < 128 ? 1 : 2);
}

/// One cell per box, at the bracketed scale and the cell containing its center.
/// Larger boxes are placed first; a box whose cell is taken moves to the
/// nearest free neighbor, or is dropped.
inline TargetMap assign_targets(const std::vector<BoundingBox>& gt, const std::array<std::array<int, 2>, 3>& grids,
                                const std::array<int, 3>& strides = kStrides)
{
    TargetMap tm;
    for (int s = 0; s < 3; ++s) {
        auto& st = tm.scales[s];
        st.h = grids[s][0];
        st.w = grids[s][1];
        const std::size_t cells = static_cast<std::size_t>(st.h) * st.w;
        st.positive.assign(cells, 0);
        st.box.assign(cells, {0, 0, 0, 0});
        st.cls.assign(cells, -1);
    }
    std::vector<std::size_t> order(gt.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return gt[a].area() > gt[b].area(); });

    for (auto idx : order) {
        const auto& b = gt[idx];
        const int s = scale_for_box(b);
        auto& st = tm.scales[s];
        const int stride = strides[s];
        const auto c = to_center(b);
        const int ci = std::clamp(static_cast<int>(std::floor(c.cy / stride)), 0, st.h - 1);
        const int cj = std::clamp(static_cast<int>(std::floor(c.cx / stride)), 0, st.w - 1);
        int ti = -1, tj = -1;
        if (!st.positive[st.cell(ci, cj)]) {
            ti = ci;
            tj = cj;
        } else {
            double best = std::numeric_limits<double>::infinity();
            for (int di = -1; di <= 1; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    const int i = ci + di, j = cj + dj;
                    if ((di == 0 && dj == 0) || i < 0 || j < 0 || i >= st.h || j >= st.w ||
                        st.positive[st.cell(i, j)]) {
                        continue;
                    }
                    const double dx = (j + 0.5) * stride - c.cx;
                    const double dy = (i + 0.5) * stride - c.cy;
                    const double d = dx * dx + dy * dy;
                    if (d < best) {
                        best = d;
                        ti = i;
                        tj = j;
                    }
                }
            }
        }
        if (ti < 0) {
            ++tm.dropped;
            continue;
        }
        const auto cell = st.cell(ti, tj);
        st.positive[cell] = 1;
        st.box[cell] = {b.x_min, b.y_min, b.x_max, b.y_max};
        st.cls[cell] = b.class_id;
        ++tm.assigned;
    }
    return tm;
}

inline std::array<std::array<int, 2>, 3> grids_for_input(int height, int width)
{
    return {{{height / 8, width / 8}, {height / 16, width / 16}, {height / 32, width / 32}}};
}

struct LossComponents {
    double box = 0;
    double obj = 0;
    double cls = 0;
    double total = 0;
};

inline constexpr double kBoxGain = 5.0;
inline constexpr double kObjGain = 1.0;
inline constexpr double kClsGain = 0.5;

namespace detail {

inline double bce_logits(double z, double t)
{
    return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

}   // namespace detail

/// 5 * mean(1 - IoU) over positives + BCE objectness summed over cells and
/// averaged over images + 0.5 * BCE classes over positives. `targets` holds one TargetMap per batch image.
template <typename T>
Var detection_loss(Tape<T>& tape, const Pyramid<Var>& raw, const std::vector<TargetMap>& targets,
                   LossComponents* components = nullptr)
{
    int batch = 0;
    int nc = 0;
    std::size_t cells = 0;
    std::size_t positives = 0;
    for (int s = 0; s < 3; ++s) {
        const auto& shape = tape.shape(raw[s]);
        if (shape.size() != 4 || shape[1] < 6) {
            throw ValidationError("detection_loss: bad prediction shape " + nn::shape_string(shape));
        }
        batch = shape[0];
        nc = shape[1] - 5;
        if (static_cast<int>(targets.size()) != batch) {
            throw ValidationError("detection_loss: " + std::to_string(targets.size()) + " targets for batch of " +
                                  std::to_string(batch));
        }
        for (const auto& tm : targets) {
            const auto& st = tm.scales[s];
            if (st.h != shape[2] || st.w != shape[3]) {
                throw ValidationError("detection_loss: target grid does not match predictions at " +
                                      std::string(kScaleNames[s]));
            }
            positives += std::count(st.positive.begin(), st.positive.end(), 1);
        }
        cells += static_cast<std::size_t>(batch) * shape[2] * shape[3];
    }

    // Value pass, also stashing gradients of the total w.r.t. raw outputs.
    LossComponents lc;
    std::array<Tensor<T>, 3> grads;
    const double inv_batch = 1.0 / static_cast<double>(batch);
    const double inv_pos = positives ? 1.0 / static_cast<double>(positives) : 0.0;
    const double inv_cls = positives ? 1.0 / (static_cast<double>(positives) * nc) : 0.0;
    for (int s = 0; s < 3; ++s) {
        const auto& r = tape.value(raw[s]);
        auto& g = grads[s] = Tensor<T>(r.shape);
        const int h = r.dim(2), w = r.dim(3);
        const int stride = kStrides[s];
        for (int n = 0; n < batch; ++n) {
            const auto& st = targets[n].scales[s];
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < w; ++j) {
                    const auto cell = st.cell(i, j);
                    const bool pos = st.positive[cell] != 0;
                    const double zo = r.at(n, 4, i, j);
                    lc.obj += detail::bce_logits(zo, pos ? 1.0 : 0.0) * inv_batch;
                    g.at(n, 4, i, j) = static_cast<T>(kObjGain * (sigmoid(zo) - (pos ? 1.0 : 0.0)) * inv_batch);
                    if (!pos) {
                        continue;
                    }
                    for (int c = 0; c < nc; ++c) {
                        const double z = r.at(n, 5 + c, i, j);
                        const double t = st.cls[cell] == c ? 1.0 : 0.0;
                        lc.cls += detail::bce_logits(z, t) * inv_cls;
                        g.at(n, 5 + c, i, j) = static_cast<T>(kClsGain * (sigmoid(z) - t) * inv_cls);
                    }

                    const double sx = sigmoid(r.at(n, 0, i, j));
                    const double sy = sigmoid(r.at(n, 1, i, j));
                    const double cx = (j + sx) * stride;
                    const double cy = (i + sy) * stride;
                    const double pw = std::exp(static_cast<double>(r.at(n, 2, i, j))) * stride;
                    const double ph = std::exp(static_cast<double>(r.at(n, 3, i, j))) * stride;
                    const double x0 = cx - pw / 2, x1 = cx + pw / 2, y0 = cy - ph / 2, y1 = cy + ph / 2;
                    const auto& tb = st.box[cell];
                    const double iw = std::min(x1, tb[2]) - std::max(x0, tb[0]);
                    const double ih = std::min(y1, tb[3]) - std::max(y0, tb[1]);
                    const double at = (tb[2] - tb[0]) * (tb[3] - tb[1]);
                    if (iw <= 0 || ih <= 0) {
                        lc.box += inv_pos;
                        continue;
                    }
                    const double inter = iw * ih;
                    const double uni = pw * ph + at - inter;
                    const double iou_v = inter / uni;
                    lc.box += (1.0 - iou_v) * inv_pos;

                    const double d_inter = (uni + inter) / (uni * uni);
                    const double d_area = -inter / (uni * uni);
                    const double di_x1 = x1 < tb[2] ? ih : 0.0;
                    const double di_x0 = x0 > tb[0] ? -ih : 0.0;
                    const double di_y1 = y1 < tb[3] ? iw : 0.0;
                    const double di_y0 = y0 > tb[1] ? -iw : 0.0;
                    const double d_cx = d_inter * (di_x0 + di_x1);
                    const double d_cy = d_inter * (di_y0 + di_y1);
                    const double d_pw = d_inter * (di_x1 - di_x0) / 2 + d_area * ph;
                    const double d_ph = d_inter * (di_y1 - di_y0) / 2 + d_area * pw;
                    const double k = -kBoxGain * inv_pos;   // d total / d IoU
                    g.at(n, 0, i, j) = static_cast<T>(k * d_cx * stride * sx * (1 - sx));
                    g.at(n, 1, i, j) = static_cast<T>(k * d_cy * stride * sy * (1 - sy));
                    g.at(n, 2, i, j) = static_cast<T>(k * d_pw * pw);
                    g.at(n, 3, i, j) = static_cast<T>(k * d_ph * ph);
                }
            }
        }
    }
    lc.total = kBoxGain * lc.box + kObjGain * lc.obj + kClsGain * lc.cls;
    if (components) {
        *components = lc;
    }
    auto shared = std::make_shared<std::array<Tensor<T>, 3>>(std::move(grads));
    return tape.record(Tensor<T>({1}, static_cast<T>(lc.total)), {raw.p3, raw.p4, raw.p5},
                       [raw, shared](Tape<T>& t, int self) {
                           const T g0 = t.grad(self)[0];
                           for (int s = 0; s < 3; ++s) {
                               Tensor<T> g = (*shared)[s];
                               for (auto& v : g.data) {
                                   v *= g0;
                               }
                               t.accumulate(raw[s], g);
                           }
                       });
}

/// L = L_main + w_pre * (L_pre_rgb + L_pre_tir) + w_post * L_post.
template <typename T>
Var total_loss(Tape<T>& tape, Var main, Var pre_rgb, Var pre_tir, Var post, const AuxWeights& w)
{
    Var pre = nn::scale(tape, nn::add(tape, pre_rgb, pre_tir), static_cast<T>(w.pre));
    Var aux = nn::add(tape, pre, nn::scale(tape, post, static_cast<T>(w.post)));
    return nn::add(tape, main, aux);
}

}   // namespace duodet
