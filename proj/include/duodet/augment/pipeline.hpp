#pragma once

#include <span>
#include <vector>

#include "duodet/augment/config.hpp"
#include "duodet/augment/geometric.hpp"
#include "duodet/augment/photometric.hpp"
#include "duodet/augment/rng.hpp"
#include "duodet/core/sample.hpp"

namespace duodet {

enum class GeometricOp { none, rotate, shift };

/// What apply_pipeline decided, in draw order.
struct AugmentTrace {
    bool mosaic = false;
    bool noise_rgb = false;
    bool noise_tir = false;
    bool brightness = false;
    bool edge = false;
    bool blur = false;
    bool rotate_triggered = false;
    bool shift_triggered = false;
    GeometricOp geometric = GeometricOp::none;
    Target target = Target::both;
    double angle = 0;
    int dx = 0;
    int dy = 0;
};

/// Runs the paired augmentation recipe. Draws are consumed from `rng` in this
/// fixed order:
///   1. mosaic trigger (only when `pool` is non-empty), 3 partner indices, joint point
///   2. rgb noise trigger [+ sigma + per-pixel normals], then the same for tir
///   3. rgb brightness trigger [+ factor]
///   4. tir edge trigger [+ strength], tir blur trigger [+ sigma]
///   5. rotate trigger, shift trigger (both always drawn); rotation wins a tie;
///      then angle, or shift axis + offset; then one-sided trigger [+ side]
inline PairedSample apply_pipeline(const PairedSample& s, const AugmentConfig& cfg, RngStream& rng,
                                   std::span<const PairedSample> pool = {}, AugmentTrace* trace = nullptr)
{
    validate(cfg);
    AugmentTrace tr;
    PairedSample out = s;

    if (!pool.empty() && rng.bernoulli(cfg.p_mosaic)) {
        tr.mosaic = true;
        std::vector<PairedSample> four{s};
        for (int k = 0; k < 3; ++k) {
            four.push_back(pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
        }
        const int size = std::max({s.width(), s.height(), 64});
        out = mosaic(four, size, rng, cfg.min_area_frac);
    }

    if (rng.bernoulli(cfg.p_noise)) {
        tr.noise_rgb = true;
        out.rgb = add_noise(out.rgb, rng.uniform(0.0, cfg.noise_sigma), rng);
    }
    if (rng.bernoulli(cfg.p_noise)) {
        tr.noise_tir = true;
        out.tir = add_noise(out.tir, rng.uniform(0.0, cfg.noise_sigma), rng);
    }
    if (rng.bernoulli(cfg.p_brightness)) {
        tr.brightness = true;
        out.rgb = adjust_brightness(out.rgb, rng.uniform(cfg.brightness_range.lo, cfg.brightness_range.hi));
    }
    if (rng.bernoulli(cfg.p_edge)) {
        tr.edge = true;
        out.tir = edge_enhance(out.tir, rng.uniform(cfg.edge_strength.lo, cfg.edge_strength.hi));
    }
    if (rng.bernoulli(cfg.p_blur)) {
        tr.blur = true;
        out.tir = gaussian_blur(out.tir, rng.uniform(cfg.blur_sigma_range.lo, cfg.blur_sigma_range.hi));
    }

    tr.rotate_triggered = rng.bernoulli(cfg.p_rotate);
    tr.shift_triggered = rng.bernoulli(cfg.p_shift);
    if (tr.rotate_triggered) {
        tr.geometric = GeometricOp::rotate;
        tr.angle = rng.uniform(cfg.rotate_range.lo, cfg.rotate_range.hi);
    } else if (tr.shift_triggered) {
        tr.geometric = GeometricOp::shift;
        const bool horizontal = rng.bernoulli(0.5);
        const int offset = rng.uniform_int(static_cast<int>(std::ceil(cfg.shift_range.lo)),
                                           static_cast<int>(std::floor(cfg.shift_range.hi)));
        (horizontal ? tr.dx : tr.dy) = offset;
    }
    if (tr.geometric != GeometricOp::none) {
        if (rng.bernoulli(cfg.p_one_sided)) {
            tr.target = rng.bernoulli(0.5) ? Target::rgb_only : Target::tir_only;
        }
        if (tr.geometric == GeometricOp::rotate) {
            out = rotate_sample(out, tr.angle, tr.target, cfg.min_area_frac);
        } else {
            out = shift_sample(out, tr.dx, tr.dy, tr.target, cfg.min_area_frac);
        }
    }
    if (trace) {
        *trace = tr;
    }
    return out;
}

inline PairedSample apply_pipeline(const PairedSample& s, const AugmentConfig& cfg, std::uint64_t epoch,
                                   std::uint64_t index, std::span<const PairedSample> pool = {},
                                   AugmentTrace* trace = nullptr)
{
    RngStream rng(cfg.global_seed, epoch, index);
    return apply_pipeline(s, cfg, rng, pool, trace);
}

}   // namespace duodet
