#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "duodet/augment/rng.hpp"
#include "duodet/core/box.hpp"
#include "duodet/core/error.hpp"
#include "duodet/core/image.hpp"
#include "duodet/core/sample.hpp"

namespace duodet {

/// Which modality a geometric op touches. One-sided ops leave the labels
/// aligned with the untouched modality.
enum class Target { both, rgb_only, tir_only };

inline const char* to_string(Target t)
{
    switch (t) {
    case Target::both: return "both";
    case Target::rgb_only: return "rgb_only";
    case Target::tir_only: return "tir_only";
    }
    return "?";
}

/// Point rotation about the image center (pixel-center coordinates), the same
/// map the image resampling uses.
struct Rotation {
    double cx;
    double cy;
    double cos_a;
    double sin_a;

    Rotation(int width, int height, double degrees)
        : cx(width / 2.0), cy(height / 2.0), cos_a(std::cos(degrees * std::numbers::pi / 180.0)),
          sin_a(std::sin(degrees * std::numbers::pi / 180.0))
    {
    }

    std::array<double, 2> forward(double x, double y) const
    {
        const double dx = x - cx;
        const double dy = y - cy;
        return {cx + cos_a * dx - sin_a * dy, cy + sin_a * dx + cos_a * dy};
    }

    std::array<double, 2> inverse(double x, double y) const
    {
        const double dx = x - cx;
        const double dy = y - cy;
        return {cx + cos_a * dx + sin_a * dy, cy - sin_a * dx + cos_a * dy};
    }
};

inline Image rotate_image(const Image& img, double degrees)
{
    if (degrees == 0.0) {
        return img;
    }
    const Rotation rot(img.width, img.height, degrees);
    const auto fill = channel_means(img);
    Image out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            auto [sx, sy] = rot.inverse(x + 0.5, y + 0.5);
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = saturate_u8(sample_bilinear(img, sx - 0.5, sy - 0.5, c, fill[c]));
            }
        }
    }
    return out;
}

/// Axis-aligned hull of the rotated box corners (unclipped).
inline BoundingBox rotated_hull(const BoundingBox& b, const Rotation& rot)
{
    BoundingBox h = b;
    h.x_min = h.y_min = std::numeric_limits<double>::infinity();
    h.x_max = h.y_max = -std::numeric_limits<double>::infinity();
    for (double x : {b.x_min, b.x_max}) {
        for (double y : {b.y_min, b.y_max}) {
            auto [rx, ry] = rot.forward(x, y);
            h.x_min = std::min(h.x_min, rx);
            h.x_max = std::max(h.x_max, rx);
            h.y_min = std::min(h.y_min, ry);
            h.y_max = std::max(h.y_max, ry);
        }
    }
    return h;
}

/// Rotation about the image center with bilinear resampling and mean fill.
inline PairedSample rotate_sample(const PairedSample& s, double degrees, Target target,
                                  double min_area_frac = 0.25)
{
    PairedSample out = s;
    if (degrees == 0.0) {
        return out;
    }
    if (target != Target::tir_only) {
        out.rgb = rotate_image(s.rgb, degrees);
    }
    if (target != Target::rgb_only) {
        out.tir = rotate_image(s.tir, degrees);
    }
    if (target == Target::both) {
        const Rotation rot(s.width(), s.height(), degrees);
        out.boxes.clear();
        for (const auto& b : s.boxes) {
            if (auto c = clip_box(rotated_hull(b, rot), s.width(), s.height(), min_area_frac)) {
                out.boxes.push_back(*c);
            }
        }
    }
    return out;
}

inline Image shift_image(const Image& img, int dx, int dy)
{
    if (dx == 0 && dy == 0) {
        return img;
    }
    const auto mean = channel_means(img);
    Image out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const int sx = x - dx;
            const int sy = y - dy;
            const bool inside = sx >= 0 && sy >= 0 && sx < img.width && sy < img.height;
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = inside ? img.at(sy, sx, c) : saturate_u8(mean[c]);
            }
        }
    }
    return out;
}

/// Translates content by (dx, dy); exposed pixels take the channel mean.
inline PairedSample shift_sample(const PairedSample& s, int dx, int dy, Target target, double min_area_frac = 0.25)
{
    PairedSample out = s;
    if (dx == 0 && dy == 0) {
        return out;
    }
    if (target != Target::tir_only) {
        out.rgb = shift_image(s.rgb, dx, dy);
    }
    if (target != Target::rgb_only) {
        out.tir = shift_image(s.tir, dx, dy);
    }
    if (target == Target::both) {
        out.boxes.clear();
        for (auto b : s.boxes) {
            b.x_min += dx;
            b.x_max += dx;
            b.y_min += dy;
            b.y_max += dy;
            if (auto c = clip_box(b, s.width(), s.height(), min_area_frac)) {
                out.boxes.push_back(*c);
            }
        }
    }
    return out;
}

/// Stretches a sample to a new size, scaling its boxes.
inline PairedSample resize_sample(const PairedSample& s, int width, int height)
{
    if (s.width() == width && s.height() == height) {
        return s;
    }
    PairedSample out;
    out.meta = s.meta;
    out.rgb = resize_bilinear(s.rgb, width, height);
    out.tir = resize_bilinear(s.tir, width, height);
    const double sx = static_cast<double>(width) / s.width();
    const double sy = static_cast<double>(height) / s.height();
    for (auto b : s.boxes) {
        b.x_min *= sx;
        b.x_max *= sx;
        b.y_min *= sy;
        b.y_max *= sy;
        if (auto c = clip_box(b, width, height, 0.0)) {
            out.boxes.push_back(*c);
        }
    }
    return out;
}

/// Placement of one mosaic tile: the source is scaled by `scale`, offset by
/// (ox, oy), and clipped to the quadrant [qx0,qx1)x[qy0,qy1).
struct MosaicTile {
    double scale;
    double ox;
    double oy;
    int qx0;
    int qy0;
    int qx1;
    int qy1;
};

/// Tile k (0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right) is scaled to
/// cover its quadrant with its inner corner pinned to the joint point.
inline MosaicTile mosaic_tile(int k, int src_w, int src_h, int out_size, int jx, int jy)
{
    const bool right = k == 1 || k == 3;
    const bool bottom = k == 2 || k == 3;
    MosaicTile t{};
    t.qx0 = right ? jx : 0;
    t.qx1 = right ? out_size : jx;
    t.qy0 = bottom ? jy : 0;
    t.qy1 = bottom ? out_size : jy;
    const double qw = t.qx1 - t.qx0;
    const double qh = t.qy1 - t.qy0;
    t.scale = std::max(qw / src_w, qh / src_h);
    t.ox = right ? jx : jx - src_w * t.scale;
    t.oy = bottom ? jy : jy - src_h * t.scale;
    return t;
}

/// Four-sample mosaic with an explicit joint point; rgb and tir share one layout.
inline PairedSample mosaic_at(std::span<const PairedSample> samples, int out_size, int jx, int jy,
                              double min_area_frac = 0.25)
{
    if (samples.size() < 4) {
        throw ValidationError("mosaic: needs 4 samples, got " + std::to_string(samples.size()));
    }
    if (out_size < 64) {
        throw ValidationError("mosaic: out_size must be >= 64");
    }
    if (jx <= 0 || jy <= 0 || jx >= out_size || jy >= out_size) {
        throw ValidationError("mosaic: joint point must be strictly inside the canvas");
    }
    PairedSample out;
    out.rgb = Image(out_size, out_size, 3);
    out.tir = Image(out_size, out_size, 1);
    out.meta = samples[0].meta;
    out.meta.source = "mosaic";
    for (int k = 0; k < 4; ++k) {
        const auto& s = samples[k];
        const auto t = mosaic_tile(k, s.width(), s.height(), out_size, jx, jy);
        for (int y = t.qy0; y < t.qy1; ++y) {
            const double sy = std::clamp((y + 0.5 - t.oy) / t.scale - 0.5, 0.0, s.height() - 1.0);
            for (int x = t.qx0; x < t.qx1; ++x) {
                const double sx = std::clamp((x + 0.5 - t.ox) / t.scale - 0.5, 0.0, s.width() - 1.0);
                for (int c = 0; c < 3; ++c) {
                    out.rgb.at(y, x, c) = saturate_u8(sample_bilinear(s.rgb, sx, sy, c, 0.0));
                }
                out.tir.at(y, x, 0) = saturate_u8(sample_bilinear(s.tir, sx, sy, 0, 0.0));
            }
        }
        for (auto b : s.boxes) {
            b.x_min = b.x_min * t.scale + t.ox;
            b.x_max = b.x_max * t.scale + t.ox;
            b.y_min = b.y_min * t.scale + t.oy;
            b.y_max = b.y_max * t.scale + t.oy;
            if (auto c = clip_box_to(b, t.qx0, t.qy0, t.qx1, t.qy1, min_area_frac)) {
                out.boxes.push_back(*c);
            }
        }
    }
    return out;
}

/// Joint point drawn uniformly in the central half of the canvas.
inline PairedSample mosaic(std::span<const PairedSample> samples, int out_size, RngStream& rng,
                           double min_area_frac = 0.25)
{
    const int jx = static_cast<int>(std::lround(rng.uniform(out_size / 4.0, 3.0 * out_size / 4.0)));
    const int jy = static_cast<int>(std::lround(rng.uniform(out_size / 4.0, 3.0 * out_size / 4.0)));
    return mosaic_at(samples, out_size, jx, jy, min_area_frac);
}

}   // namespace duodet
