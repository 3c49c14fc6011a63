#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "duodet/augment/rng.hpp"
#include "duodet/core/image_io.hpp"
#include "duodet/core/manifest.hpp"
#include "duodet/core/sample.hpp"
#include "duodet/ingest/ingest.hpp"

namespace duodet {

inline const std::vector<std::string>& toy_class_names()
{
    static const std::vector<std::string> names{"car", "truck"};
    return names;
}

/// Aerial-looking toy pair: textured ground, colored rectangles as vehicles
/// ("car" small and square-ish, "truck" long), TIR = luma with warm vehicles
/// plus sensor noise.
inline PairedSample make_toy_sample(std::uint64_t seed, int width = 128, int height = 128, int max_objects = 4)
{
    RngStream rng(seed);
    PairedSample s;
    s.rgb = Image(width, height, 3);
    const double base[3] = {rng.uniform(70, 110), rng.uniform(80, 120), rng.uniform(60, 100)};
    const double gx = rng.uniform(-0.3, 0.3);
    const double gy = rng.uniform(-0.3, 0.3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double tex = 6.0 * std::sin(x * 0.21 + y * 0.13) + gx * x + gy * y;
            for (int c = 0; c < 3; ++c) {
                s.rgb.at(y, x, c) = saturate_u8(base[c] + tex + rng.uniform(-4, 4));
            }
        }
    }
    const int count = rng.uniform_int(2, max_objects);
    std::vector<bool> warm(static_cast<std::size_t>(width) * height, false);
    for (int attempt = 0; attempt < 60 && static_cast<int>(s.boxes.size()) < count; ++attempt) {
        const int cls = rng.uniform_int(0, 1);
        int w = cls == 0 ? rng.uniform_int(12, 20) : rng.uniform_int(30, 44);
        int h = cls == 0 ? rng.uniform_int(12, 20) : rng.uniform_int(14, 20);
        if (rng.bernoulli(0.5)) {
            std::swap(w, h);
        }
        const int x0 = rng.uniform_int(2, width - w - 2);
        const int y0 = rng.uniform_int(2, height - h - 2);
        BoundingBox b{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x0 + w),
                      static_cast<double>(y0 + h), cls, std::nullopt};
        bool overlaps = false;
        for (const auto& o : s.boxes) {
            BoundingBox grown = o;
            grown.x_min -= 4;
            grown.y_min -= 4;
            grown.x_max += 4;
            grown.y_max += 4;
            overlaps = overlaps || iou(grown, b) > 0;
        }
        if (overlaps) {
            continue;
        }
        const double color[3] = {rng.uniform(0, 255), rng.uniform(0, 255), rng.uniform(0, 255)};
        for (int y = y0; y < y0 + h; ++y) {
            for (int x = x0; x < x0 + w; ++x) {
                const bool border = y == y0 || x == x0 || y == y0 + h - 1 || x == x0 + w - 1;
                for (int c = 0; c < 3; ++c) {
                    s.rgb.at(y, x, c) = saturate_u8(border ? color[c] * 0.4 : color[c]);
                }
                warm[static_cast<std::size_t>(y) * width + x] = true;
            }
        }
        s.boxes.push_back(b);
    }
    s.tir = synthesize_tir(s.rgb);
    for (std::size_t i = 0; i < s.tir.data.size(); ++i) {
        const double heat = warm[i] ? 70.0 : 0.0;
        s.tir.data[i] = saturate_u8(0.6 * s.tir.data[i] + heat + 8.0 * rng.normal());
    }
    s.meta.source = "synthetic";
    return s;
}

/// Writes the paired toy layout read by import_paired.
inline void write_toy_paired(const std::filesystem::path& dir, int count, std::uint64_t seed, int size = 128)
{
    std::filesystem::create_directories(dir / "labels");
    {
        std::ofstream classes(dir / "classes.txt");
        for (const auto& n : toy_class_names()) {
            classes << n << '\n';
        }
    }
    for (int i = 0; i < count; ++i) {
        const auto s = make_toy_sample(mix64(seed + i), size, size);
        char stem[16];
        std::snprintf(stem, sizeof stem, "%04d", i);
        write_image(dir / "rgb" / (std::string(stem) + ".png"), s.rgb);
        write_image(dir / "tir" / (std::string(stem) + ".png"), s.tir);
        std::ofstream(dir / "labels" / (std::string(stem) + ".json")) << boxes_to_json(s.boxes).dump() << '\n';
    }
}

}   // namespace duodet
