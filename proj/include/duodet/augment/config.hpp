#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "duodet/core/error.hpp"

namespace duodet {

/// Closed interval [lo, hi].
struct Range {
    double lo = 0;
    double hi = 0;

    friend bool operator==(const Range&, const Range&) = default;
};

/// Paired augmentation settings. Rotation/shift magnitudes and the 0.3
/// trigger probabilities are the recipe defaults; photometric magnitudes are
/// toolkit defaults.
struct AugmentConfig {
    double p_rotate = 0.3;
    Range rotate_range{-5.0, 5.0};
    double p_shift = 0.3;
    Range shift_range{-10.0, 10.0};
    double p_noise = 0.5;
    double noise_sigma = 10.0;
    double p_brightness = 0.5;
    Range brightness_range{0.6, 1.4};
    double p_edge = 0.3;
    Range edge_strength{0.5, 1.5};
    double p_blur = 0.3;
    Range blur_sigma_range{0.5, 1.5};
    double p_mosaic = 0.0;
    double p_one_sided = 0.5;
    double min_area_frac = 0.25;
    std::uint64_t global_seed = 0;

    /// Every stochastic stage switched off.
    static AugmentConfig disabled()
    {
        AugmentConfig c;
        c.p_rotate = c.p_shift = c.p_noise = c.p_brightness = c.p_edge = c.p_blur = c.p_mosaic = 0.0;
        c.p_one_sided = 0.0;
        return c;
    }

    friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

/// Throws ValidationError naming the first offending field.
inline void validate(const AugmentConfig& c)
{
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError(std::string("aug.") + name + " must be in [0,1], got " + std::to_string(p));
        }
    };
    auto range = [](const Range& r, const char* name, double lo, double hi) {
        if (!(r.lo <= r.hi) || r.lo < lo || r.hi > hi) {
            throw ValidationError(std::string("aug.") + name + " must be an ordered interval within [" +
                                  std::to_string(lo) + "," + std::to_string(hi) + "]");
        }
    };
    prob(c.p_rotate, "p_rotate");
    prob(c.p_shift, "p_shift");
    prob(c.p_noise, "p_noise");
    prob(c.p_brightness, "p_brightness");
    prob(c.p_edge, "p_edge");
    prob(c.p_blur, "p_blur");
    prob(c.p_mosaic, "p_mosaic");
    prob(c.p_one_sided, "p_one_sided");
    prob(c.min_area_frac, "min_area_frac");
    range(c.rotate_range, "rotate_range", -180.0, 180.0);
    range(c.shift_range, "shift_range", -1e6, 1e6);
    range(c.brightness_range, "brightness_range", 0.0, 1e6);
    range(c.edge_strength, "edge_strength", 0.0, 1e6);
    range(c.blur_sigma_range, "blur_sigma_range", 0.0, 1e6);
    if (!(c.noise_sigma >= 0.0)) {
        throw ValidationError("aug.noise_sigma must be >= 0");
    }
}

}   // namespace duodet
