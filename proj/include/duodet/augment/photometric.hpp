#pragma once

#include <cmath>
#include <vector>

#include "duodet/augment/rng.hpp"
#include "duodet/core/error.hpp"
#include "duodet/core/image.hpp"

namespace duodet {

/// Additive per-pixel Gaussian noise, rounded and clamped.
inline Image add_noise(const Image& img, double sigma, RngStream& rng)
{
    if (sigma < 0) {
        throw ValidationError("add_noise: sigma must be >= 0");
    }
    Image out = img;
    if (sigma == 0) {
        return out;
    }
    for (auto& p : out.data) {
        p = saturate_u8(p + sigma * rng.normal());
    }
    return out;
}

inline Image adjust_brightness(const Image& img, double factor)
{
    if (factor < 0) {
        throw ValidationError("adjust_brightness: factor must be >= 0");
    }
    Image out = img;
    for (auto& p : out.data) {
        p = saturate_u8(p * factor);
    }
    return out;
}

/// Normalized 1-D Gaussian taps, radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma)
{
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) {
        v /= sum;
    }
    return k;
}

/// Separable Gaussian blur with edge-replicate padding, unrounded result.
inline std::vector<double> gaussian_blur_real(const Image& img, double sigma)
{
    const int w = img.width;
    const int h = img.height;
    const int ch = img.channels;
    std::vector<double> src(img.data.begin(), img.data.end());
    if (sigma < 0.1) {
        return src;
    }
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    std::vector<double> tmp(src.size());
    std::vector<double> dst(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0;
                for (int i = -r; i <= r; ++i) {
                    const int xx = std::clamp(x + i, 0, w - 1);
                    acc += k[i + r] * src[(static_cast<std::size_t>(y) * w + xx) * ch + c];
                }
                tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0;
                for (int i = -r; i <= r; ++i) {
                    const int yy = std::clamp(y + i, 0, h - 1);
                    acc += k[i + r] * tmp[(static_cast<std::size_t>(yy) * w + x) * ch + c];
                }
                dst[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
            }
        }
    }
    return dst;
}

/// Sigma below 0.1 is treated as no blur.
inline Image gaussian_blur(const Image& img, double sigma)
{
    if (sigma < 0) {
        throw ValidationError("gaussian_blur: sigma must be >= 0");
    }
    if (sigma < 0.1) {
        return img;
    }
    const auto blurred = gaussian_blur_real(img, sigma);
    Image out = img;
    for (std::size_t i = 0; i < blurred.size(); ++i) {
        out.data[i] = saturate_u8(blurred[i]);
    }
    return out;
}

/// Unsharp mask: img + strength * (img - blur(img, 1)).
inline Image edge_enhance(const Image& img, double strength)
{
    if (strength < 0) {
        throw ValidationError("edge_enhance: strength must be >= 0");
    }
    if (strength == 0) {
        return img;
    }
    const auto blurred = gaussian_blur_real(img, 1.0);
    Image out = img;
    for (std::size_t i = 0; i < blurred.size(); ++i) {
        const double v = img.data[i];
        out.data[i] = saturate_u8(v + strength * (v - blurred[i]));
    }
    return out;
}

}   // namespace duodet
