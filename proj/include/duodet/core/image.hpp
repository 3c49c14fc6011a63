#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "duodet/core/error.hpp"

namespace duodet {

/// 8-bit image, interleaved HWC.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill)
    {
        if (w < 0 || h < 0 || c <= 0) {
            throw ValidationError("image dimensions must be non-negative with at least one channel");
        }
    }

    std::uint8_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    std::uint8_t at(int y, int x, int c) const
    {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool empty() const { return data.empty(); }
    bool same_size(const Image& o) const { return width == o.width && height == o.height; }

    friend bool operator==(const Image&, const Image&) = default;
};

inline std::uint8_t saturate_u8(double v)
{
    return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

/// Per-channel mean, used as the fill value for exposed regions.
inline std::vector<double> channel_means(const Image& img)
{
    std::vector<double> mean(img.channels, 0.0);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    if (n == 0) {
        return mean;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < img.channels; ++c) {
            mean[c] += img.data[i * img.channels + c];
        }
    }
    for (auto& m : mean) {
        m /= static_cast<double>(n);
    }
    return mean;
}

/// Bilinear sample at continuous pixel-center coordinates (x, y); `fill` for
/// taps outside the image.
inline double sample_bilinear(const Image& img, double x, double y, int c, double fill)
{
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto tap = [&](int yy, int xx) -> double {
        if (xx < 0 || yy < 0 || xx >= img.width || yy >= img.height) {
            return fill;
        }
        return img.at(yy, xx, c);
    };
    const double top = tap(y0, x0) * (1 - fx) + tap(y0, x0 + 1) * fx;
    const double bottom = tap(y0 + 1, x0) * (1 - fx) + tap(y0 + 1, x0 + 1) * fx;
    return top * (1 - fy) + bottom * fy;
}

/// Bilinear resize with edge clamping (pixel-center alignment).
inline Image resize_bilinear(const Image& src, int out_w, int out_h)
{
    Image dst(out_w, out_h, src.channels);
    if (src.width == out_w && src.height == out_h) {
        dst.data = src.data;
        return dst;
    }
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
            for (int c = 0; c < src.channels; ++c) {
                dst.at(y, x, c) = saturate_u8(sample_bilinear(src, fx, fy, c, 0.0));
            }
        }
    }
    return dst;
}

/// Copies the `w`x`h` window at (x, y).
inline Image crop_image(const Image& src, int x, int y, int w, int h)
{
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > src.width || y + h > src.height) {
        throw ValidationError("crop window outside image bounds");
    }
    Image dst(w, h, src.channels);
    const std::size_t row = static_cast<std::size_t>(w) * src.channels;
    for (int r = 0; r < h; ++r) {
        const auto* from = &src.data[(static_cast<std::size_t>(y + r) * src.width + x) * src.channels];
        std::copy(from, from + row, &dst.data[r * row]);
    }
    return dst;
}

/// Single-channel image replicated to three channels.
inline Image gray_to_rgb(const Image& gray)
{
    Image out(gray.width, gray.height, 3);
    for (std::size_t i = 0; i < gray.data.size(); ++i) {
        out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = gray.data[i];
    }
    return out;
}

}   // namespace duodet
