#pragma once

#include <string>
#include <vector>

#include "duodet/core/box.hpp"
#include "duodet/core/image.hpp"

namespace duodet {

inline constexpr int kMinSampleSide = 32;

struct SampleMeta {
    std::string source;
    std::string rgb_id;
    std::string tir_id;
    std::string split = "train";

    friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

/// Co-registered RGB (3 channel) and TIR (1 channel) images sharing one box list.
struct PairedSample {
    Image rgb;
    Image tir;
    std::vector<BoundingBox> boxes;
    SampleMeta meta;

    int width() const { return rgb.width; }
    int height() const { return rgb.height; }

    friend bool operator==(const PairedSample&, const PairedSample&) = default;
};

/// Lists every violated PairedSample invariant; empty when the sample is well formed.
/// `num_classes` < 0 skips the class range check.
inline std::vector<std::string> validate_sample(const PairedSample& s, int num_classes = -1)
{
    std::vector<std::string> out;
    if (s.rgb.channels != 3) {
        out.push_back("rgb: expected 3 channels, got " + std::to_string(s.rgb.channels));
    }
    if (s.tir.channels != 1) {
        out.push_back("tir: expected 1 channel, got " + std::to_string(s.tir.channels));
    }
    if (!s.rgb.same_size(s.tir)) {
        out.push_back("rgb/tir dimension mismatch: rgb " + std::to_string(s.rgb.width) + "x" +
                      std::to_string(s.rgb.height) + ", tir " + std::to_string(s.tir.width) + "x" +
                      std::to_string(s.tir.height));
    }
    if (s.rgb.width < kMinSampleSide || s.rgb.height < kMinSampleSide) {
        out.push_back("rgb: image smaller than " + std::to_string(kMinSampleSide) + " px");
    }
    const double w = s.rgb.width;
    const double h = s.rgb.height;
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
        const auto& b = s.boxes[i];
        const std::string name = "boxes[" + std::to_string(i) + "]";
        if (!(b.x_min < b.x_max && b.y_min < b.y_max)) {
            out.push_back(name + ": degenerate extent");
        }
        if (b.x_min < 0 || b.y_min < 0 || b.x_max > w || b.y_max > h) {
            out.push_back(name + ": outside image frame");
        }
        if (b.class_id < 0 || (num_classes >= 0 && b.class_id >= num_classes)) {
            out.push_back(name + ": class_id " + std::to_string(b.class_id) + " out of range");
        }
        if (b.score && (*b.score < 0 || *b.score > 1)) {
            out.push_back(name + ": score outside [0,1]");
        }
    }
    return out;
}

}   // namespace duodet
