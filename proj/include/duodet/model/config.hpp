#pragma once

#include <array>
#include <string>

#include "duodet/core/error.hpp"

namespace duodet {

struct AuxWeights {
    double pre = 0.25;
    double post = 0.25;

    friend bool operator==(const AuxWeights&, const AuxWeights&) = default;
};

/// Network shape. Defaults are the CPU-trainable toy profile.
struct ModelConfig {
    int num_classes = 1;
    int stem_channels = 16;
    std::array<int, 3> channels{32, 64, 128};
    int blocks_per_stage = 2;
    int fusion_heads = 4;
    int fusion_dim = 0;          // 0: use each scale's channel count
    int head_channels = 32;
    AuxWeights aux_weights;
    double conf_thresh = 0.05;
    double nms_iou = 0.5;

    int fusion_width(int scale) const { return fusion_dim > 0 ? fusion_dim : channels[scale]; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr std::array<int, 3> kStrides{8, 16, 32};
inline constexpr std::array<const char*, 3> kScaleNames{"p3", "p4", "p5"};

inline void validate(const ModelConfig& c)
{
    auto fail = [](const std::string& field, const std::string& what) {
        throw ValidationError("model." + field + " " + what);
    };
    if (c.num_classes <= 0) {
        fail("num_classes", "must be positive");
    }
    if (c.stem_channels <= 0) {
        fail("stem_channels", "must be positive");
    }
    if (c.blocks_per_stage < 0) {
        fail("blocks_per_stage", "must be >= 0");
    }
    if (c.fusion_heads <= 0) {
        fail("fusion_heads", "must be positive");
    }
    if (c.head_channels <= 0) {
        fail("head_channels", "must be positive");
    }
    if (c.fusion_dim < 0) {
        fail("fusion_dim", "must be >= 0");
    }
    for (int s = 0; s < 3; ++s) {
        if (c.channels[s] <= 0) {
            fail("channels", "must all be positive");
        }
        if (c.fusion_width(s) % c.fusion_heads != 0) {
            fail(c.fusion_dim > 0 ? "fusion_dim" : "channels", "must be divisible by fusion_heads");
        }
    }
    if (!(c.aux_weights.pre >= 0) || !(c.aux_weights.post >= 0)) {
        fail("aux_weights", "must be >= 0");
    }
    if (!(c.conf_thresh >= 0 && c.conf_thresh <= 1)) {
        fail("conf_thresh", "must be in [0,1]");
    }
    if (!(c.nms_iou >= 0 && c.nms_iou <= 1)) {
        fail("nms_iou", "must be in [0,1]");
    }
}

}   // namespace duodet
