#pragma once

#include <string>

#include "duodet/model/config.hpp"
#include "duodet/model/layers.hpp"

namespace duodet {

/// Three maps at strides 8/16/32.
template <typename V>
struct Pyramid {
    V p3;
    V p4;
    V p5;

    V& operator[](int s) { return s == 0 ? p3 : (s == 1 ? p4 : p5); }
    const V& operator[](int s) const { return s == 0 ? p3 : (s == 1 ? p4 : p5); }
};

using FeaturePyramid = Pyramid<Var>;

enum class Modality { rgb, tir };

inline std::string backbone_tag(Modality m)
{
    return m == Modality::rgb ? "backbone_rgb" : "backbone_tir";
}

template <typename T>
void add_backbone_params(ModelParams<T>& params, const ModelConfig& cfg, Modality m, std::uint64_t seed)
{
    const std::string tag = backbone_tag(m);
    add_conv_bn(params, tag + ".stem0", 3, cfg.stem_channels, 3, seed);
    add_conv_bn(params, tag + ".stem1", cfg.stem_channels, cfg.stem_channels, 3, seed);
    int prev = cfg.stem_channels;
    for (int s = 0; s < 3; ++s) {
        const std::string stage = tag + ".stage" + std::to_string(s + 1);
        const int c = cfg.channels[s];
        add_conv_bn(params, stage + ".down", prev, c, 3, seed);
        for (int b = 0; b < cfg.blocks_per_stage; ++b) {
            const std::string block = stage + ".block" + std::to_string(b);
            add_conv_bn(params, block + ".conv1", c, c, 3, seed);
            add_conv_bn(params, block + ".conv2", c, c, 3, seed);
        }
        prev = c;
    }
}

/// Stride-4 stem, then three stride-2 stages of residual blocks
/// (x + silu(bn(conv(silu(bn(conv(x))))))). Input: [N,3,H,W] in [0,1] with H, W
/// divisible by 32; thermal input is the single channel replicated three times.
template <typename T>
FeaturePyramid backbone_forward(ForwardContext<T>& ctx, const ModelConfig& cfg, Var img, Modality m)
{
    const auto& shape = ctx.tape.shape(img);
    if (shape.size() != 4 || shape[1] != 3) {
        throw ValidationError("backbone_forward: expected [N,3,H,W] input, got " + nn::shape_string(shape));
    }
    if (shape[2] % 32 != 0 || shape[3] % 32 != 0) {
        throw ValidationError("backbone_forward: input " + std::to_string(shape[3]) + "x" + std::to_string(shape[2]) +
                              " not divisible by 32");
    }
    const std::string tag = backbone_tag(m);
    Var x = conv_bn(ctx, tag + ".stem0", img, 2, true);
    x = conv_bn(ctx, tag + ".stem1", x, 2, true);
    FeaturePyramid out;
    for (int s = 0; s < 3; ++s) {
        const std::string stage = tag + ".stage" + std::to_string(s + 1);
        x = conv_bn(ctx, stage + ".down", x, 2, true);
        for (int b = 0; b < cfg.blocks_per_stage; ++b) {
            const std::string block = stage + ".block" + std::to_string(b);
            Var y = conv_bn(ctx, block + ".conv1", x, 1, true);
            y = conv_bn(ctx, block + ".conv2", y, 1, true);
            x = nn::add(ctx.tape, x, y);
        }
        out[s] = x;
    }
    return out;
}

}   // namespace duodet
