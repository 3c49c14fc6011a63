#pragma once

#include <optional>
#include <vector>

#include "duodet/core/image.hpp"
#include "duodet/model/fusion.hpp"
#include "duodet/model/heads.hpp"

namespace duodet {

template <typename T>
void add_neck_params(ModelParams<T>& params, const ModelConfig& cfg, std::uint64_t seed)
{
    for (int s = 0; s < 3; ++s) {
        add_conv_bn(params, std::string("neck.") + kScaleNames[s], cfg.channels[s], cfg.channels[s], 3, seed);
    }
}

/// Allocates every branch, deterministically for a given seed.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed)
{
    validate(cfg);
    ModelParams<T> p;
    add_backbone_params(p, cfg, Modality::rgb, seed);
    add_backbone_params(p, cfg, Modality::tir, seed);
    add_fusion_params(p, cfg, seed);
    add_neck_params(p, cfg, seed);
    add_head_params(p, cfg, HeadTag::main, seed);
    add_head_params(p, cfg, HeadTag::aux_pre_rgb, seed);
    add_head_params(p, cfg, HeadTag::aux_pre_tir, seed);
    add_head_params(p, cfg, HeadTag::aux_post, seed);
    return p;
}

template <typename T>
bool has_aux(const ModelParams<T>& p)
{
    for (const auto& e : p.entries()) {
        if (is_aux_branch(branch_of(e.name))) {
            return true;
        }
    }
    return false;
}

/// Drops the auxiliary heads; they never feed the main path, so inference is unchanged.
template <typename T>
ModelParams<T> strip_aux(const ModelParams<T>& p)
{
    return p.without([](const std::string& tag) { return is_aux_branch(tag); });
}

/// Per-scale residual conv block between fusion and the main head.
template <typename T>
FeaturePyramid neck_forward(ForwardContext<T>& ctx, const FeaturePyramid& fused)
{
    FeaturePyramid out;
    for (int s = 0; s < 3; ++s) {
        Var y = conv_bn(ctx, std::string("neck.") + kScaleNames[s], fused[s], 1, true);
        out[s] = nn::add(ctx.tape, fused[s], y);
    }
    return out;
}

struct ForwardResult {
    FeaturePyramid pre_rgb;
    FeaturePyramid pre_tir;
    FeaturePyramid fused;
    FeaturePyramid neck;
    Pyramid<Var> main;
    std::optional<Pyramid<Var>> aux_pre_rgb;
    std::optional<Pyramid<Var>> aux_pre_tir;
    std::optional<Pyramid<Var>> aux_post;
};

/// Which auxiliary heads to evaluate.
struct AuxSelection {
    bool pre = false;
    bool post = false;

    static AuxSelection all() { return {true, true}; }
    static AuxSelection none() { return {}; }
};

/// Dual backbone -> three-scale fusion -> neck -> main head, plus any requested
/// auxiliary heads tapping the pre-fusion and fused pyramids.
template <typename T>
ForwardResult model_forward(ForwardContext<T>& ctx, const ModelConfig& cfg, Var rgb, Var tir,
                            AuxSelection aux = AuxSelection::none())
{
    ForwardResult r;
    r.pre_rgb = backbone_forward(ctx, cfg, rgb, Modality::rgb);
    r.pre_tir = backbone_forward(ctx, cfg, tir, Modality::tir);
    r.fused = fuse_pyramid(ctx, cfg, r.pre_rgb, r.pre_tir);
    r.neck = neck_forward(ctx, r.fused);
    r.main = head_forward(ctx, cfg, r.neck, HeadTag::main);
    if (aux.pre) {
        r.aux_pre_rgb = head_forward(ctx, cfg, r.pre_rgb, HeadTag::aux_pre_rgb);
        r.aux_pre_tir = head_forward(ctx, cfg, r.pre_tir, HeadTag::aux_pre_tir);
    }
    if (aux.post) {
        r.aux_post = head_forward(ctx, cfg, r.fused, HeadTag::aux_post);
    }
    return r;
}

/// Stacks images into [N,3,H,W] scaled to [0,1]; single-channel images are
/// replicated across the three channels.
template <typename T>
Tensor<T> images_to_tensor(const std::vector<const Image*>& images)
{
    if (images.empty()) {
        throw ValidationError("images_to_tensor: empty batch");
    }
    const int h = images[0]->height, w = images[0]->width;
    Tensor<T> out({static_cast<int>(images.size()), 3, h, w});
    for (std::size_t n = 0; n < images.size(); ++n) {
        const Image& img = *images[n];
        if (img.height != h || img.width != w) {
            throw ValidationError("images_to_tensor: mixed image sizes in batch");
        }
        for (int c = 0; c < 3; ++c) {
            const int src_c = img.channels == 1 ? 0 : c;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    out.at(static_cast<int>(n), c, y, x) = static_cast<T>(img.at(y, x, src_c)) / T(255);
                }
            }
        }
    }
    return out;
}

/// Main-head raw outputs in inference mode, without recording gradients.
template <typename T>
Pyramid<Tensor<T>> predict_raw(ModelParams<T>& params, const ModelConfig& cfg, const Tensor<T>& rgb,
                               const Tensor<T>& tir)
{
    Tape<T> tape(false);
    ForwardContext<T> ctx{tape, params, false};
    auto r = model_forward(ctx, cfg, tape.constant(rgb), tape.constant(tir));
    return {tape.value(r.main.p3), tape.value(r.main.p4), tape.value(r.main.p5)};
}

}   // namespace duodet
