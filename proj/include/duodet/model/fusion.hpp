#pragma once

#include <string>

#include "duodet/model/backbone.hpp"

namespace duodet {

inline std::string fusion_prefix(int scale)
{
    return std::string("fusion.") + kScaleNames[scale];
}

template <typename T>
void add_attention_params(ModelParams<T>& params, const std::string& name, int d, std::uint64_t seed)
{
    for (const char* proj : {"q", "k", "v", "o"}) {
        add_linear(params, name + "." + proj, d, d, seed);
    }
}

template <typename T>
void add_fusion_params(ModelParams<T>& params, const ModelConfig& cfg, std::uint64_t seed)
{
    for (int s = 0; s < 3; ++s) {
        const std::string pre = fusion_prefix(s);
        const int c = cfg.channels[s];
        const int d = cfg.fusion_width(s);
        add_linear(params, pre + ".in_rgb", c, d, seed);
        add_linear(params, pre + ".in_tir", c, d, seed);
        add_attention_params(params, pre + ".attn_rgb", d, seed);
        add_attention_params(params, pre + ".attn_tir", d, seed);
        add_linear(params, pre + ".out", 2 * d, c, seed);
    }
}

/// Queries projected from `query_src`, keys and values from `kv_src`; heads
/// concatenated and output-projected. Both sequences are [B,N,D].
template <typename T>
Var cross_attention(ForwardContext<T>& ctx, const std::string& name, Var query_src, Var kv_src, int heads,
                    nn::AttentionProbe<T>* probe = nullptr)
{
    const auto& qs = ctx.tape.shape(query_src);
    const auto& ks = ctx.tape.shape(kv_src);
    if (qs != ks) {
        throw ValidationError("cross_attention: sequence shapes differ " + nn::shape_string(qs) + " vs " +
                              nn::shape_string(ks));
    }
    Var q = linear(ctx, name + ".q", query_src);
    Var k = linear(ctx, name + ".k", kv_src);
    Var v = linear(ctx, name + ".v", kv_src);
    Var o = nn::multi_head_attention(ctx.tape, q, k, v, heads, probe);
    return linear(ctx, name + ".o", o);
}

/// Attention maps of one fuse_scale call.
template <typename T>
struct FusionProbe {
    nn::AttentionProbe<T> rgb_queries;
    nn::AttentionProbe<T> tir_queries;
};

/// Bidirectional cross-modal attention at one scale:
///   u = rgb' + attn(Q=rgb', KV=tir'),  v = tir' + attn(Q=tir', KV=rgb')
///   fused = out(concat(u, v)) + (f_rgb + f_tir) / 2
template <typename T>
Var fuse_scale(ForwardContext<T>& ctx, const ModelConfig& cfg, int scale, Var f_rgb, Var f_tir,
               FusionProbe<T>* probe = nullptr)
{
    const auto& sr = ctx.tape.shape(f_rgb);
    const auto& st = ctx.tape.shape(f_tir);
    if (sr != st) {
        throw ValidationError("fuse_scale: modality shapes differ " + nn::shape_string(sr) + " vs " +
                              nn::shape_string(st));
    }
    if (sr[1] != cfg.channels[scale]) {
        throw ValidationError("fuse_scale: expected " + std::to_string(cfg.channels[scale]) + " channels, got " +
                              std::to_string(sr[1]));
    }
    const int h = sr[2];
    const int w = sr[3];
    const std::string pre = fusion_prefix(scale);
    auto& tape = ctx.tape;
    Var rgb = linear(ctx, pre + ".in_rgb", nn::to_tokens(tape, f_rgb));
    Var tir = linear(ctx, pre + ".in_tir", nn::to_tokens(tape, f_tir));
    Var u = nn::add(tape, rgb, cross_attention(ctx, pre + ".attn_rgb", rgb, tir, cfg.fusion_heads,
                                               probe ? &probe->rgb_queries : nullptr));
    Var v = nn::add(tape, tir, cross_attention(ctx, pre + ".attn_tir", tir, rgb, cfg.fusion_heads,
                                               probe ? &probe->tir_queries : nullptr));
    Var fused = nn::from_tokens(tape, linear(ctx, pre + ".out", nn::concat_last(tape, u, v)), h, w);
    return nn::add(tape, fused, nn::mean2(tape, f_rgb, f_tir));
}

template <typename T>
FeaturePyramid fuse_pyramid(ForwardContext<T>& ctx, const ModelConfig& cfg, const FeaturePyramid& rgb,
                            const FeaturePyramid& tir, Pyramid<FusionProbe<T>>* probes = nullptr)
{
    FeaturePyramid out;
    for (int s = 0; s < 3; ++s) {
        out[s] = fuse_scale(ctx, cfg, s, rgb[s], tir[s], probes ? &(*probes)[s] : nullptr);
    }
    return out;
}

}   // namespace duodet
