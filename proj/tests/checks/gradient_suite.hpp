#pragma once

// Central-difference checks of each trainable block on a tiny network.

#include <string>
#include <utility>
#include <vector>

#include "checks/graph_check.hpp"
#include "duodet/model/model.hpp"
#include "support.hpp"

namespace checks {

struct SuiteResult {
    std::string name;
    oracle::GradResult grad;
};

inline constexpr int kSide = 64;
inline constexpr int kBatch = 2;

inline std::array<std::vector<int>, 3> pyramid_shapes(const duodet::ModelConfig& cfg, int channels_override = 0)
{
    std::array<std::vector<int>, 3> out;
    for (int s = 0; s < 3; ++s) {
        const int c = channels_override ? channels_override : cfg.channels[s];
        out[s] = {kBatch, c, kSide / duodet::kStrides[s], kSide / duodet::kStrides[s]};
    }
    return out;
}

inline Tensor<double> image_tensor(RngStream& rng)
{
    Tensor<double> t({kBatch, 3, kSide, kSide});
    for (auto& v : t.data) {
        v = rng.uniform();
    }
    return t;
}

inline std::vector<duodet::TargetMap> random_targets(RngStream& rng)
{
    std::vector<duodet::TargetMap> out;
    for (int n = 0; n < kBatch; ++n) {
        auto s = testing_support::random_sample(kSide, kSide, 3, rng);
        out.push_back(duodet::assign_targets(s.boxes, duodet::grids_for_input(kSide, kSide)));
    }
    return out;
}

inline SuiteResult backbone_suite(std::uint64_t seed, int coords = 10)
{
    RngStream rng(seed);
    const auto cfg = testing_support::tiny_config();
    const auto proj = make_projection(pyramid_shapes(cfg), rng);
    GraphCheck g{duodet::init_params<double>(cfg, seed), {image_tensor(rng)},
                 [&](ForwardContext<double>& ctx, const std::vector<Var>& in) {
                     return proj.apply(ctx.tape, duodet::backbone_forward(ctx, cfg, in[0], duodet::Modality::rgb));
                 }};
    return {"backbone", g.run(rng, coords, coords, {"backbone_rgb"})};
}

/// Both modality pyramids are free inputs.
inline SuiteResult fusion_suite(std::uint64_t seed, int coords = 10)
{
    RngStream rng(seed);
    const auto cfg = testing_support::tiny_config();
    const auto shapes = pyramid_shapes(cfg);
    const auto proj = make_projection(shapes, rng);
    std::vector<Tensor<double>> inputs;
    for (int k = 0; k < 6; ++k) {
        inputs.push_back(normal_tensor(shapes[k % 3], rng));
    }
    GraphCheck g{duodet::init_params<double>(cfg, seed), inputs,
                 [&](ForwardContext<double>& ctx, const std::vector<Var>& in) {
                     duodet::FeaturePyramid rgb{in[0], in[1], in[2]};
                     duodet::FeaturePyramid tir{in[3], in[4], in[5]};
                     return proj.apply(ctx.tape, duodet::fuse_pyramid(ctx, cfg, rgb, tir));
                 }};
    // Each modality gets >= coords checks spread over its three scales.
    return {"fusion", g.run(rng, (coords + 2) / 3, coords, {"fusion"})};
}

inline SuiteResult head_suite(duodet::HeadTag tag, std::uint64_t seed, int coords = 10)
{
    RngStream rng(seed);
    const auto cfg = testing_support::tiny_config();
    const auto shapes = pyramid_shapes(cfg);
    std::array<std::vector<int>, 3> out_shapes;
    for (int s = 0; s < 3; ++s) {
        out_shapes[s] = shapes[s];
        out_shapes[s][1] = duodet::prediction_channels(cfg);
    }
    const auto proj = make_projection(out_shapes, rng);
    std::vector<Tensor<double>> inputs;
    for (int s = 0; s < 3; ++s) {
        inputs.push_back(normal_tensor(shapes[s], rng));
    }
    GraphCheck g{duodet::init_params<double>(cfg, seed), inputs,
                 [&](ForwardContext<double>& ctx, const std::vector<Var>& in) {
                     duodet::FeaturePyramid pyr{in[0], in[1], in[2]};
                     return proj.apply(ctx.tape, duodet::head_forward(ctx, cfg, pyr, tag));
                 }};
    return {duodet::head_prefix(tag), g.run(rng, (coords + 2) / 3, coords, {duodet::head_prefix(tag) + "."})};
}

/// detection_loss with respect to raw prediction entries.
inline SuiteResult loss_suite(std::uint64_t seed, int coords = 10)
{
    RngStream rng(seed);
    const auto cfg = testing_support::tiny_config();
    const auto targets = random_targets(rng);
    const auto shapes = pyramid_shapes(cfg, duodet::prediction_channels(cfg));
    std::vector<Tensor<double>> inputs;
    for (int s = 0; s < 3; ++s) {
        inputs.push_back(normal_tensor(shapes[s], rng));
    }
    GraphCheck g{{}, inputs, [&](ForwardContext<double>& ctx, const std::vector<Var>& in) {
                     return duodet::detection_loss(ctx.tape, duodet::Pyramid<Var>{in[0], in[1], in[2]}, targets);
                 }};
    return {"detection_loss", g.run(rng, (coords + 2) / 3, 0, {})};
}

/// Full model, all four heads, assembled total loss; checks image inputs and
/// parameters of every branch.
inline SuiteResult total_loss_suite(std::uint64_t seed, int coords = 10)
{
    RngStream rng(seed);
    auto cfg = testing_support::tiny_config();
    cfg.aux_weights = {0.25, 0.25};
    const auto targets = random_targets(rng);
    GraphCheck g{duodet::init_params<double>(cfg, seed), {image_tensor(rng), image_tensor(rng)},
                 [&](ForwardContext<double>& ctx, const std::vector<Var>& in) {
                     auto r = duodet::model_forward(ctx, cfg, in[0], in[1], duodet::AuxSelection::all());
                     auto& tape = ctx.tape;
                     return duodet::total_loss(tape, duodet::detection_loss(tape, r.main, targets),
                                               duodet::detection_loss(tape, *r.aux_pre_rgb, targets),
                                               duodet::detection_loss(tape, *r.aux_pre_tir, targets),
                                               duodet::detection_loss(tape, *r.aux_post, targets), cfg.aux_weights);
                 }};
    std::vector<std::string> prefixes;
    for (const auto& t : duodet::branch_tags()) {
        prefixes.push_back(t + ".");
    }
    return {"total_loss", g.run(rng, coords, 2 * coords, prefixes)};
}

inline std::vector<SuiteResult> full_gradient_suite(std::uint64_t seed)
{
    std::vector<SuiteResult> out;
    out.push_back(backbone_suite(seed));
    out.push_back(fusion_suite(seed + 1));
    out.push_back(head_suite(duodet::HeadTag::main, seed + 2));
    out.push_back(head_suite(duodet::HeadTag::aux_pre_rgb, seed + 3));
    out.push_back(head_suite(duodet::HeadTag::aux_pre_tir, seed + 4));
    out.push_back(head_suite(duodet::HeadTag::aux_post, seed + 5));
    out.push_back(loss_suite(seed + 6));
    out.push_back(total_loss_suite(seed + 7));
    return out;
}

}   // namespace checks
