#include <gtest/gtest.h>

#include "checks/gradient_suite.hpp"
#include "duodet/model/model.hpp"
#include "support.hpp"

using namespace duodet;
using checks::normal_tensor;
using testing_support::tiny_config;

namespace {

struct Inputs {
    std::array<Tensor<double>, 3> rgb;
    std::array<Tensor<double>, 3> tir;
};

Inputs random_inputs(const ModelConfig& cfg, int side, RngStream& rng)
{
    Inputs in;
    for (int s = 0; s < 3; ++s) {
        const int g = side / kStrides[s];
        in.rgb[s] = normal_tensor({2, cfg.channels[s], g, g}, rng);
        in.tir[s] = normal_tensor({2, cfg.channels[s], g, g}, rng);
    }
    return in;
}

std::array<Tensor<double>, 3> run_fusion(ModelParams<double>& params, const ModelConfig& cfg,
                                         const std::array<Tensor<double>, 3>& a, const std::array<Tensor<double>, 3>& b,
                                         Pyramid<FusionProbe<double>>* probes = nullptr)
{
    nn::Tape<double> tape(false);
    ForwardContext<double> ctx{tape, params, false};
    FeaturePyramid pa{tape.constant(a[0]), tape.constant(a[1]), tape.constant(a[2])};
    FeaturePyramid pb{tape.constant(b[0]), tape.constant(b[1]), tape.constant(b[2])};
    auto out = fuse_pyramid(ctx, cfg, pa, pb, probes);
    return {tape.value(out.p3), tape.value(out.p4), tape.value(out.p5)};
}

void zero_fusion(ModelParams<double>& params)
{
    for (auto& e : params.entries()) {
        if (branch_of(e.name) == "fusion") {
            std::fill(e.value.data.begin(), e.value.data.end(), 0.0);
        }
    }
}

}   // namespace

TEST(Fusion, ShapesPreservedAtAllScales)
{
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 1);
    RngStream rng(1);
    const auto in = random_inputs(cfg, 64, rng);
    const auto out = run_fusion(params, cfg, in.rgb, in.tir);
    for (int s = 0; s < 3; ++s) {
        EXPECT_EQ(out[s].shape, in.rgb[s].shape);
    }
}

TEST(Fusion, ZeroWeightsCollapseToMean)
{
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 2);
    zero_fusion(params);
    RngStream rng(2);
    const auto in = random_inputs(cfg, 96, rng);
    const auto out = run_fusion(params, cfg, in.rgb, in.tir);
    for (int s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < out[s].numel(); ++i) {
            EXPECT_DOUBLE_EQ(out[s][i], (in.rgb[s][i] + in.tir[s][i]) / 2) << "scale " << s;
        }
    }
}

TEST(Fusion, CollapseIsTranslationEquivariant)
{
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 3);
    zero_fusion(params);
    RngStream rng(3);
    auto in = random_inputs(cfg, 64, rng);
    const auto out = run_fusion(params, cfg, in.rgb, in.tir);
    // Shift P3 inputs one pixel right (wrapping); interior outputs shift with them.
    auto shift = [](const Tensor<double>& t) {
        Tensor<double> o(t.shape);
        for (int n = 0; n < t.dim(0); ++n)
            for (int c = 0; c < t.dim(1); ++c)
                for (int y = 0; y < t.dim(2); ++y)
                    for (int x = 0; x < t.dim(3); ++x) o.at(n, c, y, (x + 1) % t.dim(3)) = t.at(n, c, y, x);
        return o;
    };
    in.rgb[0] = shift(in.rgb[0]);
    in.tir[0] = shift(in.tir[0]);
    const auto shifted = run_fusion(params, cfg, in.rgb, in.tir);
    const auto& a = out[0];
    const auto& b = shifted[0];
    for (int c = 0; c < a.dim(1); ++c)
        for (int y = 0; y < a.dim(2); ++y)
            for (int x = 0; x + 1 < a.dim(3); ++x) EXPECT_EQ(b.at(0, c, y, x + 1), a.at(0, c, y, x));
}

TEST(Fusion, AttentionRowsSumToOne)
{
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 4);
    RngStream rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const auto in = random_inputs(cfg, 64, rng);
        Pyramid<FusionProbe<double>> probes;
        run_fusion(params, cfg, in.rgb, in.tir, &probes);
        for (int s = 0; s < 3; ++s) {
            for (const auto* p : {&probes[s].rgb_queries, &probes[s].tir_queries}) {
                const auto& w = p->weights;
                ASSERT_EQ(w.dim(1), cfg.fusion_heads);
                const int n = w.dim(3);
                for (std::size_t row = 0; row < w.numel() / n; ++row) {
                    double sum = 0;
                    for (int k = 0; k < n; ++k) {
                        const double v = w[row * n + k];
                        EXPECT_GE(v, 0.0);
                        sum += v;
                    }
                    EXPECT_NEAR(sum, 1.0, 1e-6);
                }
            }
        }
    }
}

TEST(Fusion, ArgumentSwapEqualsWeightSwap)
{
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 5);
    auto swapped = params;
    for (int s = 0; s < 3; ++s) {
        const std::string pre = fusion_prefix(s);
        auto swap_named = [&](const std::string& a, const std::string& b) {
            for (const char* suffix : {".weight", ".bias"}) {
                swapped[a + suffix] = params[b + suffix];
                swapped[b + suffix] = params[a + suffix];
            }
        };
        swap_named(pre + ".in_rgb", pre + ".in_tir");
        for (const char* proj : {".q", ".k", ".v", ".o"}) {
            swap_named(pre + ".attn_rgb" + proj, pre + ".attn_tir" + proj);
        }
        // Output projection reads concat(u, v): swap its two column halves.
        auto& w = swapped[pre + ".out.weight"];
        const auto& orig = params[pre + ".out.weight"];
        const int dout = w.dim(0), din = w.dim(1), half = din / 2;
        for (int r = 0; r < dout; ++r) {
            for (int c = 0; c < din; ++c) {
                w[r * din + c] = orig[r * din + (c + half) % din];
            }
        }
    }
    RngStream rng(5);
    const auto in = random_inputs(cfg, 64, rng);
    const auto a = run_fusion(params, cfg, in.tir, in.rgb);
    const auto b = run_fusion(swapped, cfg, in.rgb, in.tir);
    const auto plain = run_fusion(params, cfg, in.rgb, in.tir);
    for (int s = 0; s < 3; ++s) {
        double diff = 0;
        for (std::size_t i = 0; i < a[s].numel(); ++i) {
            EXPECT_NEAR(a[s][i], b[s][i], 1e-6);
            diff = std::max(diff, std::abs(a[s][i] - plain[s][i]));
        }
        EXPECT_GT(diff, 1e-6) << "swap should matter for generic weights";
    }
}

TEST(Fusion, FiniteDifferenceBothModalities)
{
    const auto r = checks::fusion_suite(51);
    EXPECT_GE(r.grad.checked, 30);
    EXPECT_LT(r.grad.worst_rel, 1e-3) << r.grad.worst_where;
}

TEST(Fusion, GradientReachesBothModalities)
{
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 6);
    RngStream rng(6);
    const auto in = random_inputs(cfg, 64, rng);
    for (int s = 0; s < 3; ++s) {
        nn::Tape<double> tape;
        ForwardContext<double> ctx{tape, params, true};
        Var a = tape.input(in.rgb[s]);
        Var b = tape.input(in.tir[s]);
        Var out = fuse_scale(ctx, cfg, s, a, b);
        tape.backward(nn::dot_const(tape, out, normal_tensor(tape.shape(out), rng)));
        for (Var v : {a, b}) {
            double norm = 0;
            for (double g : tape.grad(v).data) {
                norm += g * g;
            }
            EXPECT_GT(norm, 1e-12) << "scale " << s;
        }
    }
}

TEST(Fusion, ScalesUseDisjointParameters)
{
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 7);
    std::array<std::set<std::string>, 3> names;
    for (const auto& e : params.entries()) {
        if (branch_of(e.name) != "fusion") {
            continue;
        }
        int owners = 0;
        for (int s = 0; s < 3; ++s) {
            if (e.name.rfind(fusion_prefix(s) + ".", 0) == 0) {
                names[s].insert(e.name);
                ++owners;
            }
        }
        EXPECT_EQ(owners, 1) << e.name;
    }
    // Perturbing P3's parameters changes only P3's output.
    RngStream rng(7);
    const auto in = random_inputs(cfg, 64, rng);
    const auto before = run_fusion(params, cfg, in.rgb, in.tir);
    for (const auto& n : names[0]) {
        for (auto& v : params[n].data) {
            v += 0.1;
        }
    }
    const auto after = run_fusion(params, cfg, in.rgb, in.tir);
    EXPECT_NE(before[0], after[0]);
    EXPECT_EQ(before[1], after[1]);
    EXPECT_EQ(before[2], after[2]);
}

TEST(Fusion, InputsNotMutated)
{
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 8);
    RngStream rng(8);
    const auto in = random_inputs(cfg, 64, rng);
    nn::Tape<double> tape;
    ForwardContext<double> ctx{tape, params, true};
    FeaturePyramid a{tape.input(in.rgb[0]), tape.input(in.rgb[1]), tape.input(in.rgb[2])};
    FeaturePyramid b{tape.input(in.tir[0]), tape.input(in.tir[1]), tape.input(in.tir[2])};
    auto out = fuse_pyramid(ctx, cfg, a, b);
    tape.backward(checks::make_projection({tape.shape(out.p3), tape.shape(out.p4), tape.shape(out.p5)}, rng)
                      .apply(tape, out));
    for (int s = 0; s < 3; ++s) {
        EXPECT_EQ(tape.value(a[s]), in.rgb[s]);
        EXPECT_EQ(tape.value(b[s]), in.tir[s]);
    }
}

TEST(Fusion, ModalityShapeMismatchRejected)
{
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 9);
    nn::Tape<double> tape(false);
    ForwardContext<double> ctx{tape, params, false};
    EXPECT_THROW(fuse_scale(ctx, cfg, 0, tape.constant(Tensor<double>({1, 8, 4, 4})),
                            tape.constant(Tensor<double>({1, 8, 4, 2}))),
                 ValidationError);
    EXPECT_THROW(fuse_scale(ctx, cfg, 0, tape.constant(Tensor<double>({1, 4, 4, 4})),
                            tape.constant(Tensor<double>({1, 4, 4, 4}))),
                 ValidationError);
}
