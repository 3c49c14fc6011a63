#include <gtest/gtest.h>

#include "checks/gradient_suite.hpp"
#include "duodet/model/model.hpp"
#include "support.hpp"

using namespace duodet;
using checks::normal_tensor;
using testing_support::tiny_config;

namespace {

Tensor<float> random_images(int n, int h, int w, RngStream& rng)
{
    Tensor<float> t({n, 3, h, w});
    for (auto& v : t.data) {
        v = static_cast<float>(rng.uniform());
    }
    return t;
}

/// conv + bn (gamma, beta, running mean, running var) element count.
int conv_bn_count(int cin, int cout, int k)
{
    return cout * cin * k * k + 4 * cout;
}

}   // namespace

TEST(Backbone, PyramidShapes64)
{
    auto cfg = ModelConfig{};
    cfg.num_classes = 1;
    auto params = init_params<float>(cfg, 1);
    RngStream rng(1);
    nn::Tape<float> tape(false);
    ForwardContext<float> ctx{tape, params, false};
    auto pyr = backbone_forward(ctx, cfg, tape.constant(random_images(1, 64, 64, rng)), Modality::rgb);
    EXPECT_EQ(tape.shape(pyr.p3), (std::vector<int>{1, 32, 8, 8}));
    EXPECT_EQ(tape.shape(pyr.p4), (std::vector<int>{1, 64, 4, 4}));
    EXPECT_EQ(tape.shape(pyr.p5), (std::vector<int>{1, 128, 2, 2}));
}

TEST(Backbone, ShapesFollowInputProperty)
{
    const auto cfg = tiny_config();
    auto params = init_params<float>(cfg, 2);
    RngStream rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const int h = 32 * rng.uniform_int(1, 4), w = 32 * rng.uniform_int(1, 4), n = rng.uniform_int(1, 2);
        nn::Tape<float> tape(false);
        ForwardContext<float> ctx{tape, params, false};
        auto pyr = backbone_forward(ctx, cfg, tape.constant(random_images(n, h, w, rng)), Modality::tir);
        for (int s = 0; s < 3; ++s) {
            EXPECT_EQ(tape.shape(pyr[s]), (std::vector<int>{n, cfg.channels[s], h / kStrides[s], w / kStrides[s]}));
        }
    }
}

TEST(Backbone, RejectsBadInput)
{
    const auto cfg = tiny_config();
    auto params = init_params<float>(cfg, 2);
    RngStream rng(3);
    nn::Tape<float> tape(false);
    ForwardContext<float> ctx{tape, params, false};
    EXPECT_THROW(backbone_forward(ctx, cfg, tape.constant(random_images(1, 48, 64, rng)), Modality::rgb),
                 ValidationError);
    EXPECT_THROW(backbone_forward(ctx, cfg, tape.constant(Tensor<float>({1, 1, 64, 64})), Modality::rgb),
                 ValidationError);
}

TEST(Backbone, BranchesAreWeightIndependent)
{
    const auto cfg = tiny_config();
    auto params = init_params<float>(cfg, 4);
    RngStream rng(4);
    nn::Tape<float> tape(false);
    ForwardContext<float> ctx{tape, params, false};
    Var img = tape.constant(random_images(1, 64, 64, rng));
    auto a = backbone_forward(ctx, cfg, img, Modality::rgb);
    auto b = backbone_forward(ctx, cfg, img, Modality::tir);
    for (int s = 0; s < 3; ++s) {
        EXPECT_NE(tape.value(a[s]), tape.value(b[s]));
    }
    // Perturbing one branch's weights leaves the other untouched.
    const auto before = tape.value(b.p5);
    for (auto& v : params["backbone_rgb.stage3.down.conv.weight"].data) {
        v += 0.5f;
    }
    nn::Tape<float> t2(false);
    ForwardContext<float> c2{t2, params, false};
    EXPECT_EQ(t2.value(backbone_forward(c2, cfg, t2.constant(tape.value(img)), Modality::tir).p5), before);
}

TEST(Backbone, DeterministicForward)
{
    const auto cfg = tiny_config();
    auto params = init_params<float>(cfg, 5);
    RngStream rng(5);
    const auto img = random_images(2, 64, 64, rng);
    auto run = [&] {
        nn::Tape<float> tape(false);
        ForwardContext<float> ctx{tape, params, false};
        return tape.value(backbone_forward(ctx, cfg, tape.constant(img), Modality::rgb).p4);
    };
    EXPECT_EQ(run(), run());
}

TEST(Backbone, FiniteDifferenceGradient)
{
    const auto r = checks::backbone_suite(41);
    EXPECT_GE(r.grad.checked, 20);
    EXPECT_LT(r.grad.worst_rel, 1e-3) << r.grad.worst_where;
}

TEST(Backbone, EveryParameterReceivesGradient)
{
    const auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 6);
    RngStream rng(6);
    nn::Tape<double> tape;
    ForwardContext<double> ctx{tape, params, true};
    Var loss;
    for (auto m : {Modality::rgb, Modality::tir}) {
        Tensor<double> img({2, 3, 64, 64});
        for (auto& v : img.data) {
            v = rng.uniform();
        }
        auto pyr = backbone_forward(ctx, cfg, tape.constant(img), m);
        for (int s = 0; s < 3; ++s) {
            Var term = nn::dot_const(tape, pyr[s], normal_tensor(tape.shape(pyr[s]), rng));
            loss = loss.valid() ? nn::add(tape, loss, term) : term;
        }
    }
    tape.backward(loss);
    const auto grads = tape.param_grads();
    for (const auto& e : params.entries()) {
        const auto tag = branch_of(e.name);
        if (!e.trainable || (tag != "backbone_rgb" && tag != "backbone_tir")) {
            continue;
        }
        ASSERT_TRUE(grads.contains(e.name)) << e.name;
        double norm = 0;
        for (double g : grads.at(e.name).data) {
            norm += g * g;
        }
        EXPECT_GT(norm, 0.0) << e.name;
    }
}

TEST(InitParams, DeterministicPerSeed)
{
    const auto cfg = tiny_config();
    EXPECT_EQ(init_params<float>(cfg, 9), init_params<float>(cfg, 9));
    EXPECT_NE(init_params<float>(cfg, 9), init_params<float>(cfg, 10));
}

TEST(InitParams, BranchTagsPartition)
{
    const auto params = init_params<float>(tiny_config(), 1);
    std::size_t total = 0;
    for (const auto& tag : branch_tags()) {
        EXPECT_GT(params.count(tag), 0u) << tag;
        total += params.count(tag);
    }
    EXPECT_EQ(total, params.count());
    const auto& known = branch_tags();
    for (const auto& tag : params.tags()) {
        EXPECT_NE(std::find(known.begin(), known.end(), tag), known.end()) << tag;
    }
}

TEST(InitParams, HandComputedCount)
{
    const auto cfg = tiny_config();   // nc 2, stem 4, channels 8/8/8, 1 block, head width 4
    const int backbone = conv_bn_count(3, 4, 3) + conv_bn_count(4, 4, 3) +   // stem
                         conv_bn_count(4, 8, 3) + 2 * conv_bn_count(8, 8, 3) +   // stage 1
                         2 * (conv_bn_count(8, 8, 3) + 2 * conv_bn_count(8, 8, 3));
    const int linear8 = 8 * 8 + 8;
    const int fusion = 3 * (2 * linear8 + 2 * 4 * linear8 + (16 * 8 + 8));
    const int neck = 3 * conv_bn_count(8, 8, 3);
    const int head = 3 * (conv_bn_count(8, 4, 3) + conv_bn_count(4, 4, 3) + (7 * 4 + 7));
    const auto params = init_params<float>(cfg, 1);
    EXPECT_EQ(params.count("backbone_rgb"), static_cast<std::size_t>(backbone));
    EXPECT_EQ(params.count("fusion"), static_cast<std::size_t>(fusion));
    EXPECT_EQ(params.count("neck"), static_cast<std::size_t>(neck));
    EXPECT_EQ(params.count("head_main"), static_cast<std::size_t>(head));
    EXPECT_EQ(params.count("head_aux_pre"), static_cast<std::size_t>(2 * head));
    EXPECT_EQ(params.count(), static_cast<std::size_t>(2 * backbone + fusion + neck + 4 * head));
    EXPECT_EQ(params.count(), 21316u);
}

TEST(InitParams, FanInUniformBounds)
{
    const auto params = init_params<double>(tiny_config(), 3);
    const auto& w = params["backbone_rgb.stage1.block0.conv1.conv.weight"];
    const double bound = 1.0 / std::sqrt(8.0 * 9.0);
    for (double v : w.data) {
        EXPECT_LE(std::abs(v), bound);
    }
}

TEST(InitParams, InvalidConfigRejected)
{
    auto cfg = tiny_config();
    cfg.channels = {8, 9, 8};
    EXPECT_THROW(init_params<float>(cfg, 1), ValidationError);
    cfg = tiny_config();
    cfg.num_classes = 0;
    EXPECT_THROW(init_params<float>(cfg, 1), ValidationError);
}
