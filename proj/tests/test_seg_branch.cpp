#include <gtest/gtest.h>

#include <cmath>

#include "des/core/error.hpp"
#include "des/core/gradcheck.hpp"
#include "des/core/ops.hpp"
#include "des/seg_branch.hpp"
#include "test_util.hpp"

using namespace des;
using des::testing::random_tensor;

namespace {

struct Fixture {
    ParameterSet params;
    SegBranchParams seg;
    Fixture(SegBranchConfig cfg, std::uint64_t seed) {
        Rng rng(seed);
        seg = make_seg_branch(params, "seg", cfg, rng);
    }
};

SegBranchConfig small_config(std::size_t classes = 20) {
    return SegBranchConfig{8, 8, 16, classes, false};
}

SegGrid random_grid(Rng& rng, std::size_t H, std::size_t W, int classes) {
    SegGrid g{H, W, std::vector<int>(H * W)};
    for (int& l : g.labels) l = rng.uniform_int(0, classes);
    return g;
}

}  // namespace

namespace {

// L_det stand-in: anything downstream of x_act only.
Var det_proxy(Graph& g, Var x_act, const Tensor& weights) { return sum(elementwise_mul(x_act, g.constant(weights))); }

}  // namespace

TEST(SegBranch, ParameterLayout) {
    Fixture f(small_config(), 1);
    const std::size_t dil[] = {2, 2, 2, 4};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(f.seg.atrous[i].spec.dilation, dil[i]);
        EXPECT_EQ(f.seg.atrous[i].spec.padding, dil[i]);
        EXPECT_EQ(f.seg.atrous[i].spec.kernel, 3u);
    }
    EXPECT_EQ(f.seg.g_conv.spec.kernel, 1u);
    EXPECT_EQ(f.seg.f_head.spec.out_channels, 21u);
    EXPECT_EQ(f.seg.h_head.spec.out_channels, 8u);
    for (const Parameter& p : f.params.items()) {
        if (p.name.ends_with(".bias")) EXPECT_EQ(p.value, Tensor(p.value.shape(), 0.0)) << p.name;
    }
}

TEST(SegBranch, ZeroHHeadAnnihilates) {
    Fixture f(small_config(), 2);
    f.seg.h_head.weight->value.fill(0.0);
    Rng rng(3);
    SegBranchOutput out = seg_forward(random_tensor({8, 6, 6}, rng), f.seg);
    EXPECT_EQ(out.z, Tensor({8, 6, 6}, 0.0));
    for (double v : out.x_act.data()) EXPECT_EQ(v, 0.0);
}

TEST(SegBranch, ZeroFHeadGivesUniformPrediction) {
    Fixture f(small_config(), 4);
    f.seg.f_head.weight->value.fill(0.0);
    Rng rng(5);
    SegBranchOutput out = seg_forward(random_tensor({8, 5, 7}, rng), f.seg);
    for (double v : out.y.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 21.0);
}

TEST(SegBranch, PredictionNormalizedAndProductDecomposes) {
    Fixture f(small_config(20), 6);
    Rng rng(7);
    Tensor x = random_tensor({8, 6, 5}, rng, 0.0, 2.0);
    SegBranchOutput out = seg_forward(x, f.seg);
    ASSERT_EQ(out.y.shape(), (Shape{21, 6, 5}));
    for (std::size_t p = 0; p < 30; ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < 21; ++c) {
            EXPECT_GE(out.y[c * 30 + p], 0.0);
            EXPECT_LE(out.y[c * 30 + p], 1.0);
            s += out.y[c * 30 + p];
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(out.x_act[i], x[i] * out.z[i]);
}

TEST(SegBranch, ShapeContract) {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t C = 1 + rng.uniform_int(0, 5), H = 1 + rng.uniform_int(0, 9), W = 1 + rng.uniform_int(0, 9);
        const std::size_t N = 1 + rng.uniform_int(0, 20);
        Fixture f(SegBranchConfig{C, 3, 5, N, false}, trial);
        Tensor x = random_tensor({C, H, W}, rng);
        SegBranchOutput out = seg_forward(x, f.seg);
        EXPECT_EQ(out.x_act.shape(), x.shape());
        EXPECT_EQ(out.y.shape(), (Shape{N + 1, H, W}));
    }
}

TEST(SegBranch, RejectsChannelMismatch) {
    Fixture f(small_config(), 9);
    EXPECT_THROW(seg_forward(Tensor({7, 4, 4}), f.seg), InvalidInput);
}

TEST(SegBranch, SigmoidSwitchBoundsZ) {
    SegBranchConfig cfg = small_config();
    cfg.z_sigmoid = true;
    Fixture f(cfg, 10);
    Rng rng(11);
    SegBranchOutput out = seg_forward(random_tensor({8, 4, 4}, rng), f.seg);
    for (double v : out.z.data()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(ParallelVariant, PassesFeaturesThroughAndSharesPrediction) {
    Fixture f(small_config(), 12);
    Rng rng(13);
    Tensor x = random_tensor({8, 5, 5}, rng);
    SegBranchOutput par = parallel_variant_forward(x, f.seg);
    SegBranchOutput act = seg_forward(x, f.seg);
    EXPECT_EQ(par.x_act, x);
    EXPECT_EQ(par.y, act.y);
    EXPECT_EQ(par.z, act.z);
}

TEST(SegLoss, UniformPredictionIsLogOfClassCount) {
    Rng rng(14);
    Tensor y({21, 4, 4}, 1.0 / 21.0);
    EXPECT_NEAR(seg_loss(y, random_grid(rng, 4, 4, 20)), std::log(21.0), 1e-12);
    EXPECT_NEAR(std::log(21.0), 3.0445, 1e-4);
}

TEST(SegLoss, PerfectPredictionApproachesZero) {
    Rng rng(15);
    SegGrid grid = random_grid(rng, 3, 3, 4);
    Tensor logits({5, 3, 3}, 0.0);
    for (std::size_t p = 0; p < 9; ++p) logits[grid.labels[p] * 9 + p] = 50.0;
    EXPECT_LT(seg_loss(nn::softmax_channels(logits), grid), 1e-20);
}

TEST(SegLoss, MatchesSummationOracle) {
    Rng rng(16);
    Tensor y = nn::softmax_channels(random_tensor({6, 5, 4}, rng, -3, 3));
    SegGrid grid = random_grid(rng, 5, 4, 5);
    double oracle = 0.0;
    for (std::size_t h = 0; h < 5; ++h)
        for (std::size_t w = 0; w < 4; ++w) oracle += -std::log(y.at(grid.at(h, w), h, w));
    EXPECT_NEAR(seg_loss(y, grid), oracle / 20.0, 1e-12);
}

TEST(SegLoss, RejectsOutOfRangeLabel) {
    SegGrid grid{2, 2, {0, 1, 2, 6}};
    EXPECT_THROW(seg_loss(Tensor({6, 2, 2}, 1.0 / 6), grid), InvalidInput);
    EXPECT_THROW(seg_loss(Tensor({6, 3, 2}, 1.0 / 6), SegGrid{2, 2, {0, 0, 0, 0}}), InvalidInput);
}

TEST(SegLoss, GradientThroughSoftmax) {
    Rng rng(17);
    SegGrid grid = random_grid(rng, 3, 4, 3);
    const double err = finite_difference_check(
        [&](Graph&, Var x) { return seg_loss(nn::softmax_channels(x), grid); }, random_tensor({4, 3, 4}, rng, -2, 2),
        1e-5);
    EXPECT_LT(err, 1e-4);
}

TEST(SegBranchGradients, EndToEndFiniteDifferences) {
    SegBranchConfig cfg{4, 4, 8, 3, false};
    Rng rng(18);
    for (int point = 0; point < 5; ++point) {
        Fixture f(cfg, 100 + point);
        des::testing::randomize(f.params, rng);
        Parameter x{"x", random_tensor({4, 5, 5}, rng, 0.0, 1.0)};
        Tensor proj = random_tensor({4, 5, 5}, rng);
        SegGrid grid = random_grid(rng, 5, 5, 3);
        std::vector<Parameter*> wrt = {&x};
        for (Parameter& p : f.params.items()) wrt.push_back(&p);
        auto loss = [&](Graph& g) {
            SegBranchVars out = seg_forward(g, g.param(x), f.seg);
            return add(det_proxy(g, out.x_act, proj), scale(seg_loss(out.y, grid), 0.1));
        };
        GradCheckOptions opts;
        opts.max_coords = 40;
        opts.seed = point;
        EXPECT_LT(finite_difference_check(loss, wrt, opts).max_rel_error, 1e-4);
    }
}

TEST(SegBranchGradients, SupervisionPathsAreSeparate) {
    SegBranchConfig cfg{4, 4, 8, 3, false};
    Fixture f(cfg, 19);
    Rng rng(20);
    Tensor x = random_tensor({4, 5, 5}, rng, 0.0, 1.0);
    Tensor proj = random_tensor({4, 5, 5}, rng);
    SegGrid grid = random_grid(rng, 5, 5, 3);

    auto loss_value = [&](bool seg_only) {
        Graph g(false);
        SegBranchVars out = seg_forward(g, g.constant(x), f.seg);
        return seg_only ? seg_loss(out.y, grid).value().item() : det_proxy(g, out.x_act, proj).value().item();
    };
    // Analytic: L_seg does not reach the H head; the detection proxy does not reach F.
    {
        Graph g;
        SegBranchVars out = seg_forward(g, g.constant(x), f.seg);
        g.backward(seg_loss(out.y, grid));
        EXPECT_EQ(g.param_grad(*f.seg.h_head.weight), Tensor(f.seg.h_head.weight->value.shape(), 0.0));
    }
    {
        Graph g;
        SegBranchVars out = seg_forward(g, g.constant(x), f.seg);
        g.backward(det_proxy(g, out.x_act, proj));
        EXPECT_EQ(g.param_grad(*f.seg.f_head.weight), Tensor(f.seg.f_head.weight->value.shape(), 0.0));
    }
    // Numeric confirmation.
    const double eps = 1e-5;
    for (std::size_t i = 0; i < 6; ++i) {
        double& wh = f.seg.h_head.weight->value[i];
        const double h0 = wh;
        wh = h0 + eps;
        const double hp = loss_value(true);
        wh = h0 - eps;
        const double hm = loss_value(true);
        wh = h0;
        EXPECT_NEAR((hp - hm) / (2 * eps), 0.0, 1e-10);

        double& wf = f.seg.f_head.weight->value[i];
        const double f0 = wf;
        wf = f0 + eps;
        const double fp = loss_value(false);
        wf = f0 - eps;
        const double fm = loss_value(false);
        wf = f0;
        EXPECT_NEAR((fp - fm) / (2 * eps), 0.0, 1e-10);
    }
}
