#include "des/train/gradient_suite.hpp"

#include <chrono>
#include <functional>

#include "des/core/gradcheck.hpp"
#include "des/core/ops.hpp"
#include "des/detect/matching.hpp"
#include "des/detect/network.hpp"
#include "des/global_activation.hpp"
#include "des/nn/layers.hpp"
#include "des/rasterize.hpp"
#include "des/seg_branch.hpp"
#include "des/train/objective.hpp"

namespace des::train {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Keeps inputs off the relu / maxpool kinks.
Tensor away_from_zero(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) {
        const double m = rng.uniform(0.05, 1.0);
        v = rng.bernoulli(0.5) ? m : -m;
    }
    return t;
}

void randomize(ParameterSet& params, Rng& rng) {
    for (Parameter& p : params.items()) {
        for (double& v : p.value.data()) v = rng.uniform(-0.5, 0.5);
    }
}

std::vector<Parameter*> all_params(ParameterSet& ps) {
    std::vector<Parameter*> out;
    for (Parameter& p : ps.items()) out.push_back(&p);
    return out;
}

Var project(Graph& g, Var y, const Tensor& w) { return sum(elementwise_mul(y, g.constant(w))); }

SegGrid random_grid(Rng& rng, std::size_t h, std::size_t w, int classes) {
    SegGrid grid{h, w, std::vector<int>(h * w)};
    for (int& l : grid.labels) l = rng.uniform_int(0, classes);
    return grid;
}

std::vector<BoundingBox> random_boxes(Rng& rng, int classes) {
    std::vector<BoundingBox> gt;
    const int n = rng.uniform_int(1, 3);
    for (int i = 0; i < n; ++i) {
        const double w = rng.uniform(0.1, 0.8), h = rng.uniform(0.1, 0.8);
        const double x = rng.uniform(0.0, 1.0 - w), y = rng.uniform(0.0, 1.0 - h);
        gt.push_back({rng.uniform_int(1, classes), x, y, x + w, y + h});
    }
    return gt;
}

using PointCheck = std::function<double(Rng&, std::uint64_t)>;

double check_inputs(const ScalarFn& f, const std::vector<Tensor>& in, std::uint64_t point, std::size_t coords = 0) {
    GradCheckOptions o;
    o.seed = point;
    o.max_coords = coords;
    return finite_difference_check(f, in, o).max_rel_error;
}

double check_params(const std::function<Var(Graph&)>& f, const std::vector<Parameter*>& ps, std::uint64_t point,
                    std::size_t coords) {
    GradCheckOptions o;
    o.seed = point;
    o.max_coords = coords;
    return finite_difference_check(f, ps, o).max_rel_error;
}

NetConfig tiny_net(Variant v) {
    NetConfig c;
    c.input_size = 32;
    c.backbone_widths = {4, 8, 8};
    c.source_strides = {8, 16};
    c.seg_atrous_width = 4;
    c.seg_g_width = 8;
    c.variant = v;
    return c;
}

std::vector<std::pair<std::string, PointCheck>> cases() {
    std::vector<std::pair<std::string, PointCheck>> out;
    out.emplace_back("dilated conv", [](Rng& rng, std::uint64_t pt) {
        double worst = 0.0;
        for (std::size_t d : {1u, 2u, 4u}) {
            nn::ConvSpec s = nn::same_conv3(2, 3, d);
            std::vector<Tensor> in = {random_tensor({2, 6, 6}, rng), random_tensor(s.weight_shape(), rng),
                                      random_tensor(s.bias_shape(), rng)};
            Tensor w = random_tensor({3, 6, 6}, rng);
            worst = std::max(worst, check_inputs([&](Graph& g, const std::vector<Var>& v) {
                return project(g, nn::conv2d(v[0], v[1], v[2], s), w);
            }, in, pt));
        }
        return worst;
    });
    out.emplace_back("linear", [](Rng& rng, std::uint64_t pt) {
        std::vector<Tensor> in = {random_tensor({6, 1, 1}, rng), random_tensor({3, 6}, rng), random_tensor({3}, rng)};
        Tensor w = random_tensor({3, 1, 1}, rng);
        return check_inputs([&](Graph& g, const std::vector<Var>& v) {
            return project(g, nn::linear(v[0], v[1], v[2]), w);
        }, in, pt);
    });
    out.emplace_back("relu", [](Rng& rng, std::uint64_t pt) {
        Tensor w = random_tensor({2, 3, 3}, rng);
        return check_inputs([&](Graph& g, const std::vector<Var>& v) { return project(g, nn::relu(v[0]), w); },
                            {away_from_zero({2, 3, 3}, rng)}, pt);
    });
    out.emplace_back("sigmoid", [](Rng& rng, std::uint64_t pt) {
        Tensor w = random_tensor({2, 3, 3}, rng);
        return check_inputs([&](Graph& g, const std::vector<Var>& v) { return project(g, nn::sigmoid(v[0]), w); },
                            {random_tensor({2, 3, 3}, rng, -4, 4)}, pt);
    });
    out.emplace_back("softmax", [](Rng& rng, std::uint64_t pt) {
        Tensor w = random_tensor({4, 3, 3}, rng);
        return check_inputs(
            [&](Graph& g, const std::vector<Var>& v) { return project(g, nn::softmax_channels(v[0]), w); },
            {random_tensor({4, 3, 3}, rng, -3, 3)}, pt);
    });
    out.emplace_back("softmax cross-entropy", [](Rng& rng, std::uint64_t pt) {
        std::vector<int> labels(6);
        for (int& l : labels) l = rng.uniform_int(-1, 3);
        return check_inputs(
            [&](Graph&, const std::vector<Var>& v) { return nn::softmax_cross_entropy(v[0], labels); },
            {random_tensor({6, 4}, rng, -3, 3)}, pt);
    });
    out.emplace_back("smooth L1", [](Rng& rng, std::uint64_t pt) {
        Tensor target = random_tensor({3, 4}, rng);
        Tensor pred = target;
        for (double& v : pred.data()) v += (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.1, 2.5);
        return check_inputs([&](Graph&, const std::vector<Var>& v) { return nn::smooth_l1(v[0], target); }, {pred},
                            pt);
    });
    out.emplace_back("global activation block", [](Rng& rng, std::uint64_t pt) {
        ParameterSet ps;
        GlobalActivationParams ga = make_global_activation(ps, "ga", 8, rng);
        randomize(ps, rng);
        Parameter x{"x", random_tensor({8, 4, 4}, rng, -2, 2)};
        Tensor w = random_tensor({8, 4, 4}, rng);
        std::vector<Parameter*> wrt = {&x};
        for (Parameter* p : all_params(ps)) wrt.push_back(p);
        return check_params([&](Graph& g) { return project(g, global_activate(g, g.param(x), ga).out, w); }, wrt, pt,
                            0);
    });
    out.emplace_back("segmentation branch", [](Rng& rng, std::uint64_t pt) {
        ParameterSet ps;
        SegBranchParams seg = make_seg_branch(ps, "seg", SegBranchConfig{4, 4, 8, 3, false}, rng);
        randomize(ps, rng);
        Parameter x{"x", random_tensor({4, 5, 5}, rng, 0.0, 1.0)};
        Tensor w = random_tensor({4, 5, 5}, rng);
        SegGrid grid = random_grid(rng, 5, 5, 3);
        std::vector<Parameter*> wrt = {&x};
        for (Parameter* p : all_params(ps)) wrt.push_back(p);
        return check_params([&](Graph& g) {
            SegBranchVars out = seg_forward(g, g.param(x), seg);
            return total_loss(project(g, out.x_act, w), seg_loss(out.y, grid), 0.1);
        }, wrt, pt, 40);
    });
    out.emplace_back("full objective", [](Rng& rng, std::uint64_t pt) {
        double worst = 0.0;
        for (Variant v : {Variant::GS, Variant::GSParallel}) {
            detect::Network net{tiny_net(v)};
            randomize(net.params(), rng);
            Tensor img = random_tensor({3, 32, 32}, rng, 0.0, 1.0);
            auto gt = random_boxes(rng, 3);
            detect::MatchResult m = detect::match_anchors(net.anchors(), gt);
            SegGrid grid = rasterize(gt, net.seg_grid_size(), net.seg_grid_size());
            worst = std::max(worst, check_params([&](Graph& g) {
                return sample_loss(g, net, img, m, grid).total;
            }, all_params(net.params()), pt, 6));
        }
        return worst;
    });
    return out;
}

}  // namespace

std::vector<GradientCase> run_gradient_suite(std::uint64_t seed, std::size_t points) {
    std::vector<GradientCase> out;
    std::uint64_t stream = 0;
    for (auto& [name, check] : cases()) {
        Rng rng(seed * 1000003 + stream++);
        GradientCase c{name, points, 0.0, 0.0};
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t p = 0; p < points; ++p) c.max_rel_error = std::max(c.max_rel_error, check(rng, p));
        c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(c);
    }
    return out;
}

}  // namespace des::train
