#include "des/seg_branch.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "des/core/error.hpp"
#include "des/core/ops.hpp"

namespace des {

SegBranchParams make_seg_branch(ParameterSet& params, const std::string& prefix, const SegBranchConfig& cfg, Rng& rng) {
    if (cfg.channels == 0 || cfg.atrous_width == 0 || cfg.g_width == 0 || cfg.num_classes == 0) {
        throw InvalidInput("seg branch: widths and class count must be positive");
    }
    SegBranchParams p;
    p.config = cfg;
    std::size_t in = cfg.channels;
    for (std::size_t i = 0; i < kAtrousDilations.size(); ++i) {
        p.atrous[i] = nn::make_conv(params, prefix + ".atrous" + std::to_string(i + 1),
                                    nn::same_conv3(in, cfg.atrous_width, kAtrousDilations[i]), rng);
        in = cfg.atrous_width;
    }
    p.g_conv = nn::make_conv(params, prefix + ".g", nn::conv1x1(cfg.atrous_width, cfg.g_width), rng);
    p.f_head = nn::make_conv(params, prefix + ".f_head", nn::conv1x1(cfg.g_width, cfg.num_classes + 1), rng);
    p.h_head = nn::make_conv(params, prefix + ".h_head", nn::conv1x1(cfg.g_width, cfg.channels), rng);
    return p;
}

namespace {

SegBranchVars branch(Graph& graph, Var x, const SegBranchParams& p, bool activate) {
    if (x.shape().size() != 3 || x.shape()[0] != p.config.channels) {
        throw InvalidInput("seg branch: expected " + std::to_string(p.config.channels) + " x H x W input, got " +
                           shape_str(x.shape()));
    }
    Var h = x;
    for (const nn::Conv& conv : p.atrous) h = nn::relu(conv(graph, h));
    SegBranchVars out;
    out.g = nn::relu(p.g_conv(graph, h));
    out.y = nn::softmax_channels(p.f_head(graph, out.g));
    out.z = p.h_head(graph, out.g);
    if (p.config.z_sigmoid) out.z = nn::sigmoid(out.z);
    out.x_act = activate ? elementwise_mul(x, out.z) : x;
    return out;
}

SegBranchOutput eager(const Tensor& x, const SegBranchParams& p, bool activate) {
    Graph g(false);
    SegBranchVars v = branch(g, g.constant(x), p, activate);
    return {v.y.value(), v.z.value(), v.x_act.value()};
}

}  // namespace

SegBranchVars seg_forward(Graph& graph, Var x, const SegBranchParams& params) { return branch(graph, x, params, true); }

SegBranchOutput seg_forward(const Tensor& x, const SegBranchParams& params) { return eager(x, params, true); }

SegBranchVars parallel_variant_forward(Graph& graph, Var x, const SegBranchParams& params) {
    return branch(graph, x, params, false);
}

SegBranchOutput parallel_variant_forward(const Tensor& x, const SegBranchParams& params) {
    return eager(x, params, false);
}

namespace {

void check_seg_inputs(const Tensor& y, const SegGrid& grid) {
    if (y.rank() != 3) throw InvalidInput("seg_loss: prediction must be (N+1) x H x W");
    if (y.dim(1) != grid.height || y.dim(2) != grid.width) {
        throw InvalidInput("seg_loss: prediction extent " + shape_str(y.shape()) + " does not match grid " +
                           std::to_string(grid.height) + "x" + std::to_string(grid.width));
    }
    const int classes = static_cast<int>(y.dim(0));
    for (int label : grid.labels) {
        if (label < 0 || label >= classes) {
            throw InvalidInput("seg_loss: label " + std::to_string(label) + " outside [0, " +
                               std::to_string(classes - 1) + "]");
        }
    }
}

constexpr double kMinProb = std::numeric_limits<double>::min();

}  // namespace

double seg_loss(const Tensor& y, const SegGrid& grid) {
    check_seg_inputs(y, grid);
    const std::size_t plane = grid.height * grid.width;
    double total = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
        total -= std::log(std::max(y[static_cast<std::size_t>(grid.labels[p]) * plane + p], kMinProb));
    }
    return total / static_cast<double>(plane);
}

Var seg_loss(Var y, const SegGrid& grid) {
    const double loss = seg_loss(y.value(), grid);
    auto labels = std::make_shared<std::vector<int>>(grid.labels);
    return y.graph().record("seg_loss", Tensor::scalar(loss), {y}, [labels](BackwardContext& ctx) {
        Tensor* g = ctx.grad_input(0);
        if (!g) return;
        const Tensor& yv = ctx.input(0);
        const std::size_t plane = labels->size();
        const double scale = ctx.grad_output()[0] / static_cast<double>(plane);
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t idx = static_cast<std::size_t>((*labels)[p]) * plane + p;
            (*g)[idx] -= scale / std::max(yv[idx], kMinProb);
        }
    });
}

}  // namespace des
