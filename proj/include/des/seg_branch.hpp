#pragma once

#include <array>
#include <cstddef>

#include "des/core/parameters.hpp"
#include "des/nn/modules.hpp"
#include "des/rasterize.hpp"

namespace des {

struct SegBranchConfig {
    std::size_t channels = 64;       // C, channels of the tapped feature X
    std::size_t atrous_width = 64;   // width of the dilated 3x3 stack
    std::size_t g_width = 128;       // C', channels of G(X)
    std::size_t num_classes = 3;     // N; the prediction has N + 1 channels
    bool z_sigmoid = false;          // squash Z before X * Z (off: literal X' = X * Z)
};

/// Dilation schedule of the four 3x3 atrous convolutions.
inline constexpr std::array<std::size_t, 4> kAtrousDilations = {2, 2, 2, 4};

/// Weights of the segmentation branch: four atrous 3x3 convs (padding equal to
/// dilation, each followed by ReLU), a 1x1 conv producing G(X), then two 1x1
/// heads on G(X): F to N + 1 logits and H back to C channels.
struct SegBranchParams {
    SegBranchConfig config;
    std::array<nn::Conv, 4> atrous;
    nn::Conv g_conv;
    nn::Conv f_head;
    nn::Conv h_head;
};

SegBranchParams make_seg_branch(ParameterSet& params, const std::string& prefix, const SegBranchConfig& cfg, Rng& rng);

struct SegBranchVars {
    Var g;      // G(X)
    Var y;      // softmax prediction, (N+1) x H x W
    Var z;      // activation map, C x H x W
    Var x_act;  // X' = X * Z (or X in the parallel variant)
};

struct SegBranchOutput {
    Tensor y;
    Tensor z;
    Tensor x_act;
};

/// Y = softmax(F(G(X))), Z = H(G(X)), X' = X * Z.
SegBranchVars seg_forward(Graph& graph, Var x, const SegBranchParams& params);
SegBranchOutput seg_forward(const Tensor& x, const SegBranchParams& params);

/// Same Y and Z, but X' = X: segmentation is supervised and never activates.
SegBranchVars parallel_variant_forward(Graph& graph, Var x, const SegBranchParams& params);
SegBranchOutput parallel_variant_forward(const Tensor& x, const SegBranchParams& params);

/// -(1/HW) sum_{h,w} log y[g(h,w), h, w].
Var seg_loss(Var y, const SegGrid& grid);
double seg_loss(const Tensor& y, const SegGrid& grid);

}  // namespace des
