#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "des/core/graph.hpp"
#include "des/core/random.hpp"

namespace des::nn {

struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t dilation = 1;

    /// floor((n + 2p - d(k-1) - 1)/s) + 1; throws InvalidInput if < 1.
    std::size_t output_extent(std::size_t n) const;
    Shape weight_shape() const { return {out_channels, in_channels, kernel, kernel}; }
    Shape bias_shape() const { return {out_channels}; }
};

/// 3x3 kernel whose padding equals its dilation, so H x W is preserved.
ConvSpec same_conv3(std::size_t in, std::size_t out, std::size_t dilation = 1);
ConvSpec conv1x1(std::size_t in, std::size_t out);

/// Cross-correlation with holes over a C x H x W input (no kernel flip):
///   out[o,h,w] = b[o] + sum_{c,i,j} W[o,c,i,j] * x[c, h*s - p + i*d, w*s - p + j*d]
/// with zero padding.
Var conv2d(Var x, Var weight, Var bias, const ConvSpec& spec);
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvSpec& spec);

/// y = W x + b. x is a vector ([in] or [in,1,1]); the output keeps x's rank.
Var linear(Var x, Var weight, Var bias);

Var relu(Var x);
Var sigmoid(Var x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Per-location softmax across channels of a C x H x W map (C >= 2).
Var softmax_channels(Var x);
Tensor softmax_channels(const Tensor& x);

/// 2x2 window, stride 2. H and W must be even.
Var maxpool2(Var x);
Tensor maxpool2(const Tensor& x);

/// sum_i 0.5 d^2 if |d| < 1 else |d| - 0.5, d = pred - target.
Var smooth_l1(Var pred, const Tensor& target);
double smooth_l1(const Tensor& pred, const Tensor& target);

/// Rows of an M x D matrix, in the order given.
Var gather_rows(Var x, std::span<const std::size_t> rows);

/// Sum over rows of -log softmax(logits[r])[labels[r]] for an M x K logits
/// matrix. Rows with a negative label are skipped.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

/// Xavier/Glorot uniform, limit sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace des::nn
