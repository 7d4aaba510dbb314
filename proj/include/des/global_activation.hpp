#pragma once

#include "des/core/parameters.hpp"
#include "des/nn/modules.hpp"

namespace des {

/// Channel gate for one prediction source layer: w1 maps C -> C/4, w2 maps
/// C/4 -> C. Both carry biases.
struct GlobalActivationParams {
    nn::Linear w1;
    nn::Linear w2;

    std::size_t channels() const { return w1.in_dim(); }
};

/// Requires C divisible by 4.
GlobalActivationParams make_global_activation(ParameterSet& params, const std::string& prefix, std::size_t channels,
                                              Rng& rng);

struct GlobalActivationVars {
    Var pooled;  // C x 1 x 1 spatial mean
    Var gate;    // s = sigmoid(w2 relu(w1 pooled)), C x 1 x 1
    Var out;     // x * s broadcast over H x W
};

GlobalActivationVars global_activate(Graph& graph, Var x, const GlobalActivationParams& params);
Tensor global_activate(const Tensor& x, const GlobalActivationParams& params);

}  // namespace des
