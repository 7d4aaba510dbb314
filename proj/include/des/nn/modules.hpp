#pragma once

#include <string>

#include "des/core/parameters.hpp"
#include "des/core/random.hpp"
#include "des/nn/layers.hpp"

namespace des::nn {

/// Convolution with its own weight and bias, Xavier-initialized, zero bias.
struct Conv {
    ConvSpec spec;
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;

    Var operator()(Graph& g, Var x) const { return conv2d(x, g.param(*weight), g.param(*bias), spec); }
};

struct Linear {
    Parameter* weight = nullptr;  // out x in
    Parameter* bias = nullptr;

    std::size_t in_dim() const { return weight->value.dim(1); }
    std::size_t out_dim() const { return weight->value.dim(0); }
    Var operator()(Graph& g, Var x) const { return linear(x, g.param(*weight), g.param(*bias)); }
};

Conv make_conv(ParameterSet& params, const std::string& name, const ConvSpec& spec, Rng& rng);
Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in_dim, std::size_t out_dim, Rng& rng);

}  // namespace des::nn
