#include "des/nn/modules.hpp"

namespace des::nn {

Conv make_conv(ParameterSet& params, const std::string& name, const ConvSpec& spec, Rng& rng) {
    Conv c;
    c.spec = spec;
    c.weight = &params.add(name + ".weight", spec.weight_shape());
    c.bias = &params.add(name + ".bias", spec.bias_shape());
    const std::size_t taps = spec.kernel * spec.kernel;
    xavier_uniform(c.weight->value, spec.in_channels * taps, spec.out_channels * taps, rng);
    return c;
}

Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in_dim, std::size_t out_dim, Rng& rng) {
    Linear l;
    l.weight = &params.add(name + ".weight", {out_dim, in_dim});
    l.bias = &params.add(name + ".bias", {out_dim});
    xavier_uniform(l.weight->value, in_dim, out_dim, rng);
    return l;
}

}  // namespace des::nn
