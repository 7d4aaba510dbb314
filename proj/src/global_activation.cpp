#include "des/global_activation.hpp"

#include "des/core/error.hpp"
#include "des/core/ops.hpp"

namespace des {

GlobalActivationParams make_global_activation(ParameterSet& params, const std::string& prefix, std::size_t channels,
                                              Rng& rng) {
    if (channels == 0 || channels % 4 != 0) {
        throw InvalidInput("global activation: channel count " + std::to_string(channels) + " not divisible by 4");
    }
    GlobalActivationParams p;
    p.w1 = nn::make_linear(params, prefix + ".w1", channels, channels / 4, rng);
    p.w2 = nn::make_linear(params, prefix + ".w2", channels / 4, channels, rng);
    return p;
}

GlobalActivationVars global_activate(Graph& graph, Var x, const GlobalActivationParams& params) {
    if (x.shape().size() != 3 || x.shape()[0] != params.channels()) {
        throw InvalidInput("global activation: expected " + std::to_string(params.channels()) +
                           " x H x W input, got " + shape_str(x.shape()));
    }
    GlobalActivationVars v;
    v.pooled = reduce_mean(x, {1, 2});
    v.gate = nn::sigmoid(params.w2(graph, nn::relu(params.w1(graph, v.pooled))));
    v.out = elementwise_mul(x, v.gate);
    return v;
}

Tensor global_activate(const Tensor& x, const GlobalActivationParams& params) {
    Graph g(false);
    return global_activate(g, g.constant(x), params).out.value();
}

}  // namespace des
