#pragma once

#include <cmath>
#include <vector>

#include "des/global_activation.hpp"

namespace des::testing {

// Fully unrolled scalar evaluation of sigmoid(W2 relu(W1 mean(x) + b1) + b2).
inline std::vector<double> unrolled_gate(const Tensor& x, const GlobalActivationParams& p) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), R = C / 4;
    std::vector<double> z(C), hidden(R), s(C);
    for (std::size_t i = 0; i < C; ++i) {
        double acc = 0.0;
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w < W; ++w) acc += x.at(i, h, w);
        z[i] = acc / static_cast<double>(H * W);
    }
    for (std::size_t r = 0; r < R; ++r) {
        double acc = p.w1.bias->value[r];
        for (std::size_t i = 0; i < C; ++i) acc += p.w1.weight->value[r * C + i] * z[i];
        hidden[r] = acc > 0 ? acc : 0.0;
    }
    for (std::size_t i = 0; i < C; ++i) {
        double acc = p.w2.bias->value[i];
        for (std::size_t r = 0; r < R; ++r) acc += p.w2.weight->value[i * R + r] * hidden[r];
        s[i] = 1.0 / (1.0 + std::exp(-acc));
    }
    return s;
}

}  // namespace des::testing
