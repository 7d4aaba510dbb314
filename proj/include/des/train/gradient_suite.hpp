#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace des::train {

struct GradientCase {
    std::string name;
    std::size_t points = 0;
    double max_rel_error = 0.0;  // worst over all points
    double seconds = 0.0;
};

/// Central finite-difference checks (eps 1e-5) of every differentiable piece:
/// dilated conv, linear, relu, sigmoid, channel softmax, softmax
/// cross-entropy, smooth L1, global activation block, segmentation branch end
/// to end, and the full detector objective L = L_det + alpha L_seg. Each case
/// is evaluated at `points` random inputs drawn from `seed`.
std::vector<GradientCase> run_gradient_suite(std::uint64_t seed = 1, std::size_t points = 5);

}  // namespace des::train
