#pragma once

#include <optional>
#include <vector>

#include "des/core/parameters.hpp"
#include "des/data/dataset.hpp"
#include "des/detect/matching.hpp"
#include "des/detect/network.hpp"

namespace des::train {

/// L = L_det + alpha * L_seg.
double total_loss(double det, double seg, double alpha);
Var total_loss(Var det, Var seg, double alpha);

struct SampleLoss {
    Var det;
    std::optional<Var> seg;  // present when the network has a segmentation branch
    Var total;
};

/// Forward pass and objective for one sample. `grid` is the sample's weak
/// segmentation target at the network's seg resolution.
SampleLoss sample_loss(Graph& graph, const detect::Network& net, const Tensor& image,
                       const detect::MatchResult& match, const SegGrid& grid);

/// v <- momentum v + g + weight_decay p;  p <- p - lr v.
/// `velocity` starts empty (zero) and is sized on first use.
void sgd_step(ParameterSet& params, const std::vector<Tensor>& grads, std::vector<Tensor>& velocity, double lr,
              double momentum = 0.9, double weight_decay = 5e-4);

}  // namespace des::train
