#include "des/train/objective.hpp"

#include "des/core/error.hpp"
#include "des/core/ops.hpp"

namespace des::train {

double total_loss(double det, double seg, double alpha) { return det + alpha * seg; }

Var total_loss(Var det, Var seg, double alpha) { return add(det, scale(seg, alpha)); }

SampleLoss sample_loss(Graph& graph, const detect::Network& net, const Tensor& image, const detect::MatchResult& match,
                       const SegGrid& grid) {
    detect::NetworkVars v = net.forward(graph, graph.constant(image));
    SampleLoss out;
    out.det = detect::det_loss(v.class_logits, v.box_preds, match);
    if (v.seg) {
        out.seg = seg_loss(v.seg->y, grid);
        out.total = total_loss(out.det, *out.seg, net.config().alpha);
    } else {
        out.total = out.det;
    }
    return out;
}

void sgd_step(ParameterSet& params, const std::vector<Tensor>& grads, std::vector<Tensor>& velocity, double lr,
              double momentum, double weight_decay) {
    auto& items = params.items();
    if (grads.size() != items.size()) {
        throw InvalidInput("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                           std::to_string(items.size()) + " parameters");
    }
    if (velocity.empty()) {
        for (const Parameter& p : items) velocity.emplace_back(p.value.shape(), 0.0);
    }
    if (velocity.size() != items.size()) throw InvalidInput("sgd_step: velocity does not match parameters");
    for (std::size_t i = 0; i < items.size(); ++i) {
        Tensor& p = items[i].value;
        if (grads[i].shape() != p.shape() || velocity[i].shape() != p.shape()) {
            throw InvalidInput("sgd_step: gradient for '" + items[i].name + "' has shape " +
                               shape_str(grads[i].shape()) + ", parameter is " + shape_str(p.shape()));
        }
        double* pv = p.raw();
        double* vv = velocity[i].raw();
        const double* gv = grads[i].raw();
        for (std::size_t k = 0; k < p.size(); ++k) {
            vv[k] = momentum * vv[k] + gv[k] + weight_decay * pv[k];
            pv[k] -= lr * vv[k];
        }
    }
}

}  // namespace des::train
