#include "des/detect/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "des/core/error.hpp"
#include "des/core/ops.hpp"
#include "des/nn/layers.hpp"

namespace des::detect {

MatchResult match_anchors(std::span<const AnchorBox> anchors, std::span<const BoundingBox> gt, double iou_threshold) {
    if (anchors.empty()) throw InvalidInput("match_anchors: no anchors");
    const std::size_t A = anchors.size(), G = gt.size();
    MatchResult m;
    m.gt_index.assign(A, -1);
    m.labels.assign(A, 0);
    m.targets = Tensor({A, 4}, 0.0);
    if (G == 0) return m;

    std::vector<double> overlap(A * G);
    for (std::size_t a = 0; a < A; ++a) {
        const CornerBox ac = anchors[a].corners();
        for (std::size_t g = 0; g < G; ++g) overlap[a * G + g] = iou(ac, corners(gt[g]));
    }

    std::vector<bool> gt_done(G, false);
    for (std::size_t round = 0; round < std::min(A, G); ++round) {
        double best = -1.0;
        std::size_t best_a = 0, best_g = 0;
        for (std::size_t a = 0; a < A; ++a) {
            if (m.gt_index[a] >= 0) continue;
            for (std::size_t g = 0; g < G; ++g) {
                if (gt_done[g]) continue;
                if (overlap[a * G + g] > best) {
                    best = overlap[a * G + g];
                    best_a = a;
                    best_g = g;
                }
            }
        }
        m.gt_index[best_a] = static_cast<int>(best_g);
        gt_done[best_g] = true;
    }

    for (std::size_t a = 0; a < A; ++a) {
        if (m.gt_index[a] >= 0) continue;
        double best = -1.0;
        std::size_t best_g = 0;
        for (std::size_t g = 0; g < G; ++g) {
            if (overlap[a * G + g] > best) {
                best = overlap[a * G + g];
                best_g = g;
            }
        }
        if (best >= iou_threshold) m.gt_index[a] = static_cast<int>(best_g);
    }

    for (std::size_t a = 0; a < A; ++a) {
        if (m.gt_index[a] < 0) continue;
        const BoundingBox& box = gt[static_cast<std::size_t>(m.gt_index[a])];
        m.labels[a] = box.class_id;
        const Offsets t = encode(corners(box), anchors[a]);
        for (std::size_t k = 0; k < 4; ++k) m.targets[a * 4 + k] = t[k];
        ++m.num_positives;
    }
    return m;
}

std::vector<std::size_t> mine_hard_negatives(const Tensor& logits, const MatchResult& match, double neg_ratio) {
    const std::size_t A = logits.dim(0), K = logits.dim(1);
    std::vector<std::pair<double, std::size_t>> neg;
    for (std::size_t a = 0; a < A; ++a) {
        if (match.labels[a] != 0) continue;
        const double* row = logits.raw() + a * K;
        const double mx = *std::max_element(row, row + K);
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
        neg.emplace_back(mx + std::log(z) - row[0], a);
    }
    const auto quota = static_cast<std::size_t>(
        neg_ratio * static_cast<double>(std::max<std::size_t>(1, match.num_positives)));
    const std::size_t keep = std::min(quota, neg.size());
    std::stable_sort(neg.begin(), neg.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    std::vector<std::size_t> out(keep);
    for (std::size_t i = 0; i < keep; ++i) out[i] = neg[i].second;
    return out;
}

namespace {

void check_det_inputs(const Shape& logits, const Shape& boxes, const MatchResult& match) {
    if (match.size() == 0) throw InvalidInput("det_loss: zero anchors");
    if (logits.size() != 2 || logits[0] != match.size() || logits[1] < 2) {
        throw InvalidInput("det_loss: class logits " + shape_str(logits) + " do not match " +
                           std::to_string(match.size()) + " anchors");
    }
    if (boxes != Shape{match.size(), 4}) {
        throw InvalidInput("det_loss: box predictions " + shape_str(boxes) + " do not match anchor count");
    }
}

}  // namespace

Var det_loss(Var class_logits, Var box_preds, const MatchResult& match, double neg_ratio) {
    check_det_inputs(class_logits.shape(), box_preds.shape(), match);
    std::vector<int> conf_labels(match.size(), -1);
    std::vector<std::size_t> positives;
    for (std::size_t a = 0; a < match.size(); ++a) {
        if (match.labels[a] > 0) {
            conf_labels[a] = match.labels[a];
            positives.push_back(a);
        }
    }
    for (std::size_t a : mine_hard_negatives(class_logits.value(), match, neg_ratio)) conf_labels[a] = 0;

    Var total = nn::softmax_cross_entropy(class_logits, conf_labels);
    if (!positives.empty()) {
        Tensor tgt({positives.size(), 4});
        for (std::size_t i = 0; i < positives.size(); ++i) {
            for (std::size_t k = 0; k < 4; ++k) tgt[i * 4 + k] = match.targets[positives[i] * 4 + k];
        }
        total = add(total, nn::smooth_l1(nn::gather_rows(box_preds, positives), tgt));
    }
    return scale(total, 1.0 / static_cast<double>(std::max<std::size_t>(1, positives.size())));
}

double det_loss(const Tensor& class_logits, const Tensor& box_preds, const MatchResult& match, double neg_ratio) {
    Graph g(false);
    return det_loss(g.constant(class_logits), g.constant(box_preds), match, neg_ratio).value().item();
}

}  // namespace des::detect
