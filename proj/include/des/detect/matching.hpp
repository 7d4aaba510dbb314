#pragma once

#include <span>
#include <vector>

#include "des/boxes.hpp"
#include "des/core/graph.hpp"
#include "des/detect/box_ops.hpp"

namespace des::detect {

struct MatchResult {
    std::vector<int> gt_index;   // per anchor: matched ground-truth index, -1 for background
    std::vector<int> labels;     // per anchor: class id, 0 for background
    Tensor targets;              // A x 4 encoded offsets (zero rows for background)
    std::size_t num_positives = 0;

    std::size_t size() const { return labels.size(); }
};

/// SSD matching. First a greedy bipartite pass: repeatedly take the highest
/// IoU among (unmatched ground truth, unassigned anchor) pairs, so every
/// ground-truth box owns at least one anchor. Then every remaining anchor
/// whose best IoU is >= threshold is assigned to that best box. Ties go to
/// the lower index.
MatchResult match_anchors(std::span<const AnchorBox> anchors, std::span<const BoundingBox> gt,
                          double iou_threshold = 0.5);

inline constexpr double kNegativeRatio = 3.0;

/// Multibox loss: (softmax cross-entropy over positives and mined negatives
/// + smooth-L1 over positive offsets) / max(1, positives). Negatives are the
/// background anchors with the highest background cross-entropy, at most
/// ratio * max(1, positives) of them.
Var det_loss(Var class_logits, Var box_preds, const MatchResult& match, double neg_ratio = kNegativeRatio);
double det_loss(const Tensor& class_logits, const Tensor& box_preds, const MatchResult& match,
                double neg_ratio = kNegativeRatio);

/// Anchor indices selected as hard negatives, in descending loss order.
std::vector<std::size_t> mine_hard_negatives(const Tensor& class_logits, const MatchResult& match, double neg_ratio);

}  // namespace des::detect
