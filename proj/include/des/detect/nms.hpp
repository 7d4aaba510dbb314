#pragma once

#include <vector>

#include "des/core/tensor.hpp"
#include "des/detect/box_ops.hpp"

namespace des::detect {

struct Detection {
    int class_id = 0;
    double score = 0.0;
    CornerBox box;
};

struct DecodeParams {
    double score_thresh = 0.01;
    double nms_iou = 0.45;
    std::size_t top_k = 200;
};

/// Greedy NMS over candidates already sorted by descending score: keeps a box
/// unless a kept box overlaps it with IoU > threshold. Returns kept indices.
std::vector<std::size_t> greedy_nms(const std::vector<CornerBox>& boxes, double iou_threshold);

/// Decodes offsets against anchors, clips to [0, 1], then per foreground
/// class drops scores below score_thresh and runs greedy NMS. The survivors
/// of all classes are ranked by score and cut to top_k. Equal scores keep
/// class order, then anchor order.
std::vector<Detection> decode_nms(const Tensor& class_probs, const Tensor& box_preds,
                                  const std::vector<AnchorBox>& anchors, const DecodeParams& params = {});

}  // namespace des::detect
