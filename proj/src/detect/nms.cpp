#include "des/detect/nms.hpp"

#include <algorithm>
#include <numeric>

#include "des/core/error.hpp"

namespace des::detect {

std::vector<std::size_t> greedy_nms(const std::vector<CornerBox>& boxes, double iou_threshold) {
    std::vector<bool> suppressed(boxes.size(), false);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (suppressed[i]) continue;
        keep.push_back(i);
        for (std::size_t j = i + 1; j < boxes.size(); ++j) {
            if (!suppressed[j] && iou(boxes[i], boxes[j]) > iou_threshold) suppressed[j] = true;
        }
    }
    return keep;
}

std::vector<Detection> decode_nms(const Tensor& class_probs, const Tensor& box_preds,
                                  const std::vector<AnchorBox>& anchors, const DecodeParams& params) {
    const std::size_t A = anchors.size();
    if (class_probs.rank() != 2 || class_probs.dim(0) != A || box_preds.shape() != Shape{A, 4}) {
        throw InvalidInput("decode_nms: prediction extents do not match " + std::to_string(A) + " anchors");
    }
    const std::size_t K = class_probs.dim(1);
    std::vector<CornerBox> decoded(A);
    for (std::size_t a = 0; a < A; ++a) {
        const Offsets t = {box_preds[a * 4], box_preds[a * 4 + 1], box_preds[a * 4 + 2], box_preds[a * 4 + 3]};
        decoded[a] = clip_unit(decode(t, anchors[a]));
    }

    std::vector<Detection> all;
    for (std::size_t c = 1; c < K; ++c) {
        std::vector<std::size_t> cand;
        for (std::size_t a = 0; a < A; ++a) {
            if (class_probs[a * K + c] >= params.score_thresh) cand.push_back(a);
        }
        std::stable_sort(cand.begin(), cand.end(), [&](std::size_t x, std::size_t y) {
            return class_probs[x * K + c] > class_probs[y * K + c];
        });
        std::vector<CornerBox> boxes(cand.size());
        for (std::size_t i = 0; i < cand.size(); ++i) boxes[i] = decoded[cand[i]];
        for (std::size_t i : greedy_nms(boxes, params.nms_iou)) {
            all.push_back({static_cast<int>(c), class_probs[cand[i] * K + c], boxes[i]});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Detection& x, const Detection& y) { return x.score > y.score; });
    if (all.size() > params.top_k) all.resize(params.top_k);
    return all;
}

}  // namespace des::detect
