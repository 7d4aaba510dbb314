#pragma once

#include <optional>
#include <string>
#include <vector>

#include "des/boxes.hpp"
#include "des/data/dataset.hpp"
#include "des/detect/network.hpp"

namespace des::train {

struct ClassAP {
    int class_id = 0;
    std::string name;
    std::size_t num_gt = 0;   // non-difficult ground-truth boxes
    std::size_t num_det = 0;
    std::optional<double> ap;  // absent when the class has no ground truth
};

struct EvalReport {
    std::vector<ClassAP> per_class;
    double map = 0.0;
    double ms_per_image = 0.0;
    std::size_t images = 0;
    double iou_threshold = 0.5;
    std::vector<std::vector<detect::Detection>> detections;  // per image
};

/// Area under the precision envelope (all-points rule). `tp` flags are in
/// ranked order; `num_gt` is the recall denominator.
double average_precision(const std::vector<bool>& tp, const std::vector<bool>& fp, std::size_t num_gt);

/// VOC protocol per class: detections ranked by descending score (equal
/// scores keep image order, then per-image list order), each greedily matched
/// to the highest-IoU ground truth of its class in its image. IoU >= the
/// threshold with an unused box is a true positive; with a used box, or below
/// threshold, a false positive. Matches to difficult boxes count as neither.
/// mAP averages the classes that have at least one non-difficult box.
EvalReport evaluate_detections(const std::vector<std::vector<detect::Detection>>& detections,
                               const std::vector<std::vector<BoundingBox>>& ground_truth,
                               const data::ClassTable& classes, double iou_threshold = 0.5);

/// Runs the network on every sample (timed), then evaluate_detections.
EvalReport evaluate(const detect::Network& net, const std::vector<data::Sample>& samples,
                    const data::ClassTable& classes);

/// JSON report; detections are included when requested.
std::string report_json(const EvalReport& report, bool include_detections = false);

}  // namespace des::train
