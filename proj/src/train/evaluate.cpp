#include "des/train/evaluate.hpp"

#include <algorithm>
#include <chrono>

#include <json.hpp>

#include "des/core/error.hpp"

namespace des::train {

double average_precision(const std::vector<bool>& tp, const std::vector<bool>& fp, std::size_t num_gt) {
    if (num_gt == 0) return 0.0;
    const std::size_t n = tp.size();
    std::vector<double> rec(n + 2, 0.0), prec(n + 2, 0.0);
    std::size_t ctp = 0, cfp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ctp += tp[i];
        cfp += fp[i];
        rec[i + 1] = static_cast<double>(ctp) / static_cast<double>(num_gt);
        prec[i + 1] = ctp + cfp ? static_cast<double>(ctp) / static_cast<double>(ctp + cfp) : 0.0;
    }
    rec[n + 1] = 1.0;
    prec[n + 1] = 0.0;
    for (std::size_t i = n + 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
    double ap = 0.0;
    for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
        if (rec[i + 1] != rec[i]) ap += (rec[i + 1] - rec[i]) * prec[i + 1];
    }
    return ap;
}

EvalReport evaluate_detections(const std::vector<std::vector<detect::Detection>>& detections,
                               const std::vector<std::vector<BoundingBox>>& gt, const data::ClassTable& classes,
                               double iou_threshold) {
    if (detections.size() != gt.size()) {
        throw InvalidInput("evaluate: " + std::to_string(detections.size()) + " detection lists for " +
                           std::to_string(gt.size()) + " images");
    }
    EvalReport report;
    report.images = gt.size();
    report.iou_threshold = iou_threshold;
    report.detections = detections;
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 1; c < classes.size(); ++c) {
        const int cls = static_cast<int>(c);
        ClassAP entry;
        entry.class_id = cls;
        entry.name = classes[c];

        struct Ranked {
            double score;
            std::size_t image;
            detect::CornerBox box;
        };
        std::vector<Ranked> ranked;
        std::vector<std::vector<bool>> used(gt.size());
        for (std::size_t i = 0; i < gt.size(); ++i) {
            used[i].assign(gt[i].size(), false);
            for (const BoundingBox& b : gt[i]) entry.num_gt += (b.class_id == cls && !b.difficult);
            for (const detect::Detection& d : detections[i]) {
                if (d.class_id == cls) ranked.push_back({d.score, i, d.box});
            }
        }
        entry.num_det = ranked.size();
        std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

        std::vector<bool> tp, fp;
        for (const Ranked& r : ranked) {
            double best = -1.0;
            std::size_t best_j = 0;
            for (std::size_t j = 0; j < gt[r.image].size(); ++j) {
                const BoundingBox& g = gt[r.image][j];
                if (g.class_id != cls) continue;
                const double v = detect::iou(r.box, detect::corners(g));
                if (v > best) {
                    best = v;
                    best_j = j;
                }
            }
            if (best >= iou_threshold) {
                if (gt[r.image][best_j].difficult) continue;
                if (!used[r.image][best_j]) {
                    used[r.image][best_j] = true;
                    tp.push_back(true);
                    fp.push_back(false);
                } else {
                    tp.push_back(false);
                    fp.push_back(true);
                }
            } else {
                tp.push_back(false);
                fp.push_back(true);
            }
        }
        if (entry.num_gt > 0) {
            entry.ap = average_precision(tp, fp, entry.num_gt);
            sum += *entry.ap;
            ++counted;
        }
        report.per_class.push_back(entry);
    }
    report.map = counted ? sum / static_cast<double>(counted) : 0.0;
    return report;
}

EvalReport evaluate(const detect::Network& net, const std::vector<data::Sample>& samples,
                    const data::ClassTable& classes) {
    if (classes.size() != net.config().num_classes + 1) {
        throw InvalidInput("evaluate: class table has " + std::to_string(classes.size() - 1) +
                           " object classes, network predicts " + std::to_string(net.config().num_classes));
    }
    std::vector<std::vector<detect::Detection>> dets;
    std::vector<std::vector<BoundingBox>> gt;
    const auto t0 = std::chrono::steady_clock::now();
    for (const data::Sample& s : samples) dets.push_back(net.detect(s.image));
    const auto t1 = std::chrono::steady_clock::now();
    for (const data::Sample& s : samples) gt.push_back(s.boxes);
    EvalReport r = evaluate_detections(dets, gt, classes);
    if (!samples.empty()) {
        r.ms_per_image = std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(samples.size());
    }
    return r;
}

std::string report_json(const EvalReport& r, bool include_detections) {
    using nlohmann::json;
    json j;
    j["protocol"] = "VOC-style AP at IoU " + std::to_string(r.iou_threshold).substr(0, 4) +
                    ", all-points interpolation, difficult boxes excluded, equal scores keep image order";
    j["mAP"] = r.map;
    j["images"] = r.images;
    j["ms_per_image"] = r.ms_per_image;
    json per = json::array();
    for (const ClassAP& c : r.per_class) {
        json e{{"class_id", c.class_id}, {"name", c.name}, {"num_gt", c.num_gt}, {"num_det", c.num_det}};
        e["ap"] = c.ap ? json(*c.ap) : json(nullptr);
        per.push_back(e);
    }
    j["per_class"] = per;
    if (include_detections) {
        json all = json::array();
        for (const auto& img : r.detections) {
            json list = json::array();
            for (const auto& d : img) {
                list.push_back({{"class_id", d.class_id},
                                {"score", d.score},
                                {"box", {d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax}}});
            }
            all.push_back(list);
        }
        j["detections"] = all;
    }
    return j.dump(2);
}

}  // namespace des::train
