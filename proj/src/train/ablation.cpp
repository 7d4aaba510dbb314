#include "des/train/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "des/train/evaluate.hpp"
#include "des/train/trainer.hpp"

namespace des::train {

std::vector<AblationArm> default_arms() {
    return {{"baseline", Variant::Baseline, 0.0},       {"+G", Variant::G, 0.0},
            {"+G+S (alpha=0.0)", Variant::GS, 0.0},     {"+G+S (alpha=0.1)", Variant::GS, 0.1},
            {"+G+S (alpha=1.0)", Variant::GS, 1.0},     {"+G+S parallel", Variant::GSParallel, 0.1}};
}

std::vector<ArmResult> ablate(const NetConfig& base, const data::Dataset& train_set, const data::Dataset& test_set,
                              const std::vector<AblationArm>& arms, const AblationOptions& opts) {
    std::vector<ArmResult> out;
    for (const AblationArm& arm : arms) {
        ArmResult r;
        r.arm = arm;
        for (std::size_t s = 0; s < opts.seeds; ++s) {
            NetConfig cfg = base;
            cfg.variant = arm.variant;
            cfg.alpha = arm.alpha;
            cfg.seed = base.seed + s;
            double map = std::numeric_limits<double>::quiet_NaN();
            try {
                TrainOptions topts;
                topts.threads = opts.threads;
                TrainResult tr = train(cfg, train_set.samples, topts);
                map = evaluate(tr.net, test_set.samples, test_set.classes).map;
                r.maps.push_back(map);
            } catch (const std::exception& e) {
                r.errors.push_back("seed " + std::to_string(cfg.seed) + ": " + e.what());
            }
            if (opts.on_run) opts.on_run(arm, s, map);
        }
        if (!r.maps.empty()) {
            double sum = 0.0;
            for (double m : r.maps) sum += m;
            r.mean = sum / static_cast<double>(r.maps.size());
            if (r.maps.size() > 1) {
                double ss = 0.0;
                for (double m : r.maps) ss += (m - r.mean) * (m - r.mean);
                r.sd = std::sqrt(ss / static_cast<double>(r.maps.size() - 1));
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string ablation_table(const std::vector<ArmResult>& results) {
    std::string s = "arm                    runs   mAP (mean +- sd, points)\n";
    for (const ArmResult& r : results) {
        char line[160];
        if (r.maps.empty()) {
            std::snprintf(line, sizeof line, "%-22s %4zu   failed\n", r.arm.label.c_str(), r.maps.size());
        } else {
            std::snprintf(line, sizeof line, "%-22s %4zu   %6.2f +- %.2f\n", r.arm.label.c_str(), r.maps.size(),
                          100.0 * r.mean, 100.0 * r.sd);
        }
        s += line;
        for (const std::string& e : r.errors) s += "    error: " + e + "\n";
    }
    return s;
}

std::string ablation_json(const std::vector<ArmResult>& results) {
    using nlohmann::json;
    json arr = json::array();
    for (const ArmResult& r : results) {
        arr.push_back({{"arm", r.arm.label},
                       {"variant", to_string(r.arm.variant)},
                       {"alpha", r.arm.alpha},
                       {"maps", r.maps},
                       {"mean", r.mean},
                       {"sd", r.sd},
                       {"errors", r.errors}});
    }
    return json{{"arms", arr}}.dump(2);
}

}  // namespace des::train
