#pragma once

#include <functional>
#include <string>
#include <vector>

#include "des/config.hpp"
#include "des/data/dataset.hpp"

namespace des::train {

struct AblationArm {
    std::string label;
    Variant variant = Variant::Baseline;
    double alpha = 0.0;
};

/// baseline, +G, +G+S (alpha 0, 0.1, 1.0), +G+S parallel (alpha 0.1).
std::vector<AblationArm> default_arms();

struct ArmResult {
    AblationArm arm;
    std::vector<double> maps;  // one per successful seed
    double mean = 0.0;
    double sd = 0.0;           // sample standard deviation (0 for one run)
    std::vector<std::string> errors;
};

struct AblationOptions {
    std::size_t seeds = 5;
    std::size_t threads = 0;
    /// Called after every run with (arm, seed index, mAP or NaN on failure).
    std::function<void(const AblationArm&, std::size_t, double)> on_run;
};

/// Trains and evaluates every arm for seeds base.seed, base.seed + 1, ...
/// A failing run is recorded in that arm's errors; other runs continue.
std::vector<ArmResult> ablate(const NetConfig& base, const data::Dataset& train_set, const data::Dataset& test_set,
                              const std::vector<AblationArm>& arms, const AblationOptions& opts = {});

std::string ablation_table(const std::vector<ArmResult>& results);
std::string ablation_json(const std::vector<ArmResult>& results);

}  // namespace des::train
