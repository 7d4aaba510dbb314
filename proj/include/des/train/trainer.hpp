#pragma once

#include <functional>
#include <string>
#include <vector>

#include "des/config.hpp"
#include "des/data/dataset.hpp"
#include "des/detect/network.hpp"

namespace des::train {

struct LossRecord {
    std::size_t iteration = 0;  // 1-based
    double det = 0.0;
    double seg = 0.0;  // 0 without a segmentation branch
    double total = 0.0;
};

struct TrainOptions {
    /// Directory for loss.csv and checkpoints; empty writes nothing.
    std::string out_dir;
    /// Worker threads for the per-sample loop; 0 reads DES_THREADS (default 1).
    std::size_t threads = 0;
    std::function<void(const LossRecord&)> on_iteration;
};

struct TrainResult {
    detect::Network net;
    std::vector<LossRecord> curve;
};

/// Minibatch SGD over the schedule in `cfg`. Each epoch visits the data in a
/// seeded permutation; each sample is flipped horizontally with probability
/// cfg.hflip_prob. The batch loss is the mean of per-sample losses, and
/// gradients are summed in sample order whatever the thread count, so runs
/// are reproducible bit for bit. Writes loss.csv, ckpt_<iteration> every
/// cfg.checkpoint_every iterations, and final.ckpt when out_dir is set.
/// A non-finite loss throws NumericError naming the first non-finite node.
TrainResult train(const NetConfig& cfg, const std::vector<data::Sample>& data, const TrainOptions& opts = {});

std::string loss_csv_header();
std::string loss_csv_row(const LossRecord& r);

/// DES_THREADS if set to a positive integer, otherwise 1.
std::size_t default_threads();

/// Moving average of `values` over `window` trailing entries (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace des::train
