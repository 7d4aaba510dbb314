#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace des {

/// The four network arms: plain detector, + global activation,
/// + global activation + segmentation activation, and the parallel variant
/// where the segmentation branch is trained but never multiplies features.
enum class Variant { Baseline, G, GS, GSParallel };

std::string to_string(Variant v);
/// Accepts "baseline", "G", "GS", "GS_parallel". Throws ConfigError.
Variant variant_from_string(std::string_view s);

inline bool has_global_activation(Variant v) { return v != Variant::Baseline; }
inline bool has_seg_branch(Variant v) { return v == Variant::GS || v == Variant::GSParallel; }

struct LrPhase {
    double lr = 1e-3;
    std::size_t iterations = 0;
    bool operator==(const LrPhase&) const = default;
};

struct NetConfig {
    std::size_t input_size = 64;
    std::size_t num_classes = 3;
    std::vector<std::size_t> backbone_widths = {16, 32, 64, 64};
    std::vector<std::size_t> source_strides = {8, 16, 32};
    double min_scale = 0.15;
    double max_scale = 0.75;

    std::size_t seg_atrous_width = 64;
    std::size_t seg_g_width = 128;
    bool z_sigmoid = false;

    Variant variant = Variant::GS;
    double alpha = 0.1;

    std::vector<LrPhase> schedule = {{1e-3, 2000}, {1e-4, 500}, {1e-5, 500}};
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t batch_size = 8;
    std::uint64_t seed = 1;
    double hflip_prob = 0.5;
    std::size_t checkpoint_every = 1000;

    double score_thresh = 0.01;
    double nms_iou = 0.45;
    std::size_t top_k = 200;

    std::size_t total_iterations() const;
    /// Learning rate for a 0-based iteration index.
    double lr_at(std::size_t iteration) const;
    /// Throws ConfigError naming the first offending field.
    void validate() const;

    bool operator==(const NetConfig&) const = default;
};

/// JSON mirroring the NetConfig fields. Missing fields keep their defaults;
/// unknown fields are rejected.
std::string config_to_json(const NetConfig& cfg);
NetConfig config_from_json(std::string_view text);
NetConfig load_config(const std::string& path);

}  // namespace des
