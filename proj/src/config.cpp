#include "des/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "des/core/error.hpp"

namespace des {

using nlohmann::json;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Baseline: return "baseline";
        case Variant::G: return "G";
        case Variant::GS: return "GS";
        case Variant::GSParallel: return "GS_parallel";
    }
    return "?";
}

Variant variant_from_string(std::string_view s) {
    if (s == "baseline") return Variant::Baseline;
    if (s == "G") return Variant::G;
    if (s == "GS") return Variant::GS;
    if (s == "GS_parallel") return Variant::GSParallel;
    throw ConfigError("variant", "unknown variant '" + std::string(s) + "' (baseline, G, GS, GS_parallel)");
}

std::size_t NetConfig::total_iterations() const {
    std::size_t n = 0;
    for (const LrPhase& p : schedule) n += p.iterations;
    return n;
}

double NetConfig::lr_at(std::size_t iteration) const {
    std::size_t end = 0;
    for (const LrPhase& p : schedule) {
        end += p.iterations;
        if (iteration < end) return p.lr;
    }
    return schedule.empty() ? 0.0 : schedule.back().lr;
}

void NetConfig::validate() const {
    if (input_size == 0) throw ConfigError("input_size", "must be positive");
    if (num_classes == 0) throw ConfigError("num_classes", "must be positive");
    if (backbone_widths.empty()) throw ConfigError("backbone_widths", "must be nonempty");
    for (std::size_t w : backbone_widths) {
        if (w == 0) throw ConfigError("backbone_widths", "widths must be positive");
    }
    if (source_strides.empty()) throw ConfigError("source_strides", "must be nonempty");
    for (std::size_t i = 0; i < source_strides.size(); ++i) {
        const std::size_t s = source_strides[i];
        if (s < 2 || (s & (s - 1)) != 0) throw ConfigError("source_strides", "strides must be powers of two >= 2");
        if (i > 0 && s <= source_strides[i - 1]) throw ConfigError("source_strides", "strides must strictly increase");
    }
    if (input_size % source_strides.back() != 0) {
        throw ConfigError("input_size", "must be divisible by the largest source stride " +
                                            std::to_string(source_strides.back()));
    }
    if (!(min_scale > 0.0) || !(max_scale >= min_scale) || max_scale > 1.0) {
        throw ConfigError("min_scale", "need 0 < min_scale <= max_scale <= 1");
    }
    if (has_global_activation(variant)) {
        const std::size_t stages = backbone_widths.size();
        for (std::size_t s : source_strides) {
            std::size_t level = 0;
            while ((std::size_t{2} << level) < s) ++level;
            const std::size_t c = level < stages ? backbone_widths[level] : backbone_widths.back();
            if (c % 4 != 0) {
                throw ConfigError("backbone_widths", "source layer width " + std::to_string(c) +
                                                         " must be divisible by 4 for the global activation block");
            }
        }
    }
    if (has_seg_branch(variant)) {
        if (seg_atrous_width == 0) throw ConfigError("seg_atrous_width", "must be set for variant " + to_string(variant));
        if (seg_g_width == 0) throw ConfigError("seg_g_width", "must be set for variant " + to_string(variant));
    }
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha", "must be a finite non-negative number");
    if (schedule.empty()) throw ConfigError("schedule", "must be nonempty");
    for (const LrPhase& p : schedule) {
        if (!(p.lr >= 0.0) || !std::isfinite(p.lr)) throw ConfigError("schedule", "learning rates must be finite and >= 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be >= 0");
    if (batch_size == 0) throw ConfigError("batch_size", "must be positive");
    if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) throw ConfigError("hflip_prob", "must lie in [0, 1]");
    if (!(score_thresh >= 0.0 && score_thresh <= 1.0)) throw ConfigError("score_thresh", "must lie in [0, 1]");
    if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw ConfigError("nms_iou", "must lie in (0, 1]");
    if (top_k == 0) throw ConfigError("top_k", "must be positive");
}

std::string config_to_json(const NetConfig& c) {
    json j;
    j["input_size"] = c.input_size;
    j["num_classes"] = c.num_classes;
    j["backbone_widths"] = c.backbone_widths;
    j["source_strides"] = c.source_strides;
    j["min_scale"] = c.min_scale;
    j["max_scale"] = c.max_scale;
    j["seg_atrous_width"] = c.seg_atrous_width;
    j["seg_g_width"] = c.seg_g_width;
    j["z_sigmoid"] = c.z_sigmoid;
    j["variant"] = to_string(c.variant);
    j["alpha"] = c.alpha;
    json sched = json::array();
    for (const LrPhase& p : c.schedule) sched.push_back({{"lr", p.lr}, {"iterations", p.iterations}});
    j["schedule"] = sched;
    j["momentum"] = c.momentum;
    j["weight_decay"] = c.weight_decay;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["hflip_prob"] = c.hflip_prob;
    j["checkpoint_every"] = c.checkpoint_every;
    j["score_thresh"] = c.score_thresh;
    j["nms_iou"] = c.nms_iou;
    j["top_k"] = c.top_k;
    return j.dump(2);
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key, std::string("wrong type: ") + e.what());
    }
}

}  // namespace

NetConfig config_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what(), e.byte);
    }
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    static const std::set<std::string> known = {
        "input_size", "num_classes", "backbone_widths", "source_strides", "min_scale",   "max_scale",
        "seg_atrous_width", "seg_g_width", "z_sigmoid", "variant",      "alpha",        "schedule",
        "momentum",   "weight_decay", "batch_size",    "seed",          "hflip_prob",  "checkpoint_every",
        "score_thresh", "nms_iou",    "top_k"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError(key, "unknown field");
    }
    NetConfig c;
    take(j, "input_size", c.input_size);
    take(j, "num_classes", c.num_classes);
    take(j, "backbone_widths", c.backbone_widths);
    take(j, "source_strides", c.source_strides);
    take(j, "min_scale", c.min_scale);
    take(j, "max_scale", c.max_scale);
    take(j, "seg_atrous_width", c.seg_atrous_width);
    take(j, "seg_g_width", c.seg_g_width);
    take(j, "z_sigmoid", c.z_sigmoid);
    if (j.contains("variant")) {
        if (!j["variant"].is_string()) throw ConfigError("variant", "must be a string");
        c.variant = variant_from_string(j["variant"].get<std::string>());
    }
    take(j, "alpha", c.alpha);
    if (j.contains("schedule")) {
        const json& s = j["schedule"];
        if (!s.is_array()) throw ConfigError("schedule", "must be an array of {lr, iterations}");
        c.schedule.clear();
        for (const json& p : s) {
            if (!p.is_object() || !p.contains("lr") || !p.contains("iterations")) {
                throw ConfigError("schedule", "each phase needs lr and iterations");
            }
            LrPhase phase;
            take(p, "lr", phase.lr);
            take(p, "iterations", phase.iterations);
            c.schedule.push_back(phase);
        }
    }
    take(j, "momentum", c.momentum);
    take(j, "weight_decay", c.weight_decay);
    take(j, "batch_size", c.batch_size);
    take(j, "seed", c.seed);
    take(j, "hflip_prob", c.hflip_prob);
    take(j, "checkpoint_every", c.checkpoint_every);
    take(j, "score_thresh", c.score_thresh);
    take(j, "nms_iou", c.nms_iou);
    take(j, "top_k", c.top_k);
    c.validate();
    return c;
}

NetConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

}  // namespace des
