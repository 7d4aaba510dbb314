#include "des/detect/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "des/core/error.hpp"
#include "des/core/serialize.hpp"
#include "des/nn/layers.hpp"
#include "des/rasterize.hpp"

namespace des::detect {

namespace {

// Per-module stream, so a module's initial weights depend only on the seed
// and its name, not on which other modules the variant builds.
Rng module_rng(std::uint64_t seed, const std::string& name) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ull;
    std::uint64_t x = seed ^ h;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return Rng(x ^ (x >> 31));
}

std::size_t level_of(std::size_t stride) {
    std::size_t level = 0;
    while ((std::size_t{2} << level) < stride) ++level;
    return level;
}

}  // namespace

Network::Network(const NetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::uint64_t seed = cfg_.seed;
    const std::size_t last_level = level_of(cfg_.source_strides.back());
    std::size_t in = 3;
    for (std::size_t k = 0; k <= last_level; ++k) {
        const std::size_t width = k < cfg_.backbone_widths.size() ? cfg_.backbone_widths[k] : cfg_.backbone_widths.back();
        const std::string name = k < cfg_.backbone_widths.size() ? "backbone.conv" + std::to_string(k + 1)
                                                                 : "extra.conv" + std::to_string(k + 1);
        Rng rng = module_rng(seed, name);
        stages_.push_back(nn::make_conv(params_, name, nn::same_conv3(in, width), rng));
        in = width;
    }
    std::vector<std::size_t> channels;
    for (std::size_t s : cfg_.source_strides) {
        source_stage_.push_back(level_of(s));
        channels.push_back(stages_[level_of(s)].spec.out_channels);
    }
    specs_ = default_source_layers(cfg_.source_strides, channels, cfg_.min_scale, cfg_.max_scale);
    anchors_ = gen_anchors(specs_, cfg_.input_size);

    if (has_seg_branch(cfg_.variant)) {
        SegBranchConfig sc;
        sc.channels = channels[0];
        sc.atrous_width = cfg_.seg_atrous_width;
        sc.g_width = cfg_.seg_g_width;
        sc.num_classes = cfg_.num_classes;
        sc.z_sigmoid = cfg_.z_sigmoid;
        Rng rng = module_rng(seed, "seg");
        seg_ = make_seg_branch(params_, "seg", sc, rng);
    }
    if (has_global_activation(cfg_.variant)) {
        for (std::size_t l = 0; l < specs_.size(); ++l) {
            const std::string name = "ga" + std::to_string(l + 1);
            Rng rng = module_rng(seed, name);
            ga_.push_back(make_global_activation(params_, name, channels[l], rng));
        }
    }
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        const std::size_t a = specs_[l].anchors_per_cell();
        const std::string prefix = "head" + std::to_string(l + 1);
        Rng rng = module_rng(seed, prefix);
        class_heads_.push_back(
            nn::make_conv(params_, prefix + ".cls", nn::same_conv3(channels[l], (cfg_.num_classes + 1) * a), rng));
        box_heads_.push_back(nn::make_conv(params_, prefix + ".box", nn::same_conv3(channels[l], 4 * a), rng));
    }
}

std::size_t Network::seg_grid_size() const { return grid_resolution_for(cfg_.input_size, cfg_.source_strides.front()); }

NetworkVars Network::forward(Graph& graph, Var image) const {
    if (image.shape() != Shape{3, cfg_.input_size, cfg_.input_size}) {
        throw InvalidInput("network: expected 3x" + std::to_string(cfg_.input_size) + "x" +
                           std::to_string(cfg_.input_size) + " image, got " + shape_str(image.shape()));
    }
    std::vector<Var> stage_out;
    Var h = image;
    for (const nn::Conv& conv : stages_) {
        h = nn::maxpool2(nn::relu(conv(graph, h)));
        stage_out.push_back(h);
    }

    NetworkVars out;
    std::vector<Var> cls_maps, box_maps;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        Var x = stage_out[source_stage_[l]];
        out.sources.push_back(x);
        if (l == 0 && seg_) {
            out.seg = cfg_.variant == Variant::GSParallel ? parallel_variant_forward(graph, x, *seg_)
                                                           : seg_forward(graph, x, *seg_);
            x = out.seg->x_act;
        }
        out.ga_inputs.push_back(x);
        if (!ga_.empty()) {
            GlobalActivationVars gv = global_activate(graph, x, ga_[l]);
            out.gates.push_back(gv.gate);
            x = gv.out;
        }
        out.head_inputs.push_back(x);
        cls_maps.push_back(class_heads_[l](graph, x));
        box_maps.push_back(box_heads_[l](graph, x));
    }
    out.class_logits = flatten_heads(cls_maps, cfg_.num_classes + 1);
    out.box_preds = flatten_heads(box_maps, 4);
    return out;
}

Prediction Network::predict(const Tensor& image) const {
    Graph g(false);
    NetworkVars v = forward(g, g.constant(image));
    Prediction p;
    p.class_probs = softmax_rows(v.class_logits.value());
    p.box_preds = v.box_preds.value();
    if (v.seg) p.seg_probs = v.seg->y.value();
    return p;
}

std::vector<Detection> Network::detect(const Tensor& image) const {
    return detect(image, {cfg_.score_thresh, cfg_.nms_iou, cfg_.top_k});
}

std::vector<Detection> Network::detect(const Tensor& image, const DecodeParams& params) const {
    Prediction p = predict(image);
    return decode_nms(p.class_probs, p.box_preds, anchors_, params);
}

Var flatten_heads(const std::vector<Var>& maps, std::size_t per_anchor) {
    if (maps.empty() || per_anchor == 0) throw InvalidInput("flatten_heads: nothing to flatten");
    struct Layout {
        std::size_t anchors, hw, row0;
    };
    std::vector<Layout> layout;
    std::size_t rows = 0;
    for (const Var& m : maps) {
        const Shape& s = m.shape();
        if (s.size() != 3 || s[0] % per_anchor != 0) {
            throw InvalidInput("flatten_heads: map " + shape_str(s) + " is not (D A) x H x W with D = " +
                               std::to_string(per_anchor));
        }
        layout.push_back({s[0] / per_anchor, s[1] * s[2], rows});
        rows += s[1] * s[2] * (s[0] / per_anchor);
    }
    const std::size_t D = per_anchor;
    // index[r * D + d] = (map, flat offset) for every output element
    auto index = std::make_shared<std::vector<std::pair<std::size_t, std::size_t>>>(rows * D);
    Tensor out({rows, D});
    for (std::size_t m = 0; m < maps.size(); ++m) {
        const Tensor& v = maps[m].value();
        const Layout& L = layout[m];
        for (std::size_t p = 0; p < L.hw; ++p) {
            for (std::size_t a = 0; a < L.anchors; ++a) {
                const std::size_t r = L.row0 + p * L.anchors + a;
                for (std::size_t d = 0; d < D; ++d) {
                    const std::size_t src = (a * D + d) * L.hw + p;
                    out[r * D + d] = v[src];
                    (*index)[r * D + d] = {m, src};
                }
            }
        }
    }
    const std::size_t n = maps.size();
    return maps.front().graph().record("flatten_heads", std::move(out), maps, [index, n](BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        std::vector<Tensor*> gi(n);
        for (std::size_t m = 0; m < n; ++m) gi[m] = ctx.grad_input(m);
        for (std::size_t i = 0; i < index->size(); ++i) {
            const auto [m, src] = (*index)[i];
            if (gi[m]) (*gi[m])[src] += go[i];
        }
    });
}

Tensor softmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) throw InvalidInput("softmax_rows: expected a matrix, got " + shape_str(logits.shape()));
    const std::size_t M = logits.dim(0), K = logits.dim(1);
    Tensor out(logits.shape());
    for (std::size_t r = 0; r < M; ++r) {
        const double* x = logits.raw() + r * K;
        const double mx = *std::max_element(x, x + K);
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            out[r * K + k] = std::exp(x[k] - mx);
            z += out[r * K + k];
        }
        for (std::size_t k = 0; k < K; ++k) out[r * K + k] /= z;
    }
    return out;
}

void save_checkpoint(const Network& net, const std::string& path) {
    nlohmann::json manifest;
    manifest["format"] = "DESTNSR1";
    manifest["config"] = nlohmann::json::parse(config_to_json(net.config()));
    nlohmann::json tensors = nlohmann::json::array();
    std::ofstream bin(path, std::ios::binary | std::ios::trunc);
    if (!bin) throw InvalidInput("cannot write checkpoint " + path);
    std::size_t offset = 0;
    for (const Parameter& p : net.params().items()) {
        write_tensor(bin, p.value);
        tensors.push_back({{"name", p.name}, {"offset", offset}, {"shape", p.value.shape()}});
        offset += serialized_size(p.value);
    }
    bin.close();
    if (!bin) throw InvalidInput("failed writing checkpoint " + path);
    manifest["tensors"] = tensors;
    std::ofstream js(path + ".json", std::ios::binary | std::ios::trunc);
    js << manifest.dump(2) << '\n';
    if (!js) throw InvalidInput("failed writing checkpoint manifest " + path + ".json");
}

Network load_checkpoint(const std::string& path) {
    std::ifstream js(path + ".json", std::ios::binary);
    if (!js) throw InvalidInput("cannot open checkpoint manifest " + path + ".json");
    std::stringstream text;
    text << js.rdbuf();
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("checkpoint manifest: " + std::string(e.what()), e.byte);
    }
    if (!manifest.contains("config") || !manifest.contains("tensors")) {
        throw ParseError("checkpoint manifest: missing config or tensors", 0);
    }
    Network net(config_from_json(manifest["config"].dump()));

    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw InvalidInput("cannot open checkpoint " + path);
    std::size_t loaded = 0;
    for (const auto& entry : manifest["tensors"]) {
        const std::string name = entry.at("name").get<std::string>();
        Parameter* p = net.params().find(name);
        if (!p) throw InvalidInput("checkpoint tensor '" + name + "' is not a parameter of this network");
        bin.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::size_t>()));
        Tensor t = read_tensor(bin);
        if (t.shape() != p->value.shape()) {
            throw InvalidInput("checkpoint tensor '" + name + "' has shape " + shape_str(t.shape()) + ", expected " +
                               shape_str(p->value.shape()));
        }
        p->value = std::move(t);
        ++loaded;
    }
    if (loaded != net.params().size()) {
        throw InvalidInput("checkpoint holds " + std::to_string(loaded) + " of " +
                           std::to_string(net.params().size()) + " parameters");
    }
    return net;
}

}  // namespace des::detect
