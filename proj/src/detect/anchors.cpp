#include "des/detect/anchors.hpp"

#include <cmath>

#include "des/core/error.hpp"
#include "des/rasterize.hpp"

namespace des::detect {

std::vector<SourceLayerSpec> default_source_layers(const std::vector<std::size_t>& strides,
                                                   const std::vector<std::size_t>& channels, double min_scale,
                                                   double max_scale) {
    if (strides.empty() || strides.size() != channels.size()) {
        throw InvalidInput("default_source_layers: need one channel count per stride");
    }
    const std::size_t m = strides.size();
    const double step = m > 1 ? (max_scale - min_scale) / static_cast<double>(m - 1) : 0.0;
    std::vector<SourceLayerSpec> specs(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double s = min_scale + step * static_cast<double>(k);
        const double next = m > 1 ? s + step : 1.0;
        specs[k].stride = strides[k];
        specs[k].channels = channels[k];
        specs[k].scale = s;
        specs[k].extra_scale = std::sqrt(s * next);
        specs[k].aspect_ratios = k == 0 ? std::vector<double>{1.0, 2.0, 0.5}
                                        : std::vector<double>{1.0, 2.0, 0.5, 3.0, 1.0 / 3.0};
    }
    return specs;
}

std::vector<AnchorBox> gen_anchors(const std::vector<SourceLayerSpec>& specs, std::size_t input_size) {
    if (specs.empty()) throw InvalidInput("gen_anchors: no source layers");
    std::vector<AnchorBox> anchors;
    anchors.reserve(anchor_count(specs, input_size));
    for (std::size_t l = 0; l < specs.size(); ++l) {
        const SourceLayerSpec& s = specs[l];
        const std::size_t n = grid_resolution_for(input_size, s.stride);
        for (std::size_t j = 0; j < n; ++j) {
            const double cy = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double cx = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
                for (double ar : s.aspect_ratios) {
                    const double r = std::sqrt(ar);
                    anchors.push_back({cx, cy, s.scale * r, s.scale / r, l, s.scale, ar});
                }
                if (s.extra_scale > 0.0) anchors.push_back({cx, cy, s.extra_scale, s.extra_scale, l, s.extra_scale, 1.0});
            }
        }
    }
    return anchors;
}

std::size_t anchor_count(const std::vector<SourceLayerSpec>& specs, std::size_t input_size) {
    std::size_t total = 0;
    for (const SourceLayerSpec& s : specs) {
        const std::size_t n = grid_resolution_for(input_size, s.stride);
        total += n * n * s.anchors_per_cell();
    }
    return total;
}

}  // namespace des::detect
