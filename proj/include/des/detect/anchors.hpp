#pragma once

#include <cstddef>
#include <vector>

#include "des/detect/box_ops.hpp"

namespace des::detect {

/// One prediction source layer: its stride, feature width, and the anchor
/// shapes tiled over each of its cells.
struct SourceLayerSpec {
    std::size_t stride = 8;
    std::size_t channels = 64;
    double scale = 0.2;
    /// Extra aspect-1 anchor at this side length (sqrt(s_k * s_k+1) by
    /// default); 0 disables it.
    double extra_scale = 0.0;
    std::vector<double> aspect_ratios = {1.0};

    std::size_t anchors_per_cell() const { return aspect_ratios.size() + (extra_scale > 0.0 ? 1 : 0); }
};

/// Scales interpolated linearly from min_scale to max_scale across layers.
/// The first layer uses aspects {1, 2, 1/2}; later layers add {3, 1/3}. Every
/// layer gets the extra geometric-mean anchor, giving 4 then 6 per cell.
std::vector<SourceLayerSpec> default_source_layers(const std::vector<std::size_t>& strides,
                                                   const std::vector<std::size_t>& channels, double min_scale = 0.15,
                                                   double max_scale = 0.75);

/// Anchors in (layer, row, column, shape) order. Cell (i, j) of a W x H map is
/// centered at ((i + 0.5)/W, (j + 0.5)/H) with W = H = ceil(input / stride).
/// Aspect a at scale s gives w = s sqrt(a), h = s / sqrt(a).
std::vector<AnchorBox> gen_anchors(const std::vector<SourceLayerSpec>& specs, std::size_t input_size);

std::size_t anchor_count(const std::vector<SourceLayerSpec>& specs, std::size_t input_size);

}  // namespace des::detect
