#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "des/boxes.hpp"

namespace des {

/// Per-cell class labels at feature-map resolution; 0 is background.
struct SegGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<int> labels;  // row-major, height * width

    int at(std::size_t h, std::size_t w) const { return labels[h * width + w]; }
    bool operator==(const SegGrid&) const = default;
};

/// Weak segmentation ground truth from boxes. Each cell is tested at its
/// center ((w + 0.5)/width, (h + 0.5)/height) with xmin <= cx < xmax and
/// ymin <= cy < ymax. A cell inside several boxes takes the class of the one
/// with the smallest area; equal areas fall back to the lower class id, then
/// the earlier list position. Cells inside no box are 0.
SegGrid rasterize(std::span<const BoundingBox> boxes, std::size_t grid_h, std::size_t grid_w);

/// ceil(input_size / stride): the map extent of a layer at that stride.
std::size_t grid_resolution_for(std::size_t input_size, std::size_t stride);

}  // namespace des
