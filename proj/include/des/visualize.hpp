#pragma once

#include <vector>

#include "des/core/tensor.hpp"
#include "des/detect/nms.hpp"
#include "des/rasterize.hpp"

namespace des {

/// Copy of a 3 x H x W image with each detection outlined in its class color.
Tensor draw_detections(const Tensor& image, const std::vector<detect::Detection>& dets, std::size_t thickness = 1);

/// H x W gray image of a label grid: class c maps to c / num_classes.
Tensor label_image(const SegGrid& grid, int num_classes);

/// C x H x W map tiled into one gray image, `columns` channels per row with a
/// one pixel gap. Each channel is stretched to [0, 1] independently.
Tensor channel_mosaic(const Tensor& map, std::size_t columns = 8);

}  // namespace des
