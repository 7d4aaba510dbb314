#include "des/rasterize.hpp"

#include <cmath>

#include "des/core/error.hpp"

namespace des {

std::string validate(const BoundingBox& b) {
    if (b.class_id < 1) return "class_id must be >= 1 (0 is background)";
    if (!(std::isfinite(b.xmin) && std::isfinite(b.ymin) && std::isfinite(b.xmax) && std::isfinite(b.ymax))) {
        return "non-finite coordinate";
    }
    if (!(b.xmin < b.xmax)) return "xmin must be < xmax";
    if (!(b.ymin < b.ymax)) return "ymin must be < ymax";
    return {};
}

namespace {

// True if `a` takes precedence over `b` for a cell both cover.
bool wins(const BoundingBox& a, std::size_t ia, const BoundingBox& b, std::size_t ib) {
    if (a.area() != b.area()) return a.area() < b.area();
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return ia < ib;
}

}  // namespace

SegGrid rasterize(std::span<const BoundingBox> boxes, std::size_t grid_h, std::size_t grid_w) {
    if (grid_h == 0 || grid_w == 0) throw InvalidInput("rasterize: grid extents must be positive");
    for (const BoundingBox& b : boxes) {
        if (auto why = validate(b); !why.empty()) throw InvalidInput("rasterize: invalid box: " + why);
    }
    SegGrid grid{grid_h, grid_w, std::vector<int>(grid_h * grid_w, 0)};
    std::vector<long> owner(grid_h * grid_w, -1);

    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const BoundingBox& b = boxes[i];
        for (std::size_t h = 0; h < grid_h; ++h) {
            const double cy = (static_cast<double>(h) + 0.5) / static_cast<double>(grid_h);
            if (cy < b.ymin || cy >= b.ymax) continue;
            for (std::size_t w = 0; w < grid_w; ++w) {
                const double cx = (static_cast<double>(w) + 0.5) / static_cast<double>(grid_w);
                if (cx < b.xmin || cx >= b.xmax) continue;
                const std::size_t cell = h * grid_w + w;
                const long cur = owner[cell];
                if (cur < 0 || wins(b, i, boxes[static_cast<std::size_t>(cur)], static_cast<std::size_t>(cur))) {
                    owner[cell] = static_cast<long>(i);
                    grid.labels[cell] = b.class_id;
                }
            }
        }
    }
    return grid;
}

std::size_t grid_resolution_for(std::size_t input_size, std::size_t stride) {
    if (input_size == 0 || stride == 0) throw InvalidInput("grid_resolution_for: arguments must be positive");
    return (input_size + stride - 1) / stride;
}

}  // namespace des
