#pragma once

#include <algorithm>
#include <tuple>
#include <vector>

#include "des/boxes.hpp"
#include "des/core/random.hpp"
#include "des/rasterize.hpp"

namespace des::testing {

// Tests every cell against every box independently, then ranks the covering
// boxes by (area, class, index).
inline SegGrid brute_force_rasterize(const std::vector<BoundingBox>& boxes, std::size_t H, std::size_t W) {
    SegGrid g{H, W, std::vector<int>(H * W, 0)};
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
            const double cx = (w + 0.5) / W, cy = (h + 0.5) / H;
            std::vector<std::tuple<double, int, std::size_t>> hits;
            for (std::size_t i = 0; i < boxes.size(); ++i) {
                const BoundingBox& b = boxes[i];
                const bool inside = b.xmin <= cx && cx < b.xmax && b.ymin <= cy && cy < b.ymax;
                if (inside) hits.emplace_back((b.xmax - b.xmin) * (b.ymax - b.ymin), b.class_id, i);
            }
            if (!hits.empty()) g.labels[h * W + w] = std::get<1>(*std::min_element(hits.begin(), hits.end()));
        }
    return g;
}

// Up to `max_boxes` random boxes; a quarter of scenes duplicate an area to
// exercise the tie rule.
inline std::vector<BoundingBox> random_scene(Rng& rng, int max_boxes, int classes) {
    std::vector<BoundingBox> boxes;
    const int n = rng.uniform_int(0, max_boxes);
    for (int i = 0; i < n; ++i) {
        BoundingBox b;
        b.class_id = rng.uniform_int(1, classes);
        const double w = rng.uniform(0.02, 0.8), h = rng.uniform(0.02, 0.8);
        b.xmin = rng.uniform(0.0, 1.0 - w);
        b.ymin = rng.uniform(0.0, 1.0 - h);
        b.xmax = b.xmin + w;
        b.ymax = b.ymin + h;
        boxes.push_back(b);
    }
    if (boxes.size() >= 2 && rng.bernoulli(0.25)) {
        BoundingBox copy = boxes[0];
        copy.class_id = rng.uniform_int(1, classes);
        copy.xmin = std::min(copy.xmin + 0.01, 1.0 - copy.width());
        copy.xmax = copy.xmin + boxes[0].width();
        boxes.push_back(copy);
    }
    return boxes;
}

}  // namespace des::testing
