#include "des/visualize.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "des/core/error.hpp"

namespace des {

namespace {

constexpr std::array<std::array<double, 3>, 6> kPalette = {{
    {1.0, 0.2, 0.2}, {0.2, 1.0, 0.2}, {0.2, 0.4, 1.0}, {1.0, 1.0, 0.2}, {1.0, 0.2, 1.0}, {0.2, 1.0, 1.0},
}};

}  // namespace

Tensor draw_detections(const Tensor& image, const std::vector<detect::Detection>& dets, std::size_t thickness) {
    if (image.rank() != 3 || image.dim(0) != 3) throw InvalidInput("draw_detections needs a 3 x H x W image");
    Tensor out = image;
    const auto H = static_cast<long>(image.dim(1)), W = static_cast<long>(image.dim(2));
    const auto t = static_cast<long>(thickness);
    for (const auto& d : dets) {
        const auto& color = kPalette[static_cast<std::size_t>(std::max(d.class_id - 1, 0)) % kPalette.size()];
        const long x0 = std::clamp(static_cast<long>(std::floor(d.box.xmin * W)), 0L, W - 1);
        const long x1 = std::clamp(static_cast<long>(std::ceil(d.box.xmax * W)) - 1, 0L, W - 1);
        const long y0 = std::clamp(static_cast<long>(std::floor(d.box.ymin * H)), 0L, H - 1);
        const long y1 = std::clamp(static_cast<long>(std::ceil(d.box.ymax * H)) - 1, 0L, H - 1);
        for (long y = y0; y <= y1; ++y) {
            for (long x = x0; x <= x1; ++x) {
                const bool edge = x < x0 + t || x > x1 - t || y < y0 + t || y > y1 - t;
                if (!edge) continue;
                for (std::size_t c = 0; c < 3; ++c) {
                    out[(c * image.dim(1) + static_cast<std::size_t>(y)) * image.dim(2) + static_cast<std::size_t>(x)] =
                        color[c];
                }
            }
        }
    }
    return out;
}

Tensor label_image(const SegGrid& grid, int num_classes) {
    if (num_classes < 1) throw InvalidInput("label_image needs at least one class");
    Tensor out({grid.height, grid.width});
    for (std::size_t i = 0; i < grid.labels.size(); ++i) {
        out[i] = static_cast<double>(grid.labels[i]) / num_classes;
    }
    return out;
}

Tensor channel_mosaic(const Tensor& map, std::size_t columns) {
    if (map.rank() != 3) throw InvalidInput("channel_mosaic needs a C x H x W map");
    if (columns == 0) throw InvalidInput("channel_mosaic needs at least one column");
    const std::size_t C = map.dim(0), H = map.dim(1), W = map.dim(2);
    const std::size_t cols = std::min(columns, C);
    const std::size_t rows = (C + cols - 1) / cols;
    Tensor out({rows * (H + 1) - 1, cols * (W + 1) - 1});
    const std::size_t OW = out.dim(1);
    for (std::size_t c = 0; c < C; ++c) {
        const double* src = map.data().data() + c * H * W;
        const auto [lo, hi] = std::minmax_element(src, src + H * W);
        const double span = *hi - *lo;
        const std::size_t oy = (c / cols) * (H + 1), ox = (c % cols) * (W + 1);
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t w = 0; w < W; ++w) {
                out[(oy + h) * OW + ox + w] = span > 0 ? (src[h * W + w] - *lo) / span : 0.0;
            }
        }
    }
    return out;
}

}  // namespace des
