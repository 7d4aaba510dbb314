#pragma once

#include <array>

#include "des/boxes.hpp"

namespace des::detect {

struct CornerBox {
    double xmin = 0.0;
    double ymin = 0.0;
    double xmax = 0.0;
    double ymax = 0.0;

    double area() const;
    bool operator==(const CornerBox&) const = default;
};

inline CornerBox corners(const BoundingBox& b) { return {b.xmin, b.ymin, b.xmax, b.ymax}; }

/// Intersection over union in [0, 1]; 0 when either box has no area.
double iou(const CornerBox& a, const CornerBox& b);

struct AnchorBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    std::size_t source_layer = 0;
    double scale = 0.0;
    double aspect_ratio = 1.0;

    CornerBox corners() const { return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}; }
};

inline constexpr double kCenterVariance = 0.1;
inline constexpr double kSizeVariance = 0.2;

using Offsets = std::array<double, 4>;

/// Center-size encoding relative to an anchor:
/// ((gx - ax) / (aw * 0.1), (gy - ay) / (ah * 0.1), log(gw / aw) / 0.2, log(gh / ah) / 0.2).
Offsets encode(const CornerBox& gt, const AnchorBox& anchor);
CornerBox decode(const Offsets& offsets, const AnchorBox& anchor);
CornerBox clip_unit(const CornerBox& b);

}  // namespace des::detect
