#include "des/detect/box_ops.hpp"

#include <algorithm>
#include <cmath>

namespace des::detect {

double CornerBox::area() const {
    const double w = xmax - xmin, h = ymax - ymin;
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

double iou(const CornerBox& a, const CornerBox& b) {
    const double area_a = a.area(), area_b = b.area();
    if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
    const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
    const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (area_a + area_b - inter);
}

Offsets encode(const CornerBox& gt, const AnchorBox& a) {
    const double gw = gt.xmax - gt.xmin, gh = gt.ymax - gt.ymin;
    const double gx = 0.5 * (gt.xmin + gt.xmax), gy = 0.5 * (gt.ymin + gt.ymax);
    return {(gx - a.cx) / (a.w * kCenterVariance), (gy - a.cy) / (a.h * kCenterVariance),
            std::log(gw / a.w) / kSizeVariance, std::log(gh / a.h) / kSizeVariance};
}

CornerBox decode(const Offsets& t, const AnchorBox& a) {
    const double cx = a.cx + t[0] * kCenterVariance * a.w;
    const double cy = a.cy + t[1] * kCenterVariance * a.h;
    const double w = a.w * std::exp(t[2] * kSizeVariance);
    const double h = a.h * std::exp(t[3] * kSizeVariance);
    return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

CornerBox clip_unit(const CornerBox& b) {
    auto c = [](double v) { return std::clamp(v, 0.0, 1.0); };
    return {c(b.xmin), c(b.ymin), c(b.xmax), c(b.ymax)};
}

}  // namespace des::detect
