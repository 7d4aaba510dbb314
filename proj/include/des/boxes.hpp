#pragma once

#include <string>
#include <vector>

namespace des {

/// One object annotation in normalized corner coordinates. Class 0 is
/// reserved for background, so object classes start at 1.
struct BoundingBox {
    int class_id = 1;
    double xmin = 0.0;
    double ymin = 0.0;
    double xmax = 0.0;
    double ymax = 0.0;
    bool difficult = false;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }

    bool operator==(const BoundingBox&) const = default;
};

/// Empty string if the box satisfies its invariants, otherwise the reason.
std::string validate(const BoundingBox& b);

}  // namespace des
