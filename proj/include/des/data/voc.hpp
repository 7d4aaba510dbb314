#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "des/boxes.hpp"

namespace des::data {

/// Index -> class name; entry 0 is "background".
using ClassTable = std::vector<std::string>;

/// Builds a table from object class names, prepending "background" unless
/// already first.
ClassTable make_class_table(const std::vector<std::string>& names);
/// Index of `name`, or -1.
int class_index(const ClassTable& table, std::string_view name);

struct VocAnnotation {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t depth = 0;  // 0 when absent
    std::vector<BoundingBox> boxes;
};

/// Reads the fixed VOC annotation subset: <size> with <width>/<height>, and
/// repeated <object> holding <name>, optional <difficult>, and <bndbox> with
/// 1-based inclusive pixel corners. Corners are normalized as
/// ((xmin - 1) / width, (ymin - 1) / height, xmax / width, ymax / height).
/// Other elements are ignored.
///
/// Errors: malformed markup or a missing/non-numeric element throws
/// ParseError naming the element and line; unknown class names throw
/// ParseError ("unknown class"); boxes with xmin >= xmax (or outside the
/// image) throw InvalidInput.
VocAnnotation parse_voc_xml(std::string_view bytes, const ClassTable& classes);

}  // namespace des::data
