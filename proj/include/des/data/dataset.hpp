#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "des/boxes.hpp"
#include "des/core/random.hpp"
#include "des/core/tensor.hpp"
#include "des/data/voc.hpp"
#include "des/rasterize.hpp"

namespace des::data {

struct Sample {
    Tensor image;  // 3 x H x W in [0, 1]
    std::vector<BoundingBox> boxes;
    SegGrid seg_grid;  // cached rasterization of `boxes`

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    ClassTable classes;
    std::vector<Sample> samples;
};

/// Fills `sample.seg_grid` at grid x grid resolution.
void cache_seg_grid(Sample& sample, std::size_t grid);

/// Mirrors image columns and box x coordinates; drops the cached grid.
Sample hflip(const Sample& sample);

/// Synthetic shapes: 1 = circle, 2 = square, 3 = triangle, 4 = diamond,
/// 5 = ring. Up to 5 classes.
std::vector<std::string> synthetic_class_names(std::size_t classes);

struct SyntheticSample {
    Sample sample;
    std::vector<std::vector<std::uint8_t>> masks;  // per box, H x W shape pixels
};

/// Deterministic in (seed, index). Each image holds 1-4 non-overlapping
/// shapes with random color, position and scale over a textured background;
/// image i's first shape has class i % classes + 1, so every class appears
/// once count >= classes. Boxes are tight around the shape pixels. The cached
/// seg grid uses stride 8.
std::vector<Sample> gen_synthetic(std::uint64_t seed, std::size_t count, std::size_t classes = 3,
                                  std::size_t size = 64);
SyntheticSample gen_synthetic_sample(std::uint64_t seed, std::size_t index, std::size_t classes, std::size_t size);

/// Writes images/NNNNN.ppm, annotations/NNNNN.json and manifest.json under
/// `dir`. Returns the manifest path.
std::string save_dataset(const Dataset& ds, const std::string& dir);

/// Manifest: {"classes": [names], "samples": [{"image": ..., "annotation": ...}]}
/// with paths relative to the manifest. Annotations ending in .xml are read as
/// VOC, anything else as {"boxes": [{"class", "xmin", "ymin", "xmax", "ymax",
/// "difficult"}]} with normalized floats; "class" is a name or an index.
Dataset load_dataset(const std::string& manifest_path, std::size_t grid = 0);

std::vector<BoundingBox> parse_json_annotation(std::string_view text, const ClassTable& classes);
std::string json_annotation(const std::vector<BoundingBox>& boxes, const ClassTable& classes);

}  // namespace des::data
