#include "des/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include <json.hpp>

#include "des/core/error.hpp"
#include "des/data/image_io.hpp"

namespace des::data {

namespace fs = std::filesystem;
using nlohmann::json;

void cache_seg_grid(Sample& s, std::size_t grid) { s.seg_grid = rasterize(s.boxes, grid, grid); }

Sample hflip(const Sample& s) {
    Sample out;
    out.image = s.image;
    const std::size_t C = s.image.dim(0), H = s.image.dim(1), W = s.image.dim(2);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t w = 0; w < W; ++w) out.image[(c * H + h) * W + w] = s.image[(c * H + h) * W + (W - 1 - w)];
        }
    }
    out.boxes = s.boxes;
    for (BoundingBox& b : out.boxes) {
        const double xmin = 1.0 - b.xmax, xmax = 1.0 - b.xmin;
        b.xmin = xmin;
        b.xmax = xmax;
    }
    return out;
}

std::vector<std::string> synthetic_class_names(std::size_t classes) {
    static const std::vector<std::string> all = {"circle", "square", "triangle", "diamond", "ring"};
    if (classes == 0 || classes > all.size()) {
        throw InvalidInput("synthetic data supports 1 to " + std::to_string(all.size()) + " classes, got " +
                           std::to_string(classes));
    }
    return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(classes)};
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double quantize8(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

bool shape_contains(int cls, double px, double py, double x0, double y0, double s) {
    const double cx = x0 + s / 2, cy = y0 + s / 2, r = s / 2;
    const double dx = px - cx, dy = py - cy;
    switch (cls) {
        case 1: return dx * dx + dy * dy <= r * r;
        case 2: return px >= x0 && px <= x0 + s && py >= y0 && py <= y0 + s;
        case 3: return py >= y0 && py <= y0 + s && std::abs(dx) <= (py - y0) / 2;
        case 4: return std::abs(dx) + std::abs(dy) <= r;
        default: {
            const double d2 = dx * dx + dy * dy;
            return d2 <= r * r && d2 >= r * r / 4;
        }
    }
}

struct Rect {
    int x0, y0, x1, y1;  // inclusive pixel bounds
};

bool overlaps(const Rect& a, const Rect& b, int margin) {
    return !(a.x1 + margin < b.x0 || b.x1 + margin < a.x0 || a.y1 + margin < b.y0 || b.y1 + margin < a.y0);
}

}  // namespace

SyntheticSample gen_synthetic_sample(std::uint64_t seed, std::size_t index, std::size_t classes, std::size_t size) {
    synthetic_class_names(classes);
    if (size < 16) throw InvalidInput("synthetic image size must be >= 16");
    Rng rng(splitmix(seed ^ splitmix(index + 1)));
    const std::size_t hw = size * size;
    const int n = static_cast<int>(size);

    double base[3];
    for (double& b : base) b = rng.uniform(0.1, 0.6);
    const double freq = rng.uniform(2.0, 6.0) * 2.0 * std::numbers::pi / static_cast<double>(size);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double amp = rng.uniform(0.03, 0.1);
    double phase[3];
    for (double& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);

    SyntheticSample out;
    Tensor& img = out.sample.image;
    img = Tensor({3, size, size});
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double t = freq * (static_cast<double>(x) * std::cos(angle) + static_cast<double>(y) * std::sin(angle));
            for (std::size_t c = 0; c < 3; ++c) {
                img[c * hw + y * size + x] = base[c] + amp * std::sin(t + phase[c]) + rng.uniform(-0.04, 0.04);
            }
        }
    }

    const int shapes = rng.uniform_int(1, 4);
    const int min_side = std::max(4, static_cast<int>(std::lround(0.18 * n)));
    const int max_side = std::max(min_side, static_cast<int>(std::lround(0.45 * n)));
    std::vector<Rect> taken;
    for (int k = 0; k < shapes; ++k) {
        const int cls = k == 0 ? static_cast<int>(index % classes) + 1 : rng.uniform_int(1, static_cast<int>(classes));
        for (int attempt = 0; attempt < 50; ++attempt) {
            const int side = rng.uniform_int(min_side, max_side);
            const int x0 = rng.uniform_int(0, n - side), y0 = rng.uniform_int(0, n - side);
            const Rect region{x0, y0, x0 + side - 1, y0 + side - 1};
            bool clash = false;
            for (const Rect& r : taken) clash = clash || overlaps(region, r, 1);
            if (clash) continue;

            std::vector<std::uint8_t> mask(hw, 0);
            Rect tight{n, n, -1, -1};
            std::size_t pixels = 0;
            for (int y = y0; y <= region.y1; ++y) {
                for (int x = x0; x <= region.x1; ++x) {
                    if (!shape_contains(cls, x + 0.5, y + 0.5, x0, y0, side)) continue;
                    mask[static_cast<std::size_t>(y * n + x)] = 1;
                    ++pixels;
                    tight = {std::min(tight.x0, x), std::min(tight.y0, y), std::max(tight.x1, x), std::max(tight.y1, y)};
                }
            }
            if (pixels < 4 || tight.x1 <= tight.x0 || tight.y1 <= tight.y0) continue;

            double color[3];
            for (int tries = 0;; ++tries) {
                double diff = 0.0;
                for (std::size_t c = 0; c < 3; ++c) {
                    color[c] = rng.uniform(0.0, 1.0);
                    diff += std::abs(color[c] - base[c]);
                }
                if (diff / 3.0 >= 0.3 || tries > 100) break;
            }
            for (std::size_t p = 0; p < hw; ++p) {
                if (!mask[p]) continue;
                for (std::size_t c = 0; c < 3; ++c) img[c * hw + p] = color[c] + rng.uniform(-0.03, 0.03);
            }
            taken.push_back(region);
            const double s = static_cast<double>(size);
            out.sample.boxes.push_back({cls, tight.x0 / s, tight.y0 / s, (tight.x1 + 1) / s, (tight.y1 + 1) / s, false});
            out.masks.push_back(std::move(mask));
            break;
        }
    }
    for (double& v : img.data()) v = quantize8(v);
    cache_seg_grid(out.sample, grid_resolution_for(size, 8));
    return out;
}

std::vector<Sample> gen_synthetic(std::uint64_t seed, std::size_t count, std::size_t classes, std::size_t size) {
    if (count == 0) throw InvalidInput("gen_synthetic: count must be positive");
    std::vector<Sample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(gen_synthetic_sample(seed, i, classes, size).sample);
    return out;
}

std::string json_annotation(const std::vector<BoundingBox>& boxes, const ClassTable& classes) {
    json arr = json::array();
    for (const BoundingBox& b : boxes) {
        json jb;
        if (b.class_id >= 1 && static_cast<std::size_t>(b.class_id) < classes.size()) {
            jb["class"] = classes[static_cast<std::size_t>(b.class_id)];
        } else {
            jb["class"] = b.class_id;
        }
        jb["xmin"] = b.xmin;
        jb["ymin"] = b.ymin;
        jb["xmax"] = b.xmax;
        jb["ymax"] = b.ymax;
        if (b.difficult) jb["difficult"] = true;
        arr.push_back(jb);
    }
    return json{{"boxes", arr}}.dump(2);
}

std::vector<BoundingBox> parse_json_annotation(std::string_view text, const ClassTable& classes) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("annotation: ") + e.what(), e.byte);
    }
    if (!j.is_object() || !j.contains("boxes") || !j["boxes"].is_array()) {
        throw ParseError("annotation: expected {\"boxes\": [...]}", 0);
    }
    std::vector<BoundingBox> out;
    for (const json& jb : j["boxes"]) {
        BoundingBox b;
        try {
            const json& c = jb.at("class");
            if (c.is_string()) {
                b.class_id = class_index(classes, c.get<std::string>());
                if (b.class_id < 0) throw ParseError("annotation: unknown class '" + c.get<std::string>() + "'", 0);
            } else {
                b.class_id = c.get<int>();
                if (b.class_id < 1 || static_cast<std::size_t>(b.class_id) >= classes.size()) {
                    throw ParseError("annotation: class index " + std::to_string(b.class_id) + " out of range", 0);
                }
            }
            b.xmin = jb.at("xmin").get<double>();
            b.ymin = jb.at("ymin").get<double>();
            b.xmax = jb.at("xmax").get<double>();
            b.ymax = jb.at("ymax").get<double>();
            if (jb.contains("difficult")) {
                const json& d = jb["difficult"];
                b.difficult = d.is_boolean() ? d.get<bool>() : d.get<int>() != 0;
            }
        } catch (const json::exception& e) {
            throw ParseError(std::string("annotation: ") + e.what(), 0);
        }
        if (auto why = validate(b); !why.empty()) throw InvalidInput("annotation: invalid box: " + why);
        out.push_back(b);
    }
    return out;
}

std::string save_dataset(const Dataset& ds, const std::string& dir) {
    const fs::path root(dir);
    fs::create_directories(root / "images");
    fs::create_directories(root / "annotations");
    json samples = json::array();
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "%05zu", i);
        const std::string image = std::string("images/") + stem + ".ppm";
        const std::string annotation = std::string("annotations/") + stem + ".json";
        write_ppm(ds.samples[i].image, (root / image).string());
        write_file((root / annotation).string(), json_annotation(ds.samples[i].boxes, ds.classes) + "\n");
        samples.push_back({{"image", image}, {"annotation", annotation}});
    }
    json classes = json::array();
    for (std::size_t c = 1; c < ds.classes.size(); ++c) classes.push_back(ds.classes[c]);
    const std::string manifest = (root / "manifest.json").string();
    write_file(manifest, json{{"classes", classes}, {"samples", samples}}.dump(2) + "\n");
    return manifest;
}

Dataset load_dataset(const std::string& manifest_path, std::size_t grid) {
    json j;
    try {
        j = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw ParseError("manifest " + manifest_path + ": " + e.what(), e.byte);
    }
    if (!j.is_object() || !j.contains("classes") || !j["classes"].is_array() || !j.contains("samples") ||
        !j["samples"].is_array()) {
        throw ParseError("manifest " + manifest_path + ": expected {classes: [...], samples: [...]}", 0);
    }
    Dataset ds;
    std::vector<std::string> names;
    for (const json& c : j["classes"]) {
        if (!c.is_string()) throw ParseError("manifest: class names must be strings", 0);
        names.push_back(c.get<std::string>());
    }
    ds.classes = make_class_table(names);
    const fs::path base = fs::path(manifest_path).parent_path();
    for (const json& s : j["samples"]) {
        if (!s.is_object() || !s.contains("image") || !s.contains("annotation") || !s["image"].is_string() ||
            !s["annotation"].is_string()) {
            throw ParseError("manifest: each sample needs image and annotation paths", 0);
        }
        const fs::path image = base / s["image"].get<std::string>();
        const fs::path ann = base / s["annotation"].get<std::string>();
        if (!fs::exists(image)) throw InvalidInput("manifest references missing image " + image.string());
        if (!fs::exists(ann)) throw InvalidInput("manifest references missing annotation " + ann.string());
        Sample sample;
        sample.image = read_ppm(image.string());
        const std::string text = read_file(ann.string());
        sample.boxes = ann.extension() == ".xml" ? parse_voc_xml(text, ds.classes).boxes
                                                  : parse_json_annotation(text, ds.classes);
        cache_seg_grid(sample, grid ? grid : grid_resolution_for(sample.image.dim(1), 8));
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

}  // namespace des::data
