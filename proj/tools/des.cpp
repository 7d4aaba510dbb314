#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "des/config.hpp"
#include "des/core/error.hpp"
#include "des/data/dataset.hpp"
#include "des/data/image_io.hpp"
#include "des/data/voc.hpp"
#include "des/detect/network.hpp"
#include "des/rasterize.hpp"
#include "des/train/ablation.hpp"
#include "des/train/evaluate.hpp"
#include "des/train/gradient_suite.hpp"
#include "des/train/trainer.hpp"
#include "des/visualize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace des;

namespace {

std::string ext_of(const std::string& path) { return fs::path(path).extension().string(); }

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

data::ClassTable net_classes(const NetConfig& cfg, const std::string& names) {
    if (!names.empty()) return data::make_class_table(split_names(names));
    return data::make_class_table(data::synthetic_class_names(std::min<std::size_t>(cfg.num_classes, 5)));
}

void check_classes(const NetConfig& cfg, const data::ClassTable& classes) {
    if (classes.size() != cfg.num_classes + 1) {
        throw InvalidInput("dataset has " + std::to_string(classes.size() - 1) + " classes, network expects " +
                           std::to_string(cfg.num_classes));
    }
}

int cmd_train(const std::string& config, const std::string& manifest, const std::string& out, std::size_t threads) {
    NetConfig cfg = config.empty() ? NetConfig{} : load_config(config);
    data::Dataset ds = data::load_dataset(manifest);
    check_classes(cfg, ds.classes);
    fs::create_directories(out);
    data::write_file((fs::path(out) / "config.json").string(), config_to_json(cfg));
    train::TrainOptions opts;
    opts.out_dir = out;
    opts.threads = threads;
    const std::size_t total = cfg.total_iterations();
    const std::size_t every = std::max<std::size_t>(1, total / 20);
    opts.on_iteration = [&](const train::LossRecord& r) {
        if (r.iteration % every == 0 || r.iteration == total) {
            std::printf("iter %6zu/%zu  L_det %.4f  L_seg %.4f  L %.4f\n", r.iteration, total, r.det, r.seg, r.total);
            std::fflush(stdout);
        }
    };
    train::train(cfg, ds.samples, opts);
    std::printf("wrote %s\n", (fs::path(out) / "final.ckpt").string().c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest, const std::string& report, bool dump) {
    detect::Network net = detect::load_checkpoint(ckpt);
    data::Dataset ds = data::load_dataset(manifest);
    check_classes(net.config(), ds.classes);
    train::EvalReport r = train::evaluate(net, ds.samples, ds.classes);
    for (const auto& c : r.per_class) {
        if (c.ap) std::printf("%-12s AP %.4f  (%zu gt, %zu det)\n", c.name.c_str(), *c.ap, c.num_gt, c.num_det);
    }
    std::printf("mAP@0.5 %.4f over %zu images, %.2f ms/img\n", r.map, r.images, r.ms_per_image);
    if (!report.empty()) data::write_file(report, train::report_json(r, dump));
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& image, double thresh, const std::string& overlay,
              const std::string& names, const std::string& json_path) {
    detect::Network net = detect::load_checkpoint(ckpt);
    Tensor img = data::read_ppm(image);
    const std::size_t n = net.config().input_size;
    if (img.dim(1) != n || img.dim(2) != n) {
        throw InvalidInput("image is " + std::to_string(img.dim(2)) + "x" + std::to_string(img.dim(1)) +
                           ", network expects " + std::to_string(n) + "x" + std::to_string(n));
    }
    detect::DecodeParams p{thresh, net.config().nms_iou, net.config().top_k};
    auto dets = net.detect(img, p);
    const data::ClassTable classes = net_classes(net.config(), names);
    json out = json::array();
    for (const auto& d : dets) {
        const std::string name = static_cast<std::size_t>(d.class_id) < classes.size()
                                     ? classes[static_cast<std::size_t>(d.class_id)]
                                     : std::to_string(d.class_id);
        std::printf("%-10s %.3f  [%.3f %.3f %.3f %.3f]\n", name.c_str(), d.score, d.box.xmin, d.box.ymin, d.box.xmax,
                    d.box.ymax);
        out.push_back({{"class", name},
                       {"class_id", d.class_id},
                       {"score", d.score},
                       {"box", {d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax}}});
    }
    if (!overlay.empty()) data::write_ppm(draw_detections(img, dets), overlay);
    if (!json_path.empty()) data::write_file(json_path, out.dump(2));
    std::printf("%zu detections\n", dets.size());
    return 0;
}

int cmd_ablate(const std::string& config, std::size_t seeds, const std::string& train_manifest,
               const std::string& test_manifest, std::size_t train_count, std::size_t test_count,
               const std::string& report, std::size_t threads) {
    NetConfig cfg = config.empty() ? NetConfig{} : load_config(config);
    data::Dataset train_set, test_set;
    if (!train_manifest.empty()) {
        train_set = data::load_dataset(train_manifest);
    } else {
        train_set.classes = data::make_class_table(data::synthetic_class_names(cfg.num_classes));
        train_set.samples = data::gen_synthetic(1000, train_count, cfg.num_classes, cfg.input_size);
    }
    if (!test_manifest.empty()) {
        test_set = data::load_dataset(test_manifest);
    } else {
        test_set.classes = train_set.classes;
        test_set.samples = data::gen_synthetic(2000, test_count, cfg.num_classes, cfg.input_size);
    }
    check_classes(cfg, train_set.classes);
    check_classes(cfg, test_set.classes);
    train::AblationOptions opts;
    opts.seeds = seeds;
    opts.threads = threads;
    opts.on_run = [](const train::AblationArm& arm, std::size_t seed, double map) {
        std::printf("%-24s seed %zu  mAP %.4f\n", arm.label.c_str(), seed, map);
        std::fflush(stdout);
    };
    auto results = train::ablate(cfg, train_set, test_set, train::default_arms(), opts);
    std::printf("\n%s", train::ablation_table(results).c_str());
    if (!report.empty()) data::write_file(report, train::ablation_json(results));
    bool failed = false;
    for (const auto& r : results) failed = failed || !r.errors.empty();
    return failed ? 1 : 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t points) {
    bool ok = true;
    for (const auto& c : train::run_gradient_suite(seed, points)) {
        const bool pass = c.max_rel_error < 1e-4;
        ok = ok && pass;
        std::printf("%-4s %-24s %zu points  max rel err %.3e  (%.2fs)\n", pass ? "ok" : "FAIL", c.name.c_str(),
                    c.points, c.max_rel_error, c.seconds);
    }
    return ok ? 0 : 1;
}

int cmd_rasterize(const std::string& annotation, const std::string& names, std::size_t input, std::size_t stride,
                  std::size_t grid_size, const std::string& out) {
    const data::ClassTable classes = data::make_class_table(split_names(names));
    const std::string text = data::read_file(annotation);
    std::vector<BoundingBox> boxes = ext_of(annotation) == ".xml" ? data::parse_voc_xml(text, classes).boxes
                                                                  : data::parse_json_annotation(text, classes);
    const std::size_t n = grid_size ? grid_size : grid_resolution_for(input, stride);
    SegGrid grid = rasterize(boxes, n, n);
    data::write_pgm(label_image(grid, static_cast<int>(classes.size() - 1)), out + ".pgm");
    json j;
    j["height"] = grid.height;
    j["width"] = grid.width;
    j["classes"] = classes;
    j["labels"] = grid.labels;
    data::write_file(out + ".json", j.dump());
    std::printf("%zux%zu grid from %zu boxes -> %s.pgm, %s.json\n", n, n, boxes.size(), out.c_str(), out.c_str());
    return 0;
}

int cmd_dump_activation(const std::string& ckpt, const std::string& image, const std::string& out,
                        std::size_t columns) {
    detect::Network net = detect::load_checkpoint(ckpt);
    if (!net.seg_branch()) throw InvalidInput("checkpoint variant " + to_string(net.config().variant) +
                                              " has no segmentation branch");
    Tensor img = data::read_ppm(image);
    Graph g(false);
    detect::NetworkVars v = net.forward(g, g.constant(img));
    const std::pair<const char*, Var> maps[] = {
        {"x", v.sources[0]}, {"z", v.seg->z}, {"x_act", v.seg->x_act}, {"y", v.seg->y}};
    for (const auto& [name, var] : maps) {
        const std::string path = out + "_" + name + ".pgm";
        data::write_pgm(channel_mosaic(var.value(), columns), path);
        std::printf("%s %s -> %s\n", name, shape_str(var.shape()).c_str(), path.c_str());
    }
    return 0;
}

int cmd_gen_data(std::uint64_t seed, std::size_t count, std::size_t classes, std::size_t size,
                 const std::string& out) {
    data::Dataset ds;
    ds.classes = data::make_class_table(data::synthetic_class_names(classes));
    ds.samples = data::gen_synthetic(seed, count, classes, size);
    std::printf("wrote %s\n", data::save_dataset(ds, out).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"des: single-shot detector with segmentation-driven activation"};
    app.require_subcommand(1);
    int rc = 0;

    std::string config, manifest, out, ckpt, report, image, overlay, names, test_manifest, annotation;
    std::size_t threads = 0;

    auto* tr = app.add_subcommand("train", "train a network and write loss.csv plus checkpoints");
    tr->add_option("--config", config, "config JSON (defaults when omitted)");
    tr->add_option("--data", manifest, "dataset manifest")->required();
    tr->add_option("--out", out, "output directory")->required();
    tr->add_option("--threads", threads, "worker threads (default DES_THREADS or 1)");
    tr->callback([&] { rc = cmd_train(config, manifest, out, threads); });

    bool dump = false;
    auto* ev = app.add_subcommand("eval", "mAP@0.5 of a checkpoint on a dataset");
    ev->add_option("--ckpt", ckpt, "checkpoint")->required();
    ev->add_option("--data", manifest, "dataset manifest")->required();
    ev->add_option("--report", report, "JSON report path");
    ev->add_flag("--dump-detections", dump, "include per-image detections in the report");
    ev->callback([&] { rc = cmd_eval(ckpt, manifest, report, dump); });

    double thresh = 0.3;
    auto* in = app.add_subcommand("infer", "detect objects in one PPM image");
    in->add_option("--ckpt", ckpt, "checkpoint")->required();
    in->add_option("--image", image, "P6 PPM image")->required();
    in->add_option("--score-thresh", thresh, "minimum detection score")->capture_default_str();
    in->add_option("--overlay", overlay, "write the image with boxes drawn");
    in->add_option("--classes", names, "comma-separated class names");
    in->add_option("--json", report, "write detections as JSON");
    in->callback([&] { rc = cmd_infer(ckpt, image, thresh, overlay, names, report); });

    std::size_t seeds = 5, train_count = 500, test_count = 100;
    auto* ab = app.add_subcommand("ablate", "train and evaluate every variant over several seeds");
    ab->add_option("--config", config, "base config JSON");
    ab->add_option("--seeds", seeds, "seeds per arm")->capture_default_str();
    ab->add_option("--data", manifest, "training manifest (synthetic when omitted)");
    ab->add_option("--test-data", test_manifest, "test manifest (synthetic when omitted)");
    ab->add_option("--train-count", train_count, "synthetic training images")->capture_default_str();
    ab->add_option("--test-count", test_count, "synthetic test images")->capture_default_str();
    ab->add_option("--report", report, "JSON report path");
    ab->add_option("--threads", threads, "worker threads per run");
    ab->callback([&] {
        rc = cmd_ablate(config, seeds, manifest, test_manifest, train_count, test_count, report, threads);
    });

    std::uint64_t seed = 1;
    std::size_t points = 5;
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable layer");
    gc->add_option("--seed", seed)->capture_default_str();
    gc->add_option("--points", points, "random points per layer")->capture_default_str();
    gc->callback([&] { rc = cmd_gradcheck(seed, points); });

    std::size_t input = 300, stride = 8, grid_size = 0;
    auto* rg = app.add_subcommand("rasterize-gt", "weak segmentation labels from box annotations");
    rg->add_option("--annotation", annotation, "VOC XML or JSON annotation")->required();
    rg->add_option("--classes", names, "comma-separated class names")->required();
    rg->add_option("--input", input, "network input size")->capture_default_str();
    rg->add_option("--stride", stride, "feature stride")->capture_default_str();
    rg->add_option("--grid", grid_size, "grid size (overrides input/stride)");
    rg->add_option("--out", out, "output prefix for .pgm and .json")->required();
    rg->callback([&] { rc = cmd_rasterize(annotation, names, input, stride, grid_size, out); });

    std::size_t columns = 8;
    auto* da = app.add_subcommand("dump-activation", "write X, Z, X' and Y of the segmentation branch as PGM");
    da->add_option("--ckpt", ckpt, "checkpoint")->required();
    da->add_option("--image", image, "P6 PPM image")->required();
    da->add_option("--out", out, "output prefix")->required();
    da->add_option("--columns", columns, "channels per mosaic row")->capture_default_str();
    da->callback([&] { rc = cmd_dump_activation(ckpt, image, out, columns); });

    std::size_t count = 500, classes = 3, size = 64;
    auto* gd = app.add_subcommand("gen-data", "write a synthetic shapes dataset");
    gd->add_option("--seed", seed)->capture_default_str();
    gd->add_option("--count", count)->capture_default_str();
    gd->add_option("--classes", classes)->capture_default_str();
    gd->add_option("--size", size)->capture_default_str();
    gd->add_option("--out", out, "output directory")->required();
    gd->callback([&] { rc = cmd_gen_data(seed, count, classes, size, out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "des: %s\n", e.what());
        return 1;
    }
    return rc;
}
