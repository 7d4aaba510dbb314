#include "des/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "des/core/error.hpp"
#include "des/detect/matching.hpp"
#include "des/train/objective.hpp"

namespace des::train {

namespace fs = std::filesystem;

std::string loss_csv_header() { return "iteration,L_det,L_seg,L"; }

std::string loss_csv_row(const LossRecord& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g", r.iteration, r.det, r.seg, r.total);
    return buf;
}

std::size_t default_threads() {
    if (const char* env = std::getenv("DES_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return 1;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
    std::vector<double> out(values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        acc += values[i];
        if (i >= window) acc -= values[i - window];
        out[i] = acc / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

namespace {

struct SampleResult {
    double det = 0.0, seg = 0.0, total = 0.0;
    std::vector<Tensor> grads;
    std::string error;
};

void run_sample(const detect::Network& net, const data::Sample& sample, bool flip, std::size_t iteration,
                SampleResult& out) {
    const data::Sample flipped = flip ? data::hflip(sample) : data::Sample{};
    const data::Sample& s = flip ? flipped : sample;
    const std::size_t n = net.seg_grid_size();
    const SegGrid grid = (!flip && s.seg_grid.height == n && s.seg_grid.width == n) ? s.seg_grid
                                                                                     : rasterize(s.boxes, n, n);
    const detect::MatchResult match = detect::match_anchors(net.anchors(), s.boxes);
    Graph g;
    SampleLoss loss = sample_loss(g, net, s.image, match, grid);
    out.det = loss.det.value().item();
    out.seg = loss.seg ? loss.seg->value().item() : 0.0;
    out.total = loss.total.value().item();
    if (!std::isfinite(out.total)) {
        std::string where = "unknown node";
        if (auto id = g.first_non_finite()) where = "node #" + std::to_string(*id) + " (" + g.op_name(*id) + ")";
        out.error = "non-finite loss at iteration " + std::to_string(iteration) + "; first non-finite value at " + where;
        return;
    }
    g.backward(loss.total);
    out.grads.clear();
    for (const Parameter& p : net.params().items()) out.grads.push_back(g.param_grad(p));
}

}  // namespace

TrainResult train(const NetConfig& cfg, const std::vector<data::Sample>& data, const TrainOptions& opts) {
    cfg.validate();
    if (data.empty()) throw InvalidInput("train: dataset is empty");
    TrainResult result{detect::Network(cfg), {}};
    detect::Network& net = result.net;
    const std::size_t threads = opts.threads ? opts.threads : default_threads();

    std::ofstream csv;
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        csv.open(fs::path(opts.out_dir) / "loss.csv", std::ios::binary | std::ios::trunc);
        if (!csv) throw InvalidInput("cannot write " + (fs::path(opts.out_dir) / "loss.csv").string());
        csv << loss_csv_header() << '\n';
    }

    Rng rng(cfg.seed ^ 0x5851F42D4C957F2Dull);
    std::vector<std::size_t> order(data.size());
    std::size_t cursor = data.size();
    std::vector<Tensor> velocity;
    const std::size_t total_iters = cfg.total_iterations();
    const std::size_t B = cfg.batch_size;
    std::vector<SampleResult> results(B);

    for (std::size_t it = 0; it < total_iters; ++it) {
        std::vector<std::size_t> batch(B);
        std::vector<bool> flips(B);
        for (std::size_t b = 0; b < B; ++b) {
            if (cursor == order.size()) {
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                for (std::size_t i = order.size() - 1; i > 0; --i) {
                    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
                }
                cursor = 0;
            }
            batch[b] = order[cursor++];
            flips[b] = rng.bernoulli(cfg.hflip_prob);
        }

        auto work = [&](std::size_t b) { run_sample(net, data[batch[b]], flips[b], it + 1, results[b]); };
        if (threads <= 1 || B == 1) {
            for (std::size_t b = 0; b < B; ++b) work(b);
        } else {
            std::vector<std::thread> pool;
            const std::size_t T = std::min(threads, B);
            for (std::size_t t = 0; t < T; ++t) {
                pool.emplace_back([&, t] {
                    for (std::size_t b = t; b < B; b += T) {
                        try {
                            work(b);
                        } catch (const std::exception& e) {
                            results[b].error = e.what();
                        }
                    }
                });
            }
            for (auto& th : pool) th.join();
        }

        LossRecord rec;
        rec.iteration = it + 1;
        std::vector<Tensor> grads;
        for (std::size_t b = 0; b < B; ++b) {
            if (!results[b].error.empty()) throw NumericError(results[b].error);
            rec.det += results[b].det;
            rec.seg += results[b].seg;
            rec.total += results[b].total;
            if (grads.empty()) {
                grads = std::move(results[b].grads);
            } else {
                for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += results[b].grads[i];
            }
        }
        const double inv = 1.0 / static_cast<double>(B);
        rec.det *= inv;
        rec.seg *= inv;
        rec.total *= inv;
        for (Tensor& g : grads) {
            for (double& v : g.data()) v *= inv;
        }
        sgd_step(net.params(), grads, velocity, cfg.lr_at(it), cfg.momentum, cfg.weight_decay);

        result.curve.push_back(rec);
        if (csv.is_open()) csv << loss_csv_row(rec) << '\n';
        if (opts.on_iteration) opts.on_iteration(rec);
        if (!opts.out_dir.empty() && cfg.checkpoint_every > 0 && rec.iteration % cfg.checkpoint_every == 0 &&
            rec.iteration != total_iters) {
            char name[32];
            std::snprintf(name, sizeof name, "ckpt_%06zu", rec.iteration);
            detect::save_checkpoint(net, (fs::path(opts.out_dir) / name).string());
        }
    }
    if (!opts.out_dir.empty()) {
        csv.flush();
        detect::save_checkpoint(net, (fs::path(opts.out_dir) / "final.ckpt").string());
    }
    return result;
}

}  // namespace des::train
