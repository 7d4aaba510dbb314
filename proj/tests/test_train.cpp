#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ap_oracle.hpp"
#include "des/core/error.hpp"
#include "des/data/image_io.hpp"
#include "des/train/ablation.hpp"
#include "des/train/evaluate.hpp"
#include "des/train/objective.hpp"
#include "des/train/trainer.hpp"
#include "test_util.hpp"

using namespace des;
using namespace des::train;
using des::detect::CornerBox;
using des::detect::Detection;

namespace {

NetConfig tiny_config(Variant v, std::size_t iters) {
    NetConfig c;
    c.input_size = 32;
    c.backbone_widths = {4, 8, 8};
    c.source_strides = {8, 16};
    c.seg_atrous_width = 4;
    c.seg_g_width = 8;
    c.variant = v;
    c.schedule = {{1e-2, iters}};
    c.batch_size = 2;
    return c;
}

data::ClassTable three() { return data::make_class_table(data::synthetic_class_names(3)); }

}  // namespace

// ---- objective -------------------------------------------------------------

TEST(TotalLoss, Values) {
    EXPECT_NEAR(total_loss(2.0, 3.0, 0.1), 2.3, 1e-15);
    EXPECT_EQ(total_loss(2.0, 3.0, 0.0), 2.0);
    EXPECT_EQ(total_loss(2.0, 3.0, 1.0), 5.0);
}

TEST(TotalLoss, LinearInAlphaWithSlopeSeg) {
    const double det = 1.7, seg = 0.9;
    const double a = total_loss(det, seg, 0.1), b = total_loss(det, seg, 0.5), c = total_loss(det, seg, 2.0);
    EXPECT_NEAR((b - a) / 0.4, seg, 1e-12);
    EXPECT_NEAR((c - b) / 1.5, seg, 1e-12);
    Graph g;
    Var v = total_loss(g.leaf(Tensor::scalar(det)), g.leaf(Tensor::scalar(seg)), 0.1);
    EXPECT_NEAR(v.value().item(), det + 0.1 * seg, 1e-15);
}

// ---- sgd -------------------------------------------------------------------

TEST(Sgd, ZeroGradFixpoint) {
    ParameterSet ps;
    ps.add("w", {3}).value = Tensor({3}, std::vector<double>{1, -2, 3});
    std::vector<Tensor> vel;
    sgd_step(ps, {Tensor({3})}, vel, 0.1, 0.9, 0.0);
    EXPECT_EQ(ps.items()[0].value, Tensor({3}, std::vector<double>{1, -2, 3}));
}

TEST(Sgd, OneStep) {
    ParameterSet ps;
    ps.add("w", {1}).value = Tensor({1}, 1.0);
    std::vector<Tensor> vel;
    sgd_step(ps, {Tensor({1}, 1.0)}, vel, 0.1, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(ps.items()[0].value[0], 0.9);
}

TEST(Sgd, TwoStepsMatchHandUnroll) {
    ParameterSet ps;
    ps.add("w", {1}).value = Tensor({1}, 0.7);
    std::vector<Tensor> vel;
    const double lr = 0.05, m = 0.9, wd = 5e-4, g1 = 0.3, g2 = -1.1;
    sgd_step(ps, {Tensor({1}, g1)}, vel, lr, m, wd);
    sgd_step(ps, {Tensor({1}, g2)}, vel, lr, m, wd);
    double p = 0.7, v = 0.0;
    v = m * v + g1 + wd * p;
    p = p - lr * v;
    v = m * v + g2 + wd * p;
    p = p - lr * v;
    EXPECT_NEAR(ps.items()[0].value[0], p, 1e-15);
}

TEST(Sgd, WeightDecayShrinksNorm) {
    ParameterSet ps;
    Rng rng(1);
    ps.add("w", {10}).value = des::testing::random_tensor({10}, rng);
    std::vector<Tensor> vel;
    auto norm = [&] {
        double s = 0;
        for (double x : ps.items()[0].value.data()) s += x * x;
        return s;
    };
    double prev = norm();
    for (int i = 0; i < 5; ++i) {
        sgd_step(ps, {Tensor({10})}, vel, 0.1, 0.9, 0.01);
        const double now = norm();
        EXPECT_LT(now, prev);
        prev = now;
    }
}

TEST(Sgd, ShapeMismatch) {
    ParameterSet ps;
    ps.add("w", {2});
    std::vector<Tensor> vel;
    EXPECT_THROW(sgd_step(ps, {Tensor({3})}, vel, 0.1), InvalidInput);
    EXPECT_THROW(sgd_step(ps, {}, vel, 0.1), InvalidInput);
}

// ---- average precision -----------------------------------------------------

TEST(Evaluate, PerfectDetector) {
    std::vector<std::vector<BoundingBox>> gt = {{{1, 0.1, 0.1, 0.5, 0.5}}};
    std::vector<std::vector<Detection>> det = {{{1, 0.9, CornerBox{0.1, 0.1, 0.5, 0.5}}}};
    EvalReport r = evaluate_detections(det, gt, data::make_class_table({"a"}));
    EXPECT_DOUBLE_EQ(*r.per_class[0].ap, 1.0);
    EXPECT_DOUBLE_EQ(r.map, 1.0);
}

TEST(Evaluate, BackgroundOnlyDetections) {
    std::vector<std::vector<BoundingBox>> gt = {{{1, 0.1, 0.1, 0.3, 0.3}}};
    std::vector<std::vector<Detection>> det = {{{1, 0.9, CornerBox{0.6, 0.6, 0.9, 0.9}}}};
    EXPECT_DOUBLE_EQ(evaluate_detections(det, gt, data::make_class_table({"a"})).map, 0.0);
    EXPECT_DOUBLE_EQ(evaluate_detections({{}}, gt, data::make_class_table({"a"})).map, 0.0);
}

TEST(Evaluate, ClassesWithoutGroundTruthAreExcluded) {
    std::vector<std::vector<BoundingBox>> gt = {{{1, 0.1, 0.1, 0.5, 0.5}}};
    std::vector<std::vector<Detection>> det = {{{1, 0.9, CornerBox{0.1, 0.1, 0.5, 0.5}}, {2, 0.8, CornerBox{0, 0, 1, 1}}}};
    EvalReport r = evaluate_detections(det, gt, data::make_class_table({"a", "b"}));
    EXPECT_FALSE(r.per_class[1].ap.has_value());
    EXPECT_DOUBLE_EQ(r.map, 1.0);
}

TEST(Evaluate, DuplicatesAndDifficult) {
    std::vector<std::vector<BoundingBox>> gt = {{{1, 0.1, 0.1, 0.5, 0.5}, {1, 0.6, 0.6, 0.9, 0.9, true}}};
    std::vector<std::vector<Detection>> det = {{{1, 0.9, CornerBox{0.1, 0.1, 0.5, 0.5}},
                                                {1, 0.8, CornerBox{0.1, 0.1, 0.5, 0.5}},
                                                {1, 0.7, CornerBox{0.6, 0.6, 0.9, 0.9}}}};
    EvalReport r = evaluate_detections(det, gt, data::make_class_table({"a"}));
    EXPECT_EQ(r.per_class[0].num_gt, 1u);
    // ranks: TP, FP (duplicate), ignored (difficult) -> AP 1
    EXPECT_DOUBLE_EQ(*r.per_class[0].ap, 1.0);
}

TEST(Evaluate, HandComputedAp) {
    // TP, FP, TP with 3 gt: recall 1/3 @ p 1, 2/3 @ p 2/3 -> AP = 1/3 + 1/3 * 2/3
    EXPECT_NEAR(average_precision({true, false, true}, {false, true, false}, 3), 1.0 / 3 + 2.0 / 9, 1e-15);
    EXPECT_EQ(average_precision({}, {}, 2), 0.0);
}

TEST(Evaluate, ApMatchesReferenceOnRandomScenarios) {
    Rng rng(31);
    const auto classes = data::make_class_table({"a", "b", "c"});
    for (int trial = 0; trial < 50; ++trial) {
        auto [det, gt] = des::testing::random_eval_scenario(rng, 10);
        EvalReport r = evaluate_detections(det, gt, classes);
        double sum = 0.0;
        int counted = 0;
        for (int c = 1; c <= 3; ++c) {
            const auto want = des::testing::reference_class_ap(det, gt, c);
            const auto& entry = r.per_class[static_cast<std::size_t>(c - 1)];
            if (!want) {
                EXPECT_FALSE(entry.ap.has_value());
                continue;
            }
            EXPECT_NEAR(*entry.ap, *want, 1e-10) << "trial " << trial << " class " << c;
            sum += *want;
            ++counted;
        }
        if (counted) EXPECT_NEAR(r.map, sum / counted, 1e-10);
    }
}

TEST(Evaluate, OrderInvariantForDistinctScores) {
    Rng rng(32);
    std::vector<std::vector<BoundingBox>> gt = {{{1, 0.1, 0.1, 0.5, 0.5}, {1, 0.5, 0.5, 0.9, 0.9}}, {{1, 0.2, 0.2, 0.6, 0.6}}};
    std::vector<std::vector<Detection>> det = {
        {{1, 0.9, CornerBox{0.1, 0.1, 0.5, 0.5}}, {1, 0.3, CornerBox{0.5, 0.5, 0.9, 0.9}}, {1, 0.6, CornerBox{0, 0, 0.2, 0.2}}},
        {{1, 0.4, CornerBox{0.2, 0.2, 0.6, 0.6}}, {1, 0.5, CornerBox{0.7, 0.7, 0.9, 0.9}}}};
    const double base = evaluate_detections(det, gt, data::make_class_table({"a"})).map;
    for (int t = 0; t < 10; ++t) {
        auto shuffled = det;
        for (auto& list : shuffled) {
            for (std::size_t i = list.size() - 1; i > 0; --i) {
                std::swap(list[i], list[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
            }
        }
        EXPECT_EQ(evaluate_detections(shuffled, gt, data::make_class_table({"a"})).map, base);
    }
}

// ---- training --------------------------------------------------------------

TEST(Train, AlphaZeroLogsSegButTotalIsDet) {
    auto data = data::gen_synthetic(3, 4, 3, 32);
    NetConfig cfg = tiny_config(Variant::GS, 5);
    cfg.alpha = 0.0;
    TrainResult r = des::train::train(cfg, data);
    ASSERT_EQ(r.curve.size(), 5u);
    for (const LossRecord& rec : r.curve) {
        EXPECT_GT(rec.seg, 0.0);
        EXPECT_EQ(rec.total, rec.det);
    }
}

TEST(Train, OverfitsSingleSample) {
    auto data = data::gen_synthetic(4, 1, 3, 32);
    NetConfig cfg = tiny_config(Variant::GS, 200);
    cfg.batch_size = 1;
    cfg.backbone_widths = {8, 16, 16};
    cfg.seg_atrous_width = 8;
    cfg.seg_g_width = 16;
    cfg.hflip_prob = 0.0;
    TrainResult r = des::train::train(cfg, data);
    const double first = r.curve.front().total, last = r.curve.back().total;
    EXPECT_LE(last, 0.5 * first) << "first " << first << " last " << last;
}

TEST(Train, DeterministicAcrossRunsAndThreads) {
    auto data = data::gen_synthetic(5, 6, 3, 32);
    NetConfig cfg = tiny_config(Variant::GS, 6);
    cfg.batch_size = 3;
    TrainOptions one, many;
    one.threads = 1;
    many.threads = 3;
    TrainResult a = des::train::train(cfg, data, one), b = des::train::train(cfg, data, one), c = des::train::train(cfg, data, many);
    ASSERT_EQ(a.curve.size(), 6u);
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        EXPECT_EQ(loss_csv_row(a.curve[i]), loss_csv_row(b.curve[i]));
        EXPECT_EQ(loss_csv_row(a.curve[i]), loss_csv_row(c.curve[i]));
    }
    for (std::size_t i = 0; i < a.net.params().size(); ++i) {
        EXPECT_EQ(max_abs_diff(a.net.params().items()[i].value, c.net.params().items()[i].value), 0.0)
            << a.net.params().items()[i].name;
    }
}

TEST(Train, WritesCsvAndCheckpoints) {
    const auto dir = std::filesystem::temp_directory_path() / "des_train_test";
    std::filesystem::remove_all(dir);
    auto data = data::gen_synthetic(6, 4, 3, 32);
    NetConfig cfg = tiny_config(Variant::G, 4);
    cfg.checkpoint_every = 2;
    TrainOptions o;
    o.out_dir = dir.string();
    des::train::train(cfg, data, o);
    EXPECT_TRUE(std::filesystem::exists(dir / "loss.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "ckpt_000002"));
    EXPECT_TRUE(std::filesystem::exists(dir / "ckpt_000002.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "final.ckpt"));
    const std::string csv = data::read_file((dir / "loss.csv").string());
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,L_det,L_seg,L");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    std::filesystem::remove_all(dir);
}

TEST(Train, NonFiniteLossNamesNode) {
    auto data = data::gen_synthetic(7, 2, 3, 32);
    NetConfig cfg = tiny_config(Variant::GS, 3);
    cfg.schedule = {{1e30, 3}};
    try {
        des::train::train(cfg, data);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("first non-finite value at node #"), std::string::npos) << e.what();
    }
}

TEST(Train, EmptyDataset) { EXPECT_THROW(des::train::train(tiny_config(Variant::GS, 1), {}), InvalidInput); }

TEST(Train, MovingAverage) {
    EXPECT_EQ(moving_average({1, 2, 3, 4}, 2), (std::vector<double>{1, 1.5, 2.5, 3.5}));
}

TEST(Evaluate, NetworkEvaluationIsReproducible) {
    auto data = data::gen_synthetic(8, 5, 3, 32);
    detect::Network net(tiny_config(Variant::GS, 1));
    EvalReport a = evaluate(net, data, three()), b = evaluate(net, data, three());
    EXPECT_EQ(a.map, b.map);
    EXPECT_EQ(a.images, 5u);
    EXPECT_THROW(evaluate(net, data, data::make_class_table({"x"})), InvalidInput);
    EXPECT_NE(report_json(a, true).find("\"detections\""), std::string::npos);
}

// ---- ablation --------------------------------------------------------------

TEST(Ablation, SmokeTwoArms) {
    data::Dataset tr{three(), data::gen_synthetic(9, 4, 3, 32)};
    data::Dataset te{three(), data::gen_synthetic(10, 3, 3, 32)};
    std::vector<AblationArm> arms = {{"baseline", Variant::Baseline, 0.0}, {"+G+S", Variant::GS, 0.1}};
    AblationOptions o;
    o.seeds = 1;
    auto res = ablate(tiny_config(Variant::GS, 2), tr, te, arms, o);
    ASSERT_EQ(res.size(), 2u);
    for (const auto& r : res) {
        EXPECT_EQ(r.maps.size(), 1u);
        EXPECT_TRUE(r.errors.empty());
    }
    const std::string table = ablation_table(res);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
    EXPECT_EQ(default_arms().size(), 6u);
}

TEST(Ablation, FailingArmDoesNotAbortOthers) {
    data::Dataset tr{three(), data::gen_synthetic(9, 4, 3, 32)};
    data::Dataset te{three(), data::gen_synthetic(10, 3, 3, 32)};
    NetConfig base = tiny_config(Variant::GS, 2);
    base.schedule = {{1e30, 3}};
    std::vector<AblationArm> arms = {{"baseline", Variant::Baseline, 0.0}, {"+G+S", Variant::GS, 0.1}};
    AblationOptions o;
    o.seeds = 1;
    auto res = ablate(base, tr, te, arms, o);
    ASSERT_EQ(res.size(), 2u);
    EXPECT_EQ(res[1].errors.size(), 1u);
}
