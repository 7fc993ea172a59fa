#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cmf/trainer.hpp"

using namespace cmf;
using train::TrainConfig;

namespace {

template <class Tag>
WindowSet<Tag> linear_set(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    WindowSet<Tag> s;
    s.window_len = 1;
    for (std::size_t i = 0; i < n; ++i) {
        WindowedSample w;
        w.x.resize(kFeatureCount);
        for (double& v : w.x) v = u(g);
        w.y = 0.2 + 0.5 * w.x[0] - 0.3 * w.x[2] + 0.1 * w.x[4];
        w.y_raw = 1000.0 + w.y;
        w.group_id = static_cast<int>(i);
        s.samples.push_back(w);
    }
    return s;
}

// Wraps a window set and counts element reads.
template <class Set>
struct Counting {
    const Set& set;
    mutable std::size_t reads = 0;
    std::size_t size() const { return set.size(); }
    const WindowedSample& operator[](std::size_t i) const {
        ++reads;
        return set[i];
    }
};

}  // namespace

TEST(AdamW, FirstStepAndDecoupledDecay) {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.5;
    train::AdamW opt(cfg, {true, false});
    std::vector<double> p{1.0, 1.0};
    const std::vector<double> g{0.2, -0.4};
    opt.step(p, g);
    // decay first: 1 - 0.1 * 0.5 = 0.95; bias-corrected step = lr * g / (|g| + eps)
    EXPECT_NEAR(p[0], 0.95 - 0.1 * 0.2 / (0.2 + 1e-8), 1e-12);
    EXPECT_NEAR(p[1], 1.0 + 0.1 * 0.4 / (0.4 + 1e-8), 1e-12);
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(AdamW, SecondStepMatchesHandComputation) {
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.weight_decay = 0.0;
    train::AdamW opt(cfg, {true});
    std::vector<double> p{0.0};
    opt.step(p, std::vector<double>{1.0});
    opt.step(p, std::vector<double>{3.0});
    const double m = 0.9 * 0.1 + 0.1 * 3.0, v = 0.999 * 0.001 + 0.001 * 9.0;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    EXPECT_NEAR(p[0], -0.01 * 1.0 / (1.0 + 1e-8) - 0.01 * mh / (std::sqrt(vh) + 1e-8), 1e-12);
}

TEST(AdamW, MaskCoversWeightsOnly) {
    nn::Network net(nn::ModelSpec::mlp());
    const auto mask = train::weight_mask(net);
    ASSERT_EQ(mask.size(), 57u);
    EXPECT_EQ(std::count(mask.begin(), mask.end(), true), 48);  // 5*8 + 8*1
}

TEST(EarlyStopping, FlatLossStopsAfterPatience) {
    train::EarlyStopping s(10);
    std::size_t stop = 0;
    for (std::size_t e = 1; e <= 60 && !stop; ++e)
        if (s.update(e, 1.0)) stop = e;
    EXPECT_EQ(stop, 11u);
    EXPECT_EQ(s.best_epoch(), 1u);
}

TEST(EarlyStopping, ImprovementResetsCounter) {
    train::EarlyStopping s(2);
    EXPECT_FALSE(s.update(1, 5.0));
    EXPECT_FALSE(s.update(2, 6.0));
    EXPECT_FALSE(s.update(3, 4.0));
    EXPECT_FALSE(s.update(4, 4.0));  // equal is not an improvement
    EXPECT_TRUE(s.update(5, 4.5));
    EXPECT_EQ(s.best_epoch(), 3u);
}

TEST(Train, LearnsAndRestoresBestEpoch) {
    const auto tr = linear_set<TrainTag>(200, 1);
    const auto va = linear_set<ValidationTag>(60, 2);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.max_epochs = 30;
    cfg.seed = 3;
    auto spec = nn::ModelSpec::mlp();
    spec.seed = 3;
    const auto res = train::train(spec, tr, va, cfg);
    ASSERT_FALSE(res.log.epochs.empty());
    double best = 1e300;
    for (const auto& e : res.log.epochs) best = std::min(best, e.val_mse);
    nn::Network net(spec);
    auto ws = net.make_workspace();
    EXPECT_DOUBLE_EQ(train::mean_squared_error(net, res.params.values, va, ws), best);
    EXPECT_EQ(res.log.best_val_mse, best);
    EXPECT_LT(best, 1e-3);
    EXPECT_LT(res.log.epochs.back().train_mse, res.log.epochs.front().train_mse);
}

TEST(Train, DeterministicPerSeed) {
    const auto tr = linear_set<TrainTag>(51, 1);  // odd size keeps a short last batch
    const auto va = linear_set<ValidationTag>(20, 2);
    TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.seed = 9;
    auto spec = nn::ModelSpec::mlpw(1);
    spec.seed = 9;
    const auto a = train::train(spec, tr, va, cfg);
    const auto b = train::train(spec, tr, va, cfg);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.log.to_text(), b.log.to_text());
    cfg.seed = 10;
    EXPECT_NE(train::train(spec, tr, va, cfg).params.values, a.params.values);
}

TEST(Train, ReadsOnlyTrainingAndValidationSources) {
    const auto tr = linear_set<TrainTag>(40, 1);
    const auto va = linear_set<ValidationTag>(10, 2);
    Counting<TrainSet> ctr{tr};
    Counting<ValidationSet> cva{va};
    TrainConfig cfg;
    cfg.max_epochs = 3;
    auto spec = nn::ModelSpec::mlp();
    const auto res = train::train(spec, ctr, cva, cfg);
    EXPECT_EQ(ctr.reads, 1 + 3 * 40u);
    EXPECT_EQ(cva.reads, 1 + 3 * 10u);
    EXPECT_EQ(res.log.stop_epoch, 3u);
}

TEST(Train, RejectsMismatchedWindows) {
    const auto tr = linear_set<TrainTag>(10, 1);
    const auto va = linear_set<ValidationTag>(10, 2);
    EXPECT_THROW(train::train(nn::ModelSpec::cnn(5), tr, va, TrainConfig{}), ShapeError);
}

TEST(Train, NonFiniteDataReportsEpochAndBatch) {
    auto tr = linear_set<TrainTag>(10, 1);
    const auto va = linear_set<ValidationTag>(10, 2);
    tr.samples[4].x[1] = std::numeric_limits<double>::infinity();
    try {
        train::train(nn::ModelSpec::mlp(), tr, va, TrainConfig{});
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
    }
}

TEST(Presets, TableValues) {
    using nn::ModelKind;
    auto p = train::table_preset(ModelKind::cnn, false, Parity::odd);
    EXPECT_EQ(p.window_len, 5u);
    EXPECT_EQ(p.config.learning_rate, 1e-4);
    EXPECT_EQ(p.config.weight_decay, 1e-3);
    p = train::table_preset(ModelKind::mlp, true, Parity::odd);
    EXPECT_EQ(p.window_len, 1u);
    EXPECT_EQ(p.config.weight_decay, 1e-5);
    p = train::table_preset(ModelKind::mlpw, true, Parity::even);
    EXPECT_EQ(p.window_len, 2u);
    EXPECT_EQ(p.config.learning_rate, 1e-3);
    EXPECT_EQ(p.config.batch_size, 2u);
    EXPECT_EQ(p.config.max_epochs, 60u);
    EXPECT_EQ(p.config.patience, 10u);
}

TEST(Tuning, TieBreakPrefersLargerDecayThenSmallerRate) {
    std::vector<train::GridScore> s{{{1e-3, 1e-4}, {}, 0.5}, {{1e-3, 1e-3}, {}, 0.5}, {{1e-4, 1e-3}, {}, 0.5},
                                    {{1e-2, 1e-5}, {}, 0.6}};
    EXPECT_EQ(train::select_best(s), 2u);
    s.push_back({{1e-2, 1e-5}, {}, 0.4});
    EXPECT_EQ(train::select_best(s), 4u);
}

TEST(Sweep, ParallelMatchesSerial) {
    SplitWindows w{linear_set<TrainTag>(30, 1), linear_set<ValidationTag>(10, 2), linear_set<TestTag>(12, 3)};
    Scaler sc;
    sc.target_min = 0.0;
    sc.target_max = 1.0;
    TrainConfig cfg;
    cfg.max_epochs = 4;
    const auto a = train::seed_sweep(nn::ModelSpec::mlp(), w, sc, cfg, {3, 1, 2}, 1, "x");
    const auto b = train::seed_sweep(nn::ModelSpec::mlp(), w, sc, cfg, {1, 2, 3}, 3, "x");
    ASSERT_EQ(a.runs.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a.runs[i].seed, i + 1);
        EXPECT_EQ(a.runs[i].params, b.runs[i].params);
        EXPECT_EQ(a.runs[i].test_errors.y_hat, b.runs[i].test_errors.y_hat);
    }
    EXPECT_EQ(a.failures, 0u);
}
