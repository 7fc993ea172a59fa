#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cmf/pipeline.hpp"
#include "cmf/rig.hpp"
#include "support.hpp"

using namespace cmf;

namespace {

const Dataset& small_data() {
    static const Dataset ds = generate_dataset(support::small_rig());
    return ds;
}

template <class Set>
void expect_sources_within(const Set& set, const std::vector<int>& allowed) {
    const std::set<int> ok(allowed.begin(), allowed.end());
    for (const auto& w : set.samples) {
        EXPECT_TRUE(ok.contains(w.group_id));
        for (int g : w.source_groups) EXPECT_TRUE(ok.contains(g)) << "group " << g;
    }
}

pipeline::RunOptions quick(const char* rate, nn::ModelKind kind) {
    pipeline::RunOptions o;
    o.rate = dsp::ResampleSpec::parse(rate);
    o.kind = kind;
    o.seeds = {1, 2};
    return o;
}

}  // namespace

TEST(Prepare, DecimatedSeriesAreFilteredFirst) {
    for (double iv : {0.25, 1.0, 4.0}) {
        const auto p = pipeline::prepare(small_data(), dsp::ResampleSpec::every(iv));
        ASSERT_TRUE(p.filter);
        EXPECT_EQ(p.filter->length(), pipeline::kFilterLength);
        for (const auto& e : p.data) {
            EXPECT_GT(e.features.lowpass_cutoff_hz, 0.0);
            EXPECT_GT(e.truth.lowpass_cutoff_hz, 0.0);
            EXPECT_NEAR(e.sample_rate_hz(), 14.3 / std::round(iv * 14.3), 1e-12);
        }
    }
    const auto m = pipeline::prepare(small_data(), dsp::ResampleSpec::experiment_mean());
    for (const auto& e : m.data) EXPECT_EQ(e.length(), 1u);
}

TEST(Leakage, WindowsStayInsideExperiments) {
    for (const char* rate : {"original", "0.25s", "4s"}) {
        const auto spec = dsp::ResampleSpec::parse(rate);
        const auto p = pipeline::prepare(small_data(), spec);
        const auto plan = make_split(pipeline::group_ids(p.data), Parity::even, pipeline::kValFraction, 0);
        const auto w = build_windows(p.data, plan, {5, 5, 1}, pipeline::segmentation_for(spec));
        std::map<int, std::size_t> length;
        for (const auto& e : p.data) length[e.group_id] = e.length();
        for (const auto* set : {&w.train.samples, &w.val.samples}) {
            for (const auto& s : *set) {
                for (int g : s.source_groups) EXPECT_EQ(g, s.group_id);
                EXPECT_LT(s.t, length[s.group_id]);
                EXPECT_GE(s.t, 4u);
            }
        }
        for (const auto& s : w.test.samples)
            for (int g : s.source_groups) EXPECT_EQ(g, s.group_id);
    }
}

TEST(Leakage, SplitMembersOnlySeeTheirOwnGroups) {
    for (const char* rate : {"4s", "60s"})
        for (auto parity : {Parity::even, Parity::odd}) {
            const auto spec = dsp::ResampleSpec::parse(rate);
            const auto p = pipeline::prepare(small_data(), spec);
            const auto plan = make_split(pipeline::group_ids(p.data), parity, pipeline::kValFraction, 3);
            const auto w = build_windows(p.data, plan, {2, 2, 1}, pipeline::segmentation_for(spec));
            expect_sources_within(w.train, plan.train_groups);
            expect_sources_within(w.val, plan.val_groups);
            expect_sources_within(w.test, plan.test_groups);
        }
}

TEST(Leakage, CvEvaluationFollowsFitting) {
    const auto plan = make_split(pipeline::group_ids(small_data()), Parity::odd, pipeline::kValFraction, 0);
    for (const auto& f : cv_folds(plan.train_groups, 5)) {
        const int last_fit = *std::max_element(f.fit_groups.begin(), f.fit_groups.end());
        for (int g : f.eval_groups) EXPECT_GT(g, last_fit);
    }
}

TEST(Leakage, HeldOutDataDoesNotInfluenceTraining) {
    const auto opt = quick("4s", nn::ModelKind::mlpw);
    const auto clean = pipeline::run(small_data(), opt);

    Dataset tampered = small_data();
    for (auto& e : tampered)
        if (std::binary_search(clean.plan.test_groups.begin(), clean.plan.test_groups.end(), e.group_id)) {
            for (auto& ch : e.features.channels)
                for (double& v : ch) v *= 1.7;
            for (double& v : e.truth.channels[0]) v *= 1.7;
        }
    const auto other = pipeline::run(tampered, opt);
    EXPECT_EQ(other.plan, clean.plan);
    EXPECT_EQ(other.scaler.feature_min, clean.scaler.feature_min);
    EXPECT_EQ(other.scaler.feature_max, clean.scaler.feature_max);
    EXPECT_EQ(other.scaler.target_min, clean.scaler.target_min);
    EXPECT_EQ(other.scaler.target_max, clean.scaler.target_max);
    for (std::size_t i = 0; i < clean.sweep.runs.size(); ++i) {
        EXPECT_EQ(other.sweep.runs[i].params, clean.sweep.runs[i].params);
        EXPECT_NE(other.sweep.runs[i].test_errors.y, clean.sweep.runs[i].test_errors.y);
    }
}

TEST(Leakage, ScalerMatchesTrainingRowsOnly) {
    const auto opt = quick("4s", nn::ModelKind::mlp);
    const auto out = pipeline::run(small_data(), opt);
    const auto p = pipeline::prepare(small_data(), opt.rate);
    std::vector<double> lo(kFeatureCount, 1e300), hi(kFeatureCount, -1e300);
    double ylo = 1e300, yhi = -1e300;
    const std::set<int> train(out.plan.train_groups.begin(), out.plan.train_groups.end());
    for (const auto& e : p.data) {
        if (!train.contains(e.group_id)) continue;
        for (std::size_t i = out.windows.master_len - 1; i < e.length(); ++i) {
            for (std::size_t d = 0; d < kFeatureCount; ++d) {
                lo[d] = std::min(lo[d], e.features.channels[d][i]);
                hi[d] = std::max(hi[d], e.features.channels[d][i]);
            }
            ylo = std::min(ylo, e.truth.channels[0][i]);
            yhi = std::max(yhi, e.truth.channels[0][i]);
        }
    }
    EXPECT_EQ(out.scaler.feature_min, lo);
    EXPECT_EQ(out.scaler.feature_max, hi);
    EXPECT_EQ(out.scaler.target_min, ylo);
    EXPECT_EQ(out.scaler.target_max, yhi);
}

TEST(Pipeline, DeterministicAndLabelled) {
    const auto opt = quick("60s", nn::ModelKind::cnn);
    const auto a = pipeline::run(small_data(), opt);
    const auto b = pipeline::run(small_data(), opt);
    EXPECT_EQ(a.label, "even/60s/cnn");
    EXPECT_EQ(a.windows.window_len, 2u);
    EXPECT_EQ(a.windows.master_len, 2u);
    ASSERT_EQ(a.sweep.runs.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_TRUE(a.sweep.runs[i].failure.empty()) << a.sweep.runs[i].failure;
        EXPECT_EQ(a.sweep.runs[i].params, b.sweep.runs[i].params);
    }
    EXPECT_EQ(a.baseline.size(), a.n_test);
}

TEST(Pipeline, TuningScoresEveryGridPoint) {
    auto opt = quick("4s", nn::ModelKind::mlp);
    opt.seeds = {1};
    opt.tune = true;
    opt.cv_folds = 3;
    opt.tune_learning_rates = {1e-3, 1e-2};
    opt.tune_weight_decays = {1e-4};
    const auto out = pipeline::run(small_data(), opt);
    ASSERT_TRUE(out.tuning);
    ASSERT_EQ(out.tuning->scores.size(), 2u);
    for (const auto& s : out.tuning->scores) EXPECT_EQ(s.fold_mse.size(), 3u);
    EXPECT_EQ(out.config.learning_rate,
              out.tuning->scores[train::select_best(out.tuning->scores)].point.learning_rate);
}

TEST(Baseline, AveragingDoesNotIncreaseP95) {
    const auto ds = generate_dataset(RigConfig{});
    const auto raw = pipeline::baseline_metrics(ds, dsp::ResampleSpec::original());
    const auto mean = pipeline::baseline_metrics(ds, dsp::ResampleSpec::experiment_mean());
    EXPECT_LE(mean.re_p95, raw.re_p95);
}
