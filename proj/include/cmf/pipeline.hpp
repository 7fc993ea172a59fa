#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmf/dsp.hpp"
#include "cmf/error.hpp"
#include "cmf/metrics.hpp"
#include "cmf/nn.hpp"
#include "cmf/series.hpp"
#include "cmf/splits.hpp"
#include "cmf/trainer.hpp"

namespace cmf::pipeline {

inline constexpr std::size_t kFilterLength = 129;
inline constexpr double kCutoffNorm = 0.8;
inline constexpr double kValFraction = 1.0 / 3.0;

inline bool whole_experiment(const dsp::ResampleSpec& r) {
    return r.kind == dsp::ResampleSpec::Kind::per_experiment_mean;
}

inline Segmentation segmentation_for(const dsp::ResampleSpec& r) {
    return whole_experiment(r) ? Segmentation::per_subset : Segmentation::per_experiment;
}

// Every rate the sweep covers, in report order.
inline std::vector<dsp::ResampleSpec> all_rates() {
    std::vector<dsp::ResampleSpec> r{dsp::ResampleSpec::original()};
    for (double s : dsp::kStudyIntervals) r.push_back(dsp::ResampleSpec::every(s));
    r.push_back(dsp::ResampleSpec::experiment_mean());
    return r;
}

struct Prepared {
    dsp::ResampleSpec rate;
    Dataset data;
    std::vector<Exclusion> excluded;
    std::optional<dsp::FirFilter> filter;
};

// Groups the raw recordings, then low-pass filters and decimates (features and
// reference alike) or reduces each experiment to its mean. Exclusion uses the
// filter length at every rate so all rates share one set of groups.
inline Prepared prepare(const Dataset& raw, const dsp::ResampleSpec& rate) {
    auto grouped = assign_groups(raw, kFilterLength);
    Prepared p;
    p.rate = rate;
    p.excluded = std::move(grouped.excluded);
    p.data.reserve(grouped.kept.size());
    std::map<double, dsp::FirFilter> filters;
    for (auto& e : grouped.kept) {
        if (rate.decimates()) {
            const double src = e.sample_rate_hz();
            auto it = filters.find(src);
            if (it == filters.end())
                it = filters.emplace(src, dsp::design_lowpass(kFilterLength, kCutoffNorm, 1.0 / rate.interval_s, src))
                         .first;
            const auto& f = it->second;
            auto feat = dsp::filter_series(e.features, f);
            auto truth = dsp::filter_series(e.truth, f);
            if (!(feat.lowpass_cutoff_hz > 0.0) || !(truth.lowpass_cutoff_hz > 0.0))
                throw ParameterError("refusing to decimate an unfiltered series");
            e.features = dsp::downsample(feat, rate);
            e.truth = dsp::downsample(truth, rate);
            if (!p.filter) p.filter = f;
        } else {
            e.features = dsp::downsample(e.features, rate);
            e.truth = dsp::downsample(e.truth, rate);
        }
        p.data.push_back(std::move(e));
    }
    return p;
}

// Kept group ids in chronological order.
inline std::vector<int> group_ids(const Dataset& ds) {
    std::vector<int> g;
    for (const auto& e : ds) g.push_back(e.group_id);
    return g;
}

// No-model metrics with the apparent main-meter reading as the prediction.
inline eval::EvalReport baseline_metrics(const Dataset& raw, const dsp::ResampleSpec& rate,
                                         const std::vector<int>& groups = {}) {
    return eval::baseline_metrics(prepare(raw, rate).data, groups);
}

inline std::string split_label(Parity parity, const dsp::ResampleSpec& rate, nn::ModelKind kind) {
    return to_string(parity) + "/" + rate.label() + "/" + nn::to_string(kind);
}

struct RunOptions {
    dsp::ResampleSpec rate = dsp::ResampleSpec::every(4.0);
    nn::ModelKind kind = nn::ModelKind::cnn;
    Parity parity = Parity::even;
    std::vector<std::uint64_t> seeds{1};
    std::uint64_t split_seed = 0;
    bool tune = false;
    std::size_t cv_folds = 5;
    std::size_t jobs = 1;
    std::vector<double> tune_learning_rates{1e-4, 1e-3};
    std::vector<double> tune_weight_decays{1e-5, 1e-4, 1e-3};
};

struct RunOutput {
    std::string label;
    SplitPlan plan;
    std::vector<Exclusion> excluded;
    WindowConfig windows;
    nn::ModelSpec spec;
    train::TrainConfig config;
    std::optional<train::TuneResult> tuning;
    Scaler scaler;
    std::size_t n_train = 0, n_val = 0, n_test = 0;
    eval::ErrorVector baseline;  // apparent reading on the test windows
    train::SweepResult sweep;
};

inline RunOutput run(const Dataset& raw, const RunOptions& opt) {
    const bool whole = whole_experiment(opt.rate);
    const auto preset = train::table_preset(opt.kind, whole, opt.parity);
    const auto prepared = prepare(raw, opt.rate);

    RunOutput out;
    out.label = split_label(opt.parity, opt.rate, opt.kind);
    out.excluded = prepared.excluded;
    out.plan = make_split(group_ids(prepared.data), opt.parity, kValFraction, opt.split_seed);
    out.windows = {preset.window_len, train::master_window(whole), 1};
    out.spec = nn::ModelSpec::for_kind(opt.kind, preset.window_len);
    out.config = preset.config;
    const auto seg = segmentation_for(opt.rate);

    if (opt.tune) {
        auto grid = train::make_grid(opt.tune_learning_rates, opt.tune_weight_decays);
        train::TrainConfig base = out.config;
        base.seed = opt.seeds.empty() ? 0 : opt.seeds.front();
        nn::ModelSpec s = out.spec;
        s.seed = base.seed;
        out.tuning = train::tune_hyperparameters(s, prepared.data, out.plan.train_groups, grid, opt.cv_folds,
                                                 out.windows, seg, base);
        out.config.learning_rate = out.tuning->best.learning_rate;
        out.config.weight_decay = out.tuning->best.weight_decay;
    }

    auto windows = build_windows(prepared.data, out.plan, out.windows, seg);
    if (windows.train.empty() || windows.val.empty() || windows.test.empty())
        throw SplitError("a split member produced no windows at rate " + opt.rate.label());
    out.n_train = windows.train.size();
    out.n_val = windows.val.size();
    out.n_test = windows.test.size();
    out.scaler = fit_scaler(windows.train);

    out.baseline.split = out.label;
    for (const auto& w : windows.test.samples) {
        out.baseline.y.push_back(w.y_raw);
        out.baseline.y_hat.push_back(w.baseline);
        out.baseline.gvf.push_back(w.gvf);
    }

    SplitWindows scaled{apply_scaler(out.scaler, windows.train), apply_scaler(out.scaler, windows.val),
                        apply_scaler(out.scaler, windows.test)};
    out.sweep = train::seed_sweep(out.spec, scaled, out.scaler, out.config, opt.seeds, opt.jobs, out.label);
    return out;
}

}  // namespace cmf::pipeline
