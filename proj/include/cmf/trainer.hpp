#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cmf/error.hpp"
#include "cmf/metrics.hpp"
#include "cmf/nn.hpp"
#include "cmf/random.hpp"
#include "cmf/splits.hpp"
#include "cmf/text.hpp"

namespace cmf::train {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    std::size_t batch_size = 2;
    std::size_t max_epochs = 60;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    bool shuffle = true;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const TrainConfig&) const = default;

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ParameterError("learning_rate must be >= 0");
        if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ParameterError("weight_decay must be >= 0");
        if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
        if (max_epochs < 1) throw ParameterError("max_epochs must be >= 1");
        if (patience < 1) throw ParameterError("patience must be >= 1");
    }
};

// Final-model settings per (rate, model, parity) with the window length each model uses.
struct Preset {
    std::size_t window_len = 1;
    TrainConfig config;
};

// `rate` is "4s" or "60s"; other decimated rates and the raw stream reuse the 4 s row.
inline Preset table_preset(nn::ModelKind kind, bool whole_experiment_mean, Parity parity) {
    const bool even = parity == Parity::even;
    Preset p;
    if (!whole_experiment_mean) {
        switch (kind) {
            case nn::ModelKind::mlp: p = {1, {1e-3, 1e-4}}; break;
            case nn::ModelKind::mlpw: p = {5, {1e-4, even ? 1e-4 : 1e-5}}; break;
            case nn::ModelKind::cnn: p = {5, {1e-4, even ? 1e-4 : 1e-3}}; break;
        }
    } else {
        switch (kind) {
            case nn::ModelKind::mlp: p = {1, {1e-3, even ? 1e-3 : 1e-5}}; break;
            case nn::ModelKind::mlpw: p = {2, {1e-3, 1e-3}}; break;
            case nn::ModelKind::cnn: p = {2, {1e-3, 1e-5}}; break;
        }
    }
    return p;
}

// Longest window among the compared models at a rate; sets the discarded prefix.
inline std::size_t master_window(bool whole_experiment_mean) { return whole_experiment_mean ? 2 : 5; }

// ---------------------------------------------------------------------------

// Adam with decoupled weight decay, applied only where decay_mask is set.
class AdamW {
public:
    AdamW(const TrainConfig& cfg, std::vector<bool> decay_mask)
        : cfg_(cfg), mask_(std::move(decay_mask)), m_(mask_.size(), 0.0), v_(mask_.size(), 0.0) {}

    void step(std::span<double> params, std::span<const double> grad) {
        if (params.size() != mask_.size() || grad.size() != mask_.size())
            throw ShapeError("optimizer state does not match the parameter vector");
        ++t_;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        const double lr = cfg_.learning_rate;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grad[i];
            m_[i] = b1 * m_[i] + (1.0 - b1) * g;
            v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
            if (mask_[i]) params[i] -= lr * cfg_.weight_decay * params[i];
            const double mhat = m_[i] / c1;
            const double vhat = v_[i] / c2;
            params[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }

    std::size_t steps() const noexcept { return t_; }

private:
    TrainConfig cfg_;
    std::vector<bool> mask_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

// True for weights, false for biases.
inline std::vector<bool> weight_mask(const nn::Network& net) {
    std::vector<bool> mask(net.parameter_count(), false);
    for (const auto& layer : net.layers())
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (!std::is_same_v<T, nn::GlobalAvgPool>)
                    for (std::size_t i = l.weight_offset; i < l.bias_offset; ++i) mask[i] = true;
            },
            layer);
    return mask;
}

// Stop once validation loss has not strictly improved for `patience` epochs.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    // Returns true when training should stop after this epoch.
    bool update(std::size_t epoch, double val_loss) {
        if (val_loss < best_) {
            best_ = val_loss;
            best_epoch_ = epoch;
            wait_ = 0;
            improved_ = true;
            return false;
        }
        improved_ = false;
        return ++wait_ >= patience_;
    }

    bool improved() const noexcept { return improved_; }
    double best() const noexcept { return best_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }

private:
    std::size_t patience_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::size_t wait_ = 0;
    bool improved_ = false;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    std::size_t stop_epoch = 0;
    std::string stop_reason;  // "patience" or "max_epochs"
    double best_val_mse = 0.0;

    // Append-only records: epoch, train_mse, val_mse.
    std::string to_text() const {
        std::string s = "epoch\ttrain_mse\tval_mse\n";
        for (const auto& e : epochs)
            s += std::to_string(e.epoch) + '\t' + text::format_double(e.train_mse) + '\t' +
                 text::format_double(e.val_mse) + '\n';
        s += "# best_epoch\t" + std::to_string(best_epoch) + '\n';
        s += "# stop_epoch\t" + std::to_string(stop_epoch) + '\n';
        s += "# stop_reason\t" + stop_reason + '\n';
        return s;
    }
};

struct TrainResult {
    nn::ModelParams params;
    TrainLog log;
};

// Anything indexable that yields windowed samples; lets tests wrap sets in access-counting doubles.
template <class S>
concept WindowSource = requires(const S& s, std::size_t i) {
    { s.size() } -> std::convertible_to<std::size_t>;
    { s[i] } -> std::convertible_to<const WindowedSample&>;
};

template <WindowSource S>
double mean_squared_error(const nn::Network& net, std::span<const double> params, const S& set, nn::Workspace& ws) {
    if (set.size() == 0) throw ParameterError("cannot evaluate on an empty set");
    double acc = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const WindowedSample& w = set[i];
        const double r = net.forward(params, w.x, ws) - w.y;
        acc += r * r;
    }
    return acc / static_cast<double>(set.size());
}

template <WindowSource S>
std::vector<double> predict(const nn::ModelParams& mp, const S& set) {
    nn::Network net(mp.spec);
    net.check_params(mp.values);
    auto ws = net.make_workspace();
    std::vector<double> out(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) out[i] = net.forward(mp.values, set[i].x, ws);
    return out;
}

// Mini-batch AdamW on MSE with early stopping on the validation set. Returns the
// parameters of the best validation epoch.
template <WindowSource TrainSrc, WindowSource ValSrc>
TrainResult train(const nn::ModelSpec& spec, const TrainSrc& train_set, const ValSrc& val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.size() == 0 || val_set.size() == 0) throw ParameterError("training and validation sets must be non-empty");
    nn::Network net(spec);
    if (train_set[0].x.size() != net.input_size() || val_set[0].x.size() != net.input_size())
        throw ShapeError("windows hold " + std::to_string(train_set[0].x.size()) + " values, model expects " +
                         std::to_string(net.input_size()));

    TrainResult res{nn::init_model(spec), {}};
    auto& params = res.params.values;
    AdamW opt(cfg, weight_mask(net));
    EarlyStopping stopper(cfg.patience);
    auto ws = net.make_workspace();
    std::vector<double> grad(params.size(), 0.0);
    std::vector<double> best = params;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(Rng::splitmix(cfg.seed ^ 0x73687566666c65ULL));
    std::vector<nn::BatchItem> batch;
    batch.reserve(cfg.batch_size);

    res.log.stop_reason = "max_epochs";
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.shuffle) rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        std::size_t b = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++b) {
            batch.clear();
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            for (std::size_t i = start; i < stop; ++i) {
                const WindowedSample& w = train_set[order[i]];
                batch.push_back({w.x, w.y});
            }
            double loss;
            try {
                loss = nn::mse_gradient(net, params, batch, ws, grad);
            } catch (const NumericError&) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b));
            }
            loss_sum += loss * static_cast<double>(batch.size());
            opt.step(params, grad);
        }
        const double train_mse = loss_sum / static_cast<double>(order.size());
        const double val_mse = mean_squared_error(net, params, val_set, ws);
        if (!std::isfinite(val_mse))
            throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
        res.log.epochs.push_back({epoch, train_mse, val_mse});
        const bool stop = stopper.update(epoch, val_mse);
        if (stopper.improved()) best = params;
        res.log.stop_epoch = epoch;
        if (stop) {
            res.log.stop_reason = "patience";
            break;
        }
    }
    params = best;
    res.log.best_epoch = stopper.best_epoch();
    res.log.best_val_mse = stopper.best();
    return res;
}

// ---------------------------------------------------------------------------
// Hyperparameter search over rolling-origin folds

struct GridPoint {
    double learning_rate = 0.0;
    double weight_decay = 0.0;
};

struct GridScore {
    GridPoint point;
    std::vector<double> fold_mse;
    double mean_mse = 0.0;
};

struct TuneResult {
    TrainConfig best;
    std::vector<GridScore> scores;
};

inline std::vector<GridPoint> make_grid(const std::vector<double>& lrs, const std::vector<double>& wds) {
    std::vector<GridPoint> g;
    for (double lr : lrs)
        for (double wd : wds) g.push_back({lr, wd});
    return g;
}

// Lowest mean MSE; ties go to the larger weight decay, then the smaller learning rate.
inline std::size_t select_best(const std::vector<GridScore>& scores) {
    if (scores.empty()) throw ParameterError("no grid scores");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        const auto& a = scores[i];
        const auto& b = scores[best];
        if (a.mean_mse < b.mean_mse ||
            (a.mean_mse == b.mean_mse &&
             (a.point.weight_decay > b.point.weight_decay ||
              (a.point.weight_decay == b.point.weight_decay && a.point.learning_rate < b.point.learning_rate))))
            best = i;
    }
    return best;
}

// Each fold fits a scaler on its fit groups, trains with early stopping monitored
// on its evaluation block, and scores the restored model on that block.
inline TuneResult tune_hyperparameters(const nn::ModelSpec& spec, const Dataset& ds,
                                       const std::vector<int>& train_groups, const std::vector<GridPoint>& grid,
                                       std::size_t k, const WindowConfig& wcfg, Segmentation seg,
                                       const TrainConfig& base) {
    if (grid.empty()) throw ParameterError("hyperparameter grid is empty");
    const auto folds = cv_folds(train_groups, k);
    struct FoldData {
        TrainSet fit;
        ValidationSet eval;
    };
    std::vector<FoldData> data;
    for (const auto& f : folds) {
        auto fit = windows_for_groups<TrainTag>(ds, f.fit_groups, wcfg, seg);
        auto ev = windows_for_groups<ValidationTag>(ds, f.eval_groups, wcfg, seg);
        if (fit.empty() || ev.empty()) throw SplitError("a CV fold produced no windows");
        const auto scaler = fit_scaler(fit);
        data.push_back({apply_scaler(scaler, fit), apply_scaler(scaler, ev)});
    }
    TuneResult out;
    for (const auto& gp : grid) {
        GridScore s;
        s.point = gp;
        TrainConfig cfg = base;
        cfg.learning_rate = gp.learning_rate;
        cfg.weight_decay = gp.weight_decay;
        for (const auto& fd : data) {
            auto res = train(spec, fd.fit, fd.eval, cfg);
            s.fold_mse.push_back(res.log.best_val_mse);
        }
        s.mean_mse = std::accumulate(s.fold_mse.begin(), s.fold_mse.end(), 0.0) / static_cast<double>(s.fold_mse.size());
        out.scores.push_back(std::move(s));
    }
    const auto& winner = out.scores[select_best(out.scores)];
    out.best = base;
    out.best.learning_rate = winner.point.learning_rate;
    out.best.weight_decay = winner.point.weight_decay;
    return out;
}

// ---------------------------------------------------------------------------
// Seed sweep

struct SeedResult {
    std::uint64_t seed = 0;
    std::optional<nn::ModelParams> params;
    TrainLog log;
    eval::ErrorVector test_errors;   // raw units, kg/h
    std::optional<eval::EvalReport> report;
    std::string failure;             // empty on success
};

struct SweepResult {
    std::vector<SeedResult> runs;  // ordered by seed
    std::size_t failures = 0;
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

// Splits and hyperparameters are fixed; the seed only drives initialization and shuffling.
inline SweepResult seed_sweep(const nn::ModelSpec& spec, const SplitWindows& scaled, const Scaler& scaler,
                              const TrainConfig& cfg, std::vector<std::uint64_t> seeds, std::size_t jobs,
                              const std::string& split_label) {
    if (seeds.empty()) throw ParameterError("seed list is empty");
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    SweepResult out;
    out.runs.resize(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
        SeedResult& r = out.runs[i];
        r.seed = seeds[i];
        try {
            nn::ModelSpec s = spec;
            s.seed = seeds[i];
            TrainConfig c = cfg;
            c.seed = seeds[i];
            auto res = train(s, scaled.train, scaled.val, c);
            const auto pred = predict(res.params, scaled.test);
            r.test_errors.split = split_label;
            for (std::size_t k = 0; k < scaled.test.size(); ++k) {
                const auto& w = scaled.test[k];
                r.test_errors.y.push_back(w.y_raw);
                r.test_errors.y_hat.push_back(scaler.inverse_target(pred[k]));
                r.test_errors.gvf.push_back(w.gvf);
                r.test_errors.seed.push_back(seeds[i]);
            }
            r.report = eval::compute_metrics(r.test_errors);
            r.params = std::move(res.params);
            r.log = std::move(res.log);
        } catch (const std::exception& e) {
            r.failure = e.what();
        }
    });
    for (const auto& r : out.runs) out.failures += !r.failure.empty();
    return out;
}

}  // namespace cmf::train
