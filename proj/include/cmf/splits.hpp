#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "cmf/error.hpp"
#include "cmf/random.hpp"
#include "cmf/series.hpp"
#include "cmf/text.hpp"

namespace cmf {

// ---------------------------------------------------------------------------
// Grouping

struct Exclusion {
    int group_id = 0;
    std::string reason;
};

struct GroupingResult {
    Dataset kept;
    std::vector<Exclusion> excluded;
};

// Group ids are the 1-based chronological position in the input, so excluded
// recordings leave gaps and parity is a property of the recording order.
inline GroupingResult assign_groups(Dataset ds, std::size_t min_samples) {
    if (ds.empty()) throw ParameterError("dataset is empty");
    GroupingResult r;
    int id = 0;
    for (auto& e : ds) {
        e.group_id = ++id;
        if (e.length() < min_samples) {
            r.excluded.push_back({id, "too few samples (" + std::to_string(e.length()) + " < " +
                                          std::to_string(min_samples) + ")"});
            continue;
        }
        bool finite = std::isfinite(e.op.gvf);
        for (const auto& ch : e.features.channels)
            for (double v : ch) finite = finite && std::isfinite(v);
        bool positive = true;
        for (double v : e.truth.channels.at(0)) {
            finite = finite && std::isfinite(v);
            positive = positive && v > 0.0;
        }
        if (!finite) {
            r.excluded.push_back({id, "non-finite reading"});
            continue;
        }
        if (!positive) {
            r.excluded.push_back({id, "non-positive reference flow"});
            continue;
        }
        r.kept.push_back(std::move(e));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Even/odd split with a hold-out validation third

enum class Parity { even, odd };

inline std::string to_string(Parity p) { return p == Parity::even ? "even" : "odd"; }

inline Parity parse_parity(std::string_view s) {
    s = text::trim(s);
    if (s == "even") return Parity::even;
    if (s == "odd") return Parity::odd;
    throw ParameterError("parity must be 'even' or 'odd', got '" + std::string(s) + "'");
}

struct SplitPlan {
    Parity parity = Parity::even;
    std::uint64_t seed = 0;
    double val_fraction = 1.0 / 3.0;
    std::vector<int> train_groups;
    std::vector<int> val_groups;
    std::vector<int> test_groups;

    bool operator==(const SplitPlan&) const = default;

    std::string to_text() const {
        std::string s;
        s += "parity\t" + to_string(parity) + '\n';
        s += "seed\t" + std::to_string(seed) + '\n';
        s += "val_fraction\t" + text::format_double(val_fraction) + '\n';
        s += "train\t" + text::join(train_groups, " ") + '\n';
        s += "val\t" + text::join(val_groups, " ") + '\n';
        s += "test\t" + text::join(test_groups, " ") + '\n';
        return s;
    }

    static SplitPlan from_text(std::string_view content) {
        SplitPlan p;
        auto ints = [](std::string_view v) {
            std::vector<int> out;
            for (auto tok : text::split(text::trim(v), ' ')) {
                if (text::trim(tok).empty()) continue;
                auto i = text::parse_int<int>(tok);
                if (!i) throw ParseError("bad group id '" + std::string(tok) + "' in split manifest");
                out.push_back(*i);
            }
            return out;
        };
        for (auto line : text::split(content, '\n')) {
            if (text::trim(line).empty()) continue;
            auto tab = line.find('\t');
            if (tab == std::string_view::npos) throw ParseError("malformed split manifest line");
            auto key = text::trim(line.substr(0, tab));
            auto val = line.substr(tab + 1);
            if (key == "parity") p.parity = parse_parity(val);
            else if (key == "seed") {
                auto v = text::parse_int<std::uint64_t>(val);
                if (!v) throw ParseError("bad split seed");
                p.seed = *v;
            } else if (key == "val_fraction") {
                auto v = text::parse_double(val);
                if (!v) throw ParseError("bad val_fraction");
                p.val_fraction = *v;
            } else if (key == "train") p.train_groups = ints(val);
            else if (key == "val") p.val_groups = ints(val);
            else if (key == "test") p.test_groups = ints(val);
            else throw ParseError("unknown split manifest key '" + std::string(key) + "'");
        }
        return p;
    }
};

inline SplitPlan make_split(std::vector<int> groups, Parity parity, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ParameterError("val_fraction must lie in (0, 1)");
    std::sort(groups.begin(), groups.end());
    SplitPlan plan;
    plan.parity = parity;
    plan.seed = seed;
    plan.val_fraction = val_fraction;
    std::vector<int> other;
    const int want = parity == Parity::even ? 0 : 1;
    for (int g : groups) (std::abs(g % 2) == want ? plan.train_groups : other).push_back(g);
    if (plan.train_groups.size() < 3 || other.size() < 3)
        throw SplitError("need at least 3 groups of each parity, have " + std::to_string(plan.train_groups.size()) +
                         " training and " + std::to_string(other.size()) + " held-out");
    auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(other.size()) * val_fraction));
    n_val = std::clamp<std::size_t>(n_val, 1, other.size() - 1);
    Rng rng(seed);
    std::vector<int> drawn = other;
    rng.shuffle(std::span<int>(drawn));
    plan.val_groups.assign(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(plan.val_groups.begin(), plan.val_groups.end());
    for (int g : other)
        if (!std::binary_search(plan.val_groups.begin(), plan.val_groups.end(), g)) plan.test_groups.push_back(g);
    return plan;
}

// ---------------------------------------------------------------------------
// Windows

struct WindowConfig {
    std::size_t window_len = 1;  // columns handed to the consumer model
    std::size_t master_len = 1;  // longest window of any compared model; sets the discarded prefix
    std::size_t stride = 1;
};

// How rows are chained before windowing: each experiment on its own, or (for
// one-row-per-experiment data) the chronological sequence of a split subset.
enum class Segmentation { per_experiment, per_subset };

struct WindowedSample {
    std::vector<double> x;   // features x window, row-major: x[d * window_len + j], last column is time t
    double y = 0.0;          // target in the current domain (raw or scaled)
    double y_raw = 0.0;      // reference flow, kg/h
    double baseline = 0.0;   // apparent main-meter flow at t, kg/h
    double gvf = 0.0;
    int group_id = 0;        // group of the target row
    std::size_t t = 0;       // row index of the target inside its segment
    std::vector<int> source_groups;  // group of every row in the window
};

struct TrainTag {};
struct ValidationTag {};
struct TestTag {};

// Distinct types per split member so a function that only accepts training data
// cannot be handed held-out windows.
template <class Tag>
struct WindowSet {
    std::size_t features = kFeatureCount;
    std::size_t window_len = 1;
    std::vector<WindowedSample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    const WindowedSample& operator[](std::size_t i) const { return samples[i]; }
};

using TrainSet = WindowSet<TrainTag>;
using ValidationSet = WindowSet<ValidationTag>;
using TestSet = WindowSet<TestTag>;

struct SplitWindows {
    TrainSet train;
    ValidationSet val;
    TestSet test;
};

namespace detail {

struct Row {
    const Experiment* exp;
    std::size_t index;
};

template <class Tag>
void emit_segment(const std::vector<Row>& rows, const WindowConfig& cfg, WindowSet<Tag>& out) {
    const std::size_t nw = cfg.window_len;
    for (std::size_t t = cfg.master_len - 1; t < rows.size(); t += cfg.stride) {
        WindowedSample w;
        w.x.resize(kFeatureCount * nw);
        w.source_groups.resize(nw);
        for (std::size_t j = 0; j < nw; ++j) {
            const Row& r = rows[t + 1 - nw + j];
            for (std::size_t d = 0; d < kFeatureCount; ++d) w.x[d * nw + j] = r.exp->features.channels[d][r.index];
            w.source_groups[j] = r.exp->group_id;
        }
        const Row& last = rows[t];
        w.y = w.y_raw = last.exp->truth.channels[0][last.index];
        w.baseline = last.exp->features.channels[0][last.index];
        w.gvf = last.exp->op.gvf;
        w.group_id = last.exp->group_id;
        w.t = t;
        out.samples.push_back(std::move(w));
    }
}

}  // namespace detail

template <class Tag>
WindowSet<Tag> windows_for_groups(const Dataset& ds, const std::vector<int>& groups, const WindowConfig& cfg,
                                  Segmentation seg) {
    if (cfg.window_len < 1 || cfg.stride < 1 || cfg.master_len < cfg.window_len)
        throw ParameterError("window config needs 1 <= window_len <= master_len and stride >= 1");
    WindowSet<Tag> out;
    out.window_len = cfg.window_len;
    std::set<int> wanted(groups.begin(), groups.end());
    std::vector<detail::Row> subset_rows;
    for (const auto& e : ds) {
        if (!wanted.contains(e.group_id)) continue;
        if (seg == Segmentation::per_experiment) {
            std::vector<detail::Row> rows;
            rows.reserve(e.length());
            for (std::size_t i = 0; i < e.length(); ++i) rows.push_back({&e, i});
            detail::emit_segment(rows, cfg, out);
        } else {
            for (std::size_t i = 0; i < e.length(); ++i) subset_rows.push_back({&e, i});
        }
    }
    if (seg == Segmentation::per_subset) detail::emit_segment(subset_rows, cfg, out);
    return out;
}

inline SplitWindows build_windows(const Dataset& ds, const SplitPlan& plan, const WindowConfig& cfg,
                                  Segmentation seg = Segmentation::per_experiment) {
    SplitWindows w;
    w.train = windows_for_groups<TrainTag>(ds, plan.train_groups, cfg, seg);
    w.val = windows_for_groups<ValidationTag>(ds, plan.val_groups, cfg, seg);
    w.test = windows_for_groups<TestTag>(ds, plan.test_groups, cfg, seg);
    return w;
}

// ---------------------------------------------------------------------------
// Min-max scaling, fitted on training windows only

struct Scaler {
    std::vector<double> feature_min, feature_max;
    std::vector<bool> degenerate;  // max == min on the training data
    double target_min = 0.0, target_max = 1.0;
    bool target_degenerate = false;

    double scale_feature(std::size_t d, double v) const {
        if (degenerate[d]) return 0.0;
        return (v - feature_min[d]) / (feature_max[d] - feature_min[d]);
    }
    double scale_target(double y) const {
        if (target_degenerate) return 0.0;
        return (y - target_min) / (target_max - target_min);
    }
    double inverse_target(double s) const {
        if (target_degenerate) return target_min;
        return target_min + s * (target_max - target_min);
    }
};

inline Scaler fit_scaler(const TrainSet& train) {
    if (train.empty()) throw ParameterError("cannot fit a scaler on an empty training set");
    Scaler s;
    const std::size_t d_count = train.features, nw = train.window_len;
    s.feature_min.assign(d_count, std::numeric_limits<double>::infinity());
    s.feature_max.assign(d_count, -std::numeric_limits<double>::infinity());
    s.target_min = std::numeric_limits<double>::infinity();
    s.target_max = -std::numeric_limits<double>::infinity();
    for (const auto& w : train.samples) {
        for (std::size_t d = 0; d < d_count; ++d)
            for (std::size_t j = 0; j < nw; ++j) {
                const double v = w.x[d * nw + j];
                s.feature_min[d] = std::min(s.feature_min[d], v);
                s.feature_max[d] = std::max(s.feature_max[d], v);
            }
        s.target_min = std::min(s.target_min, w.y_raw);
        s.target_max = std::max(s.target_max, w.y_raw);
    }
    s.degenerate.resize(d_count);
    for (std::size_t d = 0; d < d_count; ++d) s.degenerate[d] = !(s.feature_max[d] > s.feature_min[d]);
    s.target_degenerate = !(s.target_max > s.target_min);
    return s;
}

// Held-out values may land outside [0, 1]; they are not clipped.
template <class Tag>
WindowSet<Tag> apply_scaler(const Scaler& s, const WindowSet<Tag>& in) {
    WindowSet<Tag> out = in;
    const std::size_t nw = in.window_len;
    if (s.feature_min.size() != in.features) throw ShapeError("scaler/feature count mismatch");
    for (auto& w : out.samples) {
        for (std::size_t d = 0; d < in.features; ++d)
            for (std::size_t j = 0; j < nw; ++j) w.x[d * nw + j] = s.scale_feature(d, w.x[d * nw + j]);
        w.y = s.scale_target(w.y_raw);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Group-aware rolling-origin folds

struct Fold {
    std::vector<int> fit_groups;
    std::vector<int> eval_groups;
};

// Chronological groups cut into k+1 contiguous blocks; fold i fits on blocks
// 1..i and evaluates on block i+1.
inline std::vector<Fold> cv_folds(std::vector<int> train_groups, std::size_t k = 5) {
    if (k < 1) throw ParameterError("k must be >= 1");
    std::sort(train_groups.begin(), train_groups.end());
    const std::size_t n = train_groups.size();
    if (n < k + 1)
        throw SplitError("need at least " + std::to_string(k + 1) + " training groups for " + std::to_string(k) +
                         " folds, have " + std::to_string(n));
    const std::size_t blocks = k + 1, base = n / blocks, extra = n % blocks;
    std::vector<std::vector<int>> block(blocks);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t len = base + (b < extra ? 1 : 0);
        block[b].assign(train_groups.begin() + static_cast<std::ptrdiff_t>(pos),
                        train_groups.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    std::vector<Fold> folds;
    for (std::size_t i = 1; i <= k; ++i) {
        Fold f;
        for (std::size_t b = 0; b < i; ++b) f.fit_groups.insert(f.fit_groups.end(), block[b].begin(), block[b].end());
        f.eval_groups = block[i];
        folds.push_back(std::move(f));
    }
    return folds;
}

}  // namespace cmf
