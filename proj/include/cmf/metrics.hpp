#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmf/error.hpp"
#include "cmf/series.hpp"
#include "cmf/text.hpp"

namespace cmf::eval {

// Truth/prediction pairs with per-point context. `split` identifies what was
// evaluated (parity, rate, model) so pooled statistics never mix splits.
struct ErrorVector {
    std::string split;
    std::vector<double> y;
    std::vector<double> y_hat;
    std::vector<double> gvf;
    std::vector<std::uint64_t> seed;

    std::size_t size() const noexcept { return y.size(); }

    void check() const {
        if (y_hat.size() != y.size() || (!gvf.empty() && gvf.size() != y.size()) ||
            (!seed.empty() && seed.size() != y.size()))
            throw ShapeError("error vector components differ in length");
    }
};

// Signed relative errors in percent.
inline std::vector<double> relative_errors(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size()) throw ShapeError("y and y_hat differ in length");
    std::vector<std::size_t> zero;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == 0.0) zero.push_back(i);
    if (!zero.empty()) {
        std::string idx;
        for (std::size_t i = 0; i < zero.size() && i < 20; ++i) idx += (i ? "," : "") + std::to_string(zero[i]);
        if (zero.size() > 20) idx += ",...";
        throw DomainError("relative error undefined where y == 0 (indices " + idx + ")");
    }
    std::vector<double> re(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) re[i] = (y_hat[i] - y[i]) / y[i] * 100.0;
    return re;
}

// Linear interpolation between order statistics; `sorted` ascending, p in [0, 100].
inline double percentile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ParameterError("percentile of an empty sample");
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Mean of the two central order statistics for even n.
inline double median(std::vector<double> v) {
    if (v.empty()) throw ParameterError("median of an empty sample");
    const std::size_t n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

struct EvalReport {
    std::size_t n = 0;
    // |RE| statistics, percent
    double re_max = 0.0, re_p99 = 0.0, re_p95 = 0.0, re_p50 = 0.0;
    double coverage10 = 0.0, coverage5 = 0.0;  // percent of points with |RE| <= 10 % / 5 %
    double rmse = 0.0;
    std::optional<double> rnrmse;    // undefined when max(y) == min(y)
    std::optional<double> avgnrmse;  // undefined when mean(y) == 0
    double mae = 0.0, medae = 0.0;
    double mape = 0.0, medape = 0.0;
    std::optional<double> r2;        // undefined when y is constant

    // Name/value pairs in table order.
    std::vector<std::pair<std::string, std::optional<double>>> fields() const {
        return {{"max", re_max},       {"p99", re_p99},       {"p95", re_p95},   {"p50", re_p50},
                {"cov10", coverage10}, {"cov5", coverage5},   {"rmse", rmse},    {"rnrmse", rnrmse},
                {"avgnrmse", avgnrmse}, {"mae", mae},         {"medae", medae},  {"mape", mape},
                {"medape", medape},    {"r2", r2}};
    }
};

inline EvalReport compute_metrics(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() < 2) throw ParameterError("metrics need at least 2 points, got " + std::to_string(y.size()));
    const auto re = relative_errors(y, y_hat);
    const std::size_t n = y.size();
    const double dn = static_cast<double>(n);

    EvalReport r;
    r.n = n;
    std::vector<double> abs_re(n), abs_e(n), ape(n);
    double se = 0.0, ae = 0.0, ap = 0.0, ysum = 0.0;
    double ymin = y[0], ymax = y[0];
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y_hat[i] - y[i];
        abs_re[i] = std::abs(re[i]);
        abs_e[i] = std::abs(e);
        ape[i] = std::abs(e) / y[i] * 100.0;
        se += e * e;
        ae += std::abs(e);
        ap += std::abs(e / y[i]);
        ysum += y[i];
        ymin = std::min(ymin, y[i]);
        ymax = std::max(ymax, y[i]);
    }
    std::sort(abs_re.begin(), abs_re.end());
    r.re_max = abs_re.back();
    r.re_p99 = percentile_sorted(abs_re, 99.0);
    r.re_p95 = percentile_sorted(abs_re, 95.0);
    r.re_p50 = median(abs_re);
    std::size_t c10 = 0, c5 = 0;
    for (double v : abs_re) {
        c10 += v <= 10.0;
        c5 += v <= 5.0;
    }
    r.coverage10 = 100.0 * static_cast<double>(c10) / dn;
    r.coverage5 = 100.0 * static_cast<double>(c5) / dn;

    r.rmse = std::sqrt(se / dn);
    if (ymax > ymin) r.rnrmse = r.rmse / (ymax - ymin);
    const double ybar = ysum / dn;
    if (ybar != 0.0) r.avgnrmse = r.rmse / ybar;
    r.mae = ae / dn;
    r.medae = median(abs_e);
    r.mape = 100.0 * ap / dn;
    r.medape = median(ape);
    double sst = 0.0;
    for (double v : y) sst += (v - ybar) * (v - ybar);
    if (sst > 0.0) r.r2 = 1.0 - se / sst;
    return r;
}

inline EvalReport compute_metrics(const ErrorVector& ev) {
    ev.check();
    return compute_metrics(ev.y, ev.y_hat);
}

// ---------------------------------------------------------------------------
// GVF-binned reporting

inline const std::vector<double>& default_gvf_edges() {
    static const std::vector<double> edges = {0.0, 0.15, 0.35, 0.50, 0.70, 0.80, 0.95};
    return edges;
}

struct BinReport {
    double lo = 0.0, hi = 0.0;
    bool overflow = false;  // points outside every bin
    std::size_t n = 0;
    std::optional<EvalReport> report;  // absent when n < 2

    std::string label() const {
        if (overflow) return "overflow";
        return text::format_sig(lo * 100.0, 3) + "-" + text::format_sig(hi * 100.0, 3) + "%";
    }
};

// Membership is gvf in [lo, hi); the last bin also takes gvf == its upper edge.
inline std::vector<BinReport> gvf_binned_report(const ErrorVector& ev,
                                                const std::vector<double>& edges = default_gvf_edges()) {
    ev.check();
    if (ev.gvf.size() != ev.y.size()) throw ShapeError("gvf missing from error vector");
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
        throw ParameterError("bin edges must be ascending with at least two entries");
    const std::size_t nb = edges.size() - 1;
    std::vector<ErrorVector> parts(nb + 1);
    for (std::size_t i = 0; i < ev.size(); ++i) {
        const double g = ev.gvf[i];
        std::size_t b = nb;  // overflow
        for (std::size_t k = 0; k < nb; ++k) {
            const bool last = k + 1 == nb;
            if (g >= edges[k] && (g < edges[k + 1] || (last && g == edges[k + 1]))) {
                b = k;
                break;
            }
        }
        parts[b].y.push_back(ev.y[i]);
        parts[b].y_hat.push_back(ev.y_hat[i]);
    }
    std::vector<BinReport> out;
    for (std::size_t b = 0; b <= nb; ++b) {
        const bool overflow = b == nb;
        if (overflow && parts[b].y.empty()) break;
        BinReport br;
        br.overflow = overflow;
        if (!overflow) {
            br.lo = edges[b];
            br.hi = edges[b + 1];
        }
        br.n = parts[b].y.size();
        if (br.n >= 2) br.report = compute_metrics(parts[b].y, parts[b].y_hat);
        out.push_back(br);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Seed aggregation

enum class Aggregation { pooled, per_seed_mean_std };

inline std::string to_string(Aggregation a) { return a == Aggregation::pooled ? "pooled" : "per_seed_mean_std"; }

inline void check_same_split(std::span<const ErrorVector> runs) {
    if (runs.empty()) throw ParameterError("nothing to aggregate");
    for (const auto& r : runs)
        if (r.split != runs.front().split)
            throw ParameterError("cannot aggregate across splits ('" + runs.front().split + "' vs '" + r.split + "')");
}

// All points of all seeds concatenated; no per-seed averaging.
inline ErrorVector pool(std::span<const ErrorVector> runs) {
    check_same_split(runs);
    ErrorVector all;
    all.split = runs.front().split;
    for (const auto& r : runs) {
        r.check();
        all.y.insert(all.y.end(), r.y.begin(), r.y.end());
        all.y_hat.insert(all.y_hat.end(), r.y_hat.begin(), r.y_hat.end());
        all.gvf.insert(all.gvf.end(), r.gvf.begin(), r.gvf.end());
        all.seed.insert(all.seed.end(), r.seed.begin(), r.seed.end());
    }
    return all;
}

struct MeanStd {
    double mean = 0.0;
    double stdev = 0.0;  // sample standard deviation; 0 for a single value
    std::size_t count = 0;
};

inline MeanStd mean_std(std::span<const double> v) {
    MeanStd m;
    m.count = v.size();
    if (v.empty()) return m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double s = 0.0;
        for (double x : v) s += (x - m.mean) * (x - m.mean);
        m.stdev = std::sqrt(s / static_cast<double>(v.size() - 1));
    }
    return m;
}

struct SeedSummary {
    Aggregation mode = Aggregation::pooled;
    std::string split;
    std::size_t seeds = 0;
    std::optional<EvalReport> pooled;                           // mode == pooled
    std::vector<std::pair<std::string, MeanStd>> per_metric;     // mode == per_seed_mean_std
};

inline SeedSummary aggregate_over_seeds(std::span<const ErrorVector> runs, Aggregation mode) {
    check_same_split(runs);
    SeedSummary s;
    s.mode = mode;
    s.split = runs.front().split;
    s.seeds = runs.size();
    if (mode == Aggregation::pooled) {
        s.pooled = compute_metrics(pool(runs));
        return s;
    }
    std::vector<EvalReport> reports;
    for (const auto& r : runs) reports.push_back(compute_metrics(r));
    const auto names = reports.front().fields();
    for (std::size_t f = 0; f < names.size(); ++f) {
        std::vector<double> vals;
        for (const auto& rep : reports)
            if (auto v = rep.fields()[f].second) vals.push_back(*v);
        s.per_metric.emplace_back(names[f].first, mean_std(vals));
    }
    return s;
}

// Percentage of |RE| at or below each threshold, per seed, then mean +- stdev across seeds.
struct CoveragePoint {
    double threshold = 0.0;
    MeanStd coverage;
};

inline std::vector<CoveragePoint> coverage_curve(std::span<const ErrorVector> runs,
                                                 const std::vector<double>& thresholds) {
    check_same_split(runs);
    std::vector<std::vector<double>> abs_re;
    for (const auto& r : runs) {
        auto re = relative_errors(r.y, r.y_hat);
        for (double& v : re) v = std::abs(v);
        std::sort(re.begin(), re.end());
        abs_re.push_back(std::move(re));
    }
    std::vector<CoveragePoint> out;
    for (double th : thresholds) {
        std::vector<double> cov;
        for (const auto& re : abs_re) {
            const auto k = std::upper_bound(re.begin(), re.end(), th) - re.begin();
            cov.push_back(re.empty() ? 0.0 : 100.0 * static_cast<double>(k) / static_cast<double>(re.size()));
        }
        out.push_back({th, mean_std(cov)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// No-model baseline: the apparent main-meter flow taken as the prediction.

inline ErrorVector baseline_errors(const Dataset& ds, const std::vector<int>& groups, std::string split) {
    ErrorVector ev;
    ev.split = std::move(split);
    for (const auto& e : ds) {
        if (!groups.empty() && std::find(groups.begin(), groups.end(), e.group_id) == groups.end()) continue;
        const auto apparent = e.features.channel(static_cast<std::size_t>(Feature::apparent_mf_main));
        const auto truth = e.truth.channel(std::size_t{0});
        for (std::size_t i = 0; i < e.length(); ++i) {
            ev.y.push_back(truth[i]);
            ev.y_hat.push_back(apparent[i]);
            ev.gvf.push_back(e.op.gvf);
        }
    }
    return ev;
}

inline EvalReport baseline_metrics(const Dataset& ds, const std::vector<int>& groups = {}) {
    return compute_metrics(baseline_errors(ds, groups, "baseline"));
}

}  // namespace cmf::eval
