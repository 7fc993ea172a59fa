#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmf/error.hpp"
#include "cmf/metrics.hpp"
#include "cmf/nn.hpp"
#include "cmf/text.hpp"

// Tab-separated report tables and the run manifest.
namespace cmf::report {

inline constexpr int kDigits = 6;

inline std::string metric_header() {
    std::string s;
    for (const auto& [name, v] : eval::EvalReport{}.fields()) s += '\t' + name;
    return s;
}

inline std::string metric_cells(const eval::EvalReport& r) {
    std::string s;
    for (const auto& [name, v] : r.fields()) s += '\t' + text::format_opt(v, kDigits);
    return s;
}

// Model pooled over seeds, per-seed mean and stdev, and the no-model baseline.
inline std::string metrics_table(const std::string& label, const eval::EvalReport& pooled,
                                 const eval::SeedSummary& per_seed, const eval::EvalReport& baseline) {
    std::string s = "split\tsource\taggregation\tn" + metric_header() + '\n';
    s += label + "\tmodel\tpooled\t" + std::to_string(pooled.n) + metric_cells(pooled) + '\n';
    std::string mean = label + "\tmodel\tper_seed_mean\t" + std::to_string(per_seed.seeds);
    std::string sd = label + "\tmodel\tper_seed_stdev\t" + std::to_string(per_seed.seeds);
    for (const auto& [name, ms] : per_seed.per_metric) {
        mean += '\t' + (ms.count ? text::format_sig(ms.mean, kDigits) : std::string("NA"));
        sd += '\t' + (ms.count ? text::format_sig(ms.stdev, kDigits) : std::string("NA"));
    }
    s += mean + '\n' + sd + '\n';
    s += label + "\tbaseline\tpooled\t" + std::to_string(baseline.n) + metric_cells(baseline) + '\n';
    return s;
}

struct SeedRow {
    std::uint64_t seed = 0;
    std::optional<eval::EvalReport> report;
    std::size_t best_epoch = 0, stop_epoch = 0;
    std::string failure;
};

inline std::string per_seed_table(const std::vector<SeedRow>& rows) {
    std::string s = "seed\tstatus\tbest_epoch\tstop_epoch\tn" + metric_header() + '\n';
    for (const auto& r : rows) {
        s += std::to_string(r.seed) + '\t';
        if (!r.report) {
            s += "failed\tNA\tNA\tNA";
            for (std::size_t i = 0; i < eval::EvalReport{}.fields().size(); ++i) s += "\tNA";
            s += '\n';
            continue;
        }
        s += "ok\t" + std::to_string(r.best_epoch) + '\t' + std::to_string(r.stop_epoch) + '\t' +
             std::to_string(r.report->n) + metric_cells(*r.report) + '\n';
    }
    return s;
}

inline std::string gvf_table_header() { return "split\tgvf_bin\tn" + metric_header() + '\n'; }

inline std::string gvf_table_rows(const std::string& label, const std::vector<eval::BinReport>& bins) {
    std::string s;
    for (const auto& b : bins) {
        s += label + '\t' + b.label() + '\t' + std::to_string(b.n);
        if (b.report) s += metric_cells(*b.report);
        else
            for (std::size_t i = 0; i < eval::EvalReport{}.fields().size(); ++i) s += "\tNA";
        s += '\n';
    }
    return s;
}

// Per-point errors with exact round-trip values; the source for any later re-aggregation.
inline std::string errors_table(const std::vector<eval::ErrorVector>& runs) {
    std::string s = "seed\ty\ty_hat\tre_percent\tgvf\n";
    for (const auto& r : runs) {
        r.check();
        const auto re = eval::relative_errors(r.y, r.y_hat);
        for (std::size_t i = 0; i < r.size(); ++i)
            s += std::to_string(r.seed.empty() ? 0 : r.seed[i]) + '\t' + text::format_double(r.y[i]) + '\t' +
                 text::format_double(r.y_hat[i]) + '\t' + text::format_double(re[i]) + '\t' +
                 text::format_double(r.gvf.empty() ? 0.0 : r.gvf[i]) + '\n';
    }
    return s;
}

// One ErrorVector per seed, in order of first appearance.
inline std::vector<eval::ErrorVector> parse_errors_table(std::string_view content, const std::string& split) {
    std::vector<eval::ErrorVector> runs;
    std::map<std::uint64_t, std::size_t> index;
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        if (line.empty() || line_no == 1) continue;
        const auto cols = text::split(line, '\t');
        auto fail = [&] { return ParseError("relative_errors line " + std::to_string(line_no) + ": malformed row"); };
        if (cols.size() != 5) throw fail();
        const auto seed = text::parse_int<std::uint64_t>(cols[0]);
        const auto y = text::parse_double(cols[1]);
        const auto yh = text::parse_double(cols[2]);
        const auto g = text::parse_double(cols[4]);
        if (!seed || !y || !yh || !g) throw fail();
        auto [it, fresh] = index.emplace(*seed, runs.size());
        if (fresh) {
            runs.emplace_back();
            runs.back().split = split;
        }
        auto& ev = runs[it->second];
        ev.y.push_back(*y);
        ev.y_hat.push_back(*yh);
        ev.gvf.push_back(*g);
        ev.seed.push_back(*seed);
    }
    return runs;
}

inline std::string coverage_header() { return "split\tthreshold_percent\tcoverage_mean\tcoverage_stdev\tseeds\n"; }

inline std::string coverage_rows(const std::string& label, const std::vector<eval::CoveragePoint>& curve) {
    std::string s;
    for (const auto& p : curve)
        s += label + '\t' + text::format_sig(p.threshold, kDigits) + '\t' + text::format_sig(p.coverage.mean, kDigits) +
             '\t' + text::format_sig(p.coverage.stdev, kDigits) + '\t' + std::to_string(p.coverage.count) + '\n';
    return s;
}

// 0.5 % steps up to 30 %.
inline std::vector<double> coverage_thresholds() {
    std::vector<double> t;
    for (int i = 1; i <= 60; ++i) t.push_back(0.5 * i);
    return t;
}

struct ComplexityRow {
    std::string model, rate;
    std::size_t window = 0;
    nn::ComplexityReport report;
};

inline std::string complexity_table(const std::vector<ComplexityRow>& rows) {
    std::string s = "model\trate\twindow\tparameters\tmacs\tlatency_mean_us\tlatency_stdev_us\n";
    for (const auto& r : rows) {
        s += r.model + '\t' + r.rate + '\t' + std::to_string(r.window) + '\t' +
             std::to_string(r.report.parameter_count) + '\t' + std::to_string(r.report.macs_per_example) + '\t';
        if (r.report.latency)
            s += text::format_sig(r.report.latency->mean_us, 4) + '\t' + text::format_sig(r.report.latency->stdev_us, 4);
        else
            s += "NA\tNA";
        s += '\n';
    }
    return s;
}

// ---------------------------------------------------------------------------
// Run manifest: ordered key/value lines under a magic header.

inline constexpr std::string_view kManifestMagic = "cmf-run-manifest\t1";

class Manifest {
public:
    void set(const std::string& key, std::string value) {
        for (auto& [k, v] : entries_)
            if (k == key) {
                v = std::move(value);
                return;
            }
        entries_.emplace_back(key, std::move(value));
    }

    std::optional<std::string> get(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return v;
        return std::nullopt;
    }

    std::string require(const std::string& key) const {
        if (auto v = get(key)) return *v;
        throw ParseError("manifest lacks '" + key + "'");
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

    std::string to_text() const {
        std::string s(kManifestMagic);
        s += '\n';
        for (const auto& [k, v] : entries_) s += k + '\t' + v + '\n';
        return s;
    }

    static Manifest from_text(std::string_view content) {
        const auto lines = text::split(content, '\n');
        if (lines.empty() || text::trim(lines[0]) != text::trim(kManifestMagic))
            throw ParseError("not a run manifest");
        Manifest m;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (text::trim(lines[i]).empty()) continue;
            const auto tab = lines[i].find('\t');
            if (tab == std::string_view::npos)
                throw ParseError("manifest line " + std::to_string(i + 1) + ": expected key<TAB>value");
            m.set(std::string(lines[i].substr(0, tab)), std::string(text::trim(lines[i].substr(tab + 1))));
        }
        return m;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace cmf::report
