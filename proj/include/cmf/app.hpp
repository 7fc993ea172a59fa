#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmf/config.hpp"
#include "cmf/dataset_io.hpp"
#include "cmf/error.hpp"
#include "cmf/pipeline.hpp"
#include "cmf/report.hpp"
#include "cmf/rig.hpp"

// The cmf_correct command-line front end: generate, run, report.
namespace cmf::app {

namespace fs = std::filesystem;

inline constexpr std::string_view kToolVersion = "1.0.0";

// "1..30", "1,4,9", "1..3,10"
inline std::vector<std::uint64_t> parse_seeds(std::string_view spec) {
    std::vector<std::uint64_t> seeds;
    for (auto part : text::split(spec, ',')) {
        part = text::trim(part);
        if (part.empty()) throw ParameterError("empty entry in seed list '" + std::string(spec) + "'");
        const auto dots = part.find("..");
        if (dots == std::string_view::npos) {
            auto v = text::parse_int<std::uint64_t>(part);
            if (!v) throw ParameterError("bad seed '" + std::string(part) + "'");
            seeds.push_back(*v);
            continue;
        }
        auto lo = text::parse_int<std::uint64_t>(part.substr(0, dots));
        auto hi = text::parse_int<std::uint64_t>(part.substr(dots + 2));
        if (!lo || !hi || *hi < *lo) throw ParameterError("bad seed range '" + std::string(part) + "'");
        if (*hi - *lo > 100000) throw ParameterError("seed range too long");
        for (auto s = *lo; s <= *hi; ++s) seeds.push_back(s);
    }
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    return seeds;
}

inline std::string seeds_to_text(const std::vector<std::uint64_t>& seeds) { return text::join(seeds, ","); }

inline std::size_t default_jobs() {
    const char* env = std::getenv("CMF_CORRECT_JOBS");
    if (!env || !*env) return 1;
    auto v = text::parse_int<std::size_t>(env);
    if (!v || *v < 1) throw ConfigError("CMF_CORRECT_JOBS must be a positive integer, got '" + std::string(env) + "'");
    return *v;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
    std::optional<std::string> config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
};

inline std::string generation_manifest_path(const std::string& dataset_path) { return dataset_path + ".manifest"; }

inline int cmd_generate(const GenerateOptions& opt, std::ostream& log) {
    RigConfig cfg = opt.config_path ? config::load_rig(*opt.config_path) : RigConfig{};
    if (opt.seed) cfg.seed = *opt.seed;
    validate(cfg);
    const auto ds = generate_dataset(cfg);
    const auto content = serialize_dataset(ds);
    text::write_file(opt.out, content);

    report::Manifest m;
    m.set("kind", "generate");
    m.set("tool_version", std::string(kToolVersion));
    m.set("config_path", opt.config_path.value_or("(defaults)"));
    m.set("dataset", opt.out);
    m.set("dataset_hash", text::hex64(text::fnv1a(content)));
    m.set("experiments", std::to_string(ds.size()));
    const auto cfg_text = config::rig_to_text(cfg);
    m.set("config_hash", text::hex64(text::fnv1a(cfg_text)));
    for (const auto& line : text::split(cfg_text, '\n')) {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) continue;
        m.set("rig." + std::string(text::trim(line.substr(0, eq))), std::string(text::trim(line.substr(eq + 1))));
    }
    text::write_file(generation_manifest_path(opt.out), m.to_text());
    log << "wrote " << ds.size() << " experiments to " << opt.out << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// run

struct RunRequest {
    std::string dataset;
    dsp::ResampleSpec rate = dsp::ResampleSpec::every(4.0);
    nn::ModelKind model = nn::ModelKind::cnn;
    Parity parity = Parity::even;
    std::vector<std::uint64_t> seeds{1};
    std::uint64_t split_seed = 0;
    bool tune = false;
    std::size_t jobs = 1;
    std::string out;
};

struct LoadedDataset {
    Dataset data;
    std::string hash;
    std::string config_hash = "NA";
};

inline LoadedDataset load_dataset_file(const std::string& path) {
    LoadedDataset d;
    const auto content = text::read_file(path);
    d.hash = text::hex64(text::fnv1a(content));
    d.data = parse_dataset(content);
    std::error_code ec;
    if (fs::exists(generation_manifest_path(path), ec)) {
        auto m = report::Manifest::from_text(text::read_file(generation_manifest_path(path)));
        if (auto h = m.get("config_hash")) d.config_hash = *h;
    }
    return d;
}

inline report::Manifest request_manifest(const RunRequest& r, const LoadedDataset& d) {
    report::Manifest m;
    m.set("kind", "run");
    m.set("tool_version", std::string(kToolVersion));
    m.set("dataset", r.dataset);
    m.set("dataset_hash", d.hash);
    m.set("config_hash", d.config_hash);
    m.set("rate", r.rate.label());
    m.set("model", nn::to_string(r.model));
    m.set("parity", to_string(r.parity));
    m.set("seeds", seeds_to_text(r.seeds));
    m.set("split_seed", std::to_string(r.split_seed));
    m.set("tune", r.tune ? "1" : "0");
    return m;
}

inline RunRequest request_from_manifest(const report::Manifest& m) {
    if (m.require("kind") != "run") throw ParseError("manifest is not a run manifest");
    RunRequest r;
    r.dataset = m.require("dataset");
    r.rate = dsp::ResampleSpec::parse(m.require("rate"));
    r.model = nn::parse_model_kind(m.require("model"));
    r.parity = parse_parity(m.require("parity"));
    r.seeds = parse_seeds(m.require("seeds"));
    auto ss = text::parse_int<std::uint64_t>(m.require("split_seed"));
    if (!ss) throw ParseError("manifest split_seed is not an integer");
    r.split_seed = *ss;
    r.tune = m.require("tune") == "1";
    return r;
}

inline std::string checkpoint_name(std::uint64_t seed) { return "checkpoints/seed_" + std::to_string(seed) + ".ckpt"; }
inline std::string log_name(std::uint64_t seed) { return "logs/seed_" + std::to_string(seed) + ".tsv"; }

// Executes one configuration into r.out. Everything except timing.tsv is a
// pure function of the manifest.
inline int execute_run_body(const RunRequest& r, const LoadedDataset& d, std::ostream& log) {
    const fs::path dir(r.out);
    fs::create_directories(dir / "logs");
    fs::create_directories(dir / "checkpoints");
    fs::remove(dir / "FAILED");
    auto put = [&](const std::string& name, std::string_view content) { text::write_file((dir / name).string(), content); };

    auto manifest = request_manifest(r, d);
    put("manifest.txt", manifest.to_text());
    auto fail = [&](const std::string& why) { put("FAILED", why + '\n'); };

    pipeline::RunOutput out;
    {
        pipeline::RunOptions opt;
        opt.rate = r.rate;
        opt.kind = r.model;
        opt.parity = r.parity;
        opt.seeds = r.seeds;
        opt.split_seed = r.split_seed;
        opt.tune = r.tune;
        opt.jobs = r.jobs;
        out = pipeline::run(d.data, opt);
    }

    std::vector<std::string> artifacts{"split.txt", "excluded.tsv"};
    put("split.txt", out.plan.to_text());
    {
        std::string s = "group_id\treason\n";
        for (const auto& e : out.excluded) s += std::to_string(e.group_id) + '\t' + e.reason + '\n';
        put("excluded.tsv", s);
    }
    if (out.tuning) {
        std::string s = "learning_rate\tweight_decay\tmean_mse";
        for (std::size_t f = 0; f < out.tuning->scores.front().fold_mse.size(); ++f) s += "\tfold" + std::to_string(f + 1);
        s += '\n';
        for (const auto& g : out.tuning->scores) {
            s += text::format_double(g.point.learning_rate) + '\t' + text::format_double(g.point.weight_decay) + '\t' +
                 text::format_double(g.mean_mse);
            for (double v : g.fold_mse) s += '\t' + text::format_double(v);
            s += '\n';
        }
        put("tuning.tsv", s);
        artifacts.push_back("tuning.tsv");
    }

    manifest.set("split", out.label);
    manifest.set("window_len", std::to_string(out.windows.window_len));
    manifest.set("master_len", std::to_string(out.windows.master_len));
    manifest.set("learning_rate", text::format_double(out.config.learning_rate));
    manifest.set("weight_decay", text::format_double(out.config.weight_decay));
    manifest.set("batch_size", std::to_string(out.config.batch_size));
    manifest.set("max_epochs", std::to_string(out.config.max_epochs));
    manifest.set("patience", std::to_string(out.config.patience));
    manifest.set("windows", "train=" + std::to_string(out.n_train) + ",val=" + std::to_string(out.n_val) +
                                ",test=" + std::to_string(out.n_test));

    std::vector<eval::ErrorVector> ok_runs;
    std::vector<report::SeedRow> rows;
    std::string failures;
    const nn::ModelParams* first_model = nullptr;
    for (const auto& s : out.sweep.runs) {
        put(log_name(s.seed), s.failure.empty() ? s.log.to_text() : "# failed\t" + s.failure + '\n');
        if (!s.failure.empty()) {
            failures += "seed " + std::to_string(s.seed) + ": " + s.failure + '\n';
            rows.push_back({s.seed, std::nullopt, 0, 0, s.failure});
            continue;
        }
        put(checkpoint_name(s.seed), nn::checkpoint_to_text(*s.params));
        if (!first_model) first_model = &*s.params;
        ok_runs.push_back(s.test_errors);
        rows.push_back({s.seed, s.report, s.log.best_epoch, s.log.stop_epoch, ""});
    }
    artifacts.insert(artifacts.end(), {"logs/", "checkpoints/", "per_seed.tsv", "complexity.tsv"});
    put("per_seed.tsv", report::per_seed_table(rows));
    {
        report::ComplexityRow c{nn::to_string(r.model), r.rate.label(), out.windows.window_len,
                                nn::count_complexity(out.spec)};
        put("complexity.tsv", report::complexity_table({c}));
    }

    if (!ok_runs.empty()) {
        const auto pooled_ev = eval::pool(ok_runs);
        const auto pooled = eval::compute_metrics(pooled_ev);
        const auto per_seed = eval::aggregate_over_seeds(ok_runs, eval::Aggregation::per_seed_mean_std);
        const auto baseline = eval::compute_metrics(out.baseline);
        put("metrics.tsv", report::metrics_table(out.label, pooled, per_seed, baseline));
        put("gvf_bins.tsv", report::gvf_table_header() +
                                report::gvf_table_rows(out.label, eval::gvf_binned_report(pooled_ev)) +
                                report::gvf_table_rows("baseline", eval::gvf_binned_report(out.baseline)));
        put("coverage.tsv", report::coverage_header() +
                                report::coverage_rows(out.label, eval::coverage_curve(ok_runs, report::coverage_thresholds())));
        put("relative_errors.tsv", report::errors_table(ok_runs));
        put("baseline_errors.tsv", report::errors_table({out.baseline}));
        artifacts.insert(artifacts.end(),
                         {"metrics.tsv", "gvf_bins.tsv", "coverage.tsv", "relative_errors.tsv", "baseline_errors.tsv"});
        log << out.label << ": pooled p95 |RE| " << text::format_sig(pooled.re_p95) << " % over " << ok_runs.size()
            << " seeds (baseline " << text::format_sig(baseline.re_p95) << " %)\n";
    }
    if (first_model) {
        const auto lat = nn::measure_latency(*first_model, 200);
        put("timing.tsv", "latency_mean_us\t" + text::format_sig(lat.mean_us) + "\nlatency_stdev_us\t" +
                              text::format_sig(lat.stdev_us) + "\ntrials\t" + std::to_string(lat.trials) + '\n');
        artifacts.push_back("timing.tsv");
    }
    manifest.set("artifacts", text::join(artifacts, ","));
    put("manifest.txt", manifest.to_text());

    if (out.sweep.failures > 0) {
        fail(failures);
        throw NumericError(std::to_string(out.sweep.failures) + " of " + std::to_string(out.sweep.runs.size()) +
                           " seeds failed; see " + (dir / "FAILED").string());
    }
    return 0;
}

// Any failure leaves the partial artifacts in place next to a FAILED marker.
inline int execute_run(const RunRequest& r, const LoadedDataset& d, std::ostream& log) {
    try {
        return execute_run_body(r, d, log);
    } catch (const std::exception& e) {
        const auto marker = fs::path(r.out) / "FAILED";
        std::error_code ec;
        if (fs::is_directory(r.out, ec) && !fs::exists(marker, ec)) text::write_file(marker.string(), std::string(e.what()) + '\n');
        throw;
    }
}

struct RunCliOptions {
    std::string dataset;
    std::string rate = "4s";
    std::string model = "cnn";
    std::string parity = "even";
    std::string seeds = "1..30";
    std::uint64_t split_seed = 0;
    bool tune = false;
    bool all = false;
    std::optional<std::size_t> jobs;
    std::string out;
    std::optional<std::string> manifest;
    bool pipeline_flags_given = false;  // any of dataset/rate/model/parity/seeds/split-seed/tune/all
};

inline int cmd_run(const RunCliOptions& o, std::ostream& log) {
    const std::size_t jobs = o.jobs ? *o.jobs : default_jobs();
    if (jobs < 1) throw ParameterError("--jobs must be >= 1");
    if (o.manifest) {
        if (o.pipeline_flags_given)
            throw ParameterError("--manifest fixes the run inputs; only --out and --jobs may accompany it");
        auto req = request_from_manifest(report::Manifest::from_text(text::read_file(*o.manifest)));
        req.out = o.out;
        req.jobs = jobs;
        const auto d = load_dataset_file(req.dataset);
        const auto expected = report::Manifest::from_text(text::read_file(*o.manifest)).require("dataset_hash");
        if (d.hash != expected)
            throw ValidationError("dataset '" + req.dataset + "' has hash " + d.hash + ", manifest expects " + expected);
        return execute_run(req, d, log);
    }
    if (o.dataset.empty()) throw ParameterError("--dataset is required");
    RunRequest base;
    base.dataset = o.dataset;
    base.seeds = parse_seeds(o.seeds);
    base.split_seed = o.split_seed;
    base.tune = o.tune;
    base.jobs = jobs;
    base.out = o.out;
    if (!o.all) {
        base.rate = dsp::ResampleSpec::parse(o.rate);
        base.model = nn::parse_model_kind(o.model);
        base.parity = parse_parity(o.parity);
    }
    const auto d = load_dataset_file(o.dataset);
    if (!o.all) return execute_run(base, d, log);

    int worst = 0;
    for (auto parity : {Parity::even, Parity::odd})
        for (const auto& rate : pipeline::all_rates())
            for (auto kind : {nn::ModelKind::mlp, nn::ModelKind::mlpw, nn::ModelKind::cnn}) {
                RunRequest r = base;
                r.rate = rate;
                r.model = kind;
                r.parity = parity;
                r.out = (fs::path(o.out) / (to_string(parity) + "_" + rate.label() + "_" + nn::to_string(kind))).string();
                try {
                    execute_run(r, d, log);
                } catch (const Error& e) {
                    log << r.out << ": " << e.what() << '\n';
                    worst = worst ? worst : static_cast<int>(e.code());
                }
            }
    return worst;
}

// ---------------------------------------------------------------------------
// report

struct LoadedRun {
    fs::path dir;
    report::Manifest manifest;
    std::string label;
    std::vector<eval::ErrorVector> runs;
    eval::ErrorVector baseline;
    std::optional<nn::LatencyStats> latency;
};

inline LoadedRun load_run(const fs::path& dir) {
    if (fs::exists(dir / "FAILED")) throw ValidationError("run " + dir.string() + " is marked FAILED");
    LoadedRun r;
    r.dir = dir;
    const auto mpath = (dir / "manifest.txt").string();
    if (!fs::exists(mpath)) throw ValidationError(dir.string() + " has no manifest.txt; not a run directory");
    r.manifest = report::Manifest::from_text(text::read_file(mpath));
    r.label = r.manifest.require("split");
    r.runs = report::parse_errors_table(text::read_file((dir / "relative_errors.tsv").string()), r.label);
    if (r.runs.empty()) throw ValidationError(dir.string() + " holds no completed seeds");
    auto b = report::parse_errors_table(text::read_file((dir / "baseline_errors.tsv").string()), "baseline");
    if (b.size() != 1) throw ParseError(dir.string() + "/baseline_errors.tsv is malformed");
    r.baseline = b.front();
    if (fs::exists(dir / "timing.tsv")) {
        nn::LatencyStats lat;
        const auto timing = text::read_file((dir / "timing.tsv").string());
        for (auto line : text::split(timing, '\n')) {
            const auto cols = text::split(line, '\t');
            if (cols.size() != 2) continue;
            if (cols[0] == "latency_mean_us") lat.mean_us = text::parse_double(cols[1]).value_or(0.0);
            if (cols[0] == "latency_stdev_us") lat.stdev_us = text::parse_double(cols[1]).value_or(0.0);
            if (cols[0] == "trials") lat.trials = text::parse_int<std::size_t>(cols[1]).value_or(0);
        }
        r.latency = lat;
    }
    return r;
}

inline int cmd_report(const std::vector<std::string>& dirs, const std::string& out_dir, std::ostream& log) {
    if (dirs.empty()) throw ParameterError("report needs at least one run directory");
    std::vector<LoadedRun> runs;
    for (const auto& d : dirs) runs.push_back(load_run(d));
    const auto hash = runs.front().manifest.require("dataset_hash");
    for (const auto& r : runs)
        if (r.manifest.require("dataset_hash") != hash)
            throw ValidationError("runs come from different datasets: " + runs.front().dir.string() + " (" + hash +
                                  ") vs " + r.dir.string() + " (" + r.manifest.require("dataset_hash") + ")");

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    std::string comparison, bins = report::gvf_table_header(), coverage = report::coverage_header();
    std::string plot = "series\tmodel\trate\tparity\tseed\ty\ty_hat\tre_percent\tgvf\n";
    for (const auto& r : runs) {
        const auto pooled_ev = eval::pool(r.runs);
        auto table = report::metrics_table(r.label, eval::compute_metrics(pooled_ev),
                                           eval::aggregate_over_seeds(r.runs, eval::Aggregation::per_seed_mean_std),
                                           eval::compute_metrics(r.baseline));
        if (!comparison.empty()) table = table.substr(table.find('\n') + 1);
        comparison += table;
        bins += report::gvf_table_rows(r.label, eval::gvf_binned_report(pooled_ev));
        coverage += report::coverage_rows(r.label, eval::coverage_curve(r.runs, report::coverage_thresholds()));
        const std::string series = r.manifest.require("model") + "@" + r.manifest.require("rate");
        const std::string prefix = series + '\t' + r.manifest.require("model") + '\t' + r.manifest.require("rate") +
                                   '\t' + r.manifest.require("parity") + '\t';
        const auto errs = report::errors_table(r.runs);
        for (auto line : text::split(errs, '\n')) {
            if (line.empty() || line.starts_with("seed\t")) continue;
            plot += prefix + std::string(line) + '\n';
        }
    }

    std::vector<report::ComplexityRow> cx;
    std::vector<std::string> rates;
    for (const auto& r : runs) {
        const auto rate = r.manifest.require("rate");
        if (std::find(rates.begin(), rates.end(), rate) == rates.end()) rates.push_back(rate);
    }
    for (const auto& rate : rates) {
        const bool whole = pipeline::whole_experiment(dsp::ResampleSpec::parse(rate));
        for (auto kind : {nn::ModelKind::mlp, nn::ModelKind::mlpw, nn::ModelKind::cnn}) {
            const auto window = train::table_preset(kind, whole, Parity::even).window_len;
            report::ComplexityRow row{nn::to_string(kind), rate, window,
                                      nn::count_complexity(nn::ModelSpec::for_kind(kind, window))};
            for (const auto& r : runs)
                if (r.latency && r.manifest.require("rate") == rate && r.manifest.require("model") == row.model) {
                    row.report.latency = r.latency;
                    break;
                }
            cx.push_back(row);
        }
    }

    text::write_file((out / "comparison.tsv").string(), comparison);
    text::write_file((out / "gvf_bins.tsv").string(), bins);
    text::write_file((out / "coverage.tsv").string(), coverage);
    text::write_file((out / "plot_data.tsv").string(), plot);
    text::write_file((out / "complexity.tsv").string(), report::complexity_table(cx));
    log << "report for " << runs.size() << " runs written to " << out_dir << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Coriolis mass-flow correction: synthetic data, training, evaluation"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    GenerateOptions gen;
    std::string gen_config;
    std::uint64_t gen_seed = 0;
    auto* g = app.add_subcommand("generate", "Synthesize a rig dataset");
    auto* g_config = g->add_option("--config", gen_config, "Rig config file (key = value, [rig] section)");
    g->add_option("--out", gen.out, "Dataset output path")->required();
    auto* g_seed = g->add_option("--seed", gen_seed, "Override the config seed");

    RunCliOptions run;
    std::size_t jobs = 1;
    std::string manifest;
    auto* r = app.add_subcommand("run", "Preprocess, train and evaluate one configuration (or --all)");
    std::vector<CLI::Option*> pipeline_opts{
        r->add_option("--dataset", run.dataset, "Dataset file"),
        r->add_option("--rate", run.rate, "0.25|0.5|1|2|3|4|5|6 (seconds, optional 's'), original, 60s"),
        r->add_option("--model", run.model, "mlp|mlpw|cnn"),
        r->add_option("--parity", run.parity, "even|odd"),
        r->add_option("--seeds", run.seeds, "Seed list, e.g. 1..30 or 1,2,5"),
        r->add_option("--split-seed", run.split_seed, "Seed for the validation draw"),
        r->add_flag("--tune", run.tune, "Grid-search learning rate and weight decay with rolling-origin CV"),
        r->add_flag("--all", run.all, "Sweep every model, rate and parity into subdirectories of --out"),
    };
    auto* r_jobs = r->add_option("--jobs", jobs, "Parallel seeds (default: $CMF_CORRECT_JOBS or 1)");
    auto* r_manifest = r->add_option("--manifest", manifest, "Re-run the inputs recorded in a run manifest");
    r->add_option("--out", run.out, "Run directory")->required();

    std::vector<std::string> report_dirs;
    std::string report_out;
    auto* rep = app.add_subcommand("report", "Merge completed runs into comparison tables and plot data");
    rep->add_option("runs", report_dirs, "Run directories")->required();
    rep->add_option("--out", report_out, "Report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << kToolVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (g->parsed()) {
            if (g_config->count()) gen.config_path = gen_config;
            if (g_seed->count()) gen.seed = gen_seed;
            return cmd_generate(gen, out);
        }
        if (r->parsed()) {
            for (auto* o : pipeline_opts) run.pipeline_flags_given = run.pipeline_flags_given || o->count() > 0;
            if (r_jobs->count()) run.jobs = jobs;
            if (r_manifest->count()) run.manifest = manifest;
            return cmd_run(run, out);
        }
        if (rep->parsed()) return cmd_report(report_dirs, report_out, out);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const fs::filesystem_error& e) {
        err << "file error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    }
    return static_cast<int>(ExitCode::usage);
}

}  // namespace cmf::app
