#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "cmf/error.hpp"
#include "cmf/random.hpp"
#include "cmf/series.hpp"

// Synthetic three-phase air-water-oil flow rig.
//
// Experiments are laid out as baselines (water cut, viscosity, oil and total
// mass flow) with the GVF stepped upward over consecutive recordings. The
// apparent reading of the main meter follows
//
//   apparent = truth * (1 - bias_gain * gvf^2) * (1 + a * sin(2 pi f t + phi)) + eps
//
// where a grows linearly with GVF, phi is drawn per experiment and eps is a
// zero-mean Gaussian AR(1) process whose level scales with flow and GVF.
// The liquid-side meter sees the liquid share of the flow with a smaller,
// viscosity-dependent under-read; pressure carries gas-induced fluctuations;
// the main temperature cools slightly with GVF.
namespace cmf {

struct RigConfig {
    int n_baselines = 38;
    int gvf_steps_per_baseline = 9;
    std::uint64_t seed = 2024;
    double noise_scale = 1.0;
    double oscillation_freq_hz = 0.8;
    double bias_gain = 0.45;
    double oscillation_amplitude = 0.12;  // relative amplitude at gvf = 1
    double sample_rate_hz = 14.3;
    double duration_s = 60.0;
    double duration_jitter = 0.05;  // relative, uniform +-
    double gvf_min = 0.0;
    double gvf_max = 0.95;

    bool operator==(const RigConfig&) const = default;
};

inline void validate(const RigConfig& c) {
    auto fail = [](const char* field, const std::string& why) {
        throw ConfigError(std::string(field) + ": " + why);
    };
    if (c.n_baselines < 1) fail("n_baselines", "must be >= 1");
    if (c.gvf_steps_per_baseline < 1) fail("gvf_steps_per_baseline", "must be >= 1");
    if (static_cast<long long>(c.n_baselines) * c.gvf_steps_per_baseline < 2)
        fail("n_baselines", "n_baselines * gvf_steps_per_baseline must be >= 2");
    if (!(c.noise_scale >= 0.0) || !std::isfinite(c.noise_scale)) fail("noise_scale", "must be >= 0");
    if (!(c.sample_rate_hz > 0.0) || !std::isfinite(c.sample_rate_hz)) fail("sample_rate_hz", "must be > 0");
    if (!(c.oscillation_freq_hz > 0.0) || c.oscillation_freq_hz >= c.sample_rate_hz / 2.0)
        fail("oscillation_freq_hz", "must lie in (0, sample_rate/2)");
    if (!(c.bias_gain >= 0.0 && c.bias_gain <= 1.0)) fail("bias_gain", "must lie in [0, 1]");
    if (!(c.oscillation_amplitude >= 0.0 && c.oscillation_amplitude < 1.0))
        fail("oscillation_amplitude", "must lie in [0, 1)");
    if (!(c.duration_s > 0.0) || !std::isfinite(c.duration_s)) fail("duration_s", "must be > 0");
    if (!(c.duration_jitter >= 0.0 && c.duration_jitter < 0.5)) fail("duration_jitter", "must lie in [0, 0.5)");
    if (!(c.gvf_min >= 0.0 && c.gvf_min <= limits::gvf_max)) fail("gvf_min", "must lie in [0, 0.955]");
    if (!(c.gvf_max >= c.gvf_min && c.gvf_max <= limits::gvf_max))
        fail("gvf_max", "must lie in [gvf_min, 0.955]");
    if (std::llround(c.duration_s * (1.0 - c.duration_jitter) * c.sample_rate_hz) < 1)
        fail("duration_s", "yields no samples");
}

namespace detail {

// Stationary Gaussian AR(1) with unit-free stdev and correlation time tau.
inline std::vector<double> ar1(Rng& rng, std::size_t n, double dt, double tau, double stdev) {
    std::vector<double> x(n, 0.0);
    if (n == 0 || stdev == 0.0) return x;
    const double rho = std::exp(-dt / tau);
    const double innov = stdev * std::sqrt(1.0 - rho * rho);
    x[0] = stdev * rng.normal();
    for (std::size_t i = 1; i < n; ++i) x[i] = rho * x[i - 1] + innov * rng.normal();
    return x;
}

inline void demean(std::vector<double>& x) {
    if (x.empty()) return;
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    for (double& v : x) v -= m;
}

struct Baseline {
    double water_cut, viscosity, total, oil, pressure, temperature;
};

inline Baseline draw_baseline(Rng& rng) {
    Baseline b{};
    b.water_cut = rng.uniform(0.0, limits::water_cut_max);
    b.viscosity = std::exp(rng.uniform(std::log(limits::viscosity_min), std::log(limits::viscosity_max)));
    b.total = rng.uniform(limits::total_mf_min, limits::total_mf_max);
    b.oil = std::clamp((1.0 - b.water_cut) * b.total, limits::oil_mf_min,
                       std::min(limits::oil_mf_max, b.total));
    b.pressure = rng.uniform(1.2, 4.2);
    b.temperature = rng.uniform(20.0, 35.0);
    return b;
}

// Strictly increasing GVF ladder from gvf_min to at most gvf_max.
inline std::vector<double> gvf_ladder(Rng& rng, const RigConfig& c) {
    const int steps = c.gvf_steps_per_baseline;
    std::vector<double> g(static_cast<std::size_t>(steps), c.gvf_min);
    if (steps == 1) return g;
    const double delta = (c.gvf_max - c.gvf_min) / (steps - 1);
    for (int j = 1; j < steps; ++j) {
        double jitter = 0.3 * delta * rng.uniform(-1.0, 1.0);
        if (j == steps - 1) jitter = -std::abs(jitter);
        g[static_cast<std::size_t>(j)] = std::clamp(c.gvf_min + delta * j + jitter, c.gvf_min, c.gvf_max);
    }
    return g;
}

inline Experiment synthesize(const RigConfig& c, const Baseline& b, double gvf, int group_id, Rng rng) {
    Experiment e;
    e.group_id = group_id;
    e.op = OperatingPoint{b.water_cut, b.viscosity, b.oil, b.total, gvf, b.pressure, b.temperature};
    e.duration_s = c.duration_s * (1.0 + rng.uniform(-c.duration_jitter, c.duration_jitter));
    const auto n = static_cast<std::size_t>(std::llround(e.duration_s * c.sample_rate_hz));
    const double dt = 1.0 / c.sample_rate_hz;

    const double freq = c.oscillation_freq_hz * (1.0 + rng.uniform(-0.05, 0.05));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double bias = 1.0 - c.bias_gain * gvf * gvf;
    const double osc_amp = c.oscillation_amplitude * gvf;

    const double rho_gas = 1.19 * b.pressure;
    const double rho_liq = 998.0 * b.water_cut + 870.0 * (1.0 - b.water_cut);
    const double gas_mass_frac = gvf * rho_gas / (gvf * rho_gas + (1.0 - gvf) * rho_liq);
    const double visc_factor =
        0.5 + (std::log(b.viscosity) - std::log(limits::viscosity_min)) /
                  (std::log(limits::viscosity_max) - std::log(limits::viscosity_min));
    const double liquid_bias = 1.0 - 0.35 * c.bias_gain * gvf * gvf * visc_factor;

    const double sigma_main = c.noise_scale * (0.004 + 0.07 * gvf);
    const double sigma_liq = c.noise_scale * (0.002 + 0.02 * gvf);

    auto drift = ar1(rng, n, dt, 15.0, 0.002);
    auto eta_main = ar1(rng, n, dt, 2.0, 1.0);
    demean(eta_main);
    auto eta_liq = ar1(rng, n, dt, 2.0, 1.0);
    auto p_slow = ar1(rng, n, dt, 20.0, 0.01);
    auto p_gas = ar1(rng, n, dt, 1.5, c.noise_scale * 0.03 * gvf * b.pressure);
    auto t_main = ar1(rng, n, dt, 30.0, 0.05);
    auto t_liq = ar1(rng, n, dt, 30.0, 0.05);

    e.features = SampledSeries::make(c.sample_rate_hz, feature_names(), n);
    e.truth = SampledSeries::make(c.sample_rate_hz, {std::string(kTruthName)}, n);
    auto& f = e.features.channels;
    auto& y = e.truth.channels[0];
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double truth = b.total * (1.0 + drift[i]);
        const double osc = 1.0 + osc_amp * std::sin(2.0 * std::numbers::pi * freq * t + phase);
        y[i] = truth;
        f[0][i] = truth * bias * osc + truth * sigma_main * eta_main[i];
        const double liquid = truth * (1.0 - gas_mass_frac);
        f[1][i] = liquid * liquid_bias + liquid * sigma_liq * eta_liq[i];
        f[2][i] = b.temperature - 0.6 * gvf + t_main[i];
        f[3][i] = b.temperature + t_liq[i];
        f[4][i] = std::max(0.5, b.pressure * (1.0 + 0.04 * gvf) + p_slow[i] + p_gas[i]);
    }
    return e;
}

}  // namespace detail

// Pure function of the config: identical configs give bit-identical datasets.
inline Dataset generate_dataset(const RigConfig& cfg) {
    validate(cfg);
    Rng master(cfg.seed);
    Dataset ds;
    ds.reserve(static_cast<std::size_t>(cfg.n_baselines) * cfg.gvf_steps_per_baseline);
    int group = 0;
    for (int bl = 0; bl < cfg.n_baselines; ++bl) {
        Rng brng = master.fork(static_cast<std::uint64_t>(bl));
        const auto base = detail::draw_baseline(brng);
        const auto ladder = detail::gvf_ladder(brng, cfg);
        for (double gvf : ladder) {
            ++group;
            ds.push_back(detail::synthesize(cfg, base, gvf, group, brng.fork(static_cast<std::uint64_t>(group))));
        }
    }
    return ds;
}

}  // namespace cmf
