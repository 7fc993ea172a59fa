#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "cmf/error.hpp"
#include "cmf/series.hpp"
#include "cmf/text.hpp"

namespace cmf::dsp {

// Linear-phase windowed-sinc low-pass.
struct FirFilter {
    std::vector<double> taps;
    double cutoff_norm = 0.8;     // fraction of the target-rate Nyquist
    double cutoff_hz = 0.0;
    double source_rate_hz = 0.0;
    double target_rate_hz = 0.0;

    std::size_t length() const noexcept { return taps.size(); }
    std::size_t group_delay() const noexcept { return (taps.size() - 1) / 2; }
};

inline double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

inline std::vector<double> hamming(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n == 1) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

// Cutoff is cutoff_norm * (target_rate / 2). The taps are normalized to unit DC gain.
inline FirFilter design_lowpass(std::size_t length, double cutoff_norm, double target_rate_hz,
                                double source_rate_hz) {
    if (length < 3 || length % 2 == 0)
        throw ParameterError("filter length must be odd and >= 3, got " + std::to_string(length));
    if (!(source_rate_hz > 0.0) || !(target_rate_hz > 0.0))
        throw ParameterError("sample rates must be positive");
    if (!(cutoff_norm > 0.0))
        throw ParameterError("cutoff must be positive");
    const double cutoff_hz = cutoff_norm * target_rate_hz / 2.0;
    if (cutoff_hz >= source_rate_hz / 2.0)
        throw ParameterError("cutoff " + text::format_sig(cutoff_hz) + " Hz is not below the source Nyquist " +
                             text::format_sig(source_rate_hz / 2.0) + " Hz");

    FirFilter f;
    f.cutoff_norm = cutoff_norm;
    f.cutoff_hz = cutoff_hz;
    f.source_rate_hz = source_rate_hz;
    f.target_rate_hz = target_rate_hz;
    f.taps.resize(length);

    const double fc = cutoff_hz / source_rate_hz;  // cycles per sample
    const auto window = hamming(length);
    const double mid = static_cast<double>(length - 1) / 2.0;
    double sum = 0.0;
    for (std::size_t n = 0; n < length; ++n) {
        const double m = static_cast<double>(n) - mid;
        f.taps[n] = 2.0 * fc * sinc(2.0 * fc * m) * window[n];
        sum += f.taps[n];
    }
    for (double& t : f.taps) t /= sum;
    // Pin exact symmetry against rounding in the window/sinc evaluation.
    for (std::size_t n = 0; n < length / 2; ++n) {
        const double avg = 0.5 * (f.taps[n] + f.taps[length - 1 - n]);
        f.taps[n] = f.taps[length - 1 - n] = avg;
    }
    return f;
}

// Amplitude response at f_hz (zero-phase form, valid for symmetric taps).
inline double amplitude_response(const FirFilter& f, double f_hz) {
    const double mid = static_cast<double>(f.length() - 1) / 2.0;
    const double w = 2.0 * std::numbers::pi * f_hz / f.source_rate_hz;
    double acc = 0.0;
    for (std::size_t n = 0; n < f.length(); ++n) acc += f.taps[n] * std::cos(w * (static_cast<double>(n) - mid));
    return std::abs(acc);
}

// First frequency above DC where the amplitude falls to 0.5 (-6.02 dB).
inline double half_amplitude_frequency(const FirFilter& f) {
    const double nyq = f.source_rate_hz / 2.0;
    const int steps = 20000;
    double prev = 0.0;
    for (int i = 1; i <= steps; ++i) {
        const double fr = nyq * i / steps;
        if (amplitude_response(f, fr) <= 0.5) {
            double lo = prev, hi = fr;
            for (int it = 0; it < 60; ++it) {
                const double m = 0.5 * (lo + hi);
                (amplitude_response(f, m) > 0.5 ? lo : hi) = m;
            }
            return 0.5 * (lo + hi);
        }
        prev = fr;
    }
    return nyq;
}

// Minimum attenuation in dB over [from_hz, source Nyquist].
inline double stopband_attenuation_db(const FirFilter& f, double from_hz) {
    const double nyq = f.source_rate_hz / 2.0;
    const int steps = 8000;
    double peak = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double fr = from_hz + (nyq - from_hz) * i / steps;
        peak = std::max(peak, amplitude_response(f, fr));
    }
    return -20.0 * std::log10(std::max(peak, 1e-300));
}

inline std::string taps_to_text(const FirFilter& f) {
    std::string out;
    for (double t : f.taps) out += text::format_double(t) + '\n';
    return out;
}

// Per-channel convolution, reflect-padded by the group delay at both ends so the
// output is time-aligned with the input and has the same length.
inline SampledSeries filter_series(const SampledSeries& s, const FirFilter& f) {
    s.check_consistent();
    const std::size_t n = s.length();
    const std::size_t len = f.length();
    if (n < len)
        throw ParameterError("series of length " + std::to_string(n) + " is shorter than the filter (" +
                             std::to_string(len) + " taps)");
    if (std::abs(s.sample_rate_hz - f.source_rate_hz) > 1e-9 * f.source_rate_hz)
        throw ParameterError("filter designed for " + text::format_sig(f.source_rate_hz) + " Hz applied to a " +
                             text::format_sig(s.sample_rate_hz) + " Hz series");
    const std::size_t half = f.group_delay();

    SampledSeries out = s;
    out.lowpass_cutoff_hz = f.cutoff_hz;
    std::vector<double> padded(n + 2 * half);
    for (std::size_t c = 0; c < s.channel_count(); ++c) {
        const auto& x = s.channels[c];
        // numpy-style "reflect": x[-k] = x[k], x[n-1+k] = x[n-1-k]
        for (std::size_t k = 0; k < half; ++k) {
            padded[half - 1 - k] = x[k + 1];
            padded[half + n + k] = x[n - 2 - k];
        }
        std::copy(x.begin(), x.end(), padded.begin() + static_cast<std::ptrdiff_t>(half));
        auto& y = out.channels[c];
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            const double* p = padded.data() + i;
            for (std::size_t k = 0; k < len; ++k) acc += f.taps[k] * p[len - 1 - k];
            y[i] = acc;
        }
    }
    return out;
}

// What a processed series represents: the raw stream, a decimated stream
// (one sample every interval_s), or one mean per experiment.
struct ResampleSpec {
    enum class Kind { original, interval, per_experiment_mean };
    Kind kind = Kind::original;
    double interval_s = 0.0;

    bool decimates() const noexcept { return kind == Kind::interval; }

    static ResampleSpec original() { return {Kind::original, 0.0}; }
    static ResampleSpec every(double seconds) { return {Kind::interval, seconds}; }
    static ResampleSpec experiment_mean() { return {Kind::per_experiment_mean, 0.0}; }

    bool operator==(const ResampleSpec&) const = default;

    // "4s", "0.25s", "4", "original", "60s", "per_experiment_mean"
    static ResampleSpec parse(std::string_view s) {
        s = text::trim(s);
        if (s == "original") return original();
        if (s == "60s" || s == "per_experiment_mean") return experiment_mean();
        if (s.size() > 2 && s.substr(s.size() - 2) == "ms") {
            auto v = text::parse_double(s.substr(0, s.size() - 2));
            if (v && *v > 0.0) return every(*v / 1000.0);
            throw ParameterError("unrecognized rate '" + std::string(s) + "'");
        }
        std::string_view num = s;
        if (!num.empty() && num.back() == 's') num.remove_suffix(1);
        auto v = text::parse_double(num);
        if (!v || !(*v > 0.0)) throw ParameterError("unrecognized rate '" + std::string(s) + "'");
        return every(*v);
    }

    std::string label() const {
        switch (kind) {
            case Kind::original: return "original";
            case Kind::per_experiment_mean: return "60s";
            case Kind::interval: return text::format_double(interval_s) + "s";
        }
        return "?";
    }

    std::size_t factor(double source_rate_hz) const {
        const double k = std::round(interval_s * source_rate_hz);
        if (k < 1.0)
            throw ParameterError("decimation factor for interval " + text::format_double(interval_s) + " s at " +
                                 text::format_sig(source_rate_hz) + " Hz is < 1");
        return static_cast<std::size_t>(k);
    }
};

// The intervals studied, in seconds.
inline constexpr std::array<double, 8> kStudyIntervals = {0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0};

inline SampledSeries downsample(const SampledSeries& s, const ResampleSpec& spec) {
    s.check_consistent();
    switch (spec.kind) {
        case ResampleSpec::Kind::original:
            return s;
        case ResampleSpec::Kind::per_experiment_mean: {
            if (s.length() == 0) throw ParameterError("cannot average an empty series");
            SampledSeries out = SampledSeries::make(s.sample_rate_hz / static_cast<double>(s.length()), s.names, 1);
            out.lowpass_cutoff_hz = s.lowpass_cutoff_hz;
            for (std::size_t c = 0; c < s.channel_count(); ++c) {
                double acc = 0.0;
                for (double v : s.channels[c]) acc += v;
                out.channels[c][0] = acc / static_cast<double>(s.length());
            }
            return out;
        }
        case ResampleSpec::Kind::interval: {
            const std::size_t k = spec.factor(s.sample_rate_hz);
            const std::size_t m = (s.length() + k - 1) / k;
            SampledSeries out = SampledSeries::make(s.sample_rate_hz / static_cast<double>(k), s.names, m);
            out.lowpass_cutoff_hz = s.lowpass_cutoff_hz;
            for (std::size_t c = 0; c < s.channel_count(); ++c)
                for (std::size_t i = 0; i < m; ++i) out.channels[c][i] = s.channels[c][i * k];
            return out;
        }
    }
    return s;
}

struct AliasReport {
    struct Channel {
        std::string name;
        double fraction_above = 0.0;  // share of non-DC periodogram energy above the target Nyquist
        bool at_risk = false;
    };
    double target_rate_hz = 0.0;
    double threshold = 0.01;
    std::vector<Channel> channels;
};

// One-sided periodogram |X_k|^2, k = 1..floor(N/2), of the demeaned input.
inline std::vector<double> periodogram(std::span<const double> x) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> p(n / 2 + 1, 0.0);
    for (std::size_t k = 1; k <= n / 2; ++k) {
        std::complex<double> acc{0.0, 0.0};
        const double w = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) acc += (x[i] - mean) * std::polar(1.0, w * static_cast<double>(i));
        p[k] = std::norm(acc);
    }
    return p;
}

inline AliasReport assess_aliasing(const SampledSeries& s, double target_rate_hz, double threshold = 0.01) {
    s.check_consistent();
    if (s.length() < 8) throw ParameterError("aliasing assessment needs at least 8 samples");
    if (!(target_rate_hz > 0.0) || target_rate_hz >= s.sample_rate_hz)
        throw ParameterError("target rate must lie in (0, source rate)");
    AliasReport r;
    r.target_rate_hz = target_rate_hz;
    r.threshold = threshold;
    const double nyq_target = target_rate_hz / 2.0;
    const double n = static_cast<double>(s.length());
    for (std::size_t c = 0; c < s.channel_count(); ++c) {
        const auto p = periodogram(s.channels[c]);
        double total = 0.0, above = 0.0;
        for (std::size_t k = 1; k < p.size(); ++k) {
            // The Nyquist bin of an even-length transform is not mirrored.
            const double weight = (s.length() % 2 == 0 && k == p.size() - 1) ? 1.0 : 2.0;
            total += weight * p[k];
            if (static_cast<double>(k) * s.sample_rate_hz / n > nyq_target) above += weight * p[k];
        }
        const double frac = total > 0.0 ? above / total : 0.0;
        r.channels.push_back({c < s.names.size() ? s.names[c] : std::to_string(c), frac, frac > threshold});
    }
    return r;
}

}  // namespace cmf::dsp
