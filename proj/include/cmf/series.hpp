#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmf/error.hpp"

namespace cmf {

// Model inputs, in the order used for every feature matrix.
enum class Feature : std::size_t {
    apparent_mf_main = 0,
    apparent_mf_liquid = 1,
    temp_main = 2,
    temp_liquid = 3,
    pressure = 4,
};

inline constexpr std::size_t kFeatureCount = 5;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "apparent_mf_main", "apparent_mf_liquid", "temp_main", "temp_liquid", "pressure"};

inline constexpr std::string_view kTruthName = "true_total_mf";

// Uniformly sampled multichannel series. Channel-major: channels[c][n].
struct SampledSeries {
    double sample_rate_hz = 0.0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> channels;
    // Cutoff of the anti-aliasing filter already applied, 0 when unfiltered.
    double lowpass_cutoff_hz = 0.0;

    std::size_t channel_count() const noexcept { return channels.size(); }
    std::size_t length() const noexcept { return channels.empty() ? 0 : channels.front().size(); }

    std::span<const double> channel(std::size_t c) const { return channels.at(c); }
    std::span<double> channel(std::size_t c) { return channels.at(c); }

    std::span<const double> channel(std::string_view name) const {
        for (std::size_t c = 0; c < names.size(); ++c)
            if (names[c] == name) return channels[c];
        throw ParameterError("no channel named '" + std::string(name) + "'");
    }

    // Throws when channels disagree in length or names/channels mismatch.
    void check_consistent() const {
        if (names.size() != channels.size())
            throw ShapeError("series has " + std::to_string(names.size()) + " names but " +
                             std::to_string(channels.size()) + " channels");
        for (std::size_t c = 1; c < channels.size(); ++c)
            if (channels[c].size() != channels[0].size())
                throw ShapeError("channel '" + names[c] + "' has length " +
                                 std::to_string(channels[c].size()) + ", expected " +
                                 std::to_string(channels[0].size()));
    }

    static SampledSeries make(double rate, std::vector<std::string> names, std::size_t length) {
        SampledSeries s;
        s.sample_rate_hz = rate;
        s.channels.assign(names.size(), std::vector<double>(length, 0.0));
        s.names = std::move(names);
        return s;
    }
};

inline std::vector<std::string> feature_names() {
    return {kFeatureNames.begin(), kFeatureNames.end()};
}

struct OperatingPoint {
    double water_cut = 0.0;         // fraction of liquid that is water
    double viscosity_mpas = 1.0;    // mPa s
    double oil_mass_flow = 0.0;     // kg/h
    double total_mass_flow = 0.0;   // kg/h
    double gvf = 0.0;               // gas volume fraction
    double pressure_base = 1.01;    // bar
    double temperature_base = 20.0; // degC

    bool operator==(const OperatingPoint&) const = default;
};

// Ranges of the operating variables covered by the rig.
namespace limits {
inline constexpr double water_cut_max = 0.994;
inline constexpr double gvf_max = 0.955;
inline constexpr double total_mf_min = 930.0;
inline constexpr double total_mf_max = 14900.0;
inline constexpr double oil_mf_min = 10.6;
inline constexpr double oil_mf_max = 12900.0;
inline constexpr double pressure_min = 1.01;
inline constexpr double pressure_max = 4.49;
inline constexpr double temperature_min = 19.2;
inline constexpr double temperature_max = 35.7;
inline constexpr double viscosity_min = 7.17e-4;
inline constexpr double viscosity_max = 666.0;
}  // namespace limits

// Throws ValidationError naming the first field out of range.
inline void validate(const OperatingPoint& op) {
    auto check = [](bool ok, const char* field, double v) {
        if (!ok) throw ValidationError(std::string(field) + " out of range: " + std::to_string(v));
    };
    check(op.water_cut >= 0.0 && op.water_cut <= limits::water_cut_max, "water_cut", op.water_cut);
    check(op.gvf >= 0.0 && op.gvf <= limits::gvf_max, "gvf", op.gvf);
    check(op.viscosity_mpas >= limits::viscosity_min && op.viscosity_mpas <= limits::viscosity_max,
          "viscosity", op.viscosity_mpas);
    check(op.total_mass_flow >= limits::total_mf_min && op.total_mass_flow <= limits::total_mf_max,
          "total_mass_flow", op.total_mass_flow);
    check(op.oil_mass_flow >= limits::oil_mf_min && op.oil_mass_flow <= limits::oil_mf_max,
          "oil_mass_flow", op.oil_mass_flow);
    check(op.oil_mass_flow <= op.total_mass_flow, "oil_mass_flow", op.oil_mass_flow);
    check(op.pressure_base >= limits::pressure_min && op.pressure_base <= limits::pressure_max,
          "pressure_base", op.pressure_base);
    check(op.temperature_base >= limits::temperature_min &&
              op.temperature_base <= limits::temperature_max,
          "temperature_base", op.temperature_base);
}

// One operating-point recording.
struct Experiment {
    int group_id = 0;
    OperatingPoint op;
    double duration_s = 0.0;
    SampledSeries features;  // kFeatureNames, in order
    SampledSeries truth;     // single channel kTruthName

    std::size_t length() const noexcept { return features.length(); }
    double sample_rate_hz() const noexcept { return features.sample_rate_hz; }
};

using Dataset = std::vector<Experiment>;

}  // namespace cmf
