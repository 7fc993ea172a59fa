#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "cmf/error.hpp"
#include "cmf/series.hpp"
#include "cmf/text.hpp"

// Dataset text format, tab separated, '.' decimal point:
//
//   cmf-dataset <schema> <sample_rate_hz>
//   experiment <group_id> <water_cut> <viscosity> <oil_mf> <total_mf> <gvf> <pressure> <temperature> <duration_s> <n>
//   <timestamp_s> <5 features> <true_total_mf>      (n records)
//   experiment ...
namespace cmf {

inline constexpr std::string_view kDatasetMagic = "cmf-dataset";
inline constexpr int kDatasetSchema = 1;

inline std::string serialize_dataset(const Dataset& ds) {
    if (ds.empty()) throw ParameterError("cannot serialize an empty dataset");
    const double rate = ds.front().sample_rate_hz();
    std::string out;
    out.reserve(ds.size() * ds.front().length() * 96);
    out += kDatasetMagic;
    out += '\t' + std::to_string(kDatasetSchema) + '\t' + text::format_double(rate) + '\n';
    for (const auto& e : ds) {
        if (e.sample_rate_hz() != rate)
            throw ParameterError("experiment " + std::to_string(e.group_id) + " has a different sample rate");
        e.features.check_consistent();
        if (e.features.channel_count() != kFeatureCount || e.truth.channel_count() != 1 ||
            e.truth.length() != e.length())
            throw ShapeError("experiment " + std::to_string(e.group_id) + " has malformed channels");
        const auto& op = e.op;
        out += "experiment\t" + std::to_string(e.group_id);
        for (double v : {op.water_cut, op.viscosity_mpas, op.oil_mass_flow, op.total_mass_flow, op.gvf,
                         op.pressure_base, op.temperature_base, e.duration_s}) {
            out += '\t';
            out += text::format_double(v);
        }
        out += '\t' + std::to_string(e.length()) + '\n';
        for (std::size_t i = 0; i < e.length(); ++i) {
            out += text::format_double(static_cast<double>(i) / rate);
            for (std::size_t c = 0; c < kFeatureCount; ++c) {
                out += '\t';
                out += text::format_double(e.features.channels[c][i]);
            }
            out += '\t';
            out += text::format_double(e.truth.channels[0][i]);
            out += '\n';
        }
    }
    return out;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    text::write_file(path, serialize_dataset(ds));
}

inline Dataset parse_dataset(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& why) -> ParseError {
        return ParseError("line " + std::to_string(lineno) + ": " + why);
    };
    auto next = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (!text::trim(line).empty()) return true;
        }
        return false;
    };
    auto number = [&](std::string_view field, const char* what) {
        auto v = text::parse_double(field);
        if (!v) throw fail(std::string("bad ") + what + " '" + std::string(field) + "'");
        return *v;
    };

    if (!next()) throw ParseError("empty dataset file");
    auto header = text::split(line, '\t');
    if (header.size() != 3 || text::trim(header[0]) != kDatasetMagic)
        throw fail("missing dataset header");
    auto schema = text::parse_int<int>(header[1]);
    if (!schema || *schema != kDatasetSchema) throw fail("unsupported schema version");
    const double rate = number(header[2], "sample rate");
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("sample_rate_hz must be > 0");

    Dataset ds;
    while (next()) {
        auto meta = text::split(line, '\t');
        if (meta.size() != 11 || text::trim(meta[0]) != "experiment")
            throw fail("expected an experiment record with 11 fields");
        Experiment e;
        auto gid = text::parse_int<int>(meta[1]);
        if (!gid) throw fail("bad group_id");
        e.group_id = *gid;
        e.op.water_cut = number(meta[2], "water_cut");
        e.op.viscosity_mpas = number(meta[3], "viscosity");
        e.op.oil_mass_flow = number(meta[4], "oil_mass_flow");
        e.op.total_mass_flow = number(meta[5], "total_mass_flow");
        e.op.gvf = number(meta[6], "gvf");
        e.op.pressure_base = number(meta[7], "pressure_base");
        e.op.temperature_base = number(meta[8], "temperature_base");
        e.duration_s = number(meta[9], "duration_s");
        auto n = text::parse_int<std::size_t>(meta[10]);
        if (!n) throw fail("bad sample count");
        if (e.group_id < 1) throw ValidationError("record at line " + std::to_string(lineno) + ": group_id must be positive");
        try {
            validate(e.op);
        } catch (const ValidationError& err) {
            throw ValidationError("experiment " + std::to_string(e.group_id) + " (line " +
                                  std::to_string(lineno) + "): " + err.what());
        }
        e.features = SampledSeries::make(rate, feature_names(), *n);
        e.truth = SampledSeries::make(rate, {std::string(kTruthName)}, *n);
        for (std::size_t i = 0; i < *n; ++i) {
            if (!next()) throw fail("unexpected end of file inside experiment " + std::to_string(e.group_id));
            auto cols = text::split(line, '\t');
            if (cols.size() != 7) throw fail("expected 7 columns, got " + std::to_string(cols.size()));
            number(cols[0], "timestamp");
            for (std::size_t c = 0; c < kFeatureCount; ++c) e.features.channels[c][i] = number(cols[c + 1], "value");
            e.truth.channels[0][i] = number(cols[6], "value");
        }
        ds.push_back(std::move(e));
    }
    if (ds.empty()) throw ParseError("dataset has a header but no experiments");
    return ds;
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open dataset '" + path + "'");
    return parse_dataset(in);
}

inline Dataset parse_dataset(const std::string& content) {
    std::istringstream in(content);
    return parse_dataset(in);
}

}  // namespace cmf
