#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "cmf/error.hpp"
#include "cmf/rig.hpp"
#include "cmf/text.hpp"

// Flat key=value configuration with optional [section] headers. Keys are
// addressed as "section.key"; '#' and ';' start comment lines.
namespace cmf::config {

using Entries = std::map<std::string, std::string>;

inline Entries parse(std::string_view content, const std::string& origin = "config") {
    Entries out;
    std::string section;
    std::size_t line_no = 0;
    for (auto raw : text::split(content, '\n')) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = std::string(text::trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
        const auto key = text::trim(line.substr(0, eq));
        const auto value = text::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
        if (out.contains(full)) throw ConfigError(where + ": duplicate key '" + full + "'");
        out.emplace(std::move(full), std::string(value));
    }
    return out;
}

namespace detail {

template <class T>
T number(const std::string& key, const std::string& value) {
    if constexpr (std::is_floating_point_v<T>) {
        if (auto v = text::parse_double(value)) return *v;
    } else {
        if (auto v = text::parse_int<T>(value)) return *v;
    }
    throw ConfigError(key + ": cannot parse '" + value + "'");
}

struct RigField {
    const char* key;
    std::function<void(RigConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RigConfig&)> get;
};

#define CMF_RIG_FIELD(name)                                                                             \
    RigField {                                                                                          \
        "rig." #name,                                                                                   \
            [](RigConfig& c, const std::string& k, const std::string& v) {                              \
                c.name = number<decltype(c.name)>(k, v);                                                \
            },                                                                                          \
            [](const RigConfig& c) {                                                                    \
                if constexpr (std::is_floating_point_v<decltype(c.name)>) return text::format_double(c.name); \
                else return std::to_string(c.name);                                                     \
            }                                                                                           \
    }

inline const std::vector<RigField>& rig_fields() {
    static const std::vector<RigField> fields = {
        CMF_RIG_FIELD(n_baselines),         CMF_RIG_FIELD(gvf_steps_per_baseline),
        CMF_RIG_FIELD(seed),                CMF_RIG_FIELD(noise_scale),
        CMF_RIG_FIELD(oscillation_freq_hz), CMF_RIG_FIELD(bias_gain),
        CMF_RIG_FIELD(oscillation_amplitude), CMF_RIG_FIELD(sample_rate_hz),
        CMF_RIG_FIELD(duration_s),          CMF_RIG_FIELD(duration_jitter),
        CMF_RIG_FIELD(gvf_min),             CMF_RIG_FIELD(gvf_max),
    };
    return fields;
}

#undef CMF_RIG_FIELD

}  // namespace detail

// Unknown keys are rejected; missing keys keep their defaults.
inline RigConfig rig_from_entries(const Entries& entries) {
    RigConfig c;
    const auto& fields = detail::rig_fields();
    for (const auto& [key, value] : entries) {
        auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return key == f.key; });
        if (it == fields.end()) throw ConfigError("unknown key '" + key + "'");
        it->set(c, key, value);
    }
    validate(c);
    return c;
}

inline RigConfig load_rig(const std::string& path) {
    return rig_from_entries(parse(text::read_file(path), path));
}

// Canonical text form; also the input of the config hash.
inline std::string rig_to_text(const RigConfig& c) {
    std::string s = "[rig]\n";
    for (const auto& f : detail::rig_fields()) s += std::string(f.key).substr(4) + " = " + f.get(c) + "\n";
    return s;
}

}  // namespace cmf::config
