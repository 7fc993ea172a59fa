#pragma once

#include <filesystem>
#include <string>

#include "cmf/rig.hpp"

namespace support {

// Small, fast rig: 6 baselines x 4 GVF steps of 30 s.
inline cmf::RigConfig small_rig(std::uint64_t seed = 7) {
    cmf::RigConfig c;
    c.n_baselines = 6;
    c.gvf_steps_per_baseline = 4;
    c.duration_s = 30.0;
    c.seed = seed;
    return c;
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cmf_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace support
