#include <gtest/gtest.h>

#include "cmf/rig.hpp"
#include "support.hpp"

using namespace cmf;

TEST(Rig, SameConfigGivesIdenticalData) {
    const auto a = generate_dataset(support::small_rig());
    const auto b = generate_dataset(support::small_rig());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].op, b[i].op);
        EXPECT_EQ(a[i].features.channels, b[i].features.channels);
        EXPECT_EQ(a[i].truth.channels, b[i].truth.channels);
    }
}

TEST(Rig, SeedChangesData) {
    const auto a = generate_dataset(support::small_rig(1));
    const auto b = generate_dataset(support::small_rig(2));
    EXPECT_NE(a.front().truth.channels, b.front().truth.channels);
}

TEST(Rig, LayoutAndGroupIds) {
    const auto cfg = support::small_rig();
    const auto ds = generate_dataset(cfg);
    ASSERT_EQ(ds.size(), 24u);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(ds[i].group_id, static_cast<int>(i + 1));
        EXPECT_NO_THROW(validate(ds[i].op));
        EXPECT_EQ(ds[i].features.channel_count(), kFeatureCount);
        EXPECT_EQ(ds[i].truth.length(), ds[i].length());
        EXPECT_NEAR(ds[i].duration_s, cfg.duration_s, cfg.duration_s * cfg.duration_jitter + 1e-12);
        EXPECT_EQ(ds[i].features.names, feature_names());
    }
}

TEST(Rig, GvfLadderIncreasesWithinBaseline) {
    const auto cfg = support::small_rig();
    const auto ds = generate_dataset(cfg);
    const auto steps = static_cast<std::size_t>(cfg.gvf_steps_per_baseline);
    for (std::size_t b = 0; b < ds.size() / steps; ++b) {
        EXPECT_DOUBLE_EQ(ds[b * steps].op.gvf, cfg.gvf_min);
        for (std::size_t j = 1; j < steps; ++j) {
            EXPECT_GT(ds[b * steps + j].op.gvf, ds[b * steps + j - 1].op.gvf);
            EXPECT_LE(ds[b * steps + j].op.gvf, cfg.gvf_max);
            EXPECT_EQ(ds[b * steps + j].op.total_mass_flow, ds[b * steps].op.total_mass_flow);
        }
    }
}

TEST(Rig, NoiseFreeSinglePhaseReadsTruth) {
    auto cfg = support::small_rig();
    cfg.gvf_steps_per_baseline = 1;
    cfg.noise_scale = 0.0;
    for (const auto& e : generate_dataset(cfg)) {
        ASSERT_EQ(e.op.gvf, 0.0);
        for (std::size_t i = 0; i < e.length(); ++i)
            EXPECT_DOUBLE_EQ(e.features.channels[0][i], e.truth.channels[0][i]);
    }
}

TEST(Rig, MainMeterUnderReadsWithGas) {
    auto cfg = support::small_rig();
    cfg.noise_scale = 0.0;
    for (const auto& e : generate_dataset(cfg)) {
        double app = 0.0, tru = 0.0;
        for (std::size_t i = 0; i < e.length(); ++i) {
            app += e.features.channels[0][i];
            tru += e.truth.channels[0][i];
        }
        if (e.op.gvf > 0.3) {
            EXPECT_LT(app, tru);
        }
    }
}

TEST(Rig, InvalidConfigNamesField) {
    auto cfg = support::small_rig();
    cfg.n_baselines = 0;
    try {
        validate(cfg);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("n_baselines"), std::string::npos);
        EXPECT_EQ(e.code(), ExitCode::usage);
    }
    cfg = support::small_rig();
    cfg.gvf_max = 0.99;
    EXPECT_THROW(validate(cfg), ConfigError);
    cfg = support::small_rig();
    cfg.oscillation_freq_hz = 8.0;
    EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(OperatingPoint, RangeChecks) {
    OperatingPoint op{0.5, 10.0, 1000.0, 5000.0, 0.3, 2.0, 25.0};
    EXPECT_NO_THROW(validate(op));
    op.gvf = 0.97;
    EXPECT_THROW(validate(op), ValidationError);
    op.gvf = 0.3;
    op.total_mass_flow = 20000.0;
    try {
        validate(op);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("total_mass_flow"), std::string::npos);
    }
}
