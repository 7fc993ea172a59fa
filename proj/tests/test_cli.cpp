#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "cmf/report.hpp"
#include "cmf/text.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

// Runs the installed tool with stdout/stderr captured to <dir>/console.txt.
int tool(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(CMF_CORRECT_BIN) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return cmf::text::read_file(p.string()); }

void write_config(const fs::path& p, int baselines, int steps, int seed) {
    cmf::text::write_file(p.string(), "[rig]\nn_baselines = " + std::to_string(baselines) +
                                          "\ngvf_steps_per_baseline = " + std::to_string(steps) +
                                          "\nduration_s = 30\nseed = " + std::to_string(seed) + "\n");
}

struct Workspace {
    fs::path dir, log, cfg, data;

    explicit Workspace(const std::string& name) : dir(support::scratch_dir(name)) {
        log = dir / "console.txt";
        cfg = dir / "rig.cfg";
        data = dir / "data.tsv";
        write_config(cfg, 6, 4, 11);
    }

    int generate() { return tool("generate --config " + cfg.string() + " --out " + data.string(), log); }

    int run(const std::string& out, const std::string& extra = "--rate 4 --model mlp --seeds 1..2") {
        return tool("run --dataset " + data.string() + " " + extra + " --jobs 2 --out " + (dir / out).string(), log);
    }
};

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    Workspace w("cli_usage");
    EXPECT_EQ(tool("", w.log), 2);
    EXPECT_EQ(tool("generate --bogus 1 --out x", w.log), 2);
    EXPECT_EQ(tool("generate --config " + (w.dir / "absent.cfg").string() + " --out " + w.data.string(), w.log), 2);
    EXPECT_NE(slurp(w.log).find("absent.cfg"), std::string::npos);
    cmf::text::write_file(w.cfg.string(), "[rig]\nwobble = 3\n");
    EXPECT_EQ(w.generate(), 2);
}

TEST(Cli, GenerateWritesManifestAndHonoursSeedOverride) {
    Workspace w("cli_generate");
    ASSERT_EQ(w.generate(), 0) << slurp(w.log);
    const auto m = cmf::report::Manifest::from_text(slurp(w.data.string() + ".manifest"));
    EXPECT_EQ(m.require("rig.seed"), "11");
    EXPECT_EQ(m.require("experiments"), "24");

    const auto other = w.dir / "other.tsv";
    ASSERT_EQ(tool("generate --config " + w.cfg.string() + " --seed 12 --out " + other.string(), w.log), 0);
    const auto m2 = cmf::report::Manifest::from_text(slurp(other.string() + ".manifest"));
    EXPECT_EQ(m2.require("rig.seed"), "12");
    EXPECT_NE(m2.require("dataset_hash"), m.require("dataset_hash"));
}

TEST(Cli, MalformedDatasetExitsThree) {
    Workspace w("cli_baddata");
    cmf::text::write_file(w.data.string(), "not\ta\tdataset\n1\t2\n");
    EXPECT_EQ(w.run("r"), 3);
}

// An unreadable input path is a usage problem, like a missing config.
TEST(Cli, MissingDatasetPathExitsTwo) {
    Workspace w("cli_nodata");
    EXPECT_EQ(tool("run --dataset " + (w.dir / "missing.tsv").string() + " --out " + (w.dir / "r").string(), w.log), 2);
    EXPECT_NE(slurp(w.log).find("missing.tsv"), std::string::npos);
}

TEST(Cli, ManifestRerunIsByteIdentical) {
    Workspace w("cli_rerun");
    ASSERT_EQ(w.generate(), 0) << slurp(w.log);
    ASSERT_EQ(w.run("first"), 0) << slurp(w.log);
    const auto first = w.dir / "first";
    for (const char* f : {"manifest.txt", "split.txt", "metrics.tsv", "per_seed.tsv", "relative_errors.tsv",
                          "checkpoints/seed_1.ckpt", "logs/seed_2.tsv"})
        EXPECT_TRUE(fs::exists(first / f)) << f;

    ASSERT_EQ(tool("run --manifest " + (first / "manifest.txt").string() + " --out " + (w.dir / "again").string(),
                   w.log),
              0)
        << slurp(w.log);
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(first)) {
        if (!e.is_regular_file() || e.path().filename() == "timing.tsv") continue;
        const auto rel = fs::relative(e.path(), first);
        ASSERT_TRUE(fs::exists(w.dir / "again" / rel)) << rel;
        EXPECT_EQ(slurp(e.path()), slurp(w.dir / "again" / rel)) << rel;
        ++compared;
    }
    EXPECT_GE(compared, 10u);

    EXPECT_EQ(tool("run --manifest " + (first / "manifest.txt").string() + " --rate 2 --out " +
                       (w.dir / "mixed").string(),
                   w.log),
              2);
}

TEST(Cli, ManifestRerunRejectsChangedDataset) {
    Workspace w("cli_changed");
    ASSERT_EQ(w.generate(), 0);
    ASSERT_EQ(w.run("first"), 0) << slurp(w.log);
    write_config(w.cfg, 6, 4, 99);
    ASSERT_EQ(w.generate(), 0);
    EXPECT_EQ(tool("run --manifest " + (w.dir / "first" / "manifest.txt").string() + " --out " +
                       (w.dir / "again").string(),
                   w.log),
              3);
}

TEST(Cli, ReportMergesRunsOfOneDatasetOnly) {
    Workspace w("cli_report");
    ASSERT_EQ(w.generate(), 0);
    ASSERT_EQ(w.run("mlp"), 0) << slurp(w.log);
    ASSERT_EQ(w.run("cnn", "--rate 60s --model cnn --seeds 1"), 0) << slurp(w.log);
    const auto a = (w.dir / "mlp").string(), b = (w.dir / "cnn").string();
    ASSERT_EQ(tool("report " + a + " " + b + " --out " + (w.dir / "rep").string(), w.log), 0) << slurp(w.log);
    for (const char* f : {"comparison.tsv", "gvf_bins.tsv", "coverage.tsv", "plot_data.tsv", "complexity.tsv"})
        EXPECT_TRUE(fs::exists(w.dir / "rep" / f)) << f;
    const auto cmp = slurp(w.dir / "rep" / "comparison.tsv");
    EXPECT_NE(cmp.find("even/4s/mlp\tmodel\tpooled"), std::string::npos);
    EXPECT_NE(cmp.find("even/60s/cnn\tbaseline\tpooled"), std::string::npos);
    EXPECT_NE(slurp(w.dir / "rep" / "complexity.tsv").find("cnn\t4s\t5\t809\t6528"), std::string::npos);

    const auto other = w.dir / "other.tsv";
    ASSERT_EQ(tool("generate --config " + w.cfg.string() + " --seed 5 --out " + other.string(), w.log), 0);
    ASSERT_EQ(tool("run --dataset " + other.string() + " --rate 4 --model mlp --seeds 1 --out " +
                       (w.dir / "foreign").string(),
                   w.log),
              0);
    EXPECT_EQ(tool("report " + a + " " + (w.dir / "foreign").string() + " --out " + (w.dir / "rep2").string(), w.log),
              3);
    EXPECT_NE(slurp(w.log).find("different datasets"), std::string::npos);
}

TEST(Cli, FailedRunLeavesMarkerAndIsRefusedByReport) {
    Workspace w("cli_failed");
    write_config(w.cfg, 1, 2, 3);
    ASSERT_EQ(w.generate(), 0) << slurp(w.log);
    const int code = w.run("r");
    EXPECT_EQ(code, 3) << slurp(w.log);
    ASSERT_TRUE(fs::exists(w.dir / "r" / "FAILED"));
    EXPECT_EQ(tool("report " + (w.dir / "r").string() + " --out " + (w.dir / "rep").string(), w.log), 3);
}
