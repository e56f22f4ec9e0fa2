#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "arl/config.hpp"
#include "arl/results.hpp"
#include "test_support.hpp"

namespace {

namespace fs = std::filesystem;
using arl::testing::slurp;

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs the CLI inside `dir` with stdout and stderr captured to files there.
CliResult run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" + std::string(ARL_CLI_PATH) + "' " + args +
                            " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "stdout.txt");
    r.err = slurp(dir / "stderr.txt");
    return r;
}

std::string config(const std::string& name) {
    return "'" + arl::testing::config_path(name).string() + "'";
}

std::string fixture(const std::string& name) {
    return "'" + arl::testing::fixture_path(name).string() + "'";
}

}  // namespace

TEST(Cli, ValidateBundledAndBrokenConfigs) {
    const auto dir = arl::testing::scratch_dir("cli_validate");
    const auto ok = run_cli(dir, "validate --config " + config("poc.json"));
    EXPECT_EQ(ok.exit_code, 0) << ok.err;
    EXPECT_NE(ok.out.find("valid"), std::string::npos);

    const auto overlap = run_cli(dir, "validate --config " + fixture("invalid/overlapping_actuators.json"));
    EXPECT_EQ(overlap.exit_code, 1);
    EXPECT_NE(overlap.err.find("share actuator transformer:3"), std::string::npos) << overlap.err;

    const auto parse = run_cli(dir, "validate --config " + fixture("invalid/truncated.json"));
    EXPECT_EQ(parse.exit_code, 1);
    EXPECT_NE(parse.err.find("byte"), std::string::npos) << parse.err;
}

TEST(Cli, UsageErrorsExitOne) {
    const auto dir = arl::testing::scratch_dir("cli_usage");
    EXPECT_EQ(run_cli(dir, "").exit_code, 1);
    EXPECT_EQ(run_cli(dir, "frobnicate").exit_code, 1);
    EXPECT_EQ(run_cli(dir, "run").exit_code, 1);
    EXPECT_EQ(run_cli(dir, "--help").exit_code, 0);
}

TEST(Cli, MissingFileIsARuntimeFailure) {
    const auto dir = arl::testing::scratch_dir("cli_missing");
    EXPECT_EQ(run_cli(dir, "validate --config does_not_exist.json").exit_code, 2);
}

TEST(Cli, UnwritableOutputIsARuntimeFailure) {
    const auto dir = arl::testing::scratch_dir("cli_unwritable");
    auto cfg = arl::load_config_file(arl::testing::config_path("two_bus.json").string());
    cfg.outputs.grid_log_path = "no/such/dir/grid.csv";
    arl::write_text_file((dir / "cfg.json").string(), arl::save_config(cfg));
    const auto r = run_cli(dir, "run --config cfg.json");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("no/such/dir/grid.csv"), std::string::npos) << r.err;
}

TEST(Cli, PowerflowPrintsTheSolvedGrid) {
    const auto dir = arl::testing::scratch_dir("cli_powerflow");
    const auto r = run_cli(dir, "powerflow --config " + config("two_bus.json"));
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("status=converged"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("1,0.99874607311"), std::string::npos) << r.out;
}

TEST(Cli, TwoBusRunIsFast) {
    const auto dir = arl::testing::scratch_dir("cli_two_bus");
    const auto start = std::chrono::steady_clock::now();
    const auto r = run_cli(dir, "run --config " + config("two_bus.json"));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_LT(seconds, 1.0);
    for (const char* f : {"two_bus_grid.csv", "two_bus_agents.csv", "two_bus_metrics.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    EXPECT_NE(r.out.find("final_p="), std::string::npos);
    EXPECT_NE(r.out.find("positive_rewards[defender]="), std::string::npos);
}

TEST(Cli, RunIsReproducibleAndLeavesTheConfigAlone) {
    const auto a = arl::testing::scratch_dir("cli_run_a");
    const auto b = arl::testing::scratch_dir("cli_run_b");
    const auto c = arl::testing::scratch_dir("cli_run_c");
    fs::copy_file(arl::testing::config_path("poc.json"), a / "poc.json");
    const std::string before = slurp(a / "poc.json");
    ASSERT_EQ(run_cli(a, "run --config poc.json --rounds 30").exit_code, 0);
    ASSERT_EQ(run_cli(b, "run --config " + config("poc.json") + " --rounds 30").exit_code, 0);
    ASSERT_EQ(run_cli(c, "run --config " + config("poc.json") + " --rounds 30 --seed 7").exit_code, 0);
    EXPECT_EQ(slurp(a / "poc.json"), before);
    for (const char* f : {"poc_grid.csv", "poc_agents.csv", "poc_metrics.json"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_NE(slurp(a / "poc_agents.csv"), slurp(c / "poc_agents.csv"));

    const auto metrics = arl::read_metrics_file((b / "poc_metrics.json").string());
    EXPECT_EQ(metrics.rounds, 30u);
    EXPECT_EQ(metrics.seed, 42u);
    EXPECT_EQ(run_cli(c, "run --config " + config("poc.json") + " --rounds 30 --seed 7").exit_code, 0);
    EXPECT_EQ(arl::read_metrics_file((c / "poc_metrics.json").string()).seed, 7u);
}

TEST(Cli, MetricsPlotAndAsymmetryPipeline) {
    const auto dir = arl::testing::scratch_dir("cli_pipeline");
    ASSERT_EQ(run_cli(dir, "run --config " + config("poc.json") + " --rounds 20").exit_code, 0);

    const std::string metrics_args = "metrics --log poc_grid.csv --agent-log poc_agents.csv --config " +
                                     config("poc.json") + " --rounds 20";
    // Recomputing needs the effective config, so rewrite it with the override applied.
    auto cfg = arl::load_config_file(arl::testing::config_path("poc.json").string());
    cfg.schedule.rounds = 20;
    arl::write_text_file((dir / "effective.json").string(), arl::save_config(cfg));
    const auto m = run_cli(dir, "metrics --log poc_grid.csv --agent-log poc_agents.csv --config effective.json "
                                "--out recomputed.json");
    EXPECT_EQ(m.exit_code, 0) << m.err;
    EXPECT_EQ(slurp(dir / "recomputed.json"), slurp(dir / "poc_metrics.json"));
    const auto m_stdout = run_cli(dir, "metrics --log poc_grid.csv --agent-log poc_agents.csv --config effective.json");
    EXPECT_EQ(m_stdout.out, slurp(dir / "poc_metrics.json"));
    EXPECT_EQ(run_cli(dir, metrics_args).exit_code, 1);

    for (int i = 0; i < 2; ++i) {
        const auto p = run_cli(dir, "plot --metrics poc_metrics.json --series mean_voltage --out mv" +
                                        std::to_string(i) + ".svg");
        EXPECT_EQ(p.exit_code, 0) << p.err;
    }
    EXPECT_EQ(slurp(dir / "mv0.svg"), slurp(dir / "mv1.svg"));
    EXPECT_NE(slurp(dir / "mv0.svg").find("<svg"), std::string::npos);
    EXPECT_EQ(run_cli(dir, "plot --metrics poc_metrics.json --series nope --out x.svg").exit_code, 2);

    const auto windowed = run_cli(dir, "plot --metrics poc_metrics.json --series cumulative_positive:attacker "
                                       "--from 10 --to 30 --out window.svg");
    EXPECT_EQ(windowed.exit_code, 0) << windowed.err;

    const auto beyond = run_cli(dir, "asymmetry --metrics poc_metrics.json --t0 41");
    EXPECT_EQ(beyond.exit_code, 1);
}

TEST(Cli, AsymmetryHoldsOnAnAllNominalRun) {
    const auto dir = arl::testing::scratch_dir("cli_nominal");
    ASSERT_EQ(run_cli(dir, "run --config " + fixture("all_nominal.json")).exit_code, 0);
    const auto r = run_cli(dir, "asymmetry --metrics nominal_metrics.json --t0 0");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("holds", 0), 0u) << r.out;
}

TEST(Cli, AsymmetryReportsTheFirstViolation) {
    const auto dir = arl::testing::scratch_dir("cli_violation");
    ASSERT_EQ(run_cli(dir, "run --config " + config("poc.json") + " --rounds 5").exit_code, 0);
    const auto r = run_cli(dir, "asymmetry --metrics poc_metrics.json --t0 0");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("violated: first step 1", 0), 0u) << r.out;
}
