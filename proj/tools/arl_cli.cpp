// arl: command-line driver for adversarial resilience learning experiments.
//
// Exit codes: 0 success, 1 invalid configuration or invocation, 2 runtime failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "arl/config.hpp"
#include "arl/errors.hpp"
#include "arl/experiment.hpp"
#include "arl/powerflow.hpp"
#include "arl/results.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

void configure_logging() {
    auto logger = spdlog::stderr_color_st("arl");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("ARL_LOG_LEVEL")) {
        const std::string text(level);
        if (text == "error") spdlog::set_level(spdlog::level::err);
        else if (text == "warn") spdlog::set_level(spdlog::level::warn);
        else if (text == "info") spdlog::set_level(spdlog::level::info);
        else if (text == "debug") spdlog::set_level(spdlog::level::debug);
        else spdlog::warn("ignoring unknown ARL_LOG_LEVEL '{}'", text);
    }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::size_t> rounds) {
    arl::ExperimentConfig cfg = arl::load_config_file(config_path);
    if (seed) cfg.seed = *seed;
    if (rounds) cfg.schedule.rounds = *rounds;
    spdlog::info("running '{}' seed={} rounds={} agents={}", cfg.name, cfg.seed, cfg.schedule.rounds,
                 cfg.agents.size());

    const arl::RunLog log = arl::run_experiment(cfg, [](const arl::StepRecord& rec) {
        if (!rec.solution.converged) {
            spdlog::warn("step {}: power flow {} after {} iterations", rec.t, arl::to_string(rec.solution.status),
                         rec.solution.iterations);
        }
        spdlog::debug("step {} {} reward={} p={}", rec.t, rec.agent_id, rec.reward, rec.p_world);
    });
    arl::write_grid_log(log, cfg.outputs.grid_log_path);
    arl::write_agent_log(log, cfg.outputs.agent_log_path);
    const arl::MetricsReport metrics = arl::compute_metrics(log);
    arl::write_metrics(metrics, cfg.outputs.metrics_path);
    spdlog::info("wrote {}, {}, {}", cfg.outputs.grid_log_path, cfg.outputs.agent_log_path, cfg.outputs.metrics_path);

    const double final_p = metrics.performance_series.empty() ? metrics.initial_performance
                                                              : metrics.performance_series.back();
    std::cout << "final_p=" << arl::format_double(final_p) << " attack_success_step="
              << (metrics.attack_success_step ? std::to_string(*metrics.attack_success_step) : std::string("none"));
    for (const auto& spec : cfg.agents) {
        const auto& series = metrics.cumulative_positive_rewards.at(spec.id);
        std::cout << " positive_rewards[" << spec.id << "]=" << (series.empty() ? 0 : series.back());
    }
    std::cout << "\n";
    return kExitOk;
}

int cmd_validate(const std::string& config_path) {
    const arl::ExperimentConfig cfg = arl::load_config_file(config_path);
    std::cout << "valid: '" << cfg.name << "' with " << cfg.agents.size() << " agent(s), "
              << cfg.grid.buses.size() << " buses, fingerprint " << arl::config_fingerprint(cfg) << "\n";
    return kExitOk;
}

int cmd_powerflow(const std::string& config_path) {
    const arl::ExperimentConfig cfg = arl::load_config_file(config_path);
    const arl::PowerFlowSolution sol = arl::solve_newton_raphson(cfg.grid);
    std::cout << "status=" << arl::to_string(sol.status) << " iterations=" << sol.iterations
              << " max_mismatch_pu=" << arl::format_double(sol.max_mismatch_pu) << "\n";
    std::cout << "bus_id,v_pu,theta_rad,p_inj_pu,q_inj_pu\n";
    for (std::size_t i = 0; i < sol.v_pu.size(); ++i) {
        std::cout << i << "," << arl::format_double(sol.v_pu[i]) << "," << arl::format_double(sol.theta_rad[i]) << ","
                  << arl::format_double(sol.p_inj_pu[i]) << "," << arl::format_double(sol.q_inj_pu[i]) << "\n";
    }
    std::cout << "performance=" << arl::format_double(arl::system_performance(sol, cfg.performance))
              << " phase=" << arl::to_string(arl::classify_operational_phase(sol, cfg.performance)) << "\n";
    return sol.converged ? kExitOk : kExitRuntime;
}

int cmd_metrics(const std::string& grid_log, const std::string& agent_log, const std::string& config_path,
                const std::string& out) {
    const arl::ExperimentConfig cfg = arl::load_config_file(config_path);
    const arl::RunLog log = arl::read_run_log(grid_log, agent_log, cfg);
    const arl::MetricsReport metrics = arl::compute_metrics(log);
    if (out.empty()) {
        std::cout << arl::metrics_to_json(metrics);
    } else {
        arl::write_metrics(metrics, out);
    }
    return kExitOk;
}

int cmd_plot(const std::string& metrics_path, const std::string& series, const std::string& out,
             std::optional<std::size_t> from, std::optional<std::size_t> to) {
    const arl::MetricsReport metrics = arl::read_metrics_file(metrics_path);
    arl::emit_plot(arl::select_series(metrics, series, from, to), out);
    return kExitOk;
}

int cmd_asymmetry(const std::string& metrics_path, std::size_t t0) {
    const arl::MetricsReport metrics = arl::read_metrics_file(metrics_path);
    const auto p = metrics.performance_by_step();
    if (t0 >= p.size()) {
        spdlog::error("--t0 {} is beyond the last step {}", t0, p.size() - 1);
        return kExitInvalid;
    }
    const arl::AsymmetryResult result = arl::check_asymmetry(p, metrics.performance.p_fail, t0);
    if (result.holds) {
        std::cout << "holds: p > " << arl::format_double(metrics.performance.p_fail) << " for all t > " << t0 << "\n";
    } else {
        std::cout << "violated: first step " << *result.first_violation << " with p = "
                  << arl::format_double(p[*result.first_violation]) << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Adversarial resilience learning on a static AC power grid"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> rounds;
    auto* run = app.add_subcommand("run", "Run an experiment and write its logs and metrics");
    run->add_option("--config", config_path, "Experiment JSON")->required();
    run->add_option("--seed", seed, "Override the configured seed");
    run->add_option("--rounds", rounds, "Override the configured number of rounds");

    auto* validate = app.add_subcommand("validate", "Validate an experiment file");
    validate->add_option("--config", config_path, "Experiment JSON")->required();

    auto* powerflow = app.add_subcommand("powerflow", "Solve the configured grid once and print the result");
    powerflow->add_option("--config", config_path, "Experiment JSON")->required();

    std::string grid_log;
    std::string agent_log;
    std::string out;
    auto* metrics = app.add_subcommand("metrics", "Recompute the metrics report from CSV logs");
    metrics->add_option("--log", grid_log, "Grid-state CSV log")->required();
    metrics->add_option("--agent-log", agent_log, "Agent CSV log")->required();
    metrics->add_option("--config", config_path, "Experiment JSON the logs were produced with")->required();
    metrics->add_option("--out", out, "Write the report here instead of stdout");

    std::string metrics_path;
    std::string series;
    std::optional<std::size_t> from;
    std::optional<std::size_t> to;
    auto* plot = app.add_subcommand("plot", "Render a metrics series as SVG");
    plot->add_option("--metrics", metrics_path, "Metrics JSON")->required();
    plot->add_option("--series", series, "mean_voltage, performance or cumulative_positive:<agent>")->required();
    plot->add_option("--out", out, "Output SVG path")->required();
    plot->add_option("--from", from, "First step to include");
    plot->add_option("--to", to, "Last step to include");

    std::size_t t0 = 0;
    auto* asymmetry = app.add_subcommand("asymmetry", "Check that performance stays above p_fail after t0");
    asymmetry->add_option("--metrics", metrics_path, "Metrics JSON")->required();
    asymmetry->add_option("--t0", t0, "End of the initialisation window")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    try {
        if (*run) return cmd_run(config_path, seed, rounds);
        if (*validate) return cmd_validate(config_path);
        if (*powerflow) return cmd_powerflow(config_path);
        if (*metrics) return cmd_metrics(grid_log, agent_log, config_path, out);
        if (*plot) return cmd_plot(metrics_path, series, out, from, to);
        if (*asymmetry) return cmd_asymmetry(metrics_path, t0);
    } catch (const arl::ConfigError& e) {
        spdlog::error("invalid configuration: {}", e.what());
        return kExitInvalid;
    } catch (const arl::ModelError& e) {
        spdlog::error("invalid grid model: {}", e.what());
        return kExitInvalid;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return kExitInvalid;
}
