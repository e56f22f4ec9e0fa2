#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arl/core.hpp"
#include "arl/experiment.hpp"

namespace arl {

/// %.17g, so every double survives a text round trip bit-exactly. NaN prints as "nan".
std::string format_double(double value);

inline constexpr const char* kGridLogHeader = "step,bus_id,v_pu,theta_rad,p_inj_pu,q_inj_pu";
inline constexpr const char* kAgentLogHeader = "step,agent_id,inputs,outputs,reward";

/// One row per (step, bus). Steps whose power flow did not converge carry "nan" values.
std::string grid_log_csv(const RunLog& log);
/// One row per agent turn; vector cells are ';'-joined.
std::string agent_log_csv(const RunLog& log);

void write_grid_log(const RunLog& log, const std::string& path);
void write_agent_log(const RunLog& log, const std::string& path);

/// Rebuilds the metric-relevant parts of a RunLog from its two CSV logs.
/// The initial world is re-solved from `cfg`.
RunLog read_run_log(const std::string& grid_log_path, const std::string& agent_log_path,
                    const ExperimentConfig& cfg);

struct MetricsReport {
    std::string name;
    std::uint64_t seed = 0;
    std::size_t rounds = 0;
    std::size_t steps_per_turn = 1;
    std::string fingerprint;
    PerformanceConfig performance;

    std::vector<std::size_t> steps;
    std::vector<std::string> agent;  // acting agent per step
    double initial_performance = 0.0;
    std::vector<double> performance_series;
    std::vector<double> mean_voltage;  // NaN where the power flow did not converge
    std::map<std::string, std::vector<std::size_t>> cumulative_positive_rewards;
    std::optional<std::size_t> attack_success_step;
    std::vector<OperationalPhase> operational_phase;
    std::vector<PhaseSegment> resilience_phases;  // start/end are step numbers

    /// [p(m_0), p(m_1), ...] indexed by step.
    std::vector<double> performance_by_step() const;
};

MetricsReport compute_metrics(const RunLog& log);

/// Running count of strictly positive entries.
std::vector<std::size_t> cumulative_positive(const std::vector<double>& rewards);

std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);
MetricsReport read_metrics_file(const std::string& path);
void write_metrics(const MetricsReport& report, const std::string& path);

struct PlotSeries {
    std::string title;
    std::string y_label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Named series from a metrics report: "mean_voltage", "performance" or
/// "cumulative_positive:<agent id>". Optional inclusive step window.
PlotSeries select_series(const MetricsReport& report, const std::string& name,
                         std::optional<std::size_t> from = std::nullopt, std::optional<std::size_t> to = std::nullopt);

inline constexpr int kPlotWidth = 800;
inline constexpr int kPlotHeight = 400;

/// Self-contained SVG line chart on a fixed 800x400 view box.
std::string render_svg(const PlotSeries& series);
void emit_plot(const PlotSeries& series, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace arl
