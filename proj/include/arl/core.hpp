#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arl/grid_model.hpp"
#include "arl/powerflow.hpp"

namespace arl {

enum class AgentClass { attacker, defender };

const char* to_string(AgentClass cls);
AgentClass agent_class_from_string(const std::string& text);

/// World instance at step t: actuator settings plus the power flow they produce.
struct WorldState {
    std::size_t t = 0;
    GridModel grid;
    PowerFlowSolution solution;

    /// Solves `grid` and wraps it as the step-0 world.
    static WorldState initial(GridModel grid);
};

enum class SensorQuantity { v_pu };

struct Sensor {
    int bus = 0;
    SensorQuantity quantity = SensorQuantity::v_pu;

    bool operator==(const Sensor&) const = default;
};

struct SensorBinding {
    std::vector<Sensor> sensors;

    bool operator==(const SensorBinding&) const = default;
};

struct Observation {
    std::vector<double> values;
    bool degraded = false;  // taken from a non-converged solution
};

Observation observe(const WorldState& world, const SensorBinding& binding);

enum class DeviceKind { transformer, generator, load };

const char* to_string(DeviceKind kind);
DeviceKind device_kind_from_string(const std::string& text);

struct ActuatorRef {
    DeviceKind kind = DeviceKind::transformer;
    int index = 0;

    auto operator<=>(const ActuatorRef&) const = default;
};

/// "transformer:3", the form used in error messages and logs.
std::string to_string(const ActuatorRef& ref);

enum class ActionLabel {
    hold,
    decrement,    // tap down or load scaling down
    increment,    // tap up or load scaling up
    p_decrement,  // generator active power
    p_increment,
    q_decrement,  // generator reactive power
    q_increment,
};

const char* to_string(ActionLabel label);
ActionLabel action_label_from_string(const std::string& text);

/// Labels a device kind accepts, in canonical order.
std::vector<ActionLabel> default_labels(DeviceKind kind);
bool label_valid_for(DeviceKind kind, ActionLabel label);

struct ActuatorAction {
    ActuatorRef target;
    ActionLabel label = ActionLabel::hold;
};

/// Discrete step sizes; moves past a device limit are clamped.
inline constexpr int kTapStep = 1;
inline constexpr double kGeneratorPStepMw = 0.1;
inline constexpr double kGeneratorQStepMvar = 0.05;
inline constexpr double kLoadScalingStep = 0.1;

/// Applies one action to a grid copy in place. Throws ContractError for unknown devices
/// or labels that do not fit the device kind.
void apply_action(GridModel& grid, const ActuatorAction& action);

/// Applies the aggregated actions of all agents, re-solves and advances t.
/// Throws ConfigError if two actions target the same actuator.
WorldState apply_actions(const WorldState& world, std::span<const ActuatorAction> actions,
                         const SolverOptions& options = {});

/// Snapshot of every actuator setpoint in a grid.
struct ActuatorSettings {
    std::vector<int> tap_pos;
    std::vector<double> gen_p_mw;
    std::vector<double> gen_q_mvar;
    std::vector<double> load_scaling;

    bool operator==(const ActuatorSettings&) const = default;
};

ActuatorSettings settings_of(const GridModel& grid);
GridModel with_settings(GridModel grid, const ActuatorSettings& settings);

struct PerformanceConfig {
    double p_star = 1.0;
    double p_fail = 13.0 / 14.0;
    double v_lo = 0.9;
    double v_hi = 1.1;

    bool operator==(const PerformanceConfig&) const = default;
};

/// Throws ConfigError on violated bounds.
void validate(const PerformanceConfig& cfg);

/// Mean over buses of the linear distance to the hard band edge, 0 when not converged.
double system_performance(const PowerFlowSolution& solution, const PerformanceConfig& cfg);
double system_performance(const WorldState& world, const PerformanceConfig& cfg);

/// True when any bus leaves [v_lo, v_hi] or the solver did not converge.
bool attack_successful(const PowerFlowSolution& solution, const PerformanceConfig& cfg);
bool attack_successful(const WorldState& world, const PerformanceConfig& cfg);

/// Voltage-proxied ENTSO-E operating states.
enum class OperationalPhase { normal, alert, emergency, blackout };

inline constexpr double kNormalBandLo = 0.95;
inline constexpr double kNormalBandHi = 1.05;

const char* to_string(OperationalPhase phase);
OperationalPhase classify_operational_phase(const PowerFlowSolution& solution, const PerformanceConfig& cfg);
OperationalPhase classify_operational_phase(const WorldState& world, const PerformanceConfig& cfg);

struct AsymmetryResult {
    bool holds = true;
    std::optional<std::size_t> first_violation;
};

/// `p_by_step[t]` is p(m_t). Holds iff p > p_fail for every t > t0.
AsymmetryResult check_asymmetry(std::span<const double> p_by_step, double p_fail, std::size_t t0);

enum class ResiliencePhase { plan, absorb, recover, adapt };

const char* to_string(ResiliencePhase phase);

struct PhaseSegment {
    ResiliencePhase phase = ResiliencePhase::plan;
    std::size_t start = 0;  // inclusive
    std::size_t end = 0;    // inclusive
    std::size_t event = 0;  // 0 before the first disturbance, then 1, 2, ...

    bool operator==(const PhaseSegment&) const = default;
};

inline constexpr double kResilienceEpsilon = 0.02;

/// Segments a performance series into Plan/Absorb/Recover/Adapt runs.
std::vector<PhaseSegment> classify_resilience_phases(std::span<const double> p, const PerformanceConfig& cfg);

struct Interval {
    std::size_t start = 0;
    std::size_t end = 0;  // inclusive

    bool operator==(const Interval&) const = default;
};

/// Maximal runs with p < p_fail.
std::vector<Interval> failure_intervals(std::span<const double> p, double p_fail);

}  // namespace arl
