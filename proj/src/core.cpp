#include "arl/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "arl/errors.hpp"

namespace arl {

const char* to_string(AgentClass cls) {
    return cls == AgentClass::attacker ? "attacker" : "defender";
}

AgentClass agent_class_from_string(const std::string& text) {
    if (text == "attacker") return AgentClass::attacker;
    if (text == "defender") return AgentClass::defender;
    throw ConfigError("unknown agent class '" + text + "'");
}

WorldState WorldState::initial(GridModel grid) {
    WorldState world;
    world.solution = solve_newton_raphson(grid);
    world.grid = std::move(grid);
    return world;
}

Observation observe(const WorldState& world, const SensorBinding& binding) {
    Observation obs;
    obs.degraded = !world.solution.converged;
    obs.values.reserve(binding.sensors.size());
    for (const Sensor& sensor : binding.sensors) {
        if (sensor.bus < 0 || static_cast<std::size_t>(sensor.bus) >= world.solution.v_pu.size()) {
            throw ContractError("sensor references unknown bus " + std::to_string(sensor.bus));
        }
        obs.values.push_back(world.solution.v_pu[sensor.bus]);
    }
    return obs;
}

const char* to_string(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::transformer: return "transformer";
        case DeviceKind::generator: return "generator";
        case DeviceKind::load: return "load";
    }
    return "transformer";
}

DeviceKind device_kind_from_string(const std::string& text) {
    if (text == "transformer") return DeviceKind::transformer;
    if (text == "generator") return DeviceKind::generator;
    if (text == "load") return DeviceKind::load;
    throw ConfigError("unknown device kind '" + text + "'");
}

std::string to_string(const ActuatorRef& ref) {
    return std::string(to_string(ref.kind)) + ":" + std::to_string(ref.index);
}

const char* to_string(ActionLabel label) {
    switch (label) {
        case ActionLabel::hold: return "hold";
        case ActionLabel::decrement: return "decrement";
        case ActionLabel::increment: return "increment";
        case ActionLabel::p_decrement: return "p_decrement";
        case ActionLabel::p_increment: return "p_increment";
        case ActionLabel::q_decrement: return "q_decrement";
        case ActionLabel::q_increment: return "q_increment";
    }
    return "hold";
}

ActionLabel action_label_from_string(const std::string& text) {
    for (ActionLabel label : {ActionLabel::hold, ActionLabel::decrement, ActionLabel::increment,
                              ActionLabel::p_decrement, ActionLabel::p_increment, ActionLabel::q_decrement,
                              ActionLabel::q_increment}) {
        if (text == to_string(label)) {
            return label;
        }
    }
    throw ConfigError("unknown action label '" + text + "'");
}

std::vector<ActionLabel> default_labels(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::generator:
            return {ActionLabel::p_decrement, ActionLabel::p_increment, ActionLabel::q_decrement,
                    ActionLabel::q_increment, ActionLabel::hold};
        case DeviceKind::transformer:
        case DeviceKind::load:
            return {ActionLabel::decrement, ActionLabel::hold, ActionLabel::increment};
    }
    return {ActionLabel::hold};
}

bool label_valid_for(DeviceKind kind, ActionLabel label) {
    const auto labels = default_labels(kind);
    return std::find(labels.begin(), labels.end(), label) != labels.end();
}

namespace {

template <typename T>
T& device(std::vector<T>& devices, const ActuatorRef& ref) {
    if (ref.index < 0 || static_cast<std::size_t>(ref.index) >= devices.size()) {
        throw ContractError("actuator " + to_string(ref) + " does not exist");
    }
    return devices[ref.index];
}

}  // namespace

void apply_action(GridModel& grid, const ActuatorAction& action) {
    if (!label_valid_for(action.target.kind, action.label)) {
        throw ContractError(std::string("label '") + to_string(action.label) + "' is not valid for " +
                            to_string(action.target));
    }
    switch (action.target.kind) {
        case DeviceKind::transformer: {
            Transformer& trafo = device(grid.transformers, action.target);
            const int delta = action.label == ActionLabel::increment   ? kTapStep
                              : action.label == ActionLabel::decrement ? -kTapStep
                                                                       : 0;
            trafo.tap_pos = std::clamp(trafo.tap_pos + delta, trafo.tap_min, trafo.tap_max);
            break;
        }
        case DeviceKind::generator: {
            Generator& gen = device(grid.generators, action.target);
            switch (action.label) {
                case ActionLabel::p_decrement:
                    gen.p_mw = std::clamp(gen.p_mw - kGeneratorPStepMw, gen.p_min_mw, gen.p_max_mw);
                    break;
                case ActionLabel::p_increment:
                    gen.p_mw = std::clamp(gen.p_mw + kGeneratorPStepMw, gen.p_min_mw, gen.p_max_mw);
                    break;
                case ActionLabel::q_decrement:
                    gen.q_mvar = std::clamp(gen.q_mvar - kGeneratorQStepMvar, gen.q_min_mvar, gen.q_max_mvar);
                    break;
                case ActionLabel::q_increment:
                    gen.q_mvar = std::clamp(gen.q_mvar + kGeneratorQStepMvar, gen.q_min_mvar, gen.q_max_mvar);
                    break;
                default:
                    break;
            }
            break;
        }
        case DeviceKind::load: {
            Load& load = device(grid.loads, action.target);
            const double delta = action.label == ActionLabel::increment   ? kLoadScalingStep
                                 : action.label == ActionLabel::decrement ? -kLoadScalingStep
                                                                          : 0.0;
            load.scaling = std::clamp(load.scaling + delta, load.scaling_min, load.scaling_max);
            break;
        }
    }
}

WorldState apply_actions(const WorldState& world, std::span<const ActuatorAction> actions,
                         const SolverOptions& options) {
    std::set<ActuatorRef> targets;
    for (const ActuatorAction& action : actions) {
        if (!targets.insert(action.target).second) {
            throw ConfigError("actuator " + to_string(action.target) + " targeted by more than one action");
        }
    }
    WorldState next;
    next.t = world.t + 1;
    next.grid = world.grid;
    for (const ActuatorAction& action : actions) {
        apply_action(next.grid, action);
    }
    next.solution = solve_newton_raphson(next.grid, options);
    return next;
}

ActuatorSettings settings_of(const GridModel& grid) {
    ActuatorSettings s;
    for (const Transformer& trafo : grid.transformers) s.tap_pos.push_back(trafo.tap_pos);
    for (const Generator& gen : grid.generators) {
        s.gen_p_mw.push_back(gen.p_mw);
        s.gen_q_mvar.push_back(gen.q_mvar);
    }
    for (const Load& load : grid.loads) s.load_scaling.push_back(load.scaling);
    return s;
}

GridModel with_settings(GridModel grid, const ActuatorSettings& settings) {
    if (settings.tap_pos.size() != grid.transformers.size() || settings.gen_p_mw.size() != grid.generators.size() ||
        settings.gen_q_mvar.size() != grid.generators.size() || settings.load_scaling.size() != grid.loads.size()) {
        throw ContractError("actuator settings do not match grid device counts");
    }
    for (std::size_t i = 0; i < grid.transformers.size(); ++i) grid.transformers[i].tap_pos = settings.tap_pos[i];
    for (std::size_t i = 0; i < grid.generators.size(); ++i) {
        grid.generators[i].p_mw = settings.gen_p_mw[i];
        grid.generators[i].q_mvar = settings.gen_q_mvar[i];
    }
    for (std::size_t i = 0; i < grid.loads.size(); ++i) grid.loads[i].scaling = settings.load_scaling[i];
    return grid;
}

void validate(const PerformanceConfig& cfg) {
    if (!(cfg.p_fail >= 0.0 && cfg.p_fail < cfg.p_star && cfg.p_star <= 1.0)) {
        throw ConfigError("performance: require 0 <= p_fail < p_star <= 1");
    }
    if (!(cfg.v_lo < 1.0 && 1.0 < cfg.v_hi)) {
        throw ConfigError("performance: require v_lo < 1 < v_hi");
    }
}

double system_performance(const PowerFlowSolution& solution, const PerformanceConfig& cfg) {
    if (!solution.converged || solution.v_pu.empty()) {
        return 0.0;
    }
    const double half_band = cfg.v_hi - 1.0;
    double sum = 0.0;
    for (double v : solution.v_pu) {
        sum += std::max(0.0, 1.0 - std::abs(v - 1.0) / half_band);
    }
    return sum / static_cast<double>(solution.v_pu.size());
}

double system_performance(const WorldState& world, const PerformanceConfig& cfg) {
    return system_performance(world.solution, cfg);
}

bool attack_successful(const PowerFlowSolution& solution, const PerformanceConfig& cfg) {
    if (!solution.converged) {
        return true;
    }
    return std::any_of(solution.v_pu.begin(), solution.v_pu.end(),
                       [&](double v) { return v < cfg.v_lo || v > cfg.v_hi; });
}

bool attack_successful(const WorldState& world, const PerformanceConfig& cfg) {
    return attack_successful(world.solution, cfg);
}

const char* to_string(OperationalPhase phase) {
    switch (phase) {
        case OperationalPhase::normal: return "normal";
        case OperationalPhase::alert: return "alert";
        case OperationalPhase::emergency: return "emergency";
        case OperationalPhase::blackout: return "blackout";
    }
    return "blackout";
}

OperationalPhase classify_operational_phase(const PowerFlowSolution& solution, const PerformanceConfig& cfg) {
    if (!solution.converged) {
        return OperationalPhase::blackout;
    }
    OperationalPhase phase = OperationalPhase::normal;
    for (double v : solution.v_pu) {
        if (v < cfg.v_lo || v > cfg.v_hi) {
            return OperationalPhase::emergency;
        }
        if (v < kNormalBandLo || v > kNormalBandHi) {
            phase = OperationalPhase::alert;
        }
    }
    return phase;
}

OperationalPhase classify_operational_phase(const WorldState& world, const PerformanceConfig& cfg) {
    return classify_operational_phase(world.solution, cfg);
}

AsymmetryResult check_asymmetry(std::span<const double> p_by_step, double p_fail, std::size_t t0) {
    if (!p_by_step.empty() && t0 >= p_by_step.size()) {
        throw ContractError("t0 outside the performance series");
    }
    for (std::size_t t = t0 + 1; t < p_by_step.size(); ++t) {
        if (!(p_by_step[t] > p_fail)) {
            return {false, t};
        }
    }
    return {};
}

const char* to_string(ResiliencePhase phase) {
    switch (phase) {
        case ResiliencePhase::plan: return "plan";
        case ResiliencePhase::absorb: return "absorb";
        case ResiliencePhase::recover: return "recover";
        case ResiliencePhase::adapt: return "adapt";
    }
    return "plan";
}

std::vector<PhaseSegment> classify_resilience_phases(std::span<const double> p, const PerformanceConfig& cfg) {
    if (p.empty()) {
        throw ContractError("resilience classification needs a non-empty series");
    }
    const double nominal = cfg.p_star * (1.0 - kResilienceEpsilon);

    std::vector<ResiliencePhase> labels(p.size());
    std::vector<std::size_t> events(p.size(), 0);
    std::size_t event = 0;
    ResiliencePhase phase = p[0] >= nominal ? ResiliencePhase::plan : ResiliencePhase::absorb;
    if (phase == ResiliencePhase::absorb) {
        event = 1;
    }
    // Mean of the most recent healthy (Plan or Adapt) run; the bar a recovery must reach.
    double healthy_sum = 0.0;
    std::size_t healthy_count = 0;
    double pre_event_level = cfg.p_star;

    for (std::size_t t = 0; t < p.size(); ++t) {
        if (t > 0) {
            const double prev = p[t - 1];
            switch (phase) {
                case ResiliencePhase::plan:
                case ResiliencePhase::adapt:
                    if (p[t] < nominal) {
                        pre_event_level = healthy_count > 0 ? healthy_sum / static_cast<double>(healthy_count)
                                                            : cfg.p_star;
                        phase = ResiliencePhase::absorb;
                        ++event;
                    }
                    break;
                case ResiliencePhase::absorb:
                    if (p[t] >= pre_event_level) {
                        phase = ResiliencePhase::adapt;
                    } else if (p[t] > prev) {
                        phase = ResiliencePhase::recover;
                    }
                    break;
                case ResiliencePhase::recover:
                    if (p[t] >= pre_event_level) {
                        phase = ResiliencePhase::adapt;
                    } else if (p[t] < prev) {
                        phase = ResiliencePhase::absorb;
                    }
                    break;
            }
        }
        if (phase == ResiliencePhase::plan || phase == ResiliencePhase::adapt) {
            const bool new_run = t == 0 || labels[t - 1] != phase;
            if (new_run) {
                healthy_sum = 0.0;
                healthy_count = 0;
            }
            healthy_sum += p[t];
            ++healthy_count;
        }
        labels[t] = phase;
        events[t] = event;
    }

    std::vector<PhaseSegment> segments;
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (segments.empty() || segments.back().phase != labels[t] || segments.back().event != events[t]) {
            segments.push_back({labels[t], t, t, events[t]});
        } else {
            segments.back().end = t;
        }
    }
    return segments;
}

std::vector<Interval> failure_intervals(std::span<const double> p, double p_fail) {
    std::vector<Interval> out;
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (p[t] < p_fail) {
            if (!out.empty() && out.back().end + 1 == t) {
                out.back().end = t;
            } else {
                out.push_back({t, t});
            }
        }
    }
    return out;
}

}  // namespace arl
