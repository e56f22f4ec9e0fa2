#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "arl/agents.hpp"
#include "arl/config.hpp"
#include "arl/core.hpp"

namespace arl {

/// One agent turn: the action taken and the world it produced.
struct StepRecord {
    std::size_t t = 0;
    std::string agent_id;
    std::size_t agent_index = 0;
    /// Sensor readings after the action; the reward is evaluated on their mean.
    std::vector<double> x;
    bool degraded = false;
    std::vector<ActionLabel> y;
    double reward = 0.0;
    double p_world = 0.0;
    ActuatorSettings settings;
    PowerFlowSolution solution;
};

struct RunLog {
    ExperimentConfig config;  // effective config, overrides applied
    std::string fingerprint;
    WorldState initial_world;
    std::vector<Agent> initial_agents;
    std::vector<StepRecord> records;
};

/// Per-agent seed derived from the experiment seed and the agent's position.
std::uint64_t agent_seed(std::uint64_t experiment_seed, std::size_t agent_index);

std::vector<Agent> make_agents(const ExperimentConfig& cfg);

using StepObserver = std::function<void(const StepRecord&)>;

/// Runs the configured rounds. Each agent in config order takes steps_per_turn
/// turns of observe, act, apply, re-solve, reward and learn.
RunLog run_experiment(const ExperimentConfig& cfg, const StepObserver& on_step = {});

}  // namespace arl
