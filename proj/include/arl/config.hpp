#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arl/agents.hpp"
#include "arl/core.hpp"
#include "arl/grid_model.hpp"

namespace arl {

/// Grid token that selects the built-in reference grid.
inline constexpr std::string_view kPocGridToken = "arl_poc_grid";

struct AgentSpec {
    std::string id;
    AgentClass cls = AgentClass::defender;
    SensorBinding sensors;
    std::vector<ActionGroup> actuators;
    RewardParams reward;
    LearnerParams learner;

    bool operator==(const AgentSpec&) const = default;
};

struct Schedule {
    std::size_t rounds = 0;
    std::size_t steps_per_turn = 1;

    bool operator==(const Schedule&) const = default;
};

struct OutputPaths {
    std::string grid_log_path;
    std::string agent_log_path;
    std::string metrics_path;

    bool operator==(const OutputPaths&) const = default;
};

struct ExperimentConfig {
    std::string name;
    std::uint64_t seed = 0;
    /// kPocGridToken when the grid was given by name; empty for an inline grid.
    std::string grid_token;
    GridModel grid;
    std::vector<AgentSpec> agents;
    Schedule schedule;
    PerformanceConfig performance;
    OutputPaths outputs;
    bool allow_single_class = false;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates an experiment document. Throws ConfigError with the byte
/// offset on malformed JSON, or naming the field and rule on invalid content.
ExperimentConfig load_config(std::string_view text);
ExperimentConfig load_config_file(const std::string& path);

/// Canonical form: sorted keys, two-space indent, shortest round-trip floats, trailing newline.
std::string save_config(const ExperimentConfig& cfg);

/// Cross-field rules (disjoint actuators, class mix, device references, ...).
void validate(const ExperimentConfig& cfg);

nlohmann::json grid_to_json(const GridModel& grid);
GridModel grid_from_json(const nlohmann::json& j);

/// 64-bit FNV-1a of the canonical config text, as 16 hex digits.
std::string config_fingerprint(const ExperimentConfig& cfg);
std::string fnv1a_hex(std::string_view text);

}  // namespace arl
