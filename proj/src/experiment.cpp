#include "arl/experiment.hpp"

#include "arl/rng.hpp"

namespace arl {

std::uint64_t agent_seed(std::uint64_t experiment_seed, std::size_t agent_index) {
    return derive_seed(experiment_seed, agent_index);
}

std::vector<Agent> make_agents(const ExperimentConfig& cfg) {
    std::vector<Agent> agents;
    agents.reserve(cfg.agents.size());
    for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
        const AgentSpec& spec = cfg.agents[i];
        agents.emplace_back(spec.id, spec.cls, spec.sensors, spec.actuators, spec.reward, spec.learner,
                            agent_seed(cfg.seed, i));
    }
    return agents;
}

RunLog run_experiment(const ExperimentConfig& cfg, const StepObserver& on_step) {
    validate(cfg);

    RunLog log;
    log.config = cfg;
    log.fingerprint = config_fingerprint(cfg);
    log.initial_world = WorldState::initial(cfg.grid);
    std::vector<Agent> agents = make_agents(cfg);
    log.initial_agents = agents;
    log.records.reserve(cfg.schedule.rounds * agents.size() * cfg.schedule.steps_per_turn);

    WorldState world = log.initial_world;
    for (std::size_t round = 0; round < cfg.schedule.rounds; ++round) {
        for (std::size_t a = 0; a < agents.size(); ++a) {
            Agent& agent = agents[a];
            for (std::size_t k = 0; k < cfg.schedule.steps_per_turn; ++k) {
                const Observation before = observe(world, agent.sensors());
                const ActionChoice choice = agent.act(before.values);
                const auto actions = to_actions(agent.groups(), choice);
                world = apply_actions(world, actions);

                const Observation after = observe(world, agent.sensors());
                const double r = reward(agent.reward_params(), mean(after.values));
                agent.learn(r, after.values);

                StepRecord rec;
                rec.t = world.t;
                rec.agent_id = agent.id();
                rec.agent_index = a;
                rec.x = after.values;
                rec.degraded = after.degraded;
                rec.y.reserve(actions.size());
                for (const ActuatorAction& action : actions) rec.y.push_back(action.label);
                rec.reward = r;
                rec.p_world = system_performance(world, cfg.performance);
                rec.settings = settings_of(world.grid);
                rec.solution = world.solution;
                if (on_step) {
                    on_step(rec);
                }
                log.records.push_back(std::move(rec));
            }
        }
    }
    return log;
}

}  // namespace arl
