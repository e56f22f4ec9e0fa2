#include "arl/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>

#include "arl/errors.hpp"

namespace arl {

using nlohmann::json;

namespace {

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) {
        throw ConfigError(path + ": expected an object");
    }
}

const json& expect_array(const json& j, const std::string& path) {
    if (!j.is_array()) {
        throw ConfigError(path + ": expected an array");
    }
    return j;
}

/// Rejects unknown keys and reports missing required ones.
void check_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> required,
                std::initializer_list<std::string_view> optional = {}) {
    expect_object(j, path.empty() ? "document" : path);
    std::set<std::string_view> allowed(required);
    allowed.insert(optional.begin(), optional.end());
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) {
            throw ConfigError(join(path, item.key()) + ": unknown key");
        }
    }
    for (std::string_view key : required) {
        if (!j.contains(key)) {
            throw ConfigError(join(path, key) + ": missing required key");
        }
    }
}

double get_number(const json& j, std::string_view key, const std::string& path) {
    const json& v = j.at(key);
    if (!v.is_number()) {
        throw ConfigError(join(path, key) + ": expected a number");
    }
    return v.get<double>();
}

double get_number_or(const json& j, std::string_view key, const std::string& path, double fallback) {
    return j.contains(key) ? get_number(j, key, path) : fallback;
}

long long get_int(const json& j, std::string_view key, const std::string& path) {
    const json& v = j.at(key);
    if (!v.is_number_integer()) {
        throw ConfigError(join(path, key) + ": expected an integer");
    }
    return v.get<long long>();
}

std::size_t get_count(const json& j, std::string_view key, const std::string& path) {
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ConfigError(join(path, key) + ": expected a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::size_t get_count_or(const json& j, std::string_view key, const std::string& path, std::size_t fallback) {
    return j.contains(key) ? get_count(j, key, path) : fallback;
}

std::string get_string(const json& j, std::string_view key, const std::string& path) {
    const json& v = j.at(key);
    if (!v.is_string()) {
        throw ConfigError(join(path, key) + ": expected a string");
    }
    return v.get<std::string>();
}

int get_bus(const json& j, std::string_view key, const std::string& path) {
    return static_cast<int>(get_int(j, key, path));
}

// ---------------------------------------------------------------------------
// Grid

GridModel parse_grid(const json& j, const std::string& path) {
    check_keys(j, path, {"s_base_mva", "buses", "lines", "transformers", "generators", "loads"});
    GridModel grid;
    grid.s_base_mva = get_number(j, "s_base_mva", path);

    const json& buses = expect_array(j.at("buses"), join(path, "buses"));
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const std::string p = index(join(path, "buses"), i);
        check_keys(buses[i], p, {"id", "kind", "base_kv", "v_setpoint_pu", "name"});
        Bus bus;
        bus.id = get_bus(buses[i], "id", p);
        try {
            bus.kind = bus_kind_from_string(get_string(buses[i], "kind", p));
        } catch (const ModelError& e) {
            throw ConfigError(p + ".kind: " + e.what());
        }
        bus.base_kv = get_number(buses[i], "base_kv", p);
        bus.v_setpoint_pu = get_number(buses[i], "v_setpoint_pu", p);
        bus.name = get_string(buses[i], "name", p);
        grid.buses.push_back(std::move(bus));
    }
    const json& lines = expect_array(j.at("lines"), join(path, "lines"));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string p = index(join(path, "lines"), i);
        check_keys(lines[i], p, {"from_bus", "to_bus", "r_pu", "x_pu", "b_shunt_pu"});
        grid.lines.push_back({get_bus(lines[i], "from_bus", p), get_bus(lines[i], "to_bus", p),
                              get_number(lines[i], "r_pu", p), get_number(lines[i], "x_pu", p),
                              get_number(lines[i], "b_shunt_pu", p)});
    }
    const json& trafos = expect_array(j.at("transformers"), join(path, "transformers"));
    for (std::size_t i = 0; i < trafos.size(); ++i) {
        const std::string p = index(join(path, "transformers"), i);
        check_keys(trafos[i], p,
                   {"from_bus", "to_bus", "r_pu", "x_pu", "tap_pos", "tap_min", "tap_max", "tap_step_pu"});
        grid.transformers.push_back({get_bus(trafos[i], "from_bus", p), get_bus(trafos[i], "to_bus", p),
                                     get_number(trafos[i], "r_pu", p), get_number(trafos[i], "x_pu", p),
                                     static_cast<int>(get_int(trafos[i], "tap_pos", p)),
                                     static_cast<int>(get_int(trafos[i], "tap_min", p)),
                                     static_cast<int>(get_int(trafos[i], "tap_max", p)),
                                     get_number(trafos[i], "tap_step_pu", p)});
    }
    const json& gens = expect_array(j.at("generators"), join(path, "generators"));
    for (std::size_t i = 0; i < gens.size(); ++i) {
        const std::string p = index(join(path, "generators"), i);
        check_keys(gens[i], p, {"bus", "p_mw", "q_mvar", "p_min_mw", "p_max_mw", "q_min_mvar", "q_max_mvar"});
        grid.generators.push_back({get_bus(gens[i], "bus", p), get_number(gens[i], "p_mw", p),
                                   get_number(gens[i], "q_mvar", p), get_number(gens[i], "p_min_mw", p),
                                   get_number(gens[i], "p_max_mw", p), get_number(gens[i], "q_min_mvar", p),
                                   get_number(gens[i], "q_max_mvar", p)});
    }
    const json& loads = expect_array(j.at("loads"), join(path, "loads"));
    for (std::size_t i = 0; i < loads.size(); ++i) {
        const std::string p = index(join(path, "loads"), i);
        check_keys(loads[i], p, {"bus", "p_mw", "q_mvar", "scaling", "scaling_min", "scaling_max"});
        grid.loads.push_back({get_bus(loads[i], "bus", p), get_number(loads[i], "p_mw", p),
                              get_number(loads[i], "q_mvar", p), get_number(loads[i], "scaling", p),
                              get_number(loads[i], "scaling_min", p), get_number(loads[i], "scaling_max", p)});
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Agents

LearnerParams parse_learner(const json& j, const std::string& path) {
    expect_object(j, path);
    if (!j.contains("kind")) {
        throw ConfigError(join(path, "kind") + ": missing required key");
    }
    const LearnerKind kind = learner_kind_from_string(get_string(j, "kind", path));
    if (kind == LearnerKind::qnet) {
        check_keys(j, path, {"kind"},
                   {"gamma", "learning_rate", "epsilon_start", "epsilon_end", "epsilon_decay_steps", "hidden",
                    "replay_capacity", "batch_size", "init_scale"});
    } else {
        check_keys(j, path, {"kind"},
                   {"gamma", "learning_rate", "epsilon_start", "epsilon_end", "epsilon_decay_steps", "bins",
                    "bin_lo", "bin_hi"});
    }
    LearnerParams p = LearnerParams::defaults(kind);
    p.gamma = get_number_or(j, "gamma", path, p.gamma);
    p.learning_rate = get_number_or(j, "learning_rate", path, p.learning_rate);
    p.epsilon_start = get_number_or(j, "epsilon_start", path, p.epsilon_start);
    p.epsilon_end = get_number_or(j, "epsilon_end", path, p.epsilon_end);
    p.epsilon_decay_steps = get_count_or(j, "epsilon_decay_steps", path, p.epsilon_decay_steps);
    p.hidden = get_count_or(j, "hidden", path, p.hidden);
    p.replay_capacity = get_count_or(j, "replay_capacity", path, p.replay_capacity);
    p.batch_size = get_count_or(j, "batch_size", path, p.batch_size);
    p.init_scale = get_number_or(j, "init_scale", path, p.init_scale);
    p.bins = get_count_or(j, "bins", path, p.bins);
    p.bin_lo = get_number_or(j, "bin_lo", path, p.bin_lo);
    p.bin_hi = get_number_or(j, "bin_hi", path, p.bin_hi);
    try {
        validate(p);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return p;
}

AgentSpec parse_agent(const json& j, const std::string& path) {
    check_keys(j, path, {"id", "class", "sensors", "actuators", "reward", "learner"});
    AgentSpec spec;
    spec.id = get_string(j, "id", path);
    try {
        spec.cls = agent_class_from_string(get_string(j, "class", path));
    } catch (const ConfigError& e) {
        throw ConfigError(join(path, "class") + ": " + e.what());
    }

    const json& sensors = expect_array(j.at("sensors"), join(path, "sensors"));
    for (std::size_t i = 0; i < sensors.size(); ++i) {
        const std::string p = index(join(path, "sensors"), i);
        check_keys(sensors[i], p, {"bus", "quantity"});
        if (get_string(sensors[i], "quantity", p) != "v_pu") {
            throw ConfigError(p + ".quantity: only 'v_pu' is supported");
        }
        spec.sensors.sensors.push_back({get_bus(sensors[i], "bus", p), SensorQuantity::v_pu});
    }

    const json& actuators = expect_array(j.at("actuators"), join(path, "actuators"));
    for (std::size_t i = 0; i < actuators.size(); ++i) {
        const std::string p = index(join(path, "actuators"), i);
        check_keys(actuators[i], p, {"device", "index"}, {"labels"});
        ActionGroup group;
        try {
            group.actuator.kind = device_kind_from_string(get_string(actuators[i], "device", p));
        } catch (const ConfigError& e) {
            throw ConfigError(p + ".device: " + e.what());
        }
        group.actuator.index = static_cast<int>(get_int(actuators[i], "index", p));
        if (actuators[i].contains("labels")) {
            const json& labels = expect_array(actuators[i].at("labels"), p + ".labels");
            for (std::size_t k = 0; k < labels.size(); ++k) {
                if (!labels[k].is_string()) {
                    throw ConfigError(index(p + ".labels", k) + ": expected a string");
                }
                try {
                    group.labels.push_back(action_label_from_string(labels[k].get<std::string>()));
                } catch (const ConfigError& e) {
                    throw ConfigError(index(p + ".labels", k) + ": " + e.what());
                }
            }
        } else {
            group.labels = default_labels(group.actuator.kind);
        }
        try {
            validate(group);
        } catch (const ConfigError& e) {
            throw ConfigError(p + ": " + e.what());
        }
        spec.actuators.push_back(std::move(group));
    }

    const std::string rp = join(path, "reward");
    const json& r = j.at("reward");
    check_keys(r, rp, {}, {"mu", "sigma", "c"});
    spec.reward.cls = spec.cls;
    spec.reward.mu = get_number_or(r, "mu", rp, 1.0);
    spec.reward.sigma = get_number_or(r, "sigma", rp, 0.03);
    spec.reward.c = r.contains("c") ? get_number(r, "c", rp)
                                    : RewardParams::default_offset(spec.reward.sigma, 0.05);
    try {
        validate(spec.reward);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }

    spec.learner = parse_learner(j.at("learner"), join(path, "learner"));
    return spec;
}

json learner_to_json(const LearnerParams& p) {
    json j{{"kind", to_string(p.kind)},
           {"gamma", p.gamma},
           {"learning_rate", p.learning_rate},
           {"epsilon_start", p.epsilon_start},
           {"epsilon_end", p.epsilon_end},
           {"epsilon_decay_steps", p.epsilon_decay_steps}};
    if (p.kind == LearnerKind::qnet) {
        j["hidden"] = p.hidden;
        j["replay_capacity"] = p.replay_capacity;
        j["batch_size"] = p.batch_size;
        j["init_scale"] = p.init_scale;
    } else {
        j["bins"] = p.bins;
        j["bin_lo"] = p.bin_lo;
        j["bin_hi"] = p.bin_hi;
    }
    return j;
}

json agent_to_json(const AgentSpec& spec) {
    json sensors = json::array();
    for (const Sensor& s : spec.sensors.sensors) {
        sensors.push_back({{"bus", s.bus}, {"quantity", "v_pu"}});
    }
    json actuators = json::array();
    for (const ActionGroup& g : spec.actuators) {
        json labels = json::array();
        for (ActionLabel label : g.labels) labels.push_back(to_string(label));
        actuators.push_back({{"device", to_string(g.actuator.kind)}, {"index", g.actuator.index}, {"labels", labels}});
    }
    return {{"id", spec.id},
            {"class", to_string(spec.cls)},
            {"sensors", sensors},
            {"actuators", actuators},
            {"reward", {{"mu", spec.reward.mu}, {"sigma", spec.reward.sigma}, {"c", spec.reward.c}}},
            {"learner", learner_to_json(spec.learner)}};
}

}  // namespace

// ---------------------------------------------------------------------------

json grid_to_json(const GridModel& grid) {
    json buses = json::array();
    for (const Bus& b : grid.buses) {
        buses.push_back({{"id", b.id},
                         {"kind", to_string(b.kind)},
                         {"base_kv", b.base_kv},
                         {"v_setpoint_pu", b.v_setpoint_pu},
                         {"name", b.name}});
    }
    json lines = json::array();
    for (const Line& l : grid.lines) {
        lines.push_back({{"from_bus", l.from_bus},
                         {"to_bus", l.to_bus},
                         {"r_pu", l.r_pu},
                         {"x_pu", l.x_pu},
                         {"b_shunt_pu", l.b_shunt_pu}});
    }
    json trafos = json::array();
    for (const Transformer& t : grid.transformers) {
        trafos.push_back({{"from_bus", t.from_bus},
                          {"to_bus", t.to_bus},
                          {"r_pu", t.r_pu},
                          {"x_pu", t.x_pu},
                          {"tap_pos", t.tap_pos},
                          {"tap_min", t.tap_min},
                          {"tap_max", t.tap_max},
                          {"tap_step_pu", t.tap_step_pu}});
    }
    json gens = json::array();
    for (const Generator& g : grid.generators) {
        gens.push_back({{"bus", g.bus},
                        {"p_mw", g.p_mw},
                        {"q_mvar", g.q_mvar},
                        {"p_min_mw", g.p_min_mw},
                        {"p_max_mw", g.p_max_mw},
                        {"q_min_mvar", g.q_min_mvar},
                        {"q_max_mvar", g.q_max_mvar}});
    }
    json loads = json::array();
    for (const Load& l : grid.loads) {
        loads.push_back({{"bus", l.bus},
                         {"p_mw", l.p_mw},
                         {"q_mvar", l.q_mvar},
                         {"scaling", l.scaling},
                         {"scaling_min", l.scaling_min},
                         {"scaling_max", l.scaling_max}});
    }
    return {{"s_base_mva", grid.s_base_mva}, {"buses", buses},         {"lines", lines},
            {"transformers", trafos},        {"generators", gens},     {"loads", loads}};
}

GridModel grid_from_json(const json& j) {
    return parse_grid(j, "grid");
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.name.empty()) {
        throw ConfigError("name: must be non-empty");
    }
    try {
        arl::validate(cfg.grid);
    } catch (const ModelError& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    if (cfg.agents.empty()) {
        throw ConfigError("agents: at least one agent is required");
    }
    if (cfg.schedule.steps_per_turn < 1) {
        throw ConfigError("schedule.steps_per_turn: must be >= 1");
    }
    validate(cfg.performance);
    if (cfg.outputs.grid_log_path.empty() || cfg.outputs.agent_log_path.empty() || cfg.outputs.metrics_path.empty()) {
        throw ConfigError("outputs: all paths must be non-empty");
    }

    std::set<std::string> ids;
    std::map<ActuatorRef, std::size_t> owner;
    std::set<AgentClass> classes;
    for (std::size_t a = 0; a < cfg.agents.size(); ++a) {
        const AgentSpec& spec = cfg.agents[a];
        const std::string p = "agents[" + std::to_string(a) + "]";
        if (spec.id.empty()) {
            throw ConfigError(p + ".id: must be non-empty");
        }
        if (spec.id.find_first_of(",;\r\n") != std::string::npos) {
            throw ConfigError(p + ".id: must not contain ',', ';' or line breaks");
        }
        if (!ids.insert(spec.id).second) {
            throw ConfigError(p + ".id: duplicate agent id '" + spec.id + "'");
        }
        classes.insert(spec.cls);
        if (spec.sensors.sensors.empty()) {
            throw ConfigError(p + ".sensors: at least one sensor is required");
        }
        for (std::size_t s = 0; s < spec.sensors.sensors.size(); ++s) {
            const int bus = spec.sensors.sensors[s].bus;
            if (bus < 0 || static_cast<std::size_t>(bus) >= cfg.grid.buses.size()) {
                throw ConfigError(p + ".sensors[" + std::to_string(s) + "]: unknown bus " + std::to_string(bus));
            }
        }
        if (spec.actuators.empty()) {
            throw ConfigError(p + ".actuators: at least one actuator is required");
        }
        for (std::size_t g = 0; g < spec.actuators.size(); ++g) {
            const ActuatorRef& ref = spec.actuators[g].actuator;
            const std::size_t count = ref.kind == DeviceKind::transformer ? cfg.grid.transformers.size()
                                      : ref.kind == DeviceKind::generator ? cfg.grid.generators.size()
                                                                          : cfg.grid.loads.size();
            if (ref.index < 0 || static_cast<std::size_t>(ref.index) >= count) {
                throw ConfigError(p + ".actuators[" + std::to_string(g) + "]: unknown device " + to_string(ref));
            }
            const auto [it, inserted] = owner.emplace(ref, a);
            if (!inserted) {
                throw ConfigError("agents[" + std::to_string(it->second) + "] and " + p + " share actuator " +
                                  to_string(ref));
            }
        }
    }
    if (classes.size() == 1 && !cfg.allow_single_class) {
        throw ConfigError(std::string("agents: only ") + to_string(*classes.begin()) +
                          " agents present; set allow_single_class to permit single-class experiments");
    }
}

ExperimentConfig load_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError("JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    check_keys(doc, "", {"name", "seed", "grid", "agents", "schedule", "performance", "outputs"},
               {"allow_single_class"});

    ExperimentConfig cfg;
    cfg.name = get_string(doc, "name", "");
    if (!doc.at("seed").is_number_unsigned()) {
        throw ConfigError("seed: expected a non-negative 64-bit integer");
    }
    cfg.seed = doc.at("seed").get<std::uint64_t>();

    const json& grid = doc.at("grid");
    if (grid.is_string()) {
        if (grid.get<std::string>() != kPocGridToken) {
            throw ConfigError("grid: unknown grid name '" + grid.get<std::string>() + "'");
        }
        cfg.grid_token = std::string(kPocGridToken);
        cfg.grid = arl_poc_grid();
    } else {
        cfg.grid = parse_grid(grid, "grid");
    }

    const json& agents = expect_array(doc.at("agents"), "agents");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        cfg.agents.push_back(parse_agent(agents[i], index("agents", i)));
    }

    check_keys(doc.at("schedule"), "schedule", {"rounds"}, {"steps_per_turn"});
    cfg.schedule.rounds = get_count(doc.at("schedule"), "rounds", "schedule");
    cfg.schedule.steps_per_turn = get_count_or(doc.at("schedule"), "steps_per_turn", "schedule", 1);

    const json& perf = doc.at("performance");
    check_keys(perf, "performance", {}, {"p_star", "p_fail", "v_lo", "v_hi"});
    const PerformanceConfig defaults;
    cfg.performance.p_star = get_number_or(perf, "p_star", "performance", defaults.p_star);
    cfg.performance.p_fail = get_number_or(perf, "p_fail", "performance", defaults.p_fail);
    cfg.performance.v_lo = get_number_or(perf, "v_lo", "performance", defaults.v_lo);
    cfg.performance.v_hi = get_number_or(perf, "v_hi", "performance", defaults.v_hi);

    const json& out = doc.at("outputs");
    check_keys(out, "outputs", {"grid_log_path", "agent_log_path", "metrics_path"});
    cfg.outputs.grid_log_path = get_string(out, "grid_log_path", "outputs");
    cfg.outputs.agent_log_path = get_string(out, "agent_log_path", "outputs");
    cfg.outputs.metrics_path = get_string(out, "metrics_path", "outputs");

    if (doc.contains("allow_single_class")) {
        if (!doc.at("allow_single_class").is_boolean()) {
            throw ConfigError("allow_single_class: expected a boolean");
        }
        cfg.allow_single_class = doc.at("allow_single_class").get<bool>();
    }

    validate(cfg);
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load_config(buffer.str());
}

std::string save_config(const ExperimentConfig& cfg) {
    json agents = json::array();
    for (const AgentSpec& spec : cfg.agents) agents.push_back(agent_to_json(spec));
    json doc{{"name", cfg.name},
             {"seed", cfg.seed},
             {"agents", agents},
             {"schedule", {{"rounds", cfg.schedule.rounds}, {"steps_per_turn", cfg.schedule.steps_per_turn}}},
             {"performance",
              {{"p_star", cfg.performance.p_star},
               {"p_fail", cfg.performance.p_fail},
               {"v_lo", cfg.performance.v_lo},
               {"v_hi", cfg.performance.v_hi}}},
             {"outputs",
              {{"grid_log_path", cfg.outputs.grid_log_path},
               {"agent_log_path", cfg.outputs.agent_log_path},
               {"metrics_path", cfg.outputs.metrics_path}}},
             {"allow_single_class", cfg.allow_single_class}};
    doc["grid"] = cfg.grid_token.empty() ? grid_to_json(cfg.grid) : json(cfg.grid_token);
    return doc.dump(2) + "\n";
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string config_fingerprint(const ExperimentConfig& cfg) {
    return fnv1a_hex(save_config(cfg));
}

}  // namespace arl
