#include "arl/grid_model.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "arl/errors.hpp"

namespace arl {

namespace {

std::string bus_ref(const char* what, std::size_t index) {
    return std::string(what) + "[" + std::to_string(index) + "]";
}

void require_bus(const GridModel& grid, int bus, const std::string& where) {
    if (bus < 0 || static_cast<std::size_t>(bus) >= grid.buses.size()) {
        throw ModelError(where + " references unknown bus " + std::to_string(bus));
    }
}

struct DisjointSet {
    std::vector<std::size_t> parent;

    explicit DisjointSet(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

std::size_t GridModel::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].kind == BusKind::slack) {
            return i;
        }
    }
    throw ModelError("grid has no slack bus");
}

void validate(const GridModel& grid) {
    if (!(grid.s_base_mva > 0.0)) {
        throw ModelError("s_base_mva must be > 0");
    }
    const std::size_t n = grid.buses.size();
    if (n == 0) {
        throw ModelError("grid has no buses");
    }

    std::vector<bool> seen(n, false);
    std::size_t slack_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Bus& bus = grid.buses[i];
        if (bus.id < 0 || static_cast<std::size_t>(bus.id) >= n) {
            throw ModelError(bus_ref("buses", i) + ": id " + std::to_string(bus.id) +
                             " outside contiguous range 0.." + std::to_string(n - 1));
        }
        if (seen[bus.id]) {
            throw ModelError(bus_ref("buses", i) + ": duplicate bus id " + std::to_string(bus.id));
        }
        seen[bus.id] = true;
        if (static_cast<std::size_t>(bus.id) != i) {
            throw ModelError(bus_ref("buses", i) + ": bus ids must be listed in order, got " +
                             std::to_string(bus.id));
        }
        if (!(bus.base_kv > 0.0)) {
            throw ModelError(bus_ref("buses", i) + ": base_kv must be > 0");
        }
        if (bus.kind != BusKind::pq && !(bus.v_setpoint_pu > 0.0)) {
            throw ModelError(bus_ref("buses", i) + ": v_setpoint_pu must be > 0");
        }
        if (bus.kind == BusKind::slack) {
            ++slack_count;
        }
    }
    if (slack_count != 1) {
        throw ModelError("grid must have exactly one slack bus, found " + std::to_string(slack_count));
    }

    DisjointSet components(n);
    for (std::size_t i = 0; i < grid.lines.size(); ++i) {
        const Line& line = grid.lines[i];
        const std::string where = bus_ref("lines", i);
        require_bus(grid, line.from_bus, where);
        require_bus(grid, line.to_bus, where);
        if (line.from_bus == line.to_bus) {
            throw ModelError(where + ": from_bus equals to_bus");
        }
        if (line.r_pu == 0.0 && line.x_pu == 0.0) {
            throw ModelError(where + ": zero-impedance branch");
        }
        if (line.b_shunt_pu < 0.0) {
            throw ModelError(where + ": b_shunt_pu must be >= 0");
        }
        components.unite(line.from_bus, line.to_bus);
    }
    for (std::size_t i = 0; i < grid.transformers.size(); ++i) {
        const Transformer& trafo = grid.transformers[i];
        const std::string where = bus_ref("transformers", i);
        require_bus(grid, trafo.from_bus, where);
        require_bus(grid, trafo.to_bus, where);
        if (trafo.from_bus == trafo.to_bus) {
            throw ModelError(where + ": from_bus equals to_bus");
        }
        if (trafo.r_pu == 0.0 && trafo.x_pu == 0.0) {
            throw ModelError(where + ": zero-impedance branch");
        }
        if (trafo.tap_min > trafo.tap_max) {
            throw ModelError(where + ": tap_min exceeds tap_max");
        }
        if (trafo.tap_pos < trafo.tap_min || trafo.tap_pos > trafo.tap_max) {
            throw ModelError(where + ": tap_pos " + std::to_string(trafo.tap_pos) + " outside [" +
                             std::to_string(trafo.tap_min) + ", " + std::to_string(trafo.tap_max) + "]");
        }
        const double lowest = 1.0 + std::min(trafo.tap_min * trafo.tap_step_pu, trafo.tap_max * trafo.tap_step_pu);
        if (!(lowest > 0.0)) {
            throw ModelError(where + ": tap range yields a non-positive ratio");
        }
        components.unite(trafo.from_bus, trafo.to_bus);
    }
    const std::size_t root = components.find(0);
    for (std::size_t i = 1; i < n; ++i) {
        if (components.find(i) != root) {
            throw ModelError("grid is disconnected: bus " + std::to_string(i) + " is unreachable from bus 0");
        }
    }

    for (std::size_t i = 0; i < grid.generators.size(); ++i) {
        const Generator& gen = grid.generators[i];
        const std::string where = bus_ref("generators", i);
        require_bus(grid, gen.bus, where);
        if (grid.buses[gen.bus].kind != BusKind::pq) {
            throw ModelError(where + ": generators must sit on pq buses");
        }
        if (gen.p_min_mw > gen.p_max_mw || gen.p_mw < gen.p_min_mw || gen.p_mw > gen.p_max_mw) {
            throw ModelError(where + ": p_mw outside [p_min_mw, p_max_mw]");
        }
        if (gen.q_min_mvar > gen.q_max_mvar || gen.q_mvar < gen.q_min_mvar || gen.q_mvar > gen.q_max_mvar) {
            throw ModelError(where + ": q_mvar outside [q_min_mvar, q_max_mvar]");
        }
    }
    for (std::size_t i = 0; i < grid.loads.size(); ++i) {
        const Load& load = grid.loads[i];
        const std::string where = bus_ref("loads", i);
        require_bus(grid, load.bus, where);
        if (load.scaling_min > load.scaling_max || load.scaling < load.scaling_min ||
            load.scaling > load.scaling_max) {
            throw ModelError(where + ": scaling outside [scaling_min, scaling_max]");
        }
    }
}

AdmittanceMatrix build_admittance_matrix(const GridModel& grid) {
    validate(grid);
    using C = std::complex<double>;
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    AdmittanceMatrix y = AdmittanceMatrix::Zero(n, n);

    for (const Line& line : grid.lines) {
        const C series = 1.0 / C(line.r_pu, line.x_pu);
        const C half_shunt(0.0, line.b_shunt_pu / 2.0);
        const auto f = line.from_bus;
        const auto t = line.to_bus;
        y(f, f) += series + half_shunt;
        y(t, t) += series + half_shunt;
        y(f, t) -= series;
        y(t, f) -= series;
    }
    for (const Transformer& trafo : grid.transformers) {
        const C series = 1.0 / C(trafo.r_pu, trafo.x_pu);
        const double a = trafo.ratio();
        const auto f = trafo.from_bus;
        const auto t = trafo.to_bus;
        y(f, f) += series / (a * a);
        y(t, t) += series;
        y(f, t) -= series / a;
        y(t, f) -= series / a;
    }
    return y;
}

std::vector<std::complex<double>> scheduled_injections(const GridModel& grid) {
    std::vector<std::complex<double>> s(grid.buses.size(), {0.0, 0.0});
    for (const Generator& gen : grid.generators) {
        s[gen.bus] += std::complex<double>(gen.p_mw, gen.q_mvar) / grid.s_base_mva;
    }
    for (const Load& load : grid.loads) {
        s[load.bus] -= std::complex<double>(load.effective_p_mw(), load.effective_q_mvar()) / grid.s_base_mva;
    }
    return s;
}

GridModel arl_poc_grid() {
    GridModel grid;
    grid.s_base_mva = 10.0;

    grid.buses.push_back({0, BusKind::slack, 110.0, 1.02, "HV grid"});
    grid.buses.push_back({1, BusKind::pq, 20.0, 1.0, "MV busbar"});
    for (int id = 2; id <= 7; ++id) {
        const char feeder = id <= 4 ? 'A' : 'B';
        grid.buses.push_back({id, BusKind::pq, 20.0, 1.0,
                              std::string("MV feeder ") + feeder + std::to_string(id <= 4 ? id - 1 : id - 4)});
    }
    for (int id = 8; id <= 13; ++id) {
        grid.buses.push_back({id, BusKind::pq, 0.4, 1.0, "LV " + std::to_string(id - 8)});
    }

    grid.lines.push_back({0, 1, 0.002, 0.05, 0.0});
    grid.lines.push_back({1, 2, 0.01, 0.02, 0.0});
    grid.lines.push_back({2, 3, 0.01, 0.02, 0.0});
    grid.lines.push_back({3, 4, 0.01, 0.02, 0.0});
    grid.lines.push_back({1, 5, 0.01, 0.02, 0.0});
    grid.lines.push_back({5, 6, 0.01, 0.02, 0.0});
    grid.lines.push_back({6, 7, 0.01, 0.02, 0.0});

    for (int mv = 2; mv <= 7; ++mv) {
        grid.transformers.push_back({mv, mv + 6, 0.10, 0.95, 0, -9, 9, 0.0125});
    }
    for (int bus : {3, 4, 6, 7}) {
        grid.generators.push_back({bus, 0.5, 0.0, 0.0, 1.0, -0.3, 0.3});
    }
    for (int bus = 8; bus <= 13; ++bus) {
        grid.loads.push_back({bus, 0.4, 0.1, 1.0, 0.5, 1.5});
    }
    return grid;
}

const char* to_string(BusKind kind) {
    switch (kind) {
        case BusKind::slack: return "slack";
        case BusKind::pv: return "pv";
        case BusKind::pq: return "pq";
    }
    return "pq";
}

BusKind bus_kind_from_string(const std::string& text) {
    if (text == "slack") return BusKind::slack;
    if (text == "pv") return BusKind::pv;
    if (text == "pq") return BusKind::pq;
    throw ModelError("unknown bus kind '" + text + "'");
}

}  // namespace arl
