#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace arl {

enum class BusKind { slack, pv, pq };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::pq;
    double base_kv = 1.0;
    double v_setpoint_pu = 1.0;  // used for slack and pv buses
    std::string name;

    bool operator==(const Bus&) const = default;
};

struct Line {
    int from_bus = 0;
    int to_bus = 0;
    double r_pu = 0.0;
    double x_pu = 0.0;
    double b_shunt_pu = 0.0;  // total line charging, split half per end

    bool operator==(const Line&) const = default;
};

/// Two-winding transformer with an on-load tap changer on the HV (from) side.
struct Transformer {
    int from_bus = 0;  // HV side
    int to_bus = 0;    // LV side
    double r_pu = 0.0;
    double x_pu = 0.0;
    int tap_pos = 0;
    int tap_min = 0;
    int tap_max = 0;
    double tap_step_pu = 0.0;

    /// Off-nominal turns ratio applied on the HV side.
    double ratio() const { return 1.0 + tap_pos * tap_step_pu; }

    bool operator==(const Transformer&) const = default;
};

/// PQ-controlled generator; enters the power balance as a negative load.
struct Generator {
    int bus = 0;
    double p_mw = 0.0;
    double q_mvar = 0.0;
    double p_min_mw = 0.0;
    double p_max_mw = 0.0;
    double q_min_mvar = 0.0;
    double q_max_mvar = 0.0;

    bool operator==(const Generator&) const = default;
};

struct Load {
    int bus = 0;
    double p_mw = 0.0;
    double q_mvar = 0.0;
    double scaling = 1.0;
    double scaling_min = 1.0;
    double scaling_max = 1.0;

    double effective_p_mw() const { return p_mw * scaling; }
    double effective_q_mvar() const { return q_mvar * scaling; }

    bool operator==(const Load&) const = default;
};

struct GridModel {
    double s_base_mva = 1.0;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Transformer> transformers;
    std::vector<Generator> generators;
    std::vector<Load> loads;

    std::size_t bus_count() const { return buses.size(); }
    /// Index of the single slack bus. Assumes a validated model.
    std::size_t slack_index() const;

    bool operator==(const GridModel&) const = default;
};

using AdmittanceMatrix = Eigen::MatrixXcd;

/// Throws ModelError naming the first violated rule.
void validate(const GridModel& grid);

/// Bus admittance matrix of the pi-equivalent network. Validates first.
AdmittanceMatrix build_admittance_matrix(const GridModel& grid);

/// Scheduled net complex injection per bus in per-unit (generation minus scaled load).
std::vector<std::complex<double>> scheduled_injections(const GridModel& grid);

/// Built-in 14-bus MV/LV reference grid: HV slack, MV busbar, two three-bus
/// feeders and six tap-changing MV/LV transformers feeding one load each,
/// with four generators on the feeders.
GridModel arl_poc_grid();

const char* to_string(BusKind kind);
BusKind bus_kind_from_string(const std::string& text);

}  // namespace arl
