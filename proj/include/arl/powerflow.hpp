#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "arl/grid_model.hpp"

namespace arl {

enum class SolverStatus {
    converged,
    max_iterations,     // residual still above tolerance after max_iter steps
    singular_jacobian,  // Newton step could not be computed
    diverged,           // iterate became non-finite
};

const char* to_string(SolverStatus status);

struct PowerFlowSolution {
    std::vector<double> v_pu;
    std::vector<double> theta_rad;
    std::vector<double> p_inj_pu;
    std::vector<double> q_inj_pu;
    bool converged = false;
    SolverStatus status = SolverStatus::max_iterations;
    int iterations = 0;
    double max_mismatch_pu = 0.0;
    /// Max-norm of the mismatch at the start of every iteration, then the final one.
    std::vector<double> mismatch_history;

    bool operator==(const PowerFlowSolution&) const = default;
};

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 20;
};

/// Maps between the flat unknown vector [theta of non-slack buses; V of pq buses]
/// and bus indices. Mismatch rows use the same ordering.
struct UnknownLayout {
    std::vector<std::size_t> angle_buses;
    std::vector<std::size_t> magnitude_buses;

    explicit UnknownLayout(const GridModel& grid);
    std::size_t size() const { return angle_buses.size() + magnitude_buses.size(); }
};

/// [dP for every non-slack bus; dQ for every pq bus], scheduled minus computed.
Eigen::VectorXd compute_mismatch(const GridModel& grid, const std::vector<double>& v_pu,
                                 const std::vector<double>& theta_rad);

/// Analytic Jacobian of compute_mismatch with respect to the unknowns of UnknownLayout.
Eigen::MatrixXd compute_jacobian(const GridModel& grid, const std::vector<double>& v_pu,
                                 const std::vector<double>& theta_rad);

/// Newton-Raphson from flat start. Never throws on numerical failure; the status says why.
PowerFlowSolution solve_newton_raphson(const GridModel& grid, const SolverOptions& options = {});

/// Net complex injection P + jQ at each bus computed from the network equations.
void compute_injections(const AdmittanceMatrix& y, const std::vector<double>& v_pu,
                        const std::vector<double>& theta_rad, std::vector<double>& p_out,
                        std::vector<double>& q_out);

}  // namespace arl
