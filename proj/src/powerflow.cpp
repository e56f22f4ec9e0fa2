#include "arl/powerflow.hpp"

#include <algorithm>
#include <cmath>

#include "arl/errors.hpp"

namespace arl {

namespace {

void require_sizes(const GridModel& grid, const std::vector<double>& v, const std::vector<double>& theta) {
    if (v.size() != grid.buses.size() || theta.size() != grid.buses.size()) {
        throw ContractError("voltage vectors must have one entry per bus");
    }
}

Eigen::VectorXd mismatch_from(const AdmittanceMatrix& y, const UnknownLayout& layout,
                              const std::vector<std::complex<double>>& scheduled, const std::vector<double>& v,
                              const std::vector<double>& theta, std::vector<double>& p_calc,
                              std::vector<double>& q_calc) {
    compute_injections(y, v, theta, p_calc, q_calc);
    Eigen::VectorXd f(static_cast<Eigen::Index>(layout.size()));
    Eigen::Index row = 0;
    for (std::size_t bus : layout.angle_buses) {
        f(row++) = scheduled[bus].real() - p_calc[bus];
    }
    for (std::size_t bus : layout.magnitude_buses) {
        f(row++) = scheduled[bus].imag() - q_calc[bus];
    }
    return f;
}

Eigen::MatrixXd jacobian_from(const AdmittanceMatrix& y, const UnknownLayout& layout, const std::vector<double>& v,
                              const std::vector<double>& theta, const std::vector<double>& p_calc,
                              const std::vector<double>& q_calc) {
    const std::size_t n_ang = layout.angle_buses.size();
    const auto dim = static_cast<Eigen::Index>(layout.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);

    // Partials of the computed injections; the mismatch Jacobian is their negation.
    auto dp_dtheta = [&](std::size_t i, std::size_t k) {
        if (i == k) {
            return -q_calc[i] - y(i, i).imag() * v[i] * v[i];
        }
        const double t = theta[i] - theta[k];
        return v[i] * v[k] * (y(i, k).real() * std::sin(t) - y(i, k).imag() * std::cos(t));
    };
    auto dp_dv = [&](std::size_t i, std::size_t k) {
        if (i == k) {
            return p_calc[i] / v[i] + y(i, i).real() * v[i];
        }
        const double t = theta[i] - theta[k];
        return v[i] * (y(i, k).real() * std::cos(t) + y(i, k).imag() * std::sin(t));
    };
    auto dq_dtheta = [&](std::size_t i, std::size_t k) {
        if (i == k) {
            return p_calc[i] - y(i, i).real() * v[i] * v[i];
        }
        const double t = theta[i] - theta[k];
        return -v[i] * v[k] * (y(i, k).real() * std::cos(t) + y(i, k).imag() * std::sin(t));
    };
    auto dq_dv = [&](std::size_t i, std::size_t k) {
        if (i == k) {
            return q_calc[i] / v[i] - y(i, i).imag() * v[i];
        }
        const double t = theta[i] - theta[k];
        return v[i] * (y(i, k).real() * std::sin(t) - y(i, k).imag() * std::cos(t));
    };

    for (std::size_t r = 0; r < n_ang; ++r) {
        const std::size_t i = layout.angle_buses[r];
        for (std::size_t c = 0; c < n_ang; ++c) {
            jac(r, c) = -dp_dtheta(i, layout.angle_buses[c]);
        }
        for (std::size_t c = 0; c < layout.magnitude_buses.size(); ++c) {
            jac(r, n_ang + c) = -dp_dv(i, layout.magnitude_buses[c]);
        }
    }
    for (std::size_t r = 0; r < layout.magnitude_buses.size(); ++r) {
        const std::size_t i = layout.magnitude_buses[r];
        for (std::size_t c = 0; c < n_ang; ++c) {
            jac(n_ang + r, c) = -dq_dtheta(i, layout.angle_buses[c]);
        }
        for (std::size_t c = 0; c < layout.magnitude_buses.size(); ++c) {
            jac(n_ang + r, n_ang + c) = -dq_dv(i, layout.magnitude_buses[c]);
        }
    }
    return jac;
}

double max_norm(const Eigen::VectorXd& f) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double a = std::abs(f(i));
        if (std::isnan(a)) {
            return a;
        }
        m = std::max(m, a);
    }
    return m;
}

}  // namespace

const char* to_string(SolverStatus status) {
    switch (status) {
        case SolverStatus::converged: return "converged";
        case SolverStatus::max_iterations: return "max_iterations";
        case SolverStatus::singular_jacobian: return "singular_jacobian";
        case SolverStatus::diverged: return "diverged";
    }
    return "unknown";
}

UnknownLayout::UnknownLayout(const GridModel& grid) {
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
        if (grid.buses[i].kind != BusKind::slack) {
            angle_buses.push_back(i);
        }
        if (grid.buses[i].kind == BusKind::pq) {
            magnitude_buses.push_back(i);
        }
    }
}

void compute_injections(const AdmittanceMatrix& y, const std::vector<double>& v_pu,
                        const std::vector<double>& theta_rad, std::vector<double>& p_out,
                        std::vector<double>& q_out) {
    const std::size_t n = v_pu.size();
    p_out.assign(n, 0.0);
    q_out.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double p = 0.0;
        double q = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double g = y(i, k).real();
            const double b = y(i, k).imag();
            if (g == 0.0 && b == 0.0) {
                continue;
            }
            const double t = theta_rad[i] - theta_rad[k];
            const double c = std::cos(t);
            const double s = std::sin(t);
            p += v_pu[k] * (g * c + b * s);
            q += v_pu[k] * (g * s - b * c);
        }
        p_out[i] = v_pu[i] * p;
        q_out[i] = v_pu[i] * q;
    }
}

Eigen::VectorXd compute_mismatch(const GridModel& grid, const std::vector<double>& v_pu,
                                 const std::vector<double>& theta_rad) {
    require_sizes(grid, v_pu, theta_rad);
    const AdmittanceMatrix y = build_admittance_matrix(grid);
    std::vector<double> p;
    std::vector<double> q;
    return mismatch_from(y, UnknownLayout(grid), scheduled_injections(grid), v_pu, theta_rad, p, q);
}

Eigen::MatrixXd compute_jacobian(const GridModel& grid, const std::vector<double>& v_pu,
                                 const std::vector<double>& theta_rad) {
    require_sizes(grid, v_pu, theta_rad);
    const AdmittanceMatrix y = build_admittance_matrix(grid);
    std::vector<double> p;
    std::vector<double> q;
    compute_injections(y, v_pu, theta_rad, p, q);
    return jacobian_from(y, UnknownLayout(grid), v_pu, theta_rad, p, q);
}

PowerFlowSolution solve_newton_raphson(const GridModel& grid, const SolverOptions& options) {
    if (!(options.tol > 0.0) || options.max_iter < 1) {
        throw ContractError("solver needs tol > 0 and max_iter >= 1");
    }
    const AdmittanceMatrix y = build_admittance_matrix(grid);
    const UnknownLayout layout(grid);
    const auto scheduled = scheduled_injections(grid);
    const std::size_t n = grid.buses.size();
    const std::size_t n_ang = layout.angle_buses.size();

    PowerFlowSolution sol;
    sol.v_pu.assign(n, 1.0);
    sol.theta_rad.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.buses[i].kind != BusKind::pq) {
            sol.v_pu[i] = grid.buses[i].v_setpoint_pu;
        }
    }

    std::vector<double> p_calc;
    std::vector<double> q_calc;
    Eigen::VectorXd f = mismatch_from(y, layout, scheduled, sol.v_pu, sol.theta_rad, p_calc, q_calc);
    sol.max_mismatch_pu = max_norm(f);
    sol.mismatch_history.push_back(sol.max_mismatch_pu);

    for (int iter = 1;; ++iter) {
        sol.iterations = iter;
        if (sol.max_mismatch_pu <= options.tol) {
            sol.converged = true;
            sol.status = SolverStatus::converged;
            break;
        }
        if (iter > options.max_iter) {
            sol.iterations = options.max_iter;
            sol.status = SolverStatus::max_iterations;
            break;
        }

        const Eigen::MatrixXd jac = jacobian_from(y, layout, sol.v_pu, sol.theta_rad, p_calc, q_calc);
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible()) {
            sol.status = SolverStatus::singular_jacobian;
            break;
        }
        const Eigen::VectorXd step = lu.solve(-f);
        if (!step.allFinite()) {
            sol.status = SolverStatus::singular_jacobian;
            break;
        }
        const std::vector<double> prev_v = sol.v_pu;
        const std::vector<double> prev_theta = sol.theta_rad;
        for (std::size_t c = 0; c < n_ang; ++c) {
            sol.theta_rad[layout.angle_buses[c]] += step(static_cast<Eigen::Index>(c));
        }
        for (std::size_t c = 0; c < layout.magnitude_buses.size(); ++c) {
            sol.v_pu[layout.magnitude_buses[c]] += step(static_cast<Eigen::Index>(n_ang + c));
        }

        bool collapsed = false;
        for (double v : sol.v_pu) {
            collapsed = collapsed || !(v > 0.0) || !std::isfinite(v);
        }
        if (!collapsed) {
            f = mismatch_from(y, layout, scheduled, sol.v_pu, sol.theta_rad, p_calc, q_calc);
            collapsed = !std::isfinite(max_norm(f));
        }
        if (collapsed) {
            // Keep the last finite iterate so downstream observers see usable magnitudes.
            sol.v_pu = prev_v;
            sol.theta_rad = prev_theta;
            f = mismatch_from(y, layout, scheduled, sol.v_pu, sol.theta_rad, p_calc, q_calc);
            sol.status = SolverStatus::diverged;
            break;
        }
        sol.max_mismatch_pu = max_norm(f);
        sol.mismatch_history.push_back(sol.max_mismatch_pu);
    }

    sol.p_inj_pu = p_calc;
    sol.q_inj_pu = q_calc;
    return sol;
}

}  // namespace arl
