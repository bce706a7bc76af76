#include "hybrid_orbit/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hybrid_orbit/errors.hpp"
#include "hybrid_orbit/parallel.hpp"

namespace hybrid_orbit {

namespace {

using VectorMap = std::function<Vector(const Vector&)>;

// Columns are independent map evaluations; each lands in its own slot.
Matrix fd_columns(const VectorMap& map, const Vector& x, double step, Eigen::Index out_rows) {
    Matrix jac(out_rows, x.size());
    parallel_for(static_cast<std::size_t>(x.size()), [&](std::size_t col) {
        const auto j = static_cast<Eigen::Index>(col);
        const double h = step * std::max(1.0, std::abs(x(j)));
        Vector plus = x;
        Vector minus = x;
        plus(j) += h;
        minus(j) -= h;
        jac.col(j) = (map(plus) - map(minus)) / (2.0 * h);
    });
    return jac;
}

struct HalvedJacobian {
    Matrix value;
    double defect = 0.0;
    bool ok = true;
};

HalvedJacobian fd_with_halving(const VectorMap& map, const Vector& x, Eigen::Index out_rows,
                               const FiniteDifferenceConfig& fd) {
    HalvedJacobian out;
    out.value = fd_columns(map, x, fd.fd_step, out_rows);
    if (fd.check_halving && x.size() > 0) {
        const Matrix half = fd_columns(map, x, 0.5 * fd.fd_step, out_rows);
        out.defect = max_abs_entry(half - out.value);
        out.ok = out.defect <= fd.halving_tol * std::max(1.0, max_abs_entry(out.value));
    }
    return out;
}

const Vector& entry_fixed_point(const MultiDomainSystem& system, std::size_t phase,
                                const PeriodicOrbit& orbit) {
    if (orbit.fixed_points.size() != system.size()) {
        throw DimensionError("orbit carries " + std::to_string(orbit.fixed_points.size()) +
                             " fixed points for a " + std::to_string(system.size()) +
                             "-domain system");
    }
    return orbit.fixed_points[system.previous(phase)];
}

}  // namespace

Vector partial_map(const MultiDomainSystem& system, std::size_t phase, const Vector& x_prev,
                   const Vector& beta, const IntegratorConfig& cfg) {
    return advance_phase(system, phase, x_prev, beta, cfg).exit_section;
}

Vector return_map(const MultiDomainSystem& system, const Vector& x, const IntegratorConfig& cfg) {
    Vector state = x;
    for (std::size_t i = 0; i < system.size(); ++i) {
        state = partial_map(system, i, state, Vector::Zero(system.domain(i).param_dim), cfg);
    }
    return state;
}

Matrix jacobian_state(const MultiDomainSystem& system, std::size_t phase,
                      const PeriodicOrbit& orbit, const IntegratorConfig& cfg,
                      const FiniteDifferenceConfig& fd) {
    FiniteDifferenceConfig single = fd;
    single.check_halving = false;
    return phase_jacobians(system, phase, orbit, cfg, single).A;
}

Matrix jacobian_param(const MultiDomainSystem& system, std::size_t phase,
                      const PeriodicOrbit& orbit, const IntegratorConfig& cfg,
                      const FiniteDifferenceConfig& fd) {
    FiniteDifferenceConfig single = fd;
    single.check_halving = false;
    return phase_jacobians(system, phase, orbit, cfg, single).F;
}

PhaseJacobians phase_jacobians(const MultiDomainSystem& system, std::size_t phase,
                               const PeriodicOrbit& orbit, const IntegratorConfig& cfg,
                               const FiniteDifferenceConfig& fd) {
    const Vector& x_star = entry_fixed_point(system, phase, orbit);
    const int p = system.domain(phase).param_dim;
    const Eigen::Index k_out = system.exit_chart(phase).reduced_dim();
    const Vector zero_beta = Vector::Zero(p);

    const HalvedJacobian a = fd_with_halving(
        [&](const Vector& x) { return partial_map(system, phase, x, zero_beta, cfg); }, x_star,
        k_out, fd);
    const HalvedJacobian f = fd_with_halving(
        [&](const Vector& beta) { return partial_map(system, phase, x_star, beta, cfg); },
        zero_beta, k_out, fd);

    PhaseJacobians out;
    out.phase = phase;
    out.A = a.value;
    out.F = f.value;
    out.fd_step = fd.fd_step;
    out.halving_defect = std::max(a.defect, f.defect);
    out.halving_ok = a.ok && f.ok;
    require_finite(out.A, "jacobian_state");
    require_finite(out.F, "jacobian_param");
    return out;
}

std::vector<PhaseJacobians> all_phase_jacobians(const MultiDomainSystem& system,
                                                const PeriodicOrbit& orbit,
                                                const IntegratorConfig& cfg,
                                                const FiniteDifferenceConfig& fd) {
    std::vector<PhaseJacobians> out;
    out.reserve(system.size());
    for (std::size_t i = 0; i < system.size(); ++i) {
        out.push_back(phase_jacobians(system, i, orbit, cfg, fd));
    }
    return out;
}

Matrix return_map_jacobian(const MultiDomainSystem& system, const Vector& x,
                           const IntegratorConfig& cfg, const FiniteDifferenceConfig& fd) {
    const Eigen::Index k = system.exit_chart(system.size() - 1).reduced_dim();
    return fd_columns([&](const Vector& s) { return return_map(system, s, cfg); }, x, fd.fd_step,
                      k);
}

Matrix compose_jacobians(const std::vector<Matrix>& jacs) {
    if (jacs.empty()) {
        throw DimensionError("compose_jacobians: empty chain");
    }
    Matrix product = jacs.front();
    for (std::size_t i = 1; i < jacs.size(); ++i) {
        if (jacs[i].cols() != product.rows()) {
            std::ostringstream os;
            os << "compose_jacobians: link " << i << " is " << jacs[i].rows() << "x"
               << jacs[i].cols() << " but the running product has " << product.rows() << " rows";
            throw DimensionError(os.str());
        }
        product = jacs[i] * product;
    }
    return product;
}

PeriodicOrbit trace_orbit(const MultiDomainSystem& system, const Vector& x,
                          const IntegratorConfig& cfg) {
    PeriodicOrbit orbit;
    orbit.fixed_points.resize(system.size());
    orbit.phase_durations.resize(system.size());
    Vector state = x;
    for (std::size_t i = 0; i < system.size(); ++i) {
        const PhaseStep step =
            advance_phase(system, i, state, Vector::Zero(system.domain(i).param_dim), cfg);
        state = step.exit_section;
        orbit.phase_durations[i] = step.duration;
        // The last section keeps the starting point so the orbit is anchored
        // where refinement converged.
        orbit.fixed_points[i] = (i + 1 == system.size()) ? x : state;
    }
    return orbit;
}

double fixed_point_residual(const MultiDomainSystem& system, const PeriodicOrbit& orbit,
                            const IntegratorConfig& cfg) {
    const Vector& x = orbit.fixed_points.back();
    return max_abs_entry(return_map(system, x, cfg) - x);
}

PeriodicOrbit refine_fixed_point(const MultiDomainSystem& system, const Vector& x_guess,
                                 const IntegratorConfig& cfg, const NewtonOptions& options) {
    const Eigen::Index k = system.exit_chart(system.size() - 1).reduced_dim();
    if (x_guess.size() != k) {
        throw DimensionError("refine_fixed_point: guess has size " +
                             std::to_string(x_guess.size()) + ", section dimension is " +
                             std::to_string(k));
    }
    Vector x = x_guess;
    Vector residual;
    try {
        residual = return_map(system, x, cfg) - x;
    } catch (const IntegrationError& e) {
        throw NumericalError(std::string("refine_fixed_point: return map undefined at the guess (") +
                             e.what() + ")");
    }
    double norm = max_abs_entry(residual);

    for (int iter = 0; iter < options.max_iterations && norm >= options.residual_tol; ++iter) {
        const Matrix jac = return_map_jacobian(system, x, cfg, options.fd) - Matrix::Identity(k, k);
        Eigen::FullPivLU<Matrix> lu(jac);
        lu.setThreshold(options.singular_tol);
        if (!lu.isInvertible()) {
            throw NumericalError(
                "refine_fixed_point: I - A is singular (orbit not hyperbolic in a unit-eigenvalue "
                "direction)");
        }
        const Vector delta = -lu.solve(residual);

        double alpha = 1.0;
        bool improved = false;
        for (int h = 0; h <= options.max_halvings; ++h, alpha *= 0.5) {
            const Vector trial = x + alpha * delta;
            try {
                const Vector trial_residual = return_map(system, trial, cfg) - trial;
                const double trial_norm = max_abs_entry(trial_residual);
                if (std::isfinite(trial_norm) && trial_norm < norm) {
                    x = trial;
                    residual = trial_residual;
                    norm = trial_norm;
                    improved = true;
                    break;
                }
            } catch (const IntegrationError&) {
                // outside the region where the cycle is defined; shorten the step
            } catch (const NumericalError&) {
            }
        }
        if (!improved) {
            std::ostringstream os;
            os << "refine_fixed_point: Newton diverged (residual " << norm << " after " << iter
               << " iterations)";
            throw NumericalError(os.str());
        }
    }
    if (!(norm < options.residual_tol)) {
        std::ostringstream os;
        os << "refine_fixed_point: no convergence in " << options.max_iterations
           << " iterations (residual " << norm << ")";
        throw NumericalError(os.str());
    }
    return trace_orbit(system, x, cfg);
}

}  // namespace hybrid_orbit
