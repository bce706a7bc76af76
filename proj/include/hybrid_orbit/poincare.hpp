#pragma once

#include <cstddef>
#include <vector>

#include "hybrid_orbit/hybrid_model.hpp"
#include "hybrid_orbit/integrator.hpp"

namespace hybrid_orbit {

struct FiniteDifferenceConfig {
    // Per-coordinate step is fd_step * max(1, |coordinate|).
    double fd_step = 1e-5;
    // Recompute with fd_step / 2 and compare.
    bool check_halving = true;
    // Allowed halving change, relative to max(1, max_abs_entry).
    double halving_tol = 1e-5;
};

// Sensitivities of the phase-i partial map at its fixed point with beta = 0.
struct PhaseJacobians {
    std::size_t phase = 0;
    Matrix A;  // k_i x k_{i-1}, d(exit section) / d(entry section)
    Matrix F;  // k_i x p_i,     d(exit section) / d(beta)
    double fd_step = 0.0;
    double halving_defect = 0.0;  // max change when the step is halved
    bool halving_ok = true;
};

// Reset, flow and project for one phase, starting from reduced coordinates
// on the exit surface of domain i-1.
Vector partial_map(const MultiDomainSystem& system, std::size_t phase, const Vector& x_prev,
                   const Vector& beta, const IntegratorConfig& cfg);

// Full cycle with beta = 0, from and to the exit surface of the last domain.
Vector return_map(const MultiDomainSystem& system, const Vector& x, const IntegratorConfig& cfg);

Matrix jacobian_state(const MultiDomainSystem& system, std::size_t phase,
                      const PeriodicOrbit& orbit, const IntegratorConfig& cfg,
                      const FiniteDifferenceConfig& fd = {});

Matrix jacobian_param(const MultiDomainSystem& system, std::size_t phase,
                      const PeriodicOrbit& orbit, const IntegratorConfig& cfg,
                      const FiniteDifferenceConfig& fd = {});

// Both Jacobians of one phase plus the step-halving diagnostic.
PhaseJacobians phase_jacobians(const MultiDomainSystem& system, std::size_t phase,
                               const PeriodicOrbit& orbit, const IntegratorConfig& cfg,
                               const FiniteDifferenceConfig& fd = {});

std::vector<PhaseJacobians> all_phase_jacobians(const MultiDomainSystem& system,
                                                const PeriodicOrbit& orbit,
                                                const IntegratorConfig& cfg,
                                                const FiniteDifferenceConfig& fd = {});

// Central-difference Jacobian of the whole return map at x.
Matrix return_map_jacobian(const MultiDomainSystem& system, const Vector& x,
                           const IntegratorConfig& cfg, const FiniteDifferenceConfig& fd = {});

// jacs[N-1] * ... * jacs[0]. Throws DimensionError on incompatible links.
Matrix compose_jacobians(const std::vector<Matrix>& jacs);

struct NewtonOptions {
    double residual_tol = 1e-9;  // max-norm of return_map(x) - x
    int max_iterations = 50;
    int max_halvings = 8;
    double singular_tol = 1e-12;  // relative pivot threshold for I - A
    FiniteDifferenceConfig fd{1e-6, false, 1e-5};
};

// Newton iteration on return_map(x) - x with step halving. Returns the
// per-section fixed points and the phase durations of the orbit through the
// converged point. Throws NumericalError on divergence or when I - A is singular.
PeriodicOrbit refine_fixed_point(const MultiDomainSystem& system, const Vector& x_guess,
                                 const IntegratorConfig& cfg, const NewtonOptions& options = {});

// Walks the cycle from x (on the last exit surface) recording section points
// and durations, without any refinement.
PeriodicOrbit trace_orbit(const MultiDomainSystem& system, const Vector& x,
                          const IntegratorConfig& cfg);

// max-norm of return_map(x*) - x* for the orbit's last section point.
double fixed_point_residual(const MultiDomainSystem& system, const PeriodicOrbit& orbit,
                            const IntegratorConfig& cfg);

}  // namespace hybrid_orbit
