#pragma once

#include <string>
#include <vector>

#include "hybrid_orbit/hybrid_model.hpp"
#include "hybrid_orbit/poincare.hpp"

namespace hybrid_orbit {

/**
 * Piecewise-affine phase used by the synthetic catalog:
 *
 *   xdot = drift * x + offset + coupling * beta     (g = I, Gamma = coupling * beta)
 *   H(x) = normal . x - guard_offset
 *   x+   = reset * x + reset_offset
 *
 * The orbit is engineered: the phase starts at `entry_state`, runs for
 * `duration`, and the guard and reset offsets are solved so the cycle closes.
 */
struct SyntheticPhaseSpec {
    Matrix drift;
    Vector offset;
    Matrix coupling;  // m x p
    Vector normal;    // normalized on assembly
    Matrix reset;
    Vector entry_state;
    double duration = 1.0;
};

struct SyntheticPhase {
    SyntheticPhaseSpec spec;
    double guard_offset = 0.0;
    Vector reset_offset;
    Vector exit_state;
    Vector exit_velocity;
    double guard_angle_deg = 0.0;  // between the normal and the exit velocity
};

struct SyntheticSystem {
    std::string name;
    std::vector<SyntheticPhase> phases;
    MultiDomainSystem system;
    PeriodicOrbit orbit;
    // Closed-form A_i, F_i from matrix exponentials and the event-time correction.
    std::vector<PhaseJacobians> analytic;
};

// Largest admissible angle between guard normal and exit velocity.
inline constexpr double kMaxGuardAngleDeg = 80.0;

// Solves the guard and reset offsets that close the orbit and validates that
// each phase leaves its entry strictly inside the guard, does not touch the
// guard before `duration`, and exits within the admissible angle.
// Throws std::invalid_argument on violations.
SyntheticSystem assemble_synthetic(const std::string& name,
                                   const std::vector<SyntheticPhaseSpec>& phases);

// Families: "stable", "unstable", "boundary", "uncoupled". Phases cycle
// through the family's templates, so any n_domains >= 2 works.
SyntheticSystem build_synthetic(int n_domains, const std::string& family);

// Catalog names of the form "<family>-<n>", e.g. "stable-3".
SyntheticSystem build_synthetic(const std::string& catalog_name);

// The shipped profiles: stable-3, unstable-2, boundary-2, uncoupled-2.
std::vector<std::string> synthetic_catalog();

// phi(t) for the affine flow from x0 with constant beta, by matrix exponential.
Vector synthetic_flow(const SyntheticPhaseSpec& phase, const Vector& x0, const Vector& beta,
                      double t);

// First time normal . phi(t) reaches guard_offset, by bracketing on the
// matrix-exponential solution sampled at `scan_step`, then bisection.
double synthetic_exit_time(const SyntheticPhaseSpec& phase, double guard_offset, const Vector& x0,
                           const Vector& beta, double scan_step = 1e-3, double tol = 1e-13);

// Analytic partial map for the synthetic family, with the same charts as the
// runnable system.
Vector synthetic_partial_map(const SyntheticSystem& sys, std::size_t phase, const Vector& x_prev,
                             const Vector& beta);

}  // namespace hybrid_orbit
