#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybrid_orbit/hybrid_model.hpp"

namespace hybrid_orbit {

enum class StepScheme {
    kRk4Fixed,      // classical Runge-Kutta, constant base_step
    kDormandPrince  // embedded 5(4) pair with error control
};

struct IntegratorConfig {
    StepScheme scheme = StepScheme::kRk4Fixed;
    double base_step = 1e-3;
    double guard_tol = 1e-10;
    double min_phase_duration = 1e-6;
    double max_phase_duration = 100.0;
    double transversality_tol = 1e-8;
    int refine_max_iter = 100;
    // A step is halved while |H change| exceeds this fraction of the guard
    // range seen so far (or of |H(x0)| at the start).
    double max_guard_change_fraction = 0.5;
    int max_step_halvings = 10;
    // Dormand-Prince only.
    double adaptive_rel_tol = 1e-10;
    double adaptive_abs_tol = 1e-12;

    // Throws std::invalid_argument on non-positive tolerances or t_min >= t_max.
    void validate() const;
};

struct PhaseTrajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    Vector exit_state;
    double exit_time = 0.0;
    double exit_guard_rate = 0.0;
};

class IntegrationError : public std::runtime_error {
public:
    enum class Kind { kStartOnGuard, kNoCrossing, kNonTransversal, kChattering, kNonFinite,
                      kRefinementStalled };

    IntegrationError(Kind kind, const std::string& what, int phase = -1);

    [[nodiscard]] Kind kind() const { return kind_; }
    // Index of the phase that failed; -1 when raised outside a cycle.
    [[nodiscard]] int phase() const { return phase_; }

    [[nodiscard]] IntegrationError with_phase(int phase) const;

private:
    Kind kind_;
    int phase_;
};

const char* to_string(IntegrationError::Kind kind);

// Integrates xdot = f + g * Gamma(x, beta) from x0 until the first sign
// change of the exit guard after min_phase_duration, then bisects the last
// step until |H| <= guard_tol.
PhaseTrajectory flow_to_guard(const Domain& domain, const Vector& x0, const Vector& beta,
                              const IntegratorConfig& cfg);

// One phase of the cycle: embed the entry section point, apply the
// predecessor's reset, flow to the exit guard and project.
struct PhaseStep {
    Vector exit_section;  // reduced coordinates on the exit surface
    Vector exit_state;    // full state on the exit surface
    Vector beta;
    double duration = 0.0;
};

PhaseStep advance_phase(const MultiDomainSystem& system, std::size_t phase,
                        const Vector& entry_section, const Vector& beta,
                        const IntegratorConfig& cfg);

struct CycleRecord {
    Vector section_state;  // on the exit surface of the last domain
    std::vector<Vector> betas;
    bool trust_radius_exceeded = false;
};

// Runs n_cycles full cycles starting on the exit surface of the last domain.
// Parameters come from the attached feedback law (zero when none).
std::vector<CycleRecord> simulate_cycle(const MultiDomainSystem& system, const Vector& x_start,
                                        int n_cycles, const IntegratorConfig& cfg);

std::vector<CycleRecord> simulate_cycle(const MultiDomainSystem& system, const FeedbackLaw& law,
                                        const Vector& x_start, int n_cycles,
                                        const IntegratorConfig& cfg);

// Header `t,x1,...,xm`, one row per accepted step, last row at the exit time.
void write_trajectory_csv(std::ostream& out, const PhaseTrajectory& trajectory);

}  // namespace hybrid_orbit
