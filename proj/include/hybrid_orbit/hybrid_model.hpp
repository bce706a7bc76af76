#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybrid_orbit/numerics.hpp"

namespace hybrid_orbit {

using StateFn = std::function<Vector(const Vector&)>;
using InputMapFn = std::function<Matrix(const Vector&)>;
using ControllerFn = std::function<Vector(const Vector& state, const Vector& parameter)>;
using ScalarFn = std::function<double(const Vector&)>;

/**
 * One continuous phase of a cyclic hybrid system.
 *
 * The phase flows along xdot = f(x) + g(x) * controller(x, beta) until the
 * exit guard H crosses zero, then `reset` maps the pre-impact state into the
 * next domain. `nominal_controller` is the unparameterized law u(x) the
 * parameterized controller must reproduce at beta = 0; when left empty,
 * controller(x, 0) is taken as nominal.
 */
struct Domain {
    std::string name;
    int state_dim = 0;
    int control_dim = 0;
    int param_dim = 0;

    StateFn drift;
    InputMapFn input_map;
    ControllerFn controller;
    StateFn nominal_controller;
    ScalarFn guard;
    StateFn guard_gradient;  // optional; central differences otherwise
    StateFn reset;

    [[nodiscard]] Vector vector_field(const Vector& x, const Vector& parameter) const;
    [[nodiscard]] Vector nominal_control(const Vector& x) const;
    [[nodiscard]] Vector guard_normal(const Vector& x) const;
    // dH/dt = grad H(x) . xdot
    [[nodiscard]] double guard_rate(const Vector& x, const Vector& xdot) const;
};

/**
 * Coordinates on a switching surface: `embed` lifts k reduced coordinates to a
 * full state on the surface, `project` drops back. `reference_point` is a full
 * state on the surface used for dimension checks and as the Newton seed of
 * eliminating charts.
 */
class SectionChart {
public:
    SectionChart(int reduced_dim, StateFn embed, StateFn project, Vector reference_point);

    // Drops the coordinate with the largest |dH/dx_j| at `reference_point`
    // and recovers it on embed by a scalar Newton solve of H = 0.
    static SectionChart eliminating(ScalarFn guard, const Vector& reference_point,
                                    StateFn guard_gradient = {}, double guard_tol = 1e-13);

    [[nodiscard]] int reduced_dim() const { return reduced_dim_; }
    [[nodiscard]] Vector embed(const Vector& reduced) const;
    [[nodiscard]] Vector project(const Vector& full) const;
    [[nodiscard]] const Vector& reference_point() const { return reference_point_; }
    // -1 for user-supplied charts.
    [[nodiscard]] int eliminated_index() const { return eliminated_index_; }

private:
    int reduced_dim_;
    StateFn embed_;
    StateFn project_;
    Vector reference_point_;
    int eliminated_index_ = -1;
};

// Fixed points are indexed by section: fixed_points[i] lives on the exit
// surface of domain i, in that surface's chart coordinates.
struct PeriodicOrbit {
    std::vector<Vector> fixed_points;
    std::vector<double> phase_durations;

    [[nodiscard]] double period() const;
};

// Event-triggered parameter update: on entry into phase i,
// beta_i = -K_i (x_prev - x_prev*), held constant until the next guard.
struct FeedbackLaw {
    std::vector<Matrix> gains;
    std::shared_ptr<const PeriodicOrbit> orbit;
    // |beta| beyond this is flagged by the simulator; admissible parameter
    // sets are otherwise unconstrained.
    double trust_radius = std::numeric_limits<double>::infinity();
};

class MultiDomainSystem {
public:
    // exit_charts[i] is the chart of the exit surface of domain i.
    MultiDomainSystem(std::vector<Domain> domains, std::vector<SectionChart> exit_charts);

    [[nodiscard]] std::size_t size() const { return domains_.size(); }
    [[nodiscard]] const Domain& domain(std::size_t i) const { return domains_.at(i); }
    [[nodiscard]] const SectionChart& exit_chart(std::size_t i) const { return charts_.at(i); }
    // The surface phase i starts from is the exit surface of its predecessor.
    [[nodiscard]] const SectionChart& entry_chart(std::size_t i) const {
        return charts_.at(previous(i));
    }
    [[nodiscard]] std::size_t previous(std::size_t i) const {
        return (i + domains_.size() - 1) % domains_.size();
    }
    [[nodiscard]] std::size_t next(std::size_t i) const { return (i + 1) % domains_.size(); }

    [[nodiscard]] const std::optional<FeedbackLaw>& feedback() const { return feedback_; }

    // beta for phase i given the section state it starts from; zero when the
    // system carries no feedback law.
    [[nodiscard]] Vector phase_parameter(std::size_t i, const Vector& entry_section_state) const;

    friend MultiDomainSystem closed_loop(const MultiDomainSystem& system, FeedbackLaw law);

private:
    std::vector<Domain> domains_;
    std::vector<SectionChart> charts_;
    std::optional<FeedbackLaw> feedback_;
};

// Attaches the event-triggered feedback law. Throws DimensionError when a
// gain is not p_i x k_{i-1} or the orbit does not match the charts.
MultiDomainSystem closed_loop(const MultiDomainSystem& system, FeedbackLaw law);

// --- controller parameterizations -------------------------------------------

// Gamma(x, beta) = u(y(x) + shift(x, beta)).
ControllerFn output_shift_controller(StateFn control_of_output, StateFn output,
                                     ControllerFn shift);

// shift(x, beta) = direction * sum_j beta_j * phase(x)^j, j = 0..degree.
// Linear in beta, so it vanishes with beta together with its state gradient.
ControllerFn polynomial_output_shift(ScalarFn phase, Vector direction, int degree);

// --- nominal-controller conditions -----------------------------------------

struct ControllerCheckOptions {
    Vector beta_direction;  // empty: all ones
    int shrink_steps = 8;
    double shrink_factor = 0.1;
    double value_tol = 1e-6;
    double gradient_tol = 1e-5;
    double fd_step = 1e-6;
};

struct ControllerSampleCheck {
    Vector state;
    double nominal_gap = 0.0;            // |Gamma(x, 0) - u(x)|
    std::vector<double> shrinking_gaps;  // |Gamma(x, beta_k) - u(x)|, beta_k -> 0
    double gradient_gap = 0.0;           // |dGamma/dx(x, 0) - du/dx(x)|
    double shrinking_gradient_gap = 0.0; // same at the smallest beta_k
    bool value_condition = false;
    bool gradient_condition = false;
};

struct ControllerCheckReport {
    std::vector<ControllerSampleCheck> samples;
    bool value_condition = true;
    bool gradient_condition = true;

    [[nodiscard]] bool pass() const { return value_condition && gradient_condition; }
};

// Checks at sampled states that the parameterized controller collapses to the
// nominal one (value and state gradient) as beta -> 0. Violations are reported.
ControllerCheckReport validate_c1_c2(const Domain& domain, const std::vector<Vector>& samples,
                                     const ControllerCheckOptions& options = {});

}  // namespace hybrid_orbit
