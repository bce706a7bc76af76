#include "hybrid_orbit/hybrid_model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "hybrid_orbit/errors.hpp"

namespace hybrid_orbit {

namespace {

constexpr double kGuardGradientStep = 1e-7;

std::string dims(Eigen::Index r, Eigen::Index c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

// --- Domain -----------------------------------------------------------------

Vector Domain::vector_field(const Vector& x, const Vector& parameter) const {
    Vector xdot = drift(x);
    if (control_dim > 0) {
        const Vector u = controller(x, parameter);
        const Matrix g = input_map(x);
        if (g.rows() != xdot.size() || g.cols() != u.size()) {
            throw DimensionError("domain " + name + ": input map is " + dims(g.rows(), g.cols()) +
                                 " but state/control sizes are " + std::to_string(xdot.size()) +
                                 "/" + std::to_string(u.size()));
        }
        xdot += g * u;
    }
    return xdot;
}

Vector Domain::nominal_control(const Vector& x) const {
    if (nominal_controller) {
        return nominal_controller(x);
    }
    return controller(x, Vector::Zero(param_dim));
}

Vector Domain::guard_normal(const Vector& x) const {
    if (guard_gradient) {
        return guard_gradient(x);
    }
    const Matrix row = central_difference_jacobian(
        [this](const Vector& s) { return Vector::Constant(1, guard(s)); }, x, kGuardGradientStep);
    return row.row(0).transpose();
}

double Domain::guard_rate(const Vector& x, const Vector& xdot) const {
    return guard_normal(x).dot(xdot);
}

// --- SectionChart -----------------------------------------------------------

SectionChart::SectionChart(int reduced_dim, StateFn embed, StateFn project, Vector reference_point)
    : reduced_dim_(reduced_dim),
      embed_(std::move(embed)),
      project_(std::move(project)),
      reference_point_(std::move(reference_point)) {
    if (reduced_dim_ < 0) {
        throw DimensionError("section chart: negative reduced dimension");
    }
}

SectionChart SectionChart::eliminating(ScalarFn guard, const Vector& reference_point,
                                       StateFn guard_gradient, double guard_tol) {
    const auto n = reference_point.size();
    if (n < 1) {
        throw DimensionError("section chart: empty reference point");
    }
    auto gradient = [guard, guard_gradient](const Vector& x) -> Vector {
        if (guard_gradient) {
            return guard_gradient(x);
        }
        return central_difference_jacobian(
                   [&guard](const Vector& s) { return Vector::Constant(1, guard(s)); }, x,
                   kGuardGradientStep)
            .row(0)
            .transpose();
    };
    const Vector normal = gradient(reference_point);
    Eigen::Index eliminated = 0;
    normal.cwiseAbs().maxCoeff(&eliminated);
    if (normal(eliminated) == 0.0) {
        throw NumericalError("section chart: guard gradient vanishes at the reference point");
    }

    auto project = [eliminated, n](const Vector& x) -> Vector {
        if (x.size() != n) {
            throw DimensionError("section chart: project expects a state of size " +
                                 std::to_string(n));
        }
        Vector y(n - 1);
        for (Eigen::Index j = 0, k = 0; j < n; ++j) {
            if (j != eliminated) {
                y(k++) = x(j);
            }
        }
        return y;
    };

    auto embed = [guard, gradient, eliminated, n, guard_tol,
                  seed = reference_point(eliminated)](const Vector& y) -> Vector {
        if (y.size() != n - 1) {
            throw DimensionError("section chart: embed expects " + std::to_string(n - 1) +
                                 " reduced coordinates");
        }
        Vector x(n);
        for (Eigen::Index j = 0, k = 0; j < n; ++j) {
            x(j) = (j == eliminated) ? seed : y(k++);
        }
        // Scalar Newton on the eliminated coordinate.
        for (int iter = 0; iter < 50; ++iter) {
            const double h = guard(x);
            if (std::abs(h) <= guard_tol) {
                return x;
            }
            const double slope = gradient(x)(eliminated);
            if (slope == 0.0 || !std::isfinite(slope)) {
                break;
            }
            const double step = h / slope;
            x(eliminated) -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x(eliminated)))) {
                return x;
            }
        }
        if (std::abs(guard(x)) <= 1e3 * guard_tol) {
            return x;
        }
        throw NumericalError("section chart: cannot place the point on the guard surface");
    };

    SectionChart chart(static_cast<int>(n - 1), embed, project, reference_point);
    chart.eliminated_index_ = static_cast<int>(eliminated);
    return chart;
}

Vector SectionChart::embed(const Vector& reduced) const {
    if (reduced.size() != reduced_dim_) {
        throw DimensionError("section chart: expected " + std::to_string(reduced_dim_) +
                             " reduced coordinates, got " + std::to_string(reduced.size()));
    }
    return embed_(reduced);
}

Vector SectionChart::project(const Vector& full) const {
    Vector y = project_(full);
    if (y.size() != reduced_dim_) {
        throw DimensionError("section chart: projection returned " + std::to_string(y.size()) +
                             " coordinates, expected " + std::to_string(reduced_dim_));
    }
    return y;
}

// --- PeriodicOrbit ----------------------------------------------------------

double PeriodicOrbit::period() const {
    return std::accumulate(phase_durations.begin(), phase_durations.end(), 0.0);
}

// --- MultiDomainSystem ------------------------------------------------------

MultiDomainSystem::MultiDomainSystem(std::vector<Domain> domains,
                                     std::vector<SectionChart> exit_charts)
    : domains_(std::move(domains)), charts_(std::move(exit_charts)) {
    if (domains_.empty()) {
        throw DimensionError("hybrid system needs at least one domain");
    }
    if (charts_.size() != domains_.size()) {
        throw DimensionError("hybrid system: one exit chart per domain required");
    }
    for (std::size_t i = 0; i < domains_.size(); ++i) {
        const Domain& d = domains_[i];
        if (d.state_dim < 1 || d.control_dim < 0 || d.param_dim < 0) {
            throw DimensionError("domain " + d.name + ": invalid dimensions");
        }
        if (!d.drift || !d.guard || !d.reset || (d.control_dim > 0 && (!d.controller || !d.input_map))) {
            throw std::invalid_argument("domain " + d.name + ": missing flow, guard or reset");
        }
        const Vector& ref = charts_[i].reference_point();
        if (ref.size() != d.state_dim) {
            throw DimensionError("domain " + d.name + ": exit chart lives in dimension " +
                                 std::to_string(ref.size()) + ", state dimension is " +
                                 std::to_string(d.state_dim));
        }
        const Domain& succ = domains_[next(i)];
        const Vector landed = d.reset(ref);
        if (landed.size() != succ.state_dim) {
            throw DimensionError("reset of domain " + d.name + " returns " +
                                 std::to_string(landed.size()) + " states, domain " + succ.name +
                                 " expects " + std::to_string(succ.state_dim));
        }
    }
}

Vector MultiDomainSystem::phase_parameter(std::size_t i, const Vector& entry_section_state) const {
    const Domain& d = domain(i);
    if (!feedback_) {
        return Vector::Zero(d.param_dim);
    }
    const Vector& star = feedback_->orbit->fixed_points.at(previous(i));
    return -feedback_->gains.at(i) * (entry_section_state - star);
}

MultiDomainSystem closed_loop(const MultiDomainSystem& system, FeedbackLaw law) {
    const std::size_t n = system.size();
    if (law.gains.size() != n) {
        throw DimensionError("feedback law: expected " + std::to_string(n) + " gains, got " +
                             std::to_string(law.gains.size()));
    }
    if (!law.orbit || law.orbit->fixed_points.size() != n) {
        throw DimensionError("feedback law: orbit must carry one fixed point per section");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int k = system.exit_chart(i).reduced_dim();
        if (law.orbit->fixed_points[i].size() != k) {
            throw DimensionError("feedback law: fixed point " + std::to_string(i) + " has size " +
                                 std::to_string(law.orbit->fixed_points[i].size()) +
                                 ", chart dimension is " + std::to_string(k));
        }
        const Matrix& gain = law.gains[i];
        const int p = system.domain(i).param_dim;
        const int k_in = system.entry_chart(i).reduced_dim();
        if (gain.rows() != p || gain.cols() != k_in) {
            throw DimensionError("feedback law: gain " + std::to_string(i) + " is " +
                                 dims(gain.rows(), gain.cols()) + ", expected " + dims(p, k_in));
        }
    }
    MultiDomainSystem out = system;
    out.feedback_ = std::move(law);
    return out;
}

// --- controller parameterizations -------------------------------------------

ControllerFn output_shift_controller(StateFn control_of_output, StateFn output, ControllerFn shift) {
    return [u = std::move(control_of_output), y = std::move(output), omega = std::move(shift)](
               const Vector& x, const Vector& beta) -> Vector { return u(y(x) + omega(x, beta)); };
}

ControllerFn polynomial_output_shift(ScalarFn phase, Vector direction, int degree) {
    if (degree < 0) {
        throw std::invalid_argument("polynomial_output_shift: negative degree");
    }
    return [theta = std::move(phase), dir = std::move(direction), degree](
               const Vector& x, const Vector& beta) -> Vector {
        if (beta.size() != degree + 1) {
            throw DimensionError("polynomial_output_shift: expected " +
                                 std::to_string(degree + 1) + " parameters");
        }
        const double t = theta(x);
        double power = 1.0;
        double value = 0.0;
        for (int j = 0; j <= degree; ++j) {
            value += beta(j) * power;
            power *= t;
        }
        return dir * value;
    };
}

// --- nominal-controller conditions -----------------------------------------

ControllerCheckReport validate_c1_c2(const Domain& domain, const std::vector<Vector>& samples,
                                     const ControllerCheckOptions& options) {
    const Vector direction = options.beta_direction.size() > 0
                                 ? options.beta_direction
                                 : Vector::Ones(domain.param_dim).eval();
    if (direction.size() != domain.param_dim) {
        throw DimensionError("validate_c1_c2: beta direction must have param_dim entries");
    }
    const Vector zero = Vector::Zero(domain.param_dim);

    auto gradient_of = [&](const Vector& beta, const Vector& x) {
        return central_difference_jacobian(
            [&](const Vector& s) { return domain.controller(s, beta); }, x, options.fd_step);
    };

    ControllerCheckReport report;
    for (const Vector& x : samples) {
        ControllerSampleCheck check;
        check.state = x;
        const Vector u = domain.nominal_control(x);
        check.nominal_gap = max_abs_entry(domain.controller(x, zero) - u);

        double scale = 1.0;
        Vector smallest = direction;
        for (int s = 0; s < options.shrink_steps; ++s) {
            smallest = direction * scale;
            check.shrinking_gaps.push_back(max_abs_entry(domain.controller(x, smallest) - u));
            scale *= options.shrink_factor;
        }
        const double last_gap =
            check.shrinking_gaps.empty() ? check.nominal_gap : check.shrinking_gaps.back();
        check.value_condition =
            check.nominal_gap <= options.value_tol && last_gap <= options.value_tol;

        const Matrix nominal_grad = central_difference_jacobian(
            [&](const Vector& s) { return domain.nominal_control(s); }, x, options.fd_step);
        check.gradient_gap = max_abs_entry(gradient_of(zero, x) - nominal_grad);
        check.shrinking_gradient_gap = max_abs_entry(gradient_of(smallest, x) - nominal_grad);
        check.gradient_condition = check.gradient_gap <= options.gradient_tol &&
                                   check.shrinking_gradient_gap <= options.gradient_tol;

        report.value_condition = report.value_condition && check.value_condition;
        report.gradient_condition = report.gradient_condition && check.gradient_condition;
        report.samples.push_back(std::move(check));
    }
    return report;
}

}  // namespace hybrid_orbit
