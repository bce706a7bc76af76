#include "hybrid_orbit/integrator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <sstream>

#include "hybrid_orbit/errors.hpp"

namespace hybrid_orbit {

void IntegratorConfig::validate() const {
    if (!(base_step > 0.0) || !(guard_tol > 0.0) || !(min_phase_duration > 0.0) ||
        !(transversality_tol > 0.0) || refine_max_iter < 1 || !(max_guard_change_fraction > 0.0) ||
        max_step_halvings < 0 || !(adaptive_rel_tol > 0.0) || !(adaptive_abs_tol > 0.0)) {
        throw std::invalid_argument("integrator config: tolerances and steps must be positive");
    }
    if (!(min_phase_duration < max_phase_duration)) {
        throw std::invalid_argument("integrator config: min_phase_duration must be below max");
    }
}

IntegrationError::IntegrationError(Kind kind, const std::string& what, int phase)
    : std::runtime_error(phase >= 0 ? "phase " + std::to_string(phase + 1) + ": " + what : what),
      kind_(kind),
      phase_(phase) {}

IntegrationError IntegrationError::with_phase(int phase) const {
    std::string msg = what();
    if (phase_ >= 0) {
        // strip the existing "phase N: " prefix
        msg = msg.substr(msg.find(": ") + 2);
    }
    return IntegrationError(kind_, msg, phase);
}

const char* to_string(IntegrationError::Kind kind) {
    switch (kind) {
        case IntegrationError::Kind::kStartOnGuard: return "StartOnGuard";
        case IntegrationError::Kind::kNoCrossing: return "NoCrossing";
        case IntegrationError::Kind::kNonTransversal: return "NonTransversal";
        case IntegrationError::Kind::kChattering: return "Chattering";
        case IntegrationError::Kind::kNonFinite: return "NonFinite";
        case IntegrationError::Kind::kRefinementStalled: return "RefinementStalled";
    }
    return "Unknown";
}

namespace {

using Field = std::function<Vector(const Vector&)>;

Vector rk4_step(const Field& f, const Vector& x, double h) {
    const Vector k1 = f(x);
    const Vector k2 = f(x + 0.5 * h * k1);
    const Vector k3 = f(x + 0.5 * h * k2);
    const Vector k4 = f(x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Dormand-Prince 5(4). Returns the 5th-order solution; `error` receives the
// difference to the embedded 4th-order one.
Vector dopri_step(const Field& f, const Vector& x, double h, Vector* error) {
    constexpr double a21 = 1.0 / 5.0;
    constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                     a54 = -212.0 / 729.0;
    constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                     a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                     b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                     e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

    const Vector k1 = f(x);
    const Vector k2 = f(x + h * a21 * k1);
    const Vector k3 = f(x + h * (a31 * k1 + a32 * k2));
    const Vector k4 = f(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 = f(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Vector next = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    if (error != nullptr) {
        const Vector k7 = f(next);
        *error = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    }
    return next;
}

bool crossed(double h, double side, double tol) { return std::abs(h) <= tol || h * side < 0.0; }

}  // namespace

PhaseTrajectory flow_to_guard(const Domain& domain, const Vector& x0, const Vector& beta,
                              const IntegratorConfig& cfg) {
    cfg.validate();
    using Kind = IntegrationError::Kind;
    if (x0.size() != domain.state_dim) {
        throw DimensionError("flow_to_guard: initial state has size " + std::to_string(x0.size()) +
                             ", domain " + domain.name + " expects " +
                             std::to_string(domain.state_dim));
    }
    if (beta.size() != domain.param_dim) {
        throw DimensionError("flow_to_guard: parameter vector has size " +
                             std::to_string(beta.size()) + ", domain " + domain.name +
                             " expects " + std::to_string(domain.param_dim));
    }
    if (!x0.allFinite()) {
        throw IntegrationError(Kind::kNonFinite, "initial state is not finite");
    }

    const Field field = [&](const Vector& x) { return domain.vector_field(x, beta); };
    const bool adaptive = cfg.scheme == StepScheme::kDormandPrince;
    auto single_step = [&](const Vector& x, double h) {
        return adaptive ? dopri_step(field, x, h, nullptr) : rk4_step(field, x, h);
    };

    const double h0 = domain.guard(x0);
    if (std::abs(h0) <= cfg.guard_tol) {
        std::ostringstream os;
        os << "initial state lies on the exit guard (|H| = " << std::abs(h0) << ")";
        throw IntegrationError(Kind::kStartOnGuard, os.str());
    }
    const double side = h0 > 0.0 ? 1.0 : -1.0;

    PhaseTrajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(x0);

    Vector x = x0;
    double t = 0.0;
    double guard_value = h0;
    double guard_min = h0;
    double guard_max = h0;
    double step = cfg.base_step;

    while (true) {
        if (t >= cfg.max_phase_duration) {
            std::ostringstream os;
            os << "no guard crossing within " << cfg.max_phase_duration << " time units";
            throw IntegrationError(Kind::kNoCrossing, os.str());
        }
        double h = std::min(adaptive ? step : cfg.base_step, cfg.max_phase_duration - t);
        Vector candidate;
        double candidate_guard = 0.0;
        double next_step = step;

        for (int halvings = 0;; ++halvings) {
            if (adaptive) {
                Vector err;
                candidate = dopri_step(field, x, h, &err);
                double norm = 0.0;
                for (Eigen::Index j = 0; j < x.size(); ++j) {
                    const double scale =
                        cfg.adaptive_abs_tol +
                        cfg.adaptive_rel_tol * std::max(std::abs(x(j)), std::abs(candidate(j)));
                    norm = std::max(norm, std::abs(err(j)) / scale);
                }
                if (!std::isfinite(norm)) {
                    throw IntegrationError(Kind::kNonFinite, "state blew up");
                }
                if (norm > 1.0 && h > 1e-14 * std::max(1.0, t)) {
                    h *= std::max(0.2, 0.9 * std::pow(norm, -0.2));
                    continue;
                }
                next_step = h * std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(norm, 1e-10), -0.2)));
            } else {
                candidate = rk4_step(field, x, h);
            }
            if (!candidate.allFinite()) {
                throw IntegrationError(Kind::kNonFinite, "state blew up");
            }
            candidate_guard = domain.guard(candidate);
            const double range = std::max(guard_max - guard_min, std::abs(h0));
            if (std::abs(candidate_guard - guard_value) <= cfg.max_guard_change_fraction * range ||
                halvings >= cfg.max_step_halvings) {
                break;
            }
            h *= 0.5;
        }

        if (crossed(candidate_guard, side, cfg.guard_tol)) {
            // Bisect the step length between the last accepted state and the
            // crossing. Refinement continues past |H| <= guard_tol until the
            // bracket reaches rounding, so the exit point is a smooth function
            // of the initial state (finite differences rely on this).
            double lo = 0.0;
            double hi = h;
            Vector exit = candidate;
            double exit_guard = candidate_guard;
            for (int iter = 0; iter < cfg.refine_max_iter; ++iter) {
                const double mid = 0.5 * (lo + hi);
                const Vector trial = single_step(x, mid);
                const double g = domain.guard(trial);
                if (g * side <= 0.0) {
                    hi = mid;
                    exit = trial;
                    exit_guard = g;
                } else {
                    lo = mid;
                }
                if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, t)) {
                    break;
                }
            }
            if (std::abs(exit_guard) > cfg.guard_tol) {
                std::ostringstream os;
                os << "event refinement stalled at |H| = " << std::abs(exit_guard);
                throw IntegrationError(Kind::kRefinementStalled, os.str());
            }
            const double exit_time = t + hi;
            const Vector xdot = field(exit);
            const double rate = domain.guard_rate(exit, xdot);
            if (std::abs(rate) <= cfg.transversality_tol) {
                std::ostringstream os;
                os << "guard crossed tangentially (|dH/dt| = " << std::abs(rate) << ")";
                throw IntegrationError(Kind::kNonTransversal, os.str());
            }
            if (exit_time < cfg.min_phase_duration) {
                std::ostringstream os;
                os << "guard reached after " << exit_time << " < minimum phase duration "
                   << cfg.min_phase_duration;
                throw IntegrationError(Kind::kChattering, os.str());
            }
            traj.times.push_back(exit_time);
            traj.states.push_back(exit);
            traj.exit_state = std::move(exit);
            traj.exit_time = exit_time;
            traj.exit_guard_rate = rate;
            return traj;
        }

        t += h;
        x = std::move(candidate);
        guard_value = candidate_guard;
        guard_min = std::min(guard_min, guard_value);
        guard_max = std::max(guard_max, guard_value);
        step = next_step;
        traj.times.push_back(t);
        traj.states.push_back(x);
    }
}

PhaseStep advance_phase(const MultiDomainSystem& system, std::size_t phase,
                        const Vector& entry_section, const Vector& beta,
                        const IntegratorConfig& cfg) {
    const Domain& prev = system.domain(system.previous(phase));
    const Domain& current = system.domain(phase);
    try {
        const Vector pre_reset = system.entry_chart(phase).embed(entry_section);
        const Vector start = prev.reset(pre_reset);
        const PhaseTrajectory traj = flow_to_guard(current, start, beta, cfg);
        PhaseStep out;
        out.exit_state = traj.exit_state;
        out.exit_section = system.exit_chart(phase).project(traj.exit_state);
        out.beta = beta;
        out.duration = traj.exit_time;
        return out;
    } catch (const IntegrationError& e) {
        throw e.with_phase(static_cast<int>(phase));
    }
}

std::vector<CycleRecord> simulate_cycle(const MultiDomainSystem& system, const Vector& x_start,
                                        int n_cycles, const IntegratorConfig& cfg) {
    if (n_cycles < 0) {
        throw std::invalid_argument("simulate_cycle: negative cycle count");
    }
    const double trust = system.feedback() ? system.feedback()->trust_radius
                                           : std::numeric_limits<double>::infinity();
    std::vector<CycleRecord> records;
    records.reserve(static_cast<std::size_t>(n_cycles));
    Vector x = x_start;
    for (int c = 0; c < n_cycles; ++c) {
        CycleRecord record;
        for (std::size_t i = 0; i < system.size(); ++i) {
            const Vector beta = system.phase_parameter(i, x);
            if (beta.norm() > trust) {
                record.trust_radius_exceeded = true;
            }
            x = advance_phase(system, i, x, beta, cfg).exit_section;
            record.betas.push_back(beta);
        }
        record.section_state = x;
        records.push_back(std::move(record));
    }
    return records;
}

std::vector<CycleRecord> simulate_cycle(const MultiDomainSystem& system, const FeedbackLaw& law,
                                        const Vector& x_start, int n_cycles,
                                        const IntegratorConfig& cfg) {
    return simulate_cycle(closed_loop(system, law), x_start, n_cycles, cfg);
}

void write_trajectory_csv(std::ostream& out, const PhaseTrajectory& trajectory) {
    const Eigen::Index m = trajectory.states.empty() ? 0 : trajectory.states.front().size();
    out << "t";
    for (Eigen::Index j = 0; j < m; ++j) {
        out << ",x" << (j + 1);
    }
    out << '\n';
    const auto old_precision = out.precision(17);
    for (std::size_t r = 0; r < trajectory.states.size(); ++r) {
        out << trajectory.times[r];
        for (Eigen::Index j = 0; j < m; ++j) {
            out << ',' << trajectory.states[r](j);
        }
        out << '\n';
    }
    out.precision(old_precision);
}

}  // namespace hybrid_orbit
