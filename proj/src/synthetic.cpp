#include "hybrid_orbit/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "hybrid_orbit/errors.hpp"

namespace hybrid_orbit {

namespace {

struct Propagator {
    Matrix transition;  // e^{A t}
    Matrix integral;    // int_0^t e^{A s} ds
};

Propagator propagator(const Matrix& a, double t) {
    const Eigen::Index m = a.rows();
    Matrix block = Matrix::Zero(2 * m, 2 * m);
    block.topLeftCorner(m, m) = a;
    block.topRightCorner(m, m) = Matrix::Identity(m, m);
    const Matrix e = (block * t).exp();
    return Propagator{e.topLeftCorner(m, m), e.topRightCorner(m, m)};
}

Vector forcing(const SyntheticPhaseSpec& p, const Vector& beta) {
    return p.coupling.cols() == 0 ? p.offset : (p.offset + p.coupling * beta).eval();
}

// d(full state on the section) / d(reduced coordinates) for the eliminating chart.
Matrix embed_jacobian(const Vector& normal, int eliminated) {
    const Eigen::Index m = normal.size();
    Matrix e = Matrix::Zero(m, m - 1);
    for (Eigen::Index l = 0, a = 0; l < m; ++l) {
        if (l == eliminated) {
            continue;
        }
        e(l, a) = 1.0;
        e(eliminated, a) = -normal(l) / normal(eliminated);
        ++a;
    }
    return e;
}

Matrix projection(Eigen::Index m, int eliminated) {
    Matrix p = Matrix::Zero(m - 1, m);
    for (Eigen::Index l = 0, a = 0; l < m; ++l) {
        if (l != eliminated) {
            p(a++, l) = 1.0;
        }
    }
    return p;
}

void check_spec(const SyntheticPhaseSpec& p, std::size_t i, Eigen::Index m) {
    const std::string where = "synthetic phase " + std::to_string(i) + ": ";
    if (p.drift.rows() != m || p.drift.cols() != m || p.offset.size() != m ||
        p.coupling.rows() != m || p.normal.size() != m || p.reset.rows() != m ||
        p.reset.cols() != m || p.entry_state.size() != m) {
        throw std::invalid_argument(where + "inconsistent dimensions");
    }
    if (!(p.duration > 0.0)) {
        throw std::invalid_argument(where + "duration must be positive");
    }
    if (p.normal.norm() == 0.0) {
        throw std::invalid_argument(where + "zero guard normal");
    }
}

}  // namespace

Vector synthetic_flow(const SyntheticPhaseSpec& phase, const Vector& x0, const Vector& beta,
                      double t) {
    const Propagator prop = propagator(phase.drift, t);
    return prop.transition * x0 + prop.integral * forcing(phase, beta);
}

double synthetic_exit_time(const SyntheticPhaseSpec& phase, double guard_offset, const Vector& x0,
                           const Vector& beta, double scan_step, double tol) {
    const Vector n = phase.normal.normalized();
    auto h = [&](double t) { return n.dot(synthetic_flow(phase, x0, beta, t)) - guard_offset; };
    const Propagator step = propagator(phase.drift, scan_step);
    const Vector force = forcing(phase, beta);
    double t = 0.0;
    Vector x = x0;
    const double h0 = n.dot(x0) - guard_offset;
    const double side = h0 > 0.0 ? 1.0 : -1.0;
    constexpr double kHorizon = 100.0;
    while (t < kHorizon) {
        const Vector next = step.transition * x + step.integral * force;
        const double hn = n.dot(next) - guard_offset;
        if (hn * side <= 0.0) {
            double lo = t;
            double hi = t + scan_step;
            while (hi - lo > tol) {
                const double mid = 0.5 * (lo + hi);
                if (h(mid) * side <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        x = next;
        t += scan_step;
    }
    throw NumericalError("synthetic_exit_time: no crossing within the horizon");
}

SyntheticSystem assemble_synthetic(const std::string& name,
                                   const std::vector<SyntheticPhaseSpec>& specs) {
    if (specs.size() < 2) {
        throw std::invalid_argument("synthetic system needs at least two phases");
    }
    const Eigen::Index m = specs.front().drift.rows();
    if (m < 2) {
        throw std::invalid_argument("synthetic system needs state dimension >= 2");
    }
    const std::size_t n = specs.size();

    std::vector<SyntheticPhase> phases(n);
    for (std::size_t i = 0; i < n; ++i) {
        check_spec(specs[i], i, m);
        SyntheticPhase& ph = phases[i];
        ph.spec = specs[i];
        ph.spec.normal = specs[i].normal.normalized();
        const Vector& nrm = ph.spec.normal;
        const Vector zero_beta = Vector::Zero(ph.spec.coupling.cols());

        ph.exit_state = synthetic_flow(ph.spec, ph.spec.entry_state, zero_beta, ph.spec.duration);
        ph.guard_offset = nrm.dot(ph.exit_state);
        ph.exit_velocity = ph.spec.drift * ph.exit_state + ph.spec.offset;

        const std::string where = name + " phase " + std::to_string(i) + ": ";
        const double rate = nrm.dot(ph.exit_velocity);
        ph.guard_angle_deg =
            std::acos(std::min(1.0, std::abs(rate) / ph.exit_velocity.norm())) * 180.0 /
            std::numbers::pi;
        if (!(rate > 0.0) || ph.guard_angle_deg > kMaxGuardAngleDeg) {
            std::ostringstream os;
            os << where << "exit is not transversal (angle " << ph.guard_angle_deg
               << " deg, guard rate " << rate << ")";
            throw std::invalid_argument(os.str());
        }
        // The guard must stay strictly ahead until the engineered exit time.
        constexpr int kSamples = 2000;
        const double dt = ph.spec.duration / kSamples;
        const Propagator step = propagator(ph.spec.drift, dt);
        Vector x = ph.spec.entry_state;
        const double entry_gap = nrm.dot(x) - ph.guard_offset;
        if (!(entry_gap < -1e-6)) {
            throw std::invalid_argument(where + "entry state is not strictly inside the guard");
        }
        for (int s = 1; s < kSamples; ++s) {
            x = step.transition * x + step.integral * ph.spec.offset;
            if (!(nrm.dot(x) - ph.guard_offset < 0.0)) {
                throw std::invalid_argument(where + "flow reaches the guard before the exit time");
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const SyntheticPhase& succ = phases[(i + 1) % n];
        phases[i].reset_offset = succ.spec.entry_state - phases[i].spec.reset * phases[i].exit_state;
    }

    std::vector<Domain> domains;
    std::vector<SectionChart> charts;
    for (std::size_t i = 0; i < n; ++i) {
        const SyntheticPhase& ph = phases[i];
        const int p = static_cast<int>(ph.spec.coupling.cols());
        Domain d;
        d.name = name + "/" + std::to_string(i);
        d.state_dim = static_cast<int>(m);
        d.control_dim = static_cast<int>(m);
        d.param_dim = p;
        d.drift = [a = ph.spec.drift, b = ph.spec.offset](const Vector& x) -> Vector {
            return a * x + b;
        };
        d.input_map = [m](const Vector&) -> Matrix { return Matrix::Identity(m, m); };
        d.controller = [w = ph.spec.coupling, m](const Vector&, const Vector& beta) -> Vector {
            return w.cols() == 0 ? Vector::Zero(m).eval() : (w * beta).eval();
        };
        d.nominal_controller = [m](const Vector&) -> Vector { return Vector::Zero(m); };
        d.guard = [nrm = ph.spec.normal, c = ph.guard_offset](const Vector& x) {
            return nrm.dot(x) - c;
        };
        d.guard_gradient = [nrm = ph.spec.normal](const Vector&) -> Vector { return nrm; };
        d.reset = [r = ph.spec.reset, off = ph.reset_offset](const Vector& x) -> Vector {
            return r * x + off;
        };
        charts.push_back(SectionChart::eliminating(d.guard, ph.exit_state, d.guard_gradient));
        domains.push_back(std::move(d));
    }
    MultiDomainSystem system(std::move(domains), charts);

    PeriodicOrbit orbit;
    for (std::size_t i = 0; i < n; ++i) {
        orbit.fixed_points.push_back(charts[i].project(phases[i].exit_state));
        orbit.phase_durations.push_back(phases[i].spec.duration);
    }

    std::vector<PhaseJacobians> analytic;
    for (std::size_t i = 0; i < n; ++i) {
        const SyntheticPhase& ph = phases[i];
        const SyntheticPhase& prev = phases[(i + n - 1) % n];
        const int j_in = charts[(i + n - 1) % n].eliminated_index();
        const int j_out = charts[i].eliminated_index();
        const Propagator prop = propagator(ph.spec.drift, ph.spec.duration);
        const Vector& v = ph.exit_velocity;
        // Moving exit time: ds = (I - v n' / n'v) dx(T).
        const Matrix correction =
            Matrix::Identity(m, m) - v * ph.spec.normal.transpose() / ph.spec.normal.dot(v);
        const Matrix out = projection(m, j_out) * correction;
        PhaseJacobians jac;
        jac.phase = i;
        jac.A = out * prop.transition * prev.spec.reset * embed_jacobian(prev.spec.normal, j_in);
        jac.F = out * prop.integral * ph.spec.coupling;
        analytic.push_back(std::move(jac));
    }

    return SyntheticSystem{name, std::move(phases), std::move(system), std::move(orbit),
                           std::move(analytic)};
}

namespace {

Matrix mat3(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), 3);
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) {
            m(i, j++) = v;
        }
        ++i;
    }
    return m;
}

Vector vec3(double a, double b, double c) { return Vector{{a, b, c}}; }

std::vector<SyntheticPhaseSpec> unstable_templates(double reset_gain) {
    const Matrix w1 = mat3({{0.6, 0.1, 0.0}, {0.0, 0.5, 0.2}, {0.1, 0.0, 0.4}});
    const Matrix w2 = mat3({{0.5, 0.0, 0.1}, {0.2, 0.6, 0.0}, {0.0, 0.1, 0.5}});
    return {
        SyntheticPhaseSpec{mat3({{0.3, 0.8, 0.0}, {-0.6, 0.2, 0.1}, {0.0, 0.2, 0.1}}),
                           vec3(1.0, 0.3, -0.2), w1, vec3(1.0, 0.3, 0.1),
                           reset_gain * mat3({{1.1, 0.9, 0.0}, {-0.6, 1.4, 0.2}, {0.1, 0.0, 1.0}}),
                           vec3(0.0, 0.2, 0.1), 1.0},
        SyntheticPhaseSpec{mat3({{0.2, -0.7, 0.1}, {0.5, 0.3, 0.0}, {0.1, 0.0, 0.2}}),
                           vec3(0.2, 1.0, 0.3), w2, vec3(0.2, 1.0, -0.3),
                           reset_gain * mat3({{1.3, -0.5, 0.1}, {0.7, 1.1, 0.0}, {0.0, 0.2, 1.0}}),
                           vec3(0.5, -0.3, 0.2), 0.8},
    };
}

std::vector<SyntheticPhaseSpec> stable_templates() {
    constexpr double g = 1.6;
    return {
        SyntheticPhaseSpec{mat3({{-0.2, 0.4, 0.0}, {-0.4, -0.1, 0.1}, {0.0, 0.1, -0.2}}),
                           vec3(1.0, 0.2, 0.1),
                           mat3({{0.6, 0.1, 0.0}, {0.0, 0.5, 0.2}, {0.1, 0.0, 0.4}}),
                           vec3(1.0, 0.2, -0.2),
                           g * mat3({{0.9, 0.4, 0.0}, {-0.3, 0.9, 0.1}, {0.0, 0.1, 0.9}}),
                           vec3(0.0, 0.1, 0.0), 0.9},
        SyntheticPhaseSpec{mat3({{-0.1, -0.3, 0.1}, {0.3, -0.2, 0.0}, {0.1, 0.0, -0.1}}),
                           vec3(0.1, 1.0, 0.2),
                           mat3({{0.5, 0.0, 0.1}, {0.2, 0.6, 0.0}, {0.0, 0.1, 0.5}}),
                           vec3(0.1, 1.0, 0.3),
                           g * mat3({{0.9, -0.3, 0.1}, {0.4, 0.8, 0.0}, {0.0, 0.1, 0.9}}),
                           vec3(0.4, -0.2, 0.1), 0.7},
        SyntheticPhaseSpec{mat3({{-0.1, 0.0, 0.3}, {0.0, -0.2, 0.1}, {-0.3, 0.1, -0.2}}),
                           vec3(0.2, -0.1, 1.0),
                           mat3({{0.4, 0.1, 0.0}, {0.0, 0.5, 0.1}, {0.2, 0.0, 0.6}}),
                           vec3(-0.2, 0.1, 1.0),
                           g * mat3({{0.9, 0.2, 0.0}, {0.0, 0.9, 0.2}, {0.1, 0.0, 0.9}}),
                           vec3(0.1, 0.3, -0.3), 0.8},
    };
}

std::vector<SyntheticPhaseSpec> family_templates(const std::string& family) {
    if (family == "stable") {
        return stable_templates();
    }
    if (family == "unstable") {
        return unstable_templates(1.5);
    }
    if (family == "boundary") {
        // Guard normals tilted to 78 degrees from the exit velocity.
        auto t = unstable_templates(1.0);
        t[0].normal = vec3(0.2951, -0.0983, 0.9504);
        t[1].normal = vec3(0.0092, -0.0821, 0.9966);
        return t;
    }
    if (family == "uncoupled") {
        auto t = unstable_templates(1.5);
        for (auto& p : t) {
            p.coupling.setZero();
        }
        return t;
    }
    throw InputError("unknown synthetic family '" + family +
                     "' (expected stable, unstable, boundary or uncoupled)");
}

}  // namespace

SyntheticSystem build_synthetic(int n_domains, const std::string& family) {
    if (n_domains < 2) {
        throw std::invalid_argument("build_synthetic: n_domains must be at least 2");
    }
    const auto templates = family_templates(family);
    std::vector<SyntheticPhaseSpec> specs;
    for (int i = 0; i < n_domains; ++i) {
        specs.push_back(templates[static_cast<std::size_t>(i) % templates.size()]);
    }
    return assemble_synthetic(family + "-" + std::to_string(n_domains), specs);
}

SyntheticSystem build_synthetic(const std::string& catalog_name) {
    const auto dash = catalog_name.rfind('-');
    if (dash == std::string::npos || dash + 1 >= catalog_name.size()) {
        throw InputError("synthetic system name '" + catalog_name +
                         "' must look like <family>-<n>, e.g. stable-3");
    }
    int n = 0;
    try {
        std::size_t used = 0;
        n = std::stoi(catalog_name.substr(dash + 1), &used);
        if (used != catalog_name.size() - dash - 1) {
            throw std::invalid_argument("trailing characters");
        }
    } catch (const std::exception&) {
        throw InputError("synthetic system name '" + catalog_name + "' has no domain count");
    }
    if (n < 2) {
        throw InputError("synthetic system '" + catalog_name + "' needs at least 2 domains");
    }
    return build_synthetic(n, catalog_name.substr(0, dash));
}

std::vector<std::string> synthetic_catalog() {
    return {"stable-3", "unstable-2", "boundary-2", "uncoupled-2"};
}

Vector synthetic_partial_map(const SyntheticSystem& sys, std::size_t phase, const Vector& x_prev,
                             const Vector& beta) {
    const std::size_t n = sys.phases.size();
    const std::size_t prev = (phase + n - 1) % n;
    const SyntheticPhase& ph = sys.phases.at(phase);
    const SyntheticPhase& before = sys.phases[prev];
    const Vector pre = sys.system.exit_chart(prev).embed(x_prev);
    const Vector start = before.spec.reset * pre + before.reset_offset;
    const double t = synthetic_exit_time(ph.spec, ph.guard_offset, start, beta);
    return sys.system.exit_chart(phase).project(synthetic_flow(ph.spec, start, beta, t));
}

}  // namespace hybrid_orbit
