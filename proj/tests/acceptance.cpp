// Acceptance run: one PASS/FAIL line per criterion with the measured values.
// Exits nonzero when any criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hybrid_orbit/cli.hpp"
#include "hybrid_orbit/impacts.hpp"
#include "hybrid_orbit/integrator.hpp"
#include "hybrid_orbit/numerics.hpp"
#include "hybrid_orbit/paper_fixture.hpp"
#include "hybrid_orbit/poincare.hpp"
#include "hybrid_orbit/synthesis.hpp"
#include "hybrid_orbit/synthetic.hpp"
#include "test_util.hpp"

using namespace hybrid_orbit;
using namespace test_util;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    // Records a sub-check; the criterion passes only if all of them do.
    void require(bool ok, const std::string& label) {
        if (!ok) {
            pass = false;
            detail << " [" << label << " FAILED]";
        }
    }
};

std::string g(double v, int digits = 6) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

// Published numbers, as printed.
const std::vector<Complex> kPrintedEigenvalues{{2.8271, 0.0}, {-7.7955, 2.2193}, {-7.7955, -2.2193}};
constexpr double kPrintedRho = 8.1053;
constexpr double kPrintedClosedRho = 0.0173;
constexpr double kPrintedRemarkProduct = 1.0453;
constexpr double kPrintedRemarkFactor = 0.75;

Outcome eigen_reproduction() {
    Outcome o;
    const PaperFixture f = builtin_paper_fixture();
    std::vector<Complex> computed = eigenvalues(f.a).values;
    double worst = 0.0;
    for (const Complex& z : kPrintedEigenvalues) {
        auto nearest = std::min_element(computed.begin(), computed.end(), [&](auto x, auto y) {
            return std::abs(x - z) < std::abs(y - z);
        });
        worst = std::max(worst, std::abs(*nearest - z));
        computed.erase(nearest);
    }
    const double rho = spectral_radius(f.a);
    o.detail << "max eigenvalue deviation " << g(worst, 3) << ", rho(A) = " << g(rho);
    o.require(worst <= 1e-3, "eigenvalues");
    o.require(std::abs(rho - kPrintedRho) <= 1e-3, "rho");
    return o;
}

Outcome composition() {
    Outcome o;
    const PaperFixture f = builtin_paper_fixture();
    const double d = max_abs_entry(f.a2 * f.a1 - f.a);
    o.detail << "max|A2 A1 - A| = " << g(d, 3) << " (tol 5e-3)";
    o.require(d <= 5e-3, "composition");
    return o;
}

Outcome remark_instability() {
    Outcome o;
    const PaperFixture f = builtin_paper_fixture();
    const double r1 = spectral_radius(f.remark_a1d);
    const double r2 = spectral_radius(f.remark_a2d);
    const double rp = spectral_radius(f.remark_a2d * f.remark_a1d);
    o.detail << "rho(product) = " << g(rp) << ", factor radii " << g(r1, 10) << ", " << g(r2, 10)
             << " vs printed " << kPrintedRemarkFactor;
    o.require(std::abs(rp - kPrintedRemarkProduct) <= 1e-4, "product radius");
    o.require(std::abs(r1 - kPrintedRemarkFactor) <= 1e-10 &&
                  std::abs(r2 - kPrintedRemarkFactor) <= 1e-10,
              "factor radius 0.75 (triangular factors have radius 0.7)");
    return o;
}

Outcome scale_factor_reproduction() {
    Outcome o;
    const PaperFixture f = builtin_paper_fixture();
    std::vector<PhaseJacobians> jacs(2);
    jacs[0].A = f.a1;
    jacs[0].F = f.f1;
    jacs[1].A = f.a2;
    jacs[1].F = f.f2;
    const GainSet gains = scale_factor_gains(jacs, 1.0);
    const std::vector<Matrix> d = designed_jacobians(jacs, gains);
    const Matrix ad = d[1] * d[0];
    const double e1 = max_abs_entry(d[0] - f.a1d);
    const double e2 = max_abs_entry(d[1] - f.a2d);
    const double corner = std::abs(d[0](2, 0) - 1.0 / 3.0);
    Eigen::Index wi = 0;
    Eigen::Index wj = 0;
    const double k1 = (gains.gains[0] - f.k1).cwiseAbs().maxCoeff(&wi, &wj);
    const double k2 = max_abs_entry(gains.gains[1] - f.k2);
    const double ead = max_abs_entry(ad - f.ad);
    const double rho = spectral_radius(ad);
    o.detail << "A1d " << g(e1, 3) << ", A2d " << g(e2, 3) << ", |A1d(3,1)-1/3| " << g(corner, 3)
             << ", K1 " << g(k1, 4) << " at (" << wi + 1 << "," << wj + 1 << ") computed "
             << g(gains.gains[0](wi, wj), 5) << " printed " << f.k1(wi, wj) << ", K2 " << g(k2, 3)
             << ", Ad " << g(ead, 3) << ", rho(Ad) " << g(rho);
    o.require(e1 <= 1e-3 && e2 <= 1e-3, "designed Jacobians");
    o.require(corner <= 1e-12, "A1d(3,1)");
    o.require(k1 <= 2e-2, "K1");
    o.require(k2 <= 2e-2, "K2");
    o.require(ead <= 1e-3, "Ad");
    o.require(std::abs(rho - kPrintedClosedRho) <= 1e-3, "rho(Ad)");
    return o;
}

Matrix random_symmetric_contraction(std::mt19937_64& rng, Eigen::Index n) {
    const Matrix b = random_matrix(rng, n, n);
    const Matrix s = 0.5 * (b + b.transpose());
    const double target = std::uniform_real_distribution<double>(0.05, 0.999)(rng);
    return s * (target / spectral_radius(s));
}

Outcome symmetric_suite() {
    Outcome o;
    std::mt19937_64 rng(1001);
    int failures = 0;
    int cert_failures = 0;
    double worst_rho = 0.0;
    double worst_norm_gap = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int len = random_int(rng, 2, 5);
        const Eigen::Index n = random_int(rng, 2, 6);
        std::vector<Matrix> chain;
        for (int i = 0; i < len; ++i) {
            chain.push_back(random_symmetric_contraction(rng, n));
            worst_norm_gap =
                std::max(worst_norm_gap, std::abs(spectral_norm(chain.back()) -
                                                  spectral_radius(chain.back())));
        }
        const double rho = spectral_radius(compose_jacobians(chain));
        worst_rho = std::max(worst_rho, rho);
        failures += rho < 1.0 ? 0 : 1;
        cert_failures += certify_symmetric_contraction(chain).pass ? 0 : 1;
    }
    o.detail << "1000 chains, " << failures << " with rho >= 1 (max rho " << g(worst_rho)
             << "), certificate rejected " << cert_failures << ", max | ||M||2 - rho(M) | "
             << g(worst_norm_gap, 3);
    o.require(failures == 0, "product radius");
    o.require(cert_failures == 0, "certificate");
    o.require(worst_norm_gap <= 1e-10, "norm equals radius");
    return o;
}

Outcome entry_bound_suite() {
    Outcome o;
    std::mt19937_64 rng(1002);
    int failures = 0;
    double worst_rho = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int len = random_int(rng, 2, 5);
        const Eigen::Index k = random_int(rng, 2, 6);
        std::vector<Matrix> chain;
        for (int i = 0; i < len; ++i) {
            // every third trial all-positive, the worst case for the bound
            Matrix m = random_matrix(rng, k, k);
            if (trial % 3 == 0) {
                m = m.cwiseAbs();
            }
            const double top = (trial % 2 == 0) ? 1.0 : std::uniform_real_distribution<double>(0.1, 1.0)(rng);
            chain.push_back(m * (top * 0.99 / static_cast<double>(k) / max_abs_entry(m)));
        }
        const double rho = spectral_radius(compose_jacobians(chain));
        worst_rho = std::max(worst_rho, rho);
        failures += rho < 1.0 ? 0 : 1;
    }
    const int k = 3;
    const Matrix flat = Matrix::Constant(k, k, 1.0 / k);
    const double boundary = spectral_radius(flat * flat);
    o.detail << "1000 chains, " << failures << " with rho >= 1 (max rho " << g(worst_rho)
             << "), all-1/k pair rho = " << g(boundary, 15);
    o.require(failures == 0, "product radius");
    o.require(std::abs(boundary - 1.0) <= 1e-10, "boundary example");
    return o;
}

Outcome jacobian_oracle() {
    Outcome o;
    const IntegratorConfig cfg;
    double worst = 0.0;
    std::string where;
    for (const auto& name : synthetic_catalog()) {
        const SyntheticSystem sys = build_synthetic(name);
        const auto fd = all_phase_jacobians(sys.system, sys.orbit, cfg);
        for (std::size_t i = 0; i < fd.size(); ++i) {
            const auto rel = [](const Matrix& m, const Matrix& ref) {
                const double scale = max_abs_entry(ref);
                return scale > 0.0 ? max_abs_entry(m - ref) / scale : max_abs_entry(m);
            };
            const double ea = rel(fd[i].A, sys.analytic[i].A);
            const double ef = rel(fd[i].F, sys.analytic[i].F);
            if (std::max(ea, ef) > worst) {
                worst = std::max(ea, ef);
                where = name + " phase " + std::to_string(i + 1) + (ea >= ef ? " A" : " F");
            }
        }
    }
    o.detail << synthetic_catalog().size() << " profiles, worst relative deviation " << g(worst, 3)
             << " (" << where << ")";
    o.require(worst <= 1e-4, "relative deviation");
    return o;
}

Outcome closed_loop_contraction() {
    Outcome o;
    const IntegratorConfig cfg;
    const SyntheticSystem sys = build_synthetic("stable-3");
    const PeriodicOrbit refined = refine_fixed_point(sys.system, sys.orbit.fixed_points.back(), cfg);
    const auto jacs = all_phase_jacobians(sys.system, refined, cfg);
    auto orbit = std::make_shared<PeriodicOrbit>(refined);
    const Vector x_star = refined.fixed_points.back();

    std::vector<std::pair<std::string, GainSet>> designs;
    designs.emplace_back("symmetric", symmetric_matrix_gains(jacs, Matrix::Zero(2, 2)));
    designs.emplace_back("scale", scale_factor_gains(jacs, 1.0));
    std::vector<Matrix> q;
    std::vector<Matrix> r;
    for (const auto& j : jacs) {
        q.push_back(Matrix::Identity(j.A.rows(), j.A.rows()));
        r.push_back(Matrix::Identity(j.F.cols(), j.F.cols()));
    }
    designs.emplace_back("dlqr", dlqr_gains(jacs, q, r));

    std::mt19937_64 rng(1008);
    Vector dir = random_vector(rng, x_star.size());
    dir.normalize();
    const Vector x0 = x_star + 1e-2 * dir;
    for (const auto& [name, gains] : designs) {
        const double rho = stability_report(jacs, gains).product_radius;
        const auto records =
            simulate_cycle(sys.system, FeedbackLaw{gains.gains, orbit}, x0, 20, cfg);
        std::vector<double> errors{(x0 - x_star).norm()};
        for (const auto& rec : records) {
            errors.push_back((rec.section_state - x_star).norm());
        }
        constexpr double kFloor = 1e-12;
        const double rate = geometric_rate(errors, kFloor);
        const auto fitted = std::find_if(errors.begin(), errors.end(),
                                         [&](double e) { return !(e > kFloor); }) -
                            errors.begin();
        const double ratio = errors.back() / errors.front();
        o.detail << (name == "symmetric" ? "" : "; ") << name << " rate " << g(rate, 3)
                 << " over " << fitted << " cycles above " << kFloor << " (rho(Ad) " << g(rho, 3)
                 << "), final/initial " << g(ratio, 3);
        o.require(rate <= rho + 0.1, name + " rate");
        o.require(ratio < 1e-6, name + " final error");
    }
    return o;
}

// Textbook Riccati residual with the gain solved by hand-written elimination.
double riccati_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                        const Matrix& p) {
    const Matrix bpb = b.transpose() * p * b + r;
    const Matrix k = gauss_solve(bpb, b.transpose() * p * a);
    return max_abs_entry(a.transpose() * p * a - a.transpose() * p * b * k + q - p);
}

Outcome dare_suite() {
    Outcome o;
    std::mt19937_64 rng(1009);
    double worst_residual = 0.0;
    double worst_rho = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = random_int(rng, 2, 6);
        const Eigen::Index m = random_int(rng, 1, n);
        const Matrix a = random_matrix(rng, n, n, 1.5);
        const Matrix b = random_matrix(rng, n, m);
        const Matrix q = Matrix::Identity(n, n);
        const Matrix r = Matrix::Identity(m, m);
        const Matrix p = dare_solve(a, b, q, r);
        worst_residual = std::max(worst_residual, riccati_residual(a, b, q, r, p));
        worst_rho = std::max(worst_rho, spectral_radius(a - b * dlqr_gain(a, b, q, r)));
    }
    double lyap = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = random_int(rng, 2, 5);
        Matrix a = random_matrix(rng, n, n);
        a *= 0.9 / std::max(spectral_radius(a), 1e-3);
        const Matrix l = random_matrix(rng, n, n);
        const Matrix q = l * l.transpose() + Matrix::Identity(n, n);
        const Matrix p = dare_solve(a, Matrix::Zero(n, 1), q, Matrix::Identity(1, 1));
        lyap = std::max(lyap, max_abs_entry(p - kronecker_lyapunov(a, q)));
    }
    o.detail << "100 instances: max residual " << g(worst_residual, 3) << ", max rho(A-FK) "
             << g(worst_rho) << "; Lyapunov case max deviation " << g(lyap, 3);
    o.require(worst_residual < 1e-8, "residual");
    o.require(worst_rho < 1.0, "closed loop");
    o.require(lyap <= 1e-9, "Lyapunov");
    return o;
}

double penrose_defect(const Matrix& m, const Matrix& x) {
    return std::max({max_abs_entry(m * x * m - m), max_abs_entry(x * m * x - x),
                     max_abs_entry((m * x).transpose() - m * x),
                     max_abs_entry((x * m).transpose() - x * m)});
}

Outcome pinv_axioms() {
    Outcome o;
    std::mt19937_64 rng(1010);
    double worst = 0.0;
    int deficient = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index rows = random_int(rng, 1, 7);
        const Eigen::Index cols = random_int(rng, 1, 7);
        Matrix m = random_matrix(rng, rows, cols);
        if (trial % 3 == 0 && std::min(rows, cols) > 1) {
            // rank-deficient: product of thinner factors
            const Eigen::Index rank = random_int(rng, 1, static_cast<int>(std::min(rows, cols)) - 1);
            m = random_matrix(rng, rows, rank) * random_matrix(rng, rank, cols);
            ++deficient;
        }
        worst = std::max(worst, penrose_defect(m, pinv(m)));
    }
    const PaperFixture f = builtin_paper_fixture();
    const double published = penrose_defect(f.f1, pinv(f.f1));
    o.detail << "100 matrices (" << deficient << " rank-deficient): max defect " << g(worst, 3)
             << "; F1 defect " << g(published, 3);
    o.require(worst <= 1e-10, "random");
    o.require(published <= 1e-8, "F1");
    return o;
}

Outcome impact_map() {
    Outcome o;
    std::mt19937_64 rng(1011);
    double constraint = 0.0;
    double agreement = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = random_int(rng, 2, 8);
        const Eigen::Index c = random_int(rng, 1, static_cast<int>(n) - 1);
        const Matrix l = random_matrix(rng, n, n);
        const Matrix d = l * l.transpose() + 0.5 * Matrix::Identity(n, n);
        const Matrix e = random_matrix(rng, c, n);
        const Vector v = random_vector(rng, n, 3.0);
        const ImpactResult res = rigid_impact(ImpactModel{d, e, Relabeling::identity(static_cast<int>(n))}, v);
        constraint = std::max(constraint, max_abs_entry(e * res.velocity));
        // Schur elimination: F = -(E D^-1 E')^-1 E v, v+ = v + D^-1 E' F
        const Matrix dinv_et = gauss_solve(d, e.transpose());
        const Vector impulse = -gauss_solve(e * dinv_et, e * v).col(0);
        const Vector after = v + dinv_et * impulse;
        agreement = std::max({agreement, max_abs_entry(after - res.velocity),
                              max_abs_entry(impulse - res.impulse)});
    }
    const double mass = 2.5;
    const ImpactResult point = rigid_impact(
        ImpactModel{mass * Matrix::Identity(2, 2), Matrix{{0.0, 1.0}}, Relabeling::identity(2)},
        Vector{{1.5, -3.0}});
    const bool exact = point.velocity(0) == 1.5 && point.velocity(1) == 0.0 &&
                       point.impulse(0) == mass * 3.0;
    o.detail << "max |E qdot+| " << g(constraint, 3) << ", block vs Schur " << g(agreement, 3)
             << ", point mass " << (exact ? "exact" : "inexact");
    o.require(constraint <= 1e-10, "constraint");
    o.require(agreement <= 1e-9, "agreement");
    o.require(exact, "point mass");
    return o;
}

int cli_exit_code(const std::vector<std::string>& args) {
    if (const char* exe = std::getenv("HYBRID_ORBIT_CLI")) {
        std::string cmd = exe;
        for (const auto& a : args) {
            cmd += " '" + a + "'";
        }
        cmd += " >/dev/null 2>&1";
        const int raw = std::system(cmd.c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    }
    std::vector<const char*> argv{"hybrid-orbit"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome verify_paper_cli() {
    Outcome o;
    const int code = cli_exit_code({"verify-paper"});
    const PaperFixture stock = builtin_paper_fixture();
    const VerifyReport report = verify_paper(stock);
    std::vector<std::string> red;
    for (const auto& c : report.checks) {
        if (!c.pass) {
            red.push_back(c.name);
        }
    }
    PaperFixture scratch = stock;
    int total = 0;
    int confined = 0;
    int detected = 0;
    int masked = 0;
    for (const auto& e : fixture_entries(scratch)) {
        for (double delta : {0.1, -0.1}) {
            const FaultInjection fault = inject_fault(stock, e.name, delta);
            ++total;
            confined += fault.confined() ? 1 : 0;
            detected += fault.detected() ? 1 : 0;
            masked += fault.flipped.empty() ? 1 : 0;
        }
    }
    o.detail << "exit code " << code << ", red on stock fixture:";
    for (const auto& r : red) {
        o.detail << ' ' << r;
    }
    o.detail << "; corruption sweep " << total << " runs, confined " << confined << ", detected "
             << detected << ", no visible flip (already red) " << masked;
    o.require(code == 0, "exit 0 with all checks green");
    o.require(confined == total && detected == total, "corruption flips affected checks");
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"eigen reproduction", eigen_reproduction},
        {"two-phase composition", composition},
        {"per-phase contraction, unstable product", remark_instability},
        {"scale-factor reproduction", scale_factor_reproduction},
        {"symmetric-chain property suite", symmetric_suite},
        {"entry-bound property suite", entry_bound_suite},
        {"Jacobian oracle equivalence", jacobian_oracle},
        {"closed-loop contraction", closed_loop_contraction},
        {"DARE certification", dare_suite},
        {"Moore-Penrose axioms", pinv_axioms},
        {"impact map", impact_map},
        {"verify-paper and fault injection", verify_paper_cli},
    };
    int failed = 0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "threw: " << e.what();
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << i + 1 << "  "
                  << criteria[i].first << ": " << o.detail.str() << std::endl;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed in "
              << g(secs, 3) << " s" << std::endl;
    return failed == 0 ? 0 : 1;
}
