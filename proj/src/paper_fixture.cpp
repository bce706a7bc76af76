#include "hybrid_orbit/paper_fixture.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "hybrid_orbit/errors.hpp"
#include "hybrid_orbit/poincare.hpp"
#include "hybrid_orbit/synthesis.hpp"

namespace hybrid_orbit {

namespace {

#include "paper_fixture_data.inc"

double number(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw InputError(where + key + ": expected a number");
    }
    return j.at(key).get<double>();
}

Matrix matrix(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        throw InputError(where + key + ": missing");
    }
    return matrix_from_json(j.at(key), where + key);
}

}  // namespace

PaperFixture paper_fixture_from_json(const Json& j) {
    if (!j.is_object()) {
        throw InputError("paper fixture: expected a JSON object");
    }
    PaperFixture f;
    f.a1 = matrix(j, "A1", "");
    f.a2 = matrix(j, "A2", "");
    f.a = matrix(j, "A", "");
    if (!j.contains("eigenvalues") || !j.at("eigenvalues").is_array()) {
        throw InputError("eigenvalues: expected an array of {re, im}");
    }
    for (std::size_t i = 0; i < j.at("eigenvalues").size(); ++i) {
        const Json& z = j.at("eigenvalues")[i];
        const std::string where = "eigenvalues[" + std::to_string(i) + "].";
        f.eigenvalues.emplace_back(number(z, "re", where), number(z, "im", where));
    }
    f.rho_a = number(j, "rho_A", "");
    f.f1 = matrix(j, "F1", "");
    f.f2 = matrix(j, "F2", "");
    f.k1 = matrix(j, "K1", "");
    f.k2 = matrix(j, "K2", "");
    f.a1d = matrix(j, "A1d", "");
    f.a2d = matrix(j, "A2d", "");
    f.ad = matrix(j, "Ad", "");
    f.rho_ad = number(j, "rho_Ad", "");
    if (!j.contains("remark1") || !j.at("remark1").is_object()) {
        throw InputError("remark1: expected an object");
    }
    const Json& r = j.at("remark1");
    f.remark_a1d = matrix(r, "A1d", "remark1.");
    f.remark_a2d = matrix(r, "A2d", "remark1.");
    f.remark_rho_factor = number(r, "rho_factor", "remark1.");
    f.remark_rho_product = number(r, "rho_product", "remark1.");
    return f;
}

Json to_json(const PaperFixture& f) {
    Json eigs = Json::array();
    for (const auto& z : f.eigenvalues) {
        eigs.push_back(complex_to_json(z));
    }
    return Json{{"A1", matrix_to_json(f.a1)},
                {"A2", matrix_to_json(f.a2)},
                {"A", matrix_to_json(f.a)},
                {"eigenvalues", eigs},
                {"rho_A", f.rho_a},
                {"F1", matrix_to_json(f.f1)},
                {"F2", matrix_to_json(f.f2)},
                {"K1", matrix_to_json(f.k1)},
                {"K2", matrix_to_json(f.k2)},
                {"A1d", matrix_to_json(f.a1d)},
                {"A2d", matrix_to_json(f.a2d)},
                {"Ad", matrix_to_json(f.ad)},
                {"rho_Ad", f.rho_ad},
                {"remark1",
                 {{"A1d", matrix_to_json(f.remark_a1d)},
                  {"A2d", matrix_to_json(f.remark_a2d)},
                  {"rho_factor", f.remark_rho_factor},
                  {"rho_product", f.remark_rho_product}}}};
}

PaperFixture builtin_paper_fixture() {
    return paper_fixture_from_json(parse_json_text(kPaperFixtureJson, "builtin paper fixture"));
}

std::vector<FixtureEntry> fixture_entries(PaperFixture& f) {
    std::vector<FixtureEntry> out;
    auto add_matrix = [&out](const std::string& field, Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                out.push_back({field + "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")",
                               field, &m(i, j)});
            }
        }
    };
    add_matrix("A1", f.a1);
    add_matrix("A2", f.a2);
    add_matrix("A", f.a);
    for (std::size_t i = 0; i < f.eigenvalues.size(); ++i) {
        // std::complex guarantees array-compatible layout of {re, im}.
        auto* parts = reinterpret_cast<double*>(&f.eigenvalues[i]);
        const std::string base = "eigenvalues[" + std::to_string(i) + "]";
        out.push_back({base + ".re", "eigenvalues", &parts[0]});
        out.push_back({base + ".im", "eigenvalues", &parts[1]});
    }
    out.push_back({"rho_A", "rho_A", &f.rho_a});
    add_matrix("F1", f.f1);
    add_matrix("F2", f.f2);
    add_matrix("K1", f.k1);
    add_matrix("K2", f.k2);
    add_matrix("A1d", f.a1d);
    add_matrix("A2d", f.a2d);
    add_matrix("Ad", f.ad);
    out.push_back({"rho_Ad", "rho_Ad", &f.rho_ad});
    add_matrix("remark1.A1d", f.remark_a1d);
    add_matrix("remark1.A2d", f.remark_a2d);
    out.push_back({"remark1.rho_factor", "remark1.rho_factor", &f.remark_rho_factor});
    out.push_back({"remark1.rho_product", "remark1.rho_product", &f.remark_rho_product});
    return out;
}

bool VerifyReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const FixtureCheck& c) { return c.pass; });
}

const FixtureCheck& VerifyReport::check(const std::string& name) const {
    for (const auto& c : checks) {
        if (c.name == name) {
            return c;
        }
    }
    throw std::out_of_range("no fixture check named " + name);
}

namespace {

constexpr double kDirectTier = 1e-3;
constexpr double kProductTier = 5e-3;
constexpr double kGainTier = 2e-2;
constexpr double kRemarkProductTol = 1e-4;
constexpr double kRemarkFactorTol = 1e-10;

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

FixtureCheck compare_matrices(std::string name, const Matrix& computed, const Matrix& printed,
                              const std::string& label, double tol,
                              std::vector<std::string> deps) {
    FixtureCheck c;
    c.name = std::move(name);
    c.tolerance = tol;
    c.depends_on = std::move(deps);
    if (computed.rows() != printed.rows() || computed.cols() != printed.cols()) {
        c.measured = std::numeric_limits<double>::infinity();
        c.detail = label + " has the wrong shape";
        return c;
    }
    Eigen::Index wi = 0;
    Eigen::Index wj = 0;
    c.measured = (computed - printed).cwiseAbs().maxCoeff(&wi, &wj);
    c.pass = c.measured <= tol;
    c.detail = "worst at " + label + "(" + std::to_string(wi + 1) + "," + std::to_string(wj + 1) +
               "): computed " + fmt(computed(wi, wj)) + ", fixture " + fmt(printed(wi, wj));
    return c;
}

FixtureCheck compare_scalar(std::string name, double computed, double printed,
                            const std::string& label, double tol,
                            std::vector<std::string> deps) {
    FixtureCheck c;
    c.name = std::move(name);
    c.tolerance = tol;
    c.depends_on = std::move(deps);
    c.measured = std::abs(computed - printed);
    c.pass = c.measured <= tol;
    c.detail = label + ": computed " + fmt(computed) + ", fixture " + fmt(printed);
    return c;
}

// Runs `fn`, turning numerical failures into a failed check.
template <typename Fn>
FixtureCheck guarded(const std::string& name, std::vector<std::string> deps, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        FixtureCheck c;
        c.name = name;
        c.depends_on = std::move(deps);
        c.measured = std::numeric_limits<double>::infinity();
        c.detail = std::string("error: ") + e.what();
        return c;
    }
}

}  // namespace

VerifyReport verify_paper(const PaperFixture& f, double tolerance_scale) {
    VerifyReport report;
    auto& checks = report.checks;
    const double s = tolerance_scale;

    checks.push_back(guarded("composition", {"A1", "A2", "A"}, [&] {
        return compare_matrices("composition", compose_jacobians({f.a1, f.a2}), f.a, "A",
                                kProductTier * s, {"A1", "A2", "A"});
    }));

    checks.push_back(guarded("eigenvalues", {"A", "eigenvalues"}, [&] {
        FixtureCheck c;
        c.name = "eigenvalues";
        c.tolerance = kDirectTier * s;
        c.depends_on = {"A", "eigenvalues"};
        std::vector<Complex> computed = eigenvalues(f.a).values;
        if (computed.size() != f.eigenvalues.size()) {
            c.measured = std::numeric_limits<double>::infinity();
            c.detail = "eigenvalue count mismatch";
            return c;
        }
        std::size_t worst = 0;
        for (std::size_t i = 0; i < f.eigenvalues.size(); ++i) {
            auto nearest = std::min_element(computed.begin(), computed.end(),
                                            [&](const Complex& x, const Complex& y) {
                                                return std::abs(x - f.eigenvalues[i]) <
                                                       std::abs(y - f.eigenvalues[i]);
                                            });
            const double d = std::abs(*nearest - f.eigenvalues[i]);
            computed.erase(nearest);
            if (d > c.measured) {
                c.measured = d;
                worst = i;
            }
        }
        c.pass = c.measured <= c.tolerance;
        c.detail = "worst at eigenvalues[" + std::to_string(worst) + "]";
        return c;
    }));

    checks.push_back(guarded("open_loop_radius", {"A", "rho_A"}, [&] {
        return compare_scalar("open_loop_radius", spectral_radius(f.a), f.rho_a, "rho(A)",
                              kDirectTier * s, {"A", "rho_A"});
    }));

    // Scale-factor design reproduced from the open-loop data.
    std::vector<PhaseJacobians> jacs(2);
    jacs[0].A = f.a1;
    jacs[0].F = f.f1;
    jacs[1].A = f.a2;
    jacs[1].F = f.f2;
    GainSet gains;
    std::vector<Matrix> designed;
    std::string synthesis_error;
    try {
        gains = scale_factor_gains(jacs, 1.0);
        designed = designed_jacobians(jacs, gains);
    } catch (const std::exception& e) {
        synthesis_error = e.what();
    }
    auto synthesized = [&](const std::string& name, std::vector<std::string> deps, auto&& fn) {
        if (!synthesis_error.empty()) {
            FixtureCheck c;
            c.name = name;
            c.depends_on = std::move(deps);
            c.measured = std::numeric_limits<double>::infinity();
            c.detail = "synthesis failed: " + synthesis_error;
            return c;
        }
        return guarded(name, deps, fn);
    };

    checks.push_back(synthesized("scale_factor_K1", {"A1", "F1", "K1"}, [&] {
        return compare_matrices("scale_factor_K1", gains.gains[0], f.k1, "K1", kGainTier * s,
                                {"A1", "F1", "K1"});
    }));
    checks.push_back(synthesized("scale_factor_K2", {"A2", "F2", "K2"}, [&] {
        return compare_matrices("scale_factor_K2", gains.gains[1], f.k2, "K2", kGainTier * s,
                                {"A2", "F2", "K2"});
    }));
    checks.push_back(synthesized("scale_factor_A1d", {"A1", "F1", "A1d"}, [&] {
        return compare_matrices("scale_factor_A1d", designed[0], f.a1d, "A1d", kDirectTier * s,
                                {"A1", "F1", "A1d"});
    }));
    checks.push_back(synthesized("scale_factor_A2d", {"A2", "F2", "A2d"}, [&] {
        return compare_matrices("scale_factor_A2d", designed[1], f.a2d, "A2d", kDirectTier * s,
                                {"A2", "F2", "A2d"});
    }));
    checks.push_back(synthesized("closed_loop_product", {"A1", "A2", "F1", "F2", "Ad"}, [&] {
        return compare_matrices("closed_loop_product", compose_jacobians(designed), f.ad, "Ad",
                                kDirectTier * s, {"A1", "A2", "F1", "F2", "Ad"});
    }));
    checks.push_back(synthesized("closed_loop_radius", {"A1", "A2", "F1", "F2", "rho_Ad"}, [&] {
        return compare_scalar("closed_loop_radius", spectral_radius(compose_jacobians(designed)),
                              f.rho_ad, "rho(Ad)", kDirectTier * s,
                              {"A1", "A2", "F1", "F2", "rho_Ad"});
    }));

    checks.push_back(guarded("published_design_product", {"A1d", "A2d", "Ad"}, [&] {
        return compare_matrices("published_design_product", compose_jacobians({f.a1d, f.a2d}),
                                f.ad, "Ad", kProductTier * s, {"A1d", "A2d", "Ad"});
    }));

    const std::vector<std::string> factor_deps = {"remark1.A1d", "remark1.A2d",
                                                  "remark1.rho_factor"};
    checks.push_back(guarded("remark1_factors", factor_deps, [&] {
        const double r1 = spectral_radius(f.remark_a1d);
        const double r2 = spectral_radius(f.remark_a2d);
        const bool first_worse =
            std::abs(r1 - f.remark_rho_factor) >= std::abs(r2 - f.remark_rho_factor);
        return compare_scalar("remark1_factors", first_worse ? r1 : r2, f.remark_rho_factor,
                              first_worse ? "rho(remark1.A1d)" : "rho(remark1.A2d)",
                              kRemarkFactorTol * s, factor_deps);
    }));
    const std::vector<std::string> product_deps = {"remark1.A1d", "remark1.A2d",
                                                   "remark1.rho_product"};
    checks.push_back(guarded("remark1_product", product_deps, [&] {
        return compare_scalar(
            "remark1_product",
            spectral_radius(compose_jacobians({f.remark_a1d, f.remark_a2d})),
            f.remark_rho_product, "rho(remark1.A2d * remark1.A1d)", kRemarkProductTol * s,
            product_deps);
    }));
    return report;
}

bool FaultInjection::confined() const {
    return std::all_of(flipped.begin(), flipped.end(), [&](const std::string& name) {
        return std::find(dependents.begin(), dependents.end(), name) != dependents.end();
    });
}

bool FaultInjection::detected() const {
    return std::any_of(dependents.begin(), dependents.end(),
                       [&](const std::string& name) { return !report.check(name).pass; });
}

FaultInjection inject_fault(const PaperFixture& fixture, const std::string& entry, double delta,
                            double tolerance_scale) {
    PaperFixture corrupted = fixture;
    FaultInjection out;
    for (const FixtureEntry& e : fixture_entries(corrupted)) {
        if (e.name == entry) {
            *e.value += delta;
            out.field = e.field;
        }
    }
    if (out.field.empty()) {
        throw InputError("unknown fixture entry '" + entry + "'");
    }
    out.entry = entry;
    out.delta = delta;
    const VerifyReport baseline = verify_paper(fixture, tolerance_scale);
    out.report = verify_paper(corrupted, tolerance_scale);
    for (std::size_t i = 0; i < out.report.checks.size(); ++i) {
        const FixtureCheck& c = out.report.checks[i];
        if (c.pass != baseline.checks[i].pass) {
            out.flipped.push_back(c.name);
        }
        if (std::find(c.depends_on.begin(), c.depends_on.end(), out.field) != c.depends_on.end()) {
            out.dependents.push_back(c.name);
        }
    }
    return out;
}

std::string format_verify_report(const VerifyReport& report) {
    std::ostringstream os;
    os << std::left << std::setw(26) << "check" << std::setw(6) << "pass" << std::setw(14)
       << "measured" << std::setw(12) << "tolerance"
       << "detail\n";
    for (const auto& c : report.checks) {
        os << std::left << std::setw(26) << c.name << std::setw(6) << (c.pass ? "ok" : "FAIL")
           << std::setw(14) << fmt(c.measured) << std::setw(12) << fmt(c.tolerance) << c.detail
           << '\n';
    }
    os << (report.all_pass() ? "all checks passed" : "some checks FAILED") << '\n';
    return os.str();
}

}  // namespace hybrid_orbit
