#include "hybrid_orbit/synthesis.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hybrid_orbit/errors.hpp"

namespace hybrid_orbit {

const char* to_string(GainMethod method) {
    switch (method) {
        case GainMethod::kSymmetric: return "symmetric";
        case GainMethod::kScaleFactor: return "scale_factor";
        case GainMethod::kDlqr: return "dlqr";
    }
    return "unknown";
}

GainMethod gain_method_from_string(const std::string& name) {
    if (name == "symmetric") return GainMethod::kSymmetric;
    if (name == "scale" || name == "scale_factor") return GainMethod::kScaleFactor;
    if (name == "dlqr") return GainMethod::kDlqr;
    throw InputError("unknown gain method '" + name + "' (expected symmetric, scale or dlqr)");
}

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_phase(const PhaseJacobians& j, std::size_t i) {
    if (j.F.rows() != j.A.rows()) {
        throw DimensionError("phase " + std::to_string(i + 1) + ": A is " + shape(j.A) + " but F is " +
                             shape(j.F));
    }
}

void check_square_phases(const std::vector<PhaseJacobians>& jacs, const char* who) {
    if (jacs.empty()) {
        throw DimensionError(std::string(who) + ": no phases");
    }
    for (std::size_t i = 0; i < jacs.size(); ++i) {
        check_phase(jacs[i], i);
        if (jacs[i].A.rows() != jacs[i].A.cols()) {
            throw DimensionError(std::string(who) + ": phase " + std::to_string(i) +
                                 " Jacobian is " + shape(jacs[i].A) + ", expected square");
        }
    }
}

}  // namespace

std::vector<Matrix> designed_jacobians(const std::vector<PhaseJacobians>& jacs,
                                       const GainSet& gains) {
    if (jacs.size() != gains.gains.size()) {
        throw DimensionError("designed_jacobians: " + std::to_string(jacs.size()) +
                             " phases but " + std::to_string(gains.gains.size()) + " gains");
    }
    std::vector<Matrix> out;
    out.reserve(jacs.size());
    for (std::size_t i = 0; i < jacs.size(); ++i) {
        check_phase(jacs[i], i);
        const Matrix& k = gains.gains[i];
        if (k.rows() != jacs[i].F.cols() || k.cols() != jacs[i].A.cols()) {
            throw DimensionError("designed_jacobians: gain " + std::to_string(i) + " is " +
                                 shape(k) + ", expected " + std::to_string(jacs[i].F.cols()) +
                                 "x" + std::to_string(jacs[i].A.cols()));
        }
        out.push_back(jacs[i].A - jacs[i].F * k);
    }
    return out;
}

GainSet symmetric_matrix_gains(const std::vector<PhaseJacobians>& jacs, const Matrix& target,
                               const SynthesisOptions& options) {
    check_square_phases(jacs, "symmetric_matrix_gains");
    if (target.rows() != target.cols()) {
        throw std::invalid_argument("symmetric_matrix_gains: target matrix must be square");
    }
    if (symmetry_defect(target) > 1e-10) {
        throw std::invalid_argument("symmetric_matrix_gains: target matrix is not symmetric");
    }
    if (spectral_radius(target) >= 1.0) {
        throw std::invalid_argument("symmetric_matrix_gains: target spectral radius must be < 1");
    }
    GainSet out;
    out.method = GainMethod::kSymmetric;
    for (std::size_t i = 0; i < jacs.size(); ++i) {
        const Matrix& a = jacs[i].A;
        const Matrix& f = jacs[i].F;
        if (a.rows() != target.rows()) {
            throw DimensionError("symmetric_matrix_gains: target is " + shape(target) +
                                 ", phase " + std::to_string(i) + " Jacobian is " + shape(a));
        }
        Matrix k = pinv(f, options.pinv_tol) * (a - target);
        const double residual = max_abs_entry(a - f * k - target);
        out.inexact = out.inexact || residual > options.residual_tol;
        out.gains.push_back(std::move(k));
        out.residuals.push_back(residual);
    }
    return out;
}

GainSet scale_factor_gains(const std::vector<PhaseJacobians>& jacs, double eta,
                           const SynthesisOptions& options) {
    check_square_phases(jacs, "scale_factor_gains");
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("scale_factor_gains: eta must lie in (0, 1]");
    }
    GainSet out;
    out.method = GainMethod::kScaleFactor;
    for (std::size_t i = 0; i < jacs.size(); ++i) {
        const Matrix& a = jacs[i].A;
        const Matrix& f = jacs[i].F;
        const double largest = max_abs_entry(a);
        if (largest == 0.0) {
            throw std::invalid_argument("scale_factor_gains: phase " + std::to_string(i) +
                                        " Jacobian is zero, scale factor undefined");
        }
        const double c = eta / (static_cast<double>(a.rows()) * largest);
        Matrix k = pinv(f, options.pinv_tol) * ((1.0 - c) * a);
        const double residual = max_abs_entry(a - f * k - c * a);
        out.inexact = out.inexact || residual > options.residual_tol;
        out.gains.push_back(std::move(k));
        out.residuals.push_back(residual);
        out.scale_factors.push_back(c);
    }
    return out;
}

GainSet dlqr_gains(const std::vector<PhaseJacobians>& jacs, const std::vector<Matrix>& q,
                   const std::vector<Matrix>& r, const DlqrOptions& options) {
    check_square_phases(jacs, "dlqr_gains");
    if (q.size() != jacs.size() || r.size() != jacs.size()) {
        throw DimensionError("dlqr_gains: one Q and one R per phase required");
    }
    if (!(options.q_growth > 1.0) || options.max_scalings < 0) {
        throw std::invalid_argument("dlqr_gains: q_growth must exceed 1");
    }
    GainSet out;
    out.method = GainMethod::kDlqr;
    for (std::size_t i = 0; i < jacs.size(); ++i) {
        const Matrix& a = jacs[i].A;
        const Matrix& f = jacs[i].F;
        const double bound = 1.0 / static_cast<double>(a.rows());
        double scale = 1.0;
        for (int attempt = 0;; ++attempt) {
            const Matrix qs = scale * q[i];
            const Matrix p = dare_solve(a, f, qs, r[i], options.riccati);
            Matrix k = f.cols() == 0 ? Matrix::Zero(0, a.cols()).eval()
                                     : (f.transpose() * p * f + r[i])
                                           .ldlt()
                                           .solve(f.transpose() * p * a)
                                           .eval();
            const bool within = max_abs_entry(a - f * k) < bound;
            if (!options.enforce_entry_bound || within) {
                out.residuals.push_back(dare_residual(a, f, qs, r[i], p));
                out.gains.push_back(std::move(k));
                out.q_scales.push_back(scale);
                break;
            }
            if (attempt >= options.max_scalings) {
                std::ostringstream os;
                os << "dlqr_gains: phase " << i << " still has max|A^d| >= 1/" << a.rows()
                   << " after " << options.max_scalings << " Q scalings";
                throw NumericalError(os.str());
            }
            scale *= options.q_growth;
        }
    }
    return out;
}

SymmetricCertificate certify_symmetric_contraction(const std::vector<Matrix>& designed,
                                                   double symmetry_tol) {
    SymmetricCertificate cert;
    cert.symmetry_tol = symmetry_tol;
    cert.pass = !designed.empty();
    if (designed.empty()) {
        cert.failures.emplace_back("no designed Jacobians");
    }
    for (std::size_t i = 0; i < designed.size(); ++i) {
        const Matrix& m = designed[i];
        if (m.rows() != m.cols() || m.rows() != designed.front().rows()) {
            cert.pass = false;
            cert.failures.push_back("phase " + std::to_string(i + 1) + ": not square of common size");
            cert.symmetry_defects.push_back(std::nan(""));
            cert.radii.push_back(std::nan(""));
            continue;
        }
        const double defect = symmetry_defect(m);
        const double radius = spectral_radius(m);
        cert.symmetry_defects.push_back(defect);
        cert.radii.push_back(radius);
        if (defect > symmetry_tol) {
            cert.pass = false;
            std::ostringstream os;
            os << "phase " << i + 1 << ": not symmetric (defect " << defect << ")";
            cert.failures.push_back(os.str());
        }
        if (!(radius < 1.0)) {
            cert.pass = false;
            std::ostringstream os;
            os << "phase " << i + 1 << ": spectral radius " << radius << " >= 1";
            cert.failures.push_back(os.str());
        }
    }
    return cert;
}

EntryBoundCertificate certify_entry_bound(const std::vector<Matrix>& designed) {
    EntryBoundCertificate cert;
    cert.pass = !designed.empty();
    if (designed.empty()) {
        cert.failures.emplace_back("no designed Jacobians");
        return cert;
    }
    const Eigen::Index k = designed.front().rows();
    cert.bound = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < designed.size(); ++i) {
        const Matrix& m = designed[i];
        if (m.rows() != k || m.cols() != k) {
            cert.pass = false;
            cert.failures.push_back("phase " + std::to_string(i + 1) + ": not square of common size");
            cert.max_entries.push_back(std::nan(""));
            cert.margins.push_back(std::nan(""));
            continue;
        }
        const double largest = max_abs_entry(m);
        cert.max_entries.push_back(largest);
        cert.margins.push_back(cert.bound - largest);
        // Strict: equality admits a unit spectral radius (all entries 1/k).
        // Entries within rounding of 1/k count as equal, so a design that
        // lands on the boundary cannot pass on the last bit.
        if (!(largest < cert.bound * (1.0 - kEntryBoundGuard))) {
            cert.pass = false;
            std::ostringstream os;
            os.precision(17);
            os << "phase " << i + 1 << ": max entry " << largest << " is not below 1/" << k;
            cert.failures.push_back(os.str());
        }
    }
    return cert;
}

StabilityReport assess_designed(const std::vector<Matrix>& designed, bool inexact_design) {
    if (designed.empty()) {
        throw DimensionError("stability report: no designed Jacobians");
    }
    StabilityReport report;
    report.designed = designed;
    report.inexact_design = inexact_design;
    for (const Matrix& m : designed) {
        report.per_phase_radius.push_back(m.rows() == m.cols() ? spectral_radius(m)
                                                               : std::nan(""));
    }
    report.product = compose_jacobians(designed);
    report.product_radius = spectral_radius(report.product);
    report.symmetric = certify_symmetric_contraction(designed);
    report.entry_bound = certify_entry_bound(designed);
    report.stable = report.product_radius < 1.0;
    return report;
}

StabilityReport stability_report(const std::vector<PhaseJacobians>& jacs, const GainSet& gains) {
    return assess_designed(designed_jacobians(jacs, gains), gains.inexact);
}

// --- JSON -------------------------------------------------------------------

std::vector<PhaseJacobians> phase_jacobians_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("phases") || !j.at("phases").is_array()) {
        throw InputError("expected an object with a \"phases\" array");
    }
    std::vector<PhaseJacobians> out;
    const Json& phases = j.at("phases");
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const std::string where = "phases[" + std::to_string(i) + "]";
        const Json& p = phases[i];
        if (!p.is_object() || !p.contains("A") || !p.contains("F")) {
            throw InputError(where + ": expected fields \"A\" and \"F\"");
        }
        PhaseJacobians jac;
        jac.phase = i;
        jac.A = matrix_from_json(p.at("A"), where + ".A");
        jac.F = matrix_from_json(p.at("F"), where + ".F");
        if (jac.F.rows() != jac.A.rows()) {
            throw InputError(where + ": F must have as many rows as A");
        }
        out.push_back(std::move(jac));
    }
    if (out.empty()) {
        throw InputError("\"phases\" is empty");
    }
    return out;
}

namespace {

Json doubles(const std::vector<double>& v) {
    Json out = Json::array();
    for (double x : v) {
        out.push_back(std::isfinite(x) ? Json(x) : Json(nullptr));
    }
    return out;
}

Json matrices(const std::vector<Matrix>& v) {
    Json out = Json::array();
    for (const Matrix& m : v) {
        out.push_back(matrix_to_json(m));
    }
    return out;
}

}  // namespace

Json phase_jacobians_to_json(const std::vector<PhaseJacobians>& jacs) {
    Json phases = Json::array();
    for (const auto& jac : jacs) {
        phases.push_back(Json{{"A", matrix_to_json(jac.A)},
                              {"F", matrix_to_json(jac.F)},
                              {"fd_step", jac.fd_step},
                              {"halving_defect", jac.halving_defect},
                              {"halving_ok", jac.halving_ok}});
    }
    return Json{{"phases", phases}};
}

Json to_json(const GainSet& gains) {
    Json out{{"method", to_string(gains.method)},
             {"gains", matrices(gains.gains)},
             {"residuals", doubles(gains.residuals)},
             {"inexact", gains.inexact}};
    if (!gains.scale_factors.empty()) {
        out["scale_factors"] = doubles(gains.scale_factors);
    }
    if (!gains.q_scales.empty()) {
        out["q_scales"] = doubles(gains.q_scales);
    }
    return out;
}

Json to_json(const SymmetricCertificate& cert) {
    return Json{{"pass", cert.pass},
                {"symmetry_tol", cert.symmetry_tol},
                {"symmetry_defects", doubles(cert.symmetry_defects)},
                {"radii", doubles(cert.radii)},
                {"failures", cert.failures}};
}

Json to_json(const EntryBoundCertificate& cert) {
    return Json{{"pass", cert.pass},
                {"bound", cert.bound},
                {"max_entries", doubles(cert.max_entries)},
                {"margins", doubles(cert.margins)},
                {"failures", cert.failures}};
}

Json to_json(const StabilityReport& report) {
    return Json{{"designed", matrices(report.designed)},
                {"per_phase_radius", doubles(report.per_phase_radius)},
                {"product", matrix_to_json(report.product)},
                {"product_radius", report.product_radius},
                {"symmetric_certificate", to_json(report.symmetric)},
                {"entry_bound_certificate", to_json(report.entry_bound)},
                {"inexact_design", report.inexact_design},
                {"verdict_source", report.inexact_design ? "product_radius"
                                                         : "product_radius+certificates"},
                {"verdict", report.stable ? "stable" : "unstable"}};
}

}  // namespace hybrid_orbit
