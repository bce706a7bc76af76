#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hybrid_orbit/json_io.hpp"
#include "hybrid_orbit/numerics.hpp"
#include "hybrid_orbit/poincare.hpp"

namespace hybrid_orbit {

enum class GainMethod { kSymmetric, kScaleFactor, kDlqr };

const char* to_string(GainMethod method);
GainMethod gain_method_from_string(const std::string& name);

struct SynthesisOptions {
    double pinv_tol = kDefaultPinvTolerance;
    // Above this max-entry residual the design is flagged inexact.
    double residual_tol = 1e-6;
};

// Per-phase feedback matrices K_i (p_i x k), built independently phase by phase.
struct GainSet {
    GainMethod method = GainMethod::kSymmetric;
    std::vector<Matrix> gains;
    // symmetric / scale factor: max|A_i - F_i K_i - target_i|.
    // dlqr: Riccati residual of the phase's DARE solution.
    std::vector<double> residuals;
    bool inexact = false;
    std::vector<double> scale_factors;  // c_i, scale factor method only
    std::vector<double> q_scales;       // final Q multiplier, dlqr only
};

// A_i^d = A_i - F_i K_i.
std::vector<Matrix> designed_jacobians(const std::vector<PhaseJacobians>& jacs,
                                       const GainSet& gains);

// K_i = pinv(F_i) (A_i - M). M must be symmetric with spectral radius < 1;
// a zero M gives a deadbeat design.
GainSet symmetric_matrix_gains(const std::vector<PhaseJacobians>& jacs, const Matrix& target,
                               const SynthesisOptions& options = {});

// c_i = eta / (k * max|A_i|), K_i = pinv(F_i) (1 - c_i) A_i, so every entry of
// the reachable design c_i A_i is at most eta / k.
GainSet scale_factor_gains(const std::vector<PhaseJacobians>& jacs, double eta = 1.0,
                           const SynthesisOptions& options = {});

struct DlqrOptions {
    bool enforce_entry_bound = false;
    double q_growth = 10.0;
    int max_scalings = 12;
    RiccatiOptions riccati;
};

// K_i = dlqr(A_i, F_i, Q_i, R_i). With enforce_entry_bound, Q_i is multiplied
// by q_growth until max|A_i^d| < 1/k, at most max_scalings times.
GainSet dlqr_gains(const std::vector<PhaseJacobians>& jacs, const std::vector<Matrix>& q,
                   const std::vector<Matrix>& r, const DlqrOptions& options = {});

// --- certificates -----------------------------------------------------------

// Every factor symmetric with spectral radius < 1 implies the product is a
// contraction in the spectral norm.
struct SymmetricCertificate {
    bool pass = false;
    double symmetry_tol = 0.0;
    std::vector<double> symmetry_defects;
    std::vector<double> radii;
    std::vector<std::string> failures;
};

// Every factor with max|entry| strictly below 1/k keeps n * max|entry| < 1
// for the product.
struct EntryBoundCertificate {
    bool pass = false;
    double bound = 0.0;  // 1/k
    std::vector<double> max_entries;
    std::vector<double> margins;  // bound - max_entry
    std::vector<std::string> failures;
};

inline constexpr double kDefaultSymmetryTol = 1e-8;

SymmetricCertificate certify_symmetric_contraction(const std::vector<Matrix>& designed,
                                                   double symmetry_tol = kDefaultSymmetryTol);

// Relative distance below 1/k that still counts as the boundary.
inline constexpr double kEntryBoundGuard = 1e-12;

EntryBoundCertificate certify_entry_bound(const std::vector<Matrix>& designed);

struct StabilityReport {
    std::vector<Matrix> designed;
    std::vector<double> per_phase_radius;
    Matrix product;
    double product_radius = 0.0;
    SymmetricCertificate symmetric;
    EntryBoundCertificate entry_bound;
    bool inexact_design = false;
    bool stable = false;  // product_radius < 1
};

// Certificates and the product radius for already designed Jacobians.
StabilityReport assess_designed(const std::vector<Matrix>& designed, bool inexact_design = false);

StabilityReport stability_report(const std::vector<PhaseJacobians>& jacs, const GainSet& gains);

// --- JSON -------------------------------------------------------------------

// Reads {"phases": [{"A": Matrix, "F": Matrix, ...}]}.
std::vector<PhaseJacobians> phase_jacobians_from_json(const Json& j);
// Writes the same layout plus the step-halving diagnostics.
Json phase_jacobians_to_json(const std::vector<PhaseJacobians>& jacs);

Json to_json(const GainSet& gains);
Json to_json(const SymmetricCertificate& cert);
Json to_json(const EntryBoundCertificate& cert);
Json to_json(const StabilityReport& report);

}  // namespace hybrid_orbit
