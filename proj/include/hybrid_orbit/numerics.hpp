#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace hybrid_orbit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

// Eigenvalues of a real square matrix, with multiplicity, in the order the
// real Schur form produces them.
struct Spectrum {
    std::vector<Complex> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
};

Spectrum eigenvalues(const Matrix& m);

double spectral_radius(const Matrix& m);

// Largest singular value.
double spectral_norm(const Matrix& m);

// max |m(i, j)|; zero for empty matrices.
double max_abs_entry(const Matrix& m);

// max |m - m^T|. Throws on non-square input.
double symmetry_defect(const Matrix& m);

inline constexpr double kDefaultPinvTolerance = 1e-10;

// Moore-Penrose pseudoinverse. Singular values below rel_tol * sigma_max are
// treated as zero.
Matrix pinv(const Matrix& m, double rel_tol = kDefaultPinvTolerance);

struct RiccatiOptions {
    double tolerance = 1e-12;  // successive-iterate difference, relative to max(1, |P|)
    int max_iterations = 10000;
};

// Stabilizing solution of the discrete algebraic Riccati equation
//   P = A'PA - A'PB (B'PB + R)^-1 B'PA + Q
// by fixed-point iteration of the Riccati recursion started at P = Q.
// Throws NumericalError when the recursion does not settle within the cap.
Matrix dare_solve(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                  const RiccatiOptions& options = {});

// max_abs_entry of the Riccati residual for a candidate P.
double dare_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                     const Matrix& p);

// K = (B'PB + R)^-1 B'PA, so that beta = -K x minimizes sum x'Qx + beta'R beta.
Matrix dlqr_gain(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                 const RiccatiOptions& options = {});

// Central-difference Jacobian of fn at x with per-coordinate step
// step * max(1, |x_j|).
Matrix central_difference_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& x,
                                   double step);

// Throws NumericalError if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

}  // namespace hybrid_orbit
