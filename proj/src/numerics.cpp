#include "hybrid_orbit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hybrid_orbit/errors.hpp"

namespace hybrid_orbit {

namespace {

void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        std::ostringstream os;
        os << what << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
        throw DimensionError(os.str());
    }
}

}  // namespace

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw NumericalError(std::string(what) + ": matrix contains NaN or Inf");
    }
}

Spectrum eigenvalues(const Matrix& m) {
    require_square(m, "eigenvalues");
    if (m.rows() == 0) {
        throw DimensionError("eigenvalues: empty matrix");
    }
    require_finite(m, "eigenvalues");
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigenvalues: QR iteration did not converge");
    }
    Spectrum out;
    out.values.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out.values.push_back(solver.eigenvalues()(i));
    }
    return out;
}

double spectral_radius(const Matrix& m) {
    double radius = 0.0;
    for (const auto& lambda : eigenvalues(m).values) {
        radius = std::max(radius, std::abs(lambda));
    }
    return radius;
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    require_finite(m, "spectral_norm");
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double max_abs_entry(const Matrix& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    return m.cwiseAbs().maxCoeff();
}

double symmetry_defect(const Matrix& m) {
    require_square(m, "symmetry_defect");
    return max_abs_entry(m - m.transpose());
}

Matrix pinv(const Matrix& m, double rel_tol) {
    if (!(rel_tol > 0.0)) {
        throw std::invalid_argument("pinv: rel_tol must be positive");
    }
    if (m.size() == 0) {
        return Matrix::Zero(m.cols(), m.rows());
    }
    require_finite(m, "pinv");
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    const double cut = rel_tol * sigma(0);
    Vector inv = Vector::Zero(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma(i) > cut) {
            inv(i) = 1.0 / sigma(i);
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

void check_riccati_shapes(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
    require_square(a, "dare_solve: A");
    require_square(q, "dare_solve: Q");
    require_square(r, "dare_solve: R");
    if (b.rows() != a.rows() || q.rows() != a.rows() || r.rows() != b.cols()) {
        std::ostringstream os;
        os << "dare_solve: incompatible shapes A " << a.rows() << "x" << a.cols() << ", B "
           << b.rows() << "x" << b.cols() << ", Q " << q.rows() << "x" << q.cols() << ", R "
           << r.rows() << "x" << r.cols();
        throw DimensionError(os.str());
    }
}

// A'PA - A'PB (B'PB + R)^-1 B'PA + Q in scalar type T.
template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> riccati_map(
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& a,
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& b,
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& q,
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& r,
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& p) {
    using M = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    const M pa = p * a;
    if (b.cols() == 0) {
        return a.transpose() * pa + q;
    }
    const M bpa = b.transpose() * pa;
    const M bpb = b.transpose() * p * b + r;
    return a.transpose() * pa - bpa.transpose() * bpb.ldlt().solve(bpa) + q;
}

Matrix riccati_step(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                    const Matrix& p) {
    return riccati_map<double>(a, b, q, r, p);
}

Matrix closed_loop_matrix(const Matrix& a, const Matrix& b, const Matrix& r, const Matrix& p) {
    if (b.cols() == 0) {
        return a;
    }
    return a - b * (b.transpose() * p * b + r).ldlt().solve(b.transpose() * p * a);
}

// Iterative refinement of a converged P. The residual is formed in long
// double, where the cancellation inside the Riccati map costs no accuracy at
// double precision, and the correction solves X = Acl' X Acl + residual by
// doubling. Keeps the iterate with the smallest residual.
Matrix refine_riccati(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                      Matrix p) {
    using LM = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const LM la = a.cast<long double>();
    const LM lb = b.cast<long double>();
    const LM lq = q.cast<long double>();
    const LM lr = r.cast<long double>();
    Matrix best = p;
    double best_residual = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 4; ++step) {
        const LM lp = p.cast<long double>();
        LM res = riccati_map<long double>(la, lb, lq, lr, lp) - lp;
        res = (0.5L * (res + res.transpose())).eval();
        const double size = static_cast<double>(res.cwiseAbs().maxCoeff());
        if (!(size < best_residual)) {
            break;
        }
        best = p;
        best_residual = size;
        Matrix x = res.cast<double>();
        Matrix m = closed_loop_matrix(a, b, r, p);
        for (int k = 0; k < 64 && max_abs_entry(m) > 0.0; ++k) {
            x = (x + m.transpose() * x * m).eval();
            m = (m * m).eval();
        }
        p = (p + 0.5 * (x + x.transpose())).eval();
    }
    return best;
}

}  // namespace

double dare_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                     const Matrix& p) {
    check_riccati_shapes(a, b, q, r);
    return max_abs_entry(riccati_step(a, b, q, r, p) - p);
}

Matrix dare_solve(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                  const RiccatiOptions& options) {
    check_riccati_shapes(a, b, q, r);
    require_finite(a, "dare_solve: A");
    require_finite(b, "dare_solve: B");
    if (r.rows() > 0 && r.llt().info() != Eigen::Success) {
        throw NumericalError("dare_solve: R is not positive definite");
    }

    Matrix p = 0.5 * (q + q.transpose());
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        Matrix next = riccati_step(a, b, q, r, p);
        // .eval(): assigning from next.transpose() in place would alias
        next = (0.5 * (next + next.transpose())).eval();
        if (!next.allFinite()) {
            break;
        }
        const double scale = std::max(1.0, max_abs_entry(next));
        const double change = max_abs_entry(next - p);
        p = std::move(next);
        if (change < options.tolerance * scale) {
            if (!(spectral_radius(closed_loop_matrix(a, b, r, p)) < 1.0)) {
                throw NumericalError("dare_solve: converged P does not stabilize the closed loop");
            }
            return refine_riccati(a, b, q, r, std::move(p));
        }
    }
    throw NumericalError(
        "dare_solve: Riccati recursion did not converge (unstabilizable or ill-conditioned)");
}

Matrix dlqr_gain(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                 const RiccatiOptions& options) {
    const Matrix p = dare_solve(a, b, q, r, options);
    if (b.cols() == 0) {
        return Matrix::Zero(0, a.cols());
    }
    const Matrix bpb = b.transpose() * p * b + r;
    return bpb.ldlt().solve(b.transpose() * p * a);
}

Matrix central_difference_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& x,
                                   double step) {
    Matrix jac;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = step * std::max(1.0, std::abs(x(j)));
        Vector plus = x;
        Vector minus = x;
        plus(j) += h;
        minus(j) -= h;
        const Vector column = (fn(plus) - fn(minus)) / (2.0 * h);
        if (j == 0) {
            jac.resize(column.size(), x.size());
        }
        jac.col(j) = column;
    }
    return jac;
}

}  // namespace hybrid_orbit
