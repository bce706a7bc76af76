#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "hybrid_orbit/errors.hpp"
#include "hybrid_orbit/numerics.hpp"
#include "hybrid_orbit/paper_fixture.hpp"
#include "test_util.hpp"

using namespace hybrid_orbit;
using namespace test_util;

TEST_CASE("eigenvalues of the published return-map Jacobian") {
    const PaperFixture fx = builtin_paper_fixture();
    const Spectrum s = eigenvalues(fx.a);
    REQUIRE(s.size() == 3);
    const std::vector<Complex> expected{{2.8271, 0.0}, {-7.7955, 2.2193}, {-7.7955, -2.2193}};
    for (const Complex& e : expected) {
        double best = 1e9;
        for (const Complex& v : s.values) {
            best = std::min(best, std::abs(v - e));
        }
        CHECK(best < 1e-3);
    }
    CHECK(spectral_radius(fx.a) == doctest::Approx(8.1053).epsilon(0).scale(1).epsilon(1e-3 / 8.1053));
}

TEST_CASE("eigenvalues: identity, errors") {
    const Spectrum s = eigenvalues(Matrix::Identity(3, 3));
    for (const Complex& v : s.values) {
        CHECK(std::abs(v - Complex(1.0, 0.0)) < 1e-14);
    }
    CHECK_THROWS_AS(eigenvalues(Matrix::Zero(2, 3)), DimensionError);
    CHECK_THROWS_AS(eigenvalues(Matrix(0, 0)), DimensionError);
}

TEST_CASE("eigenvalues match cofactor determinant and trace") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix m = random_matrix(rng, 4, 4, 2.0);
        const Spectrum s = eigenvalues(m);
        Complex prod(1.0, 0.0);
        Complex sum(0.0, 0.0);
        for (const Complex& v : s.values) {
            prod *= v;
            sum += v;
        }
        CHECK(std::abs(prod - cofactor_determinant(m)) < 1e-8);
        CHECK(std::abs(sum - m.trace()) < 1e-8);
        // conjugate symmetry
        for (const Complex& v : s.values) {
            double best = 1e9;
            for (const Complex& w : s.values) {
                best = std::min(best, std::abs(std::conj(v) - w));
            }
            CHECK(best < 1e-10);
        }
    }
}

TEST_CASE("spectral radius of powers") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix m = random_matrix(rng, 5, 5);
        const double r = spectral_radius(m);
        Matrix p = m;
        for (int k = 1; k <= 4; ++k) {
            CHECK(std::abs(spectral_radius(p) - std::pow(r, k)) <= 1e-8 * std::max(1.0, std::pow(r, k)));
            p = p * m;
        }
    }
    CHECK(spectral_radius(Matrix::Zero(3, 3)) == 0.0);
}

TEST_CASE("spectral norm") {
    CHECK(spectral_norm(Eigen::Vector2d(2.0, -3.0).asDiagonal().toDenseMatrix()) ==
          doctest::Approx(3.0).epsilon(1e-14));
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = random_int(rng, 2, 6);
        const Matrix b = random_matrix(rng, n, n);
        const Matrix sym = 0.5 * (b + b.transpose());
        CHECK(std::abs(spectral_norm(sym) - spectral_radius(sym)) < 1e-10);

        const Matrix m = random_matrix(rng, n, n);
        const Matrix k = random_matrix(rng, n, n);
        CHECK(spectral_norm(m * k) <= spectral_norm(m) * spectral_norm(k) + 1e-10);
        CHECK(spectral_radius(m * k) <= spectral_norm(m) * spectral_norm(k) + 1e-10);
        // largest singular value from the eigenvalues of M'M
        CHECK(std::abs(spectral_norm(m) - std::sqrt(spectral_radius(m.transpose() * m))) < 1e-10);
    }
}

TEST_CASE("max_abs_entry and the entrywise bounds") {
    const PaperFixture fx = builtin_paper_fixture();
    CHECK(max_abs_entry(fx.a1) == doctest::Approx(7.1221).epsilon(1e-12));
    CHECK(max_abs_entry(Matrix::Zero(3, 3)) == 0.0);
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index n = random_int(rng, 2, 6);
        const Matrix m = random_matrix(rng, n, n, 3.0);
        CHECK(spectral_radius(m) <= static_cast<double>(n) * max_abs_entry(m) + 1e-10);

        const double bound = 1.0 / static_cast<double>(n);
        const Matrix a = random_matrix(rng, n, n, bound);
        const Matrix b = random_matrix(rng, n, n, bound);
        CHECK(max_abs_entry(a * b) <= bound + 1e-12);
    }
}

TEST_CASE("symmetry defect") {
    Matrix m(2, 2);
    m << 1, 2, 2.5, 1;
    CHECK(symmetry_defect(m) == doctest::Approx(0.5));
    CHECK_THROWS_AS(symmetry_defect(Matrix::Zero(2, 3)), DimensionError);
}

namespace {

double axioms_defect(const Matrix& m, const Matrix& p) {
    return std::max({max_diff(m * p * m, m), max_diff(p * m * p, p),
                     max_diff((m * p).transpose(), m * p), max_diff((p * m).transpose(), p * m)});
}

}  // namespace

TEST_CASE("pinv: identity, normal equations, axioms") {
    CHECK(max_diff(pinv(Matrix::Identity(3, 3)), Matrix::Identity(3, 3)) < 1e-15);

    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index cols = random_int(rng, 1, 4);
        const Eigen::Index rows = cols + random_int(rng, 0, 3);
        const Matrix m = random_matrix(rng, rows, cols);
        const Matrix oracle = gauss_solve(m.transpose() * m, m.transpose());
        CHECK(max_diff(pinv(m), oracle) < 1e-8);
        CHECK(max_diff(pinv(pinv(m)), m) < 1e-8);
    }
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index rows = random_int(rng, 1, 6);
        const Eigen::Index cols = random_int(rng, 1, 6);
        const Eigen::Index rank = random_int(rng, 0, std::min(rows, cols));
        const Matrix m = random_matrix(rng, rows, rank) * random_matrix(rng, rank, cols);
        CHECK(axioms_defect(m, pinv(m)) < 1e-10);
    }
    const PaperFixture fx = builtin_paper_fixture();
    const Matrix p = pinv(fx.f1);
    CHECK(p.rows() == fx.f1.cols());
    CHECK(p.cols() == fx.f1.rows());
    CHECK(axioms_defect(fx.f1, p) < 1e-8);
}

TEST_CASE("dare: zero dynamics give P = Q, K = 0") {
    std::mt19937_64 rng(16);
    const Matrix b = random_matrix(rng, 3, 2);
    const Matrix l = random_matrix(rng, 3, 3);
    const Matrix q = l * l.transpose();
    const Matrix r = Matrix::Identity(2, 2);
    CHECK(max_diff(dare_solve(Matrix::Zero(3, 3), b, q, r), q) < 1e-14);
    CHECK(max_abs_entry(dlqr_gain(Matrix::Zero(3, 3), b, q, r)) < 1e-14);
}

TEST_CASE("dare: scalar recursion oracle") {
    const double a = 0.5, b = 1.0, q = 1.0, r = 1.0;
    double p = q;
    for (int i = 0; i < 100000; ++i) {
        const double next = a * a * p - (a * p * b) * (a * p * b) / (b * b * p + r) + q;
        const bool done = std::abs(next - p) < 1e-14;
        p = next;
        if (done) {
            break;
        }
    }
    const Matrix am = Matrix::Constant(1, 1, a);
    const Matrix bm = Matrix::Constant(1, 1, b);
    const Matrix qm = Matrix::Constant(1, 1, q);
    const Matrix rm = Matrix::Constant(1, 1, r);
    CHECK(dare_solve(am, bm, qm, rm)(0, 0) == doctest::Approx(p).epsilon(1e-12));
    CHECK(dlqr_gain(am, bm, qm, rm)(0, 0) ==
          doctest::Approx(b * p * a / (b * b * p + r)).epsilon(1e-10));
}

TEST_CASE("dare: Lyapunov special case matches the Kronecker solve") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index n = random_int(rng, 1, 5);
        Matrix a = random_matrix(rng, n, n);
        a *= 0.8 / std::max(1e-3, spectral_radius(a));
        const Matrix l = random_matrix(rng, n, n);
        const Matrix q = l * l.transpose() + Matrix::Identity(n, n);
        const Matrix p = dare_solve(a, Matrix::Zero(n, 1), q, Matrix::Identity(1, 1));
        CHECK(max_diff(p, kronecker_lyapunov(a, q)) < 1e-9 * std::max(1.0, max_abs_entry(p)));
    }
}

TEST_CASE("dare: random stabilizable instances") {
    std::mt19937_64 rng(18);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = random_int(rng, 1, 5);
        const Eigen::Index m = random_int(rng, 1, n);
        const Matrix a = random_matrix(rng, n, n, 1.5);
        const Matrix b = random_matrix(rng, n, m);
        const Matrix q = Matrix::Identity(n, n);
        const Matrix r = Matrix::Identity(m, m);
        const Matrix p = dare_solve(a, b, q, r);
        CHECK(dare_residual(a, b, q, r, p) < 1e-8 * std::max(1.0, max_abs_entry(p)));
        CHECK(symmetry_defect(p) < 1e-9 * std::max(1.0, max_abs_entry(p)));
        CHECK(spectral_radius(a - b * dlqr_gain(a, b, q, r)) < 1.0);
    }
}

TEST_CASE("dare: unstabilizable pair is reported") {
    // An unstable mode the input cannot reach.
    Matrix a(2, 2);
    a << 2.0, 0.0, 0.0, 0.5;
    Matrix b(2, 1);
    b << 0.0, 1.0;
    CHECK_THROWS_AS(dare_solve(a, b, Matrix::Identity(2, 2), Matrix::Identity(1, 1)),
                    NumericalError);
}

TEST_CASE("central differences are exact for quadratics up to rounding") {
    auto fn = [](const Vector& x) {
        Vector y(2);
        y << x(0) * x(0) + 3.0 * x(1), x(0) * x(1);
        return y;
    };
    Vector x(2);
    x << 0.7, -1.3;
    Matrix expected(2, 2);
    expected << 1.4, 3.0, -1.3, 0.7;
    CHECK(max_diff(central_difference_jacobian(fn, x, 1e-5), expected) < 1e-9);
}

TEST_CASE("require_finite") {
    Matrix m = Matrix::Zero(2, 2);
    CHECK_NOTHROW(require_finite(m, "m"));
    m(1, 0) = std::nan("");
    CHECK_THROWS_AS(require_finite(m, "m"), NumericalError);
}
