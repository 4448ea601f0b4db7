#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: adaptive quadrature, Clenshaw-Curtis quadrature, Newton root finding
// for scalar delay characteristic equations and seeded random generators.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature for matrix-valued integrands
// ---------------------------------------------------------------------------

namespace detail {
inline MatrixXd simpson(const std::function<MatrixXd(double)>& f, double a, double b,
                        const MatrixXd& fa, const MatrixXd& fm, const MatrixXd& fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline MatrixXd adapt(const std::function<MatrixXd(double)>& f, double a, double b,
                      const MatrixXd& fa, const MatrixXd& fm, const MatrixXd& fb,
                      const MatrixXd& whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const MatrixXd fl = f(0.5 * (a + m));
    const MatrixXd fr = f(0.5 * (m + b));
    const MatrixXd left = simpson(f, a, m, fa, fl, fm);
    const MatrixXd right = simpson(f, m, b, fm, fr, fb);
    const double err = (left + right - whole).cwiseAbs().maxCoeff();
    if (depth <= 0 || err < 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return adapt(f, a, m, fa, fl, fm, left, tol / 2.0, depth - 1) +
           adapt(f, m, b, fm, fr, fb, right, tol / 2.0, depth - 1);
}
}  // namespace detail

inline MatrixXd adaptive_quadrature(const std::function<MatrixXd(double)>& f, double a, double b,
                                    double tol = 1e-12, int max_depth = 40) {
    const MatrixXd fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const MatrixXd whole = detail::simpson(f, a, b, fa, fm, fb);
    return detail::adapt(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// ---------------------------------------------------------------------------
// Clenshaw-Curtis quadrature on [a, b] with n+1 Chebyshev points
// ---------------------------------------------------------------------------

inline MatrixXd clenshaw_curtis_quadrature(const std::function<MatrixXd(double)>& f, double a,
                                           double b, int n = 64) {
    std::vector<double> w(static_cast<std::size_t>(n + 1), 0.0);
    if (n % 2 == 0) {
        w[0] = w[static_cast<std::size_t>(n)] = 1.0 / double(n * n - 1);
        for (int i = 1; i < n; ++i) {
            double v = 1.0;
            for (int k = 1; k <= n / 2 - 1; ++k)
                v -= 2.0 * std::cos(2.0 * k * i * M_PI / n) / (4.0 * k * k - 1.0);
            v -= std::cos(double(n) * i * M_PI / n) / (double(n) * n - 1.0);
            w[static_cast<std::size_t>(i)] = 2.0 * v / n;
        }
    } else {
        w[0] = w[static_cast<std::size_t>(n)] = 1.0 / double(n * n);
        for (int i = 1; i < n; ++i) {
            double v = 1.0;
            for (int k = 1; k <= (n - 1) / 2; ++k)
                v -= 2.0 * std::cos(2.0 * k * i * M_PI / n) / (4.0 * k * k - 1.0);
            w[static_cast<std::size_t>(i)] = 2.0 * v / n;
        }
    }
    MatrixXd acc;
    for (int j = 0; j <= n; ++j) {
        const double x = std::cos(j * M_PI / n);
        const double t = 0.5 * (a + b) + 0.5 * (b - a) * x;
        const MatrixXd val = w[static_cast<std::size_t>(j)] * f(t);
        acc = (j == 0) ? MatrixXd(val) : MatrixXd(acc + val);
    }
    return 0.5 * (b - a) * acc;
}

// ---------------------------------------------------------------------------
// Newton iteration on the characteristic equation of x'(t) = -x(t - 1)
// ---------------------------------------------------------------------------
// Roots satisfy s + e^{-s} = 0; the principal pair is near -0.318 +- 1.337 i.

inline std::complex<double> dde_principal_root() {
    std::complex<double> s(-0.3, 1.3);
    for (int it = 0; it < 100; ++it) {
        const std::complex<double> f = s + std::exp(-s);
        const std::complex<double> df = 1.0 - std::exp(-s);
        const std::complex<double> step = f / df;
        s -= step;
        if (std::abs(step) < 1e-15) break;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Seeded random generators
// ---------------------------------------------------------------------------

inline MatrixXd random_matrix(std::mt19937& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * u(rng);
    return m;
}

inline MatrixXd random_spd(std::mt19937& rng, Eigen::Index n, double ridge = 0.1) {
    MatrixXd l = random_matrix(rng, n, n);
    return l * l.transpose() + ridge * MatrixXd::Identity(n, n);
}

// Piecewise-cubic (Catmull-Rom) vector function through seeded knot values on
// [a, b]; continuous with continuous first derivative.
class RandomCubic {
  public:
    RandomCubic(std::mt19937& rng, Eigen::Index dim, double a, double b, int knots = 7)
        : a_(a), b_(b) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        values_.resize(static_cast<std::size_t>(knots));
        for (auto& v : values_) {
            v = VectorXd(dim);
            for (Eigen::Index i = 0; i < dim; ++i) v(i) = u(rng);
        }
    }

    VectorXd operator()(double t) const {
        const int k = static_cast<int>(values_.size()) - 1;
        double s = (t - a_) / (b_ - a_) * k;
        s = std::max(0.0, std::min(double(k) - 1e-12, s));
        const int j = static_cast<int>(std::floor(s));
        const double x = s - j;
        const VectorXd& p1 = values_[static_cast<std::size_t>(j)];
        const VectorXd& p2 = values_[static_cast<std::size_t>(j + 1)];
        const VectorXd p0 = (j > 0) ? values_[static_cast<std::size_t>(j - 1)] : VectorXd(2 * p1 - p2);
        const VectorXd p3 =
            (j + 2 <= k) ? values_[static_cast<std::size_t>(j + 2)] : VectorXd(2 * p2 - p1);
        return 0.5 * ((2.0 * p1) + (-p0 + p2) * x + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * x * x +
                      (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * x * x * x);
    }

  private:
    double a_, b_;
    std::vector<VectorXd> values_;
};

}  // namespace oracles
