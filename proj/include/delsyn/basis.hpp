#pragma once

// Exponential function basis f(tau) = e^{Pi tau} f0 on [-r, 0], its Gram data
// and coefficient expansions of matrix-valued kernels in that basis.

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "delsyn/common.hpp"
#include "delsyn/matfun.hpp"

namespace delsyn {

// ---------------------------------------------------------------------------
// BasisSpec
// ---------------------------------------------------------------------------

struct BasisSpec {
    Eigen::Index d = 0;  // number of basis functions
    Matrix Pi;           // d x d generator, f' = Pi f
    Vector f0;           // basis values at tau = 0
    double r = 0.0;      // delay length

    void check() const {
        require_dims(Pi.rows() == d && Pi.cols() == d, "basis: Pi must be d x d");
        require_dims(f0.size() == d, "basis: f0 must have d entries");
        if (!(r > 0.0)) throw DomainError("basis: delay r must be positive");
        if (!all_finite(Pi) || !all_finite(f0)) throw DomainError("basis: non-finite entries");
    }

    // f(tau) = e^{Pi tau} f0
    Vector eval(double tau) const { return expm(Pi, tau) * f0; }
};

// ---------------------------------------------------------------------------
// GramData
// ---------------------------------------------------------------------------
// Finv = \int_{-r}^0 f f^T, with F, sqrt(F) and sqrt(F)^{-1} all derived from
// one eigendecomposition of Finv so that the algebraic identities hold to
// rounding accuracy. PiHat = (sqrtF Pi sqrtF^{-1}) \otimes I_nu generates the
// orthonormalized stacked basis.

struct GramData {
    SpdMatrix Finv;
    SpdMatrix F;
    SpdMatrix sqrtF;
    SpdMatrix sqrtFinv;
    Matrix PiHat;       // (d nu) x (d nu)
    Eigen::Index nu;    // stacked block size
    double cond;        // condition number of Finv
    double ortho_defect;  // || sqrtF * Finv * sqrtF - I ||_inf
};

inline GramData build_gram(const BasisSpec& spec, Eigen::Index nu) {
    spec.check();
    require_dims(nu >= 1, "build_gram: nu must be at least 1");

    Matrix raw = detail::vanloan_integral(spec.Pi, spec.f0, spec.r);
    Eigen::SelfAdjointEigenSolver<Matrix> es(raw);
    const Vector ev = es.eigenvalues();
    const Matrix v = es.eigenvectors();
    const double cond = ev.maxCoeff() / std::max(ev.minCoeff(), 0.0);
    if (!(ev.minCoeff() > tol::spd_min_eig_frac * raw.trace())) {
        std::ostringstream msg;
        msg << "build_gram: degenerate basis, Gram condition number " << cond
            << "; the components of f are not linearly independent on [-r, 0]";
        throw ConfigError(msg.str());
    }

    auto spd_from = [&](const Vector& d) {
        Matrix m = v * d.asDiagonal() * v.transpose();
        m = (0.5 * (m + m.transpose())).eval();
        return SpdMatrix(std::move(m), SpdMatrix::Unchecked{});
    };

    GramData g{spd_from(ev),
               spd_from(ev.cwiseInverse()),
               spd_from(ev.cwiseSqrt().cwiseInverse()),
               spd_from(ev.cwiseSqrt()),
               Matrix(),
               nu,
               cond,
               0.0};
    g.PiHat = kron(g.sqrtF.m() * spec.Pi * g.sqrtFinv.m(), Matrix::Identity(nu, nu));
    g.ortho_defect =
        inf_norm(g.sqrtF.m() * g.Finv.m() * g.sqrtF.m() - Matrix::Identity(spec.d, spec.d));
    return g;
}

// ---------------------------------------------------------------------------
// F(tau) = (sqrtF e^{Pi tau} f0) \otimes I_nu, a (d nu) x nu matrix
// ---------------------------------------------------------------------------

inline Matrix eval_F(const GramData& g, const BasisSpec& spec, double tau) {
    const double slack = 1e-9 * (1.0 + spec.r);
    if (tau < -spec.r - slack || tau > slack)
        throw DomainError("eval_F: tau outside [-r, 0]");
    Vector gf = g.sqrtF.m() * spec.eval(tau);
    return kron(gf, Matrix::Identity(g.nu, g.nu));
}

// ---------------------------------------------------------------------------
// Coefficient expansion of M e^{-A tau} B in the plain basis
// ---------------------------------------------------------------------------
// Finds Gbar (rows(M) x d*cols(B)) with M e^{-A tau} B = Gbar (f(tau) \otimes I_p)
// by collocation at d Chebyshev points of the second kind, then reports the
// worst-case defect over a dense grid of 10 d points.

inline std::pair<Matrix, double> expand_in_basis(const Matrix& m, const Matrix& a, const Matrix& b,
                                                 const BasisSpec& spec) {
    spec.check();
    require_dims(a.rows() == a.cols(), "expand_in_basis: A must be square");
    require_dims(m.cols() == a.rows(), "expand_in_basis: M column count mismatch");
    require_dims(b.rows() == a.rows(), "expand_in_basis: B row count mismatch");

    const Eigen::Index d = spec.d;
    const Eigen::Index rows = m.rows();
    const Eigen::Index p = b.cols();

    std::vector<double> nodes(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const double x = (d == 1) ? 0.0 : std::cos(double(k) * M_PI / double(d - 1));
        nodes[k] = (x - 1.0) * spec.r / 2.0;
    }

    Matrix vand(d, d);           // vand(k, i) = f_i(tau_k)
    Matrix rhs(d, rows * p);     // one column per target entry
    for (Eigen::Index k = 0; k < d; ++k) {
        vand.row(k) = spec.eval(nodes[k]).transpose();
        const Matrix t = m * expm(a, -nodes[k]) * b;
        rhs.row(k) = Eigen::Map<const Vector>(t.data(), rows * p).transpose();
    }
    Matrix sol = vand.colPivHouseholderQr().solve(rhs);  // d x (rows*p)

    Matrix coeff(rows, d * p);
    for (Eigen::Index i = 0; i < d; ++i) {
        Vector flat = sol.row(i).transpose();
        coeff.middleCols(i * p, p) = Eigen::Map<Matrix>(flat.data(), rows, p);
    }

    // dense residual check
    const Eigen::Index grid = 10 * d;
    double resid = 0.0, scale = 0.0;
    for (Eigen::Index j = 0; j <= grid; ++j) {
        const double tau = -spec.r + spec.r * double(j) / double(grid);
        const Matrix target = m * expm(a, -tau) * b;
        const Vector f = spec.eval(tau);
        Matrix approx = Matrix::Zero(rows, p);
        for (Eigen::Index i = 0; i < d; ++i) approx += f(i) * coeff.middleCols(i * p, p);
        resid = std::max(resid, inf_norm(target - approx));
        scale = std::max(scale, inf_norm(target));
    }
    if (resid > tol::expand_residual * (1.0 + scale))
        throw BasisInsufficientError(
            "expand_in_basis: the basis does not span the modes of A (residual " +
            std::to_string(resid) + "); add functions to Pi/f0 covering e^{-A tau} B");
    return {coeff, resid};
}

// ---------------------------------------------------------------------------
// Plain-basis coefficients -> orthonormal-basis coefficients
// ---------------------------------------------------------------------------
// plain (f(tau) \otimes I_nu) = plain (sqrtFinv \otimes I_nu) (sqrtF f(tau) \otimes I_nu)

inline Matrix orthonormalize_coeffs(const Matrix& plain, const GramData& g) {
    const Eigen::Index d = g.sqrtFinv.dim();
    require_dims(plain.cols() == d * g.nu, "orthonormalize_coeffs: column count must be d*nu");
    return plain * kron(g.sqrtFinv.m(), Matrix::Identity(g.nu, g.nu));
}

}  // namespace delsyn
