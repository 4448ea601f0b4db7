#pragma once

// Dense real matrix utilities: matrix exponential, SPD square root, Kronecker
// products, Van Loan integrals and a Lyapunov-based stabilizing gain.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "delsyn/common.hpp"

namespace delsyn {

// ---------------------------------------------------------------------------
// SpdMatrix: a square symmetric positive definite matrix
// ---------------------------------------------------------------------------

class SpdMatrix {
  public:
    SpdMatrix() : m_(0, 0) {}  // empty placeholder, filled by move-assignment
    explicit SpdMatrix(Matrix m) : m_(std::move(m)) { validate(m_); }

    struct Unchecked {};
    SpdMatrix(Matrix m, Unchecked) : m_(std::move(m)) {}

    const Matrix& m() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

    static void validate(const Matrix& m) {
        require_dims(m.rows() == m.cols(), "SpdMatrix: matrix must be square");
        if (!all_finite(m)) throw DomainError("SpdMatrix: non-finite entries");
        const double scale = std::max(1.0, inf_norm(m));
        if (inf_norm(m - m.transpose()) > tol::spd_symmetry * scale)
            throw NotSpdError("SpdMatrix: symmetry defect exceeds tolerance");
        Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw NotSpdError("SpdMatrix: smallest eigenvalue is not positive");
    }

  private:
    Matrix m_;
};

// ---------------------------------------------------------------------------
// Matrix exponential, e^{M t}
// ---------------------------------------------------------------------------
// Scaling-and-squaring with the order-13 diagonal Pade approximant.

inline Matrix expm(const Matrix& m, double t = 1.0) {
    require_dims(m.rows() == m.cols(), "expm: matrix must be square");
    if (!all_finite(m) || !std::isfinite(t)) throw DomainError("expm: non-finite input");

    const Eigen::Index n = m.rows();
    if (n == 0) return Matrix(0, 0);
    Matrix a = m * t;

    static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};
    const double theta13 = 5.371920351148152;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
        a /= std::pow(2.0, squarings);
    }

    const Matrix id = Matrix::Identity(n, n);
    const Matrix a2 = a * a;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a2 * a4;
    const Matrix u =
        a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    const Matrix v =
        a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

// ---------------------------------------------------------------------------
// SPD square root via symmetric eigendecomposition
// ---------------------------------------------------------------------------

inline SpdMatrix sqrtm_spd(const SpdMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.m());
    const Vector& ev = es.eigenvalues();
    const double floor = tol::spd_min_eig_frac * std::max(1.0, m.m().trace());
    if (ev.minCoeff() <= floor)
        throw NotSpdError("sqrtm_spd: smallest eigenvalue below tolerance");
    Matrix s = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    s = (0.5 * (s + s.transpose())).eval();
    return SpdMatrix(std::move(s), SpdMatrix::Unchecked{});
}

// ---------------------------------------------------------------------------
// Kronecker product
// ---------------------------------------------------------------------------

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

// ---------------------------------------------------------------------------
// Van Loan Gram integral
// ---------------------------------------------------------------------------
// Computes  G = \int_{-r}^{0} e^{Pi tau} w0 w0^T e^{Pi^T tau} d tau  through a
// single block matrix exponential: with M = [[Pi, w0 w0^T], [0, -Pi^T]] one
// has  \int_0^r e^{-Pi s} w0 w0^T e^{-Pi^T s} ds = e^{-Pi r} * (e^{M r})_12.

namespace detail {

// Raw Van Loan integral without the positive-definiteness gate.
inline Matrix vanloan_integral(const Matrix& pi, const Vector& w0, double r) {
    require_dims(pi.rows() == pi.cols(), "vanloan_gram: Pi must be square");
    require_dims(w0.size() == pi.rows(), "vanloan_gram: w0 size mismatch");
    if (!(r > 0.0)) throw DomainError("vanloan_gram: delay r must be positive");

    const Eigen::Index d = pi.rows();
    Matrix block = Matrix::Zero(2 * d, 2 * d);
    block.topLeftCorner(d, d) = pi;
    block.topRightCorner(d, d) = w0 * w0.transpose();
    block.bottomRightCorner(d, d) = -pi.transpose();

    const Matrix e = expm(block, r);
    Matrix g = expm(pi, -r) * e.topRightCorner(d, d);
    return 0.5 * (g + g.transpose());
}

}  // namespace detail

inline SpdMatrix vanloan_gram(const Matrix& pi, const Vector& w0, double r) {
    Matrix g = detail::vanloan_integral(pi, w0, r);
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= tol::spd_min_eig_frac * g.trace())
        throw DegenerateBasisError(
            "vanloan_gram: Gram matrix is numerically singular; "
            "the basis components are not linearly independent on [-r, 0]");
    return SpdMatrix(std::move(g), SpdMatrix::Unchecked{});
}

// ---------------------------------------------------------------------------
// Eigenvalue helpers
// ---------------------------------------------------------------------------

inline Eigen::VectorXcd eigenvalues(const Matrix& a) {
    require_dims(a.rows() == a.cols(), "eigenvalues: matrix must be square");
    Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
    return es.eigenvalues();
}

// Largest real part over the spectrum of a (finite-dimensional) matrix.
inline double matrix_abscissa(const Matrix& a) {
    return eigenvalues(a).real().maxCoeff();
}

// ---------------------------------------------------------------------------
// Lyapunov equation  M W + W M^T = C  (small dense, Kronecker vectorization)
// ---------------------------------------------------------------------------

inline Matrix lyapunov_solve(const Matrix& m, const Matrix& c) {
    require_dims(m.rows() == m.cols() && c.rows() == c.cols() && m.rows() == c.rows(),
                 "lyapunov_solve: dimension mismatch");
    const Eigen::Index n = m.rows();
    const Matrix id = Matrix::Identity(n, n);
    Matrix sys = kron(id, m) + kron(m, id);  // acts on column-major vec(W)
    Eigen::Map<const Vector> rhs(c.data(), n * n);
    Eigen::FullPivLU<Matrix> lu(sys);
    if (!lu.isInvertible()) throw StabilizabilityError("lyapunov_solve: singular Lyapunov operator");
    Vector w = lu.solve(rhs);
    Matrix out = Eigen::Map<Matrix>(w.data(), n, n);
    return 0.5 * (out + out.transpose());
}

// ---------------------------------------------------------------------------
// Stabilizing gain (Bass shift method)
// ---------------------------------------------------------------------------
// Picks beta > ||A||_inf, solves (A + beta I) W + W (A + beta I)^T = 2 B B^T
// and returns K = -B^T W^{-1}; the closed loop A + BK then satisfies
// (A+BK) W + W (A+BK)^T = -2 beta W, so its spectral abscissa is <= -beta.

inline Matrix stabilizing_gain(const Matrix& a, const Matrix& b, double margin = tol::stabilize_margin) {
    require_dims(a.rows() == a.cols(), "stabilizing_gain: A must be square");
    require_dims(b.rows() == a.rows(), "stabilizing_gain: B row count mismatch");
    if (!all_finite(a) || !all_finite(b)) throw DomainError("stabilizing_gain: non-finite input");

    const double beta = inf_norm(a) + 0.5 + margin;
    const Matrix shifted = a + beta * Matrix::Identity(a.rows(), a.cols());

    Matrix w;
    try {
        w = lyapunov_solve(shifted, 2.0 * b * b.transpose());
    } catch (const Error&) {
        throw StabilizabilityError("stabilizing_gain: Lyapunov solve failed; (A,B) may not be stabilizable");
    }

    Eigen::FullPivLU<Matrix> lu(w);
    if (!lu.isInvertible())
        throw StabilizabilityError("stabilizing_gain: controllability Gramian is singular");
    Matrix k = -(lu.solve(b)).transpose();  // -B^T W^{-1} = -(W^{-1} B)^T since W symmetric

    if (matrix_abscissa(a + b * k) > -margin)
        throw StabilizabilityError("stabilizing_gain: closed loop failed the eigenvalue check");
    return k;
}

}  // namespace delsyn
