#pragma once

// Shared aliases, error types and the central tolerance record used by every
// other header in the library.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace delsyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct NotSpdError : Error {
    using Error::Error;
};
struct DegenerateBasisError : Error {
    using Error::Error;
};
struct BasisInsufficientError : Error {
    using Error::Error;
};
struct StabilizabilityError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct UsageError : Error {
    using Error::Error;
};
struct ParameterError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Tolerances
// ---------------------------------------------------------------------------
// Every numerical threshold used by the library lives here so that tests and
// documentation reference a single source.

namespace tol {

// matrix functions
inline constexpr double spd_symmetry = 1e-12;       // relative symmetry defect
inline constexpr double spd_min_eig_frac = 1e-12;   // min eig > frac * trace
inline constexpr double sqrtm_residual = 1e-10;     // relative ||S*S - M||
inline constexpr double gram_quadrature = 1e-10;    // Van Loan vs quadrature

// basis
inline constexpr double expand_residual = 1e-8;     // collocation residual gate
inline constexpr double orthonormal_defect = 1e-8;  // integral of g g^T vs I

// stabilization
inline constexpr double stabilize_margin = 0.05;    // required decay of A+BK

// LMI / solver
inline constexpr double strict_margin_base = 1e-7;  // eps_strict = base*(1+scale)
inline constexpr double gamma_floor = 1e-6;         // lower bound on gamma
inline constexpr double solver_feas = 1e-8;
inline constexpr double solver_gap = 1e-8;

// synthesis
inline constexpr double monotone_slack = 1e-6;      // allowed per-step gamma rise
inline constexpr double default_stop_eps = 1e-6;    // relative-change stop rule

// verification
inline constexpr double abscissa_converged = 1e-4;  // successive-N agreement
inline constexpr double dissipation_scale = 1e-4;   // tol_d = scale*(1+max|s|)
inline constexpr double kf_positivity = -1e-8;      // v >= this along trajectories

}  // namespace tol

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

inline double inf_norm(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Matrix& m) {
    return m.allFinite();
}

// Sy(X) = X + X^T
inline Matrix sy(const Matrix& x) {
    if (x.rows() != x.cols()) throw DimensionError("sy: matrix must be square");
    return x + x.transpose();
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
    if (!cond) throw DimensionError(msg);
}

// Selector picking `size` consecutive coordinates starting at `offset` out of
// an `n`-dimensional space; returns the (size x n) matrix with an identity
// block at the offset.
inline Matrix selector(Eigen::Index n, Eigen::Index offset, Eigen::Index size) {
    require_dims(offset >= 0 && size >= 0 && offset + size <= n, "selector: block out of range");
    Matrix e = Matrix::Zero(size, n);
    e.block(0, offset, size, size).setIdentity();
    return e;
}

}  // namespace delsyn
