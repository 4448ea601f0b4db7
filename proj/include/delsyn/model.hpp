#pragma once

// Plant, supply-rate and augmented (closed-loop quadratic-form) data
// structures, and the fixed coordinate layout shared by every matrix
// inequality in the library.

#include <Eigen/Dense>

#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "delsyn/basis.hpp"
#include "delsyn/common.hpp"
#include "delsyn/matfun.hpp"

namespace delsyn {

// ---------------------------------------------------------------------------
// PlantModel
// ---------------------------------------------------------------------------
//   x'(t) = A x(t) + B u(t-r) + D1 w(t)
//   z(t)  = C1 chi(t) + C2 chi(t-r) + \int C3bar (f(tau) x I_nu) chi(t+tau) + D3 w(t)
// with chi = col(x, u). C3bar holds the plain-basis coefficients of the
// distributed output kernel. D2 models disturbance entering the controller
// dynamics through its operating environment.

struct PlantModel {
    Matrix A;      // n x n
    Matrix B;      // n x p
    Matrix D1;     // n x q
    Matrix C1;     // m x nu
    Matrix C2;     // m x nu
    Matrix C3bar;  // m x (d nu), plain-basis coefficients
    Matrix D2;     // p x q
    Matrix D3;     // m x q
    double r = 0.0;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index p() const { return B.cols(); }
    Eigen::Index q() const { return D1.cols(); }
    Eigen::Index m() const { return C1.rows(); }
    Eigen::Index nu() const { return n() + p(); }
};

// ---------------------------------------------------------------------------
// SupplyRate
// ---------------------------------------------------------------------------
// Quadratic supply s(z, w) = z^T (Jt^T J1^{-1} Jt) z + 2 z^T J2 w + w^T J3 w
// with J1 negative definite. When gamma_role is set, J1 and J3 hold the
// coefficient of a scalar decision variable gamma (actual J1 = gamma * J1,
// J3 = gamma * J3), which keeps the L2-gain problem affine in gamma.

enum class SupplyKind { l2gain, passivity, sector };

struct SupplyRate {
    Matrix J1;      // m x m, negative definite (or gamma-coefficient thereof)
    Matrix Jtilde;  // m x m
    Matrix J2;      // m x q
    Matrix J3;      // q x q symmetric (or gamma-coefficient thereof)
    bool gamma_role = false;

    // Concrete supply at a fixed gamma (identity when gamma_role is unset).
    SupplyRate materialize(double gamma) const {
        if (!gamma_role) return *this;
        if (!(gamma > 0.0)) throw ParameterError("SupplyRate: gamma must be positive");
        return SupplyRate{gamma * J1, Jtilde, J2, gamma * J3, false};
    }

    // s(z, w) for a concrete (non gamma-scaled) supply.
    double eval(const Vector& z, const Vector& w) const {
        require(!gamma_role, "SupplyRate::eval requires a materialized supply");
        const Matrix core = Jtilde.transpose() * J1.inverse() * Jtilde;
        return (z.dot(core * z)) + 2.0 * z.dot(J2 * w) + w.dot(J3 * w);
    }
};

inline SupplyRate supply_from_template(SupplyKind kind, Eigen::Index m, Eigen::Index q,
                                       double alpha = 0.0, double beta = 0.0) {
    const Matrix im = Matrix::Identity(m, m);
    switch (kind) {
        case SupplyKind::l2gain:
            return SupplyRate{-im, im, Matrix::Zero(m, q), Matrix::Identity(q, q), true};
        case SupplyKind::passivity:
            require_dims(m == q, "supply: passivity requires m == q");
            return SupplyRate{-im, Matrix::Zero(m, m), im, Matrix::Zero(q, q), false};
        case SupplyKind::sector:
            require_dims(m == q, "supply: sector constraint requires m == q");
            return SupplyRate{-im, -im, -0.5 * (alpha + beta) * im, alpha * beta * im, false};
    }
    throw UsageError("supply_from_template: unknown kind");
}

// ---------------------------------------------------------------------------
// ControllerGains
// ---------------------------------------------------------------------------
// u'(t) = K1 chi(t) + K2 chi(t-r) + \int K3 (sqrtF f(tau) x I_nu) chi(t+tau) dtau

struct ControllerGains {
    Matrix K1;  // p x nu
    Matrix K2;  // p x nu
    Matrix K3;  // p x (d nu), orthonormal-basis coordinates

    // [K1 K2 K3], the gain block acting on (chi(t), chi(t-r), eta(t)).
    Matrix packed() const {
        Matrix k(K1.rows(), K1.cols() + K2.cols() + K3.cols());
        k << K1, K2, K3;
        return k;
    }
};

// ---------------------------------------------------------------------------
// Coordinate layout
// ---------------------------------------------------------------------------
// All quadratic forms act on xi = col(chi(t), chi(t-r), eta(t), w(t), zeta(t))
// of size ell = 2 nu + d nu + q + m, where eta(t) = \int F(tau) chi(t+tau) dtau
// and zeta is the m-dimensional slack coordinate carrying the z-quadratic
// supply term through a Schur complement.

struct AugLayout {
    Eigen::Index n, p, q, m, d;
    Eigen::Index nu;    // n + p
    Eigen::Index dnu;   // d * nu
    Eigen::Index ell;   // 2 nu + d nu + q + m

    Eigen::Index off_chi() const { return 0; }
    Eigen::Index off_chir() const { return nu; }
    Eigen::Index off_eta() const { return 2 * nu; }
    Eigen::Index off_w() const { return 2 * nu + dnu; }
    Eigen::Index off_zeta() const { return 2 * nu + dnu + q; }

    AugLayout(Eigen::Index n_, Eigen::Index p_, Eigen::Index q_, Eigen::Index m_, Eigen::Index d_)
        : n(n_), p(p_), q(q_), m(m_), d(d_), nu(n_ + p_), dnu(d_ * nu), ell(2 * nu + dnu + q_ + m_) {}

    Matrix sel_chi() const { return selector(ell, off_chi(), nu); }
    Matrix sel_chir() const { return selector(ell, off_chir(), nu); }
    Matrix sel_eta() const { return selector(ell, off_eta(), dnu); }
    Matrix sel_w() const { return selector(ell, off_w(), q); }
    Matrix sel_zeta() const { return selector(ell, off_zeta(), m); }
    // chi(t), chi(t-r), eta, w -- everything the output map touches
    Matrix sel_y() const { return selector(ell, 0, 2 * nu + dnu + q); }
    // chi(t), chi(t-r), eta -- the columns multiplied by the gain block
    Matrix sel_head() const { return selector(ell, 0, 2 * nu + dnu); }
};

// ---------------------------------------------------------------------------
// AugmentedSystem
// ---------------------------------------------------------------------------

struct AugmentedSystem {
    AugLayout layout;
    Matrix bbA;     // nu x ell, drift rows of chi' in xi coordinates
    Matrix bbB;     // nu x p = col(0, I_p)
    Matrix Sigma;   // m x (2 nu + d nu + q), z = Sigma * head(xi)
    Matrix C3;      // m x (d nu), orthonormal coordinates
    Matrix F0;      // F(0),  (d nu) x nu
    Matrix Fmr;     // F(-r), (d nu) x nu
    Matrix PiHat;   // (d nu) x (d nu)
    double r;

    // chi' = (bbA + bbB * [K1 K2 K3 0]) xi along trajectories
    Matrix closed_loop_row(const ControllerGains& g) const {
        Matrix k = Matrix::Zero(layout.p, layout.ell);
        k.leftCols(2 * layout.nu + layout.dnu) = g.packed();
        return bbA + bbB * k;
    }
};

// ---------------------------------------------------------------------------
// Plant validation
// ---------------------------------------------------------------------------

struct Diagnostic {
    std::string name;
    bool fatal;
    std::string message;
};

struct ValidationReport {
    std::vector<Diagnostic> diagnostics;

    bool ok() const {
        for (const auto& d : diagnostics)
            if (d.fatal) return false;
        return true;
    }
    std::string summary() const {
        std::ostringstream os;
        for (const auto& d : diagnostics)
            os << (d.fatal ? "[fatal] " : "[note] ") << d.name << ": " << d.message << "\n";
        return os.str();
    }
};

inline ValidationReport validate_plant(const PlantModel& p, const BasisSpec& spec) {
    ValidationReport rep;
    auto fail = [&](const std::string& name, const std::string& msg) {
        rep.diagnostics.push_back({name, true, msg});
    };

    const Eigen::Index n = p.n(), pp = p.p(), q = p.q(), m = p.m(), nu = p.nu();
    bool dims_ok = true;
    auto dim_check = [&](bool cond, const std::string& name, const std::string& msg) {
        if (!cond) {
            fail(name, msg);
            dims_ok = false;
        }
    };

    dim_check(p.A.rows() == p.A.cols() && n > 0, "plant.A", "A must be square and nonempty");
    dim_check(p.B.rows() == n && pp > 0, "plant.B", "B must be n x p with p >= 1");
    dim_check(p.D1.rows() == n, "plant.D1", "D1 must have n rows");
    dim_check(p.C1.rows() == m && p.C1.cols() == nu, "plant.C1", "C1 must be m x (n+p)");
    dim_check(p.C2.rows() == m && p.C2.cols() == nu, "plant.C2", "C2 must be m x (n+p)");
    dim_check(p.C3bar.rows() == m && p.C3bar.cols() == spec.d * nu, "plant.C3bar",
              "C3bar must be m x (d*(n+p))");
    dim_check(p.D2.rows() == pp && p.D2.cols() == q, "plant.D2", "D2 must be p x q");
    dim_check(p.D3.rows() == m && p.D3.cols() == q, "plant.D3", "D3 must be m x q");
    if (!(p.r > 0.0)) fail("plant.r", "delay r must be positive");
    if (!(all_finite(p.A) && all_finite(p.B) && all_finite(p.D1) && all_finite(p.C1) &&
          all_finite(p.C2) && all_finite(p.C3bar) && all_finite(p.D2) && all_finite(p.D3)))
        fail("plant.finite", "plant matrices contain non-finite entries");

    if (dims_ok) {
        try {
            (void)stabilizing_gain(p.A, p.B);
            rep.diagnostics.push_back({"plant.stabilizable", false, "Bass probe succeeded"});
        } catch (const Error& e) {
            fail("plant.stabilizable", e.what());
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Augmented system assembly
// ---------------------------------------------------------------------------

inline AugmentedSystem build_augmented(const PlantModel& p, const GramData& g, const BasisSpec& spec) {
    require_dims(g.nu == p.nu(), "build_augmented: Gram data built for a different nu");
    AugLayout lay(p.n(), p.p(), p.q(), p.m(), spec.d);

    Matrix bbA = Matrix::Zero(lay.nu, lay.ell);
    bbA.block(0, lay.off_chi(), lay.n, lay.n) = p.A;
    bbA.block(0, lay.off_chir() + lay.n, lay.n, lay.p) = p.B;
    bbA.block(0, lay.off_w(), lay.n, lay.q) = p.D1;
    bbA.block(lay.n, lay.off_w(), lay.p, lay.q) = p.D2;

    Matrix bbB = Matrix::Zero(lay.nu, lay.p);
    bbB.bottomRows(lay.p).setIdentity();

    const Matrix c3 = orthonormalize_coeffs(p.C3bar, g);
    Matrix sigma(lay.m, 2 * lay.nu + lay.dnu + lay.q);
    sigma << p.C1, p.C2, c3, p.D3;

    return AugmentedSystem{lay,
                           std::move(bbA),
                           std::move(bbB),
                           std::move(sigma),
                           c3,
                           eval_F(g, spec, 0.0),
                           eval_F(g, spec, -p.r),
                           g.PiHat,
                           p.r};
}

}  // namespace delsyn
