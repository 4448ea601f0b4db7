#pragma once

// Affine matrix-inequality modeling: decision variables, symmetric affine
// expressions, the assembly of the synthesis conditions (certificate
// positivity, the dissipativity inequality, its inner convex approximation
// and the proximal epigraphs) and compilation to a standard-form SDP.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "delsyn/common.hpp"
#include "delsyn/model.hpp"
#include "delsyn/verify.hpp"

namespace delsyn {

// ---------------------------------------------------------------------------
// Variables
// ---------------------------------------------------------------------------

enum class VarKind { symmetric, full, scalar };

struct VarRef {
    int id = -1;
    VarKind kind = VarKind::scalar;
    Eigen::Index rows = 1;
    Eigen::Index cols = 1;

    Eigen::Index coord_count() const {
        switch (kind) {
            case VarKind::symmetric: return rows * (rows + 1) / 2;
            case VarKind::full: return rows * cols;
            case VarKind::scalar: return 1;
        }
        return 0;
    }
    bool valid() const { return id >= 0; }
};

using Assignment = std::map<int, Matrix>;  // var id -> value (scalars as 1x1)

// ---------------------------------------------------------------------------
// svec / smat with sqrt(2)-scaled off-diagonals (inner-product preserving)
// ---------------------------------------------------------------------------

inline Eigen::Index sym_coord_index(Eigen::Index n, Eigen::Index a, Eigen::Index b) {
    // a <= b, row-major upper triangle
    return a * n - a * (a - 1) / 2 + (b - a);
}

inline Vector svec(const Matrix& m) {
    require_dims(m.rows() == m.cols(), "svec: matrix must be square");
    const Eigen::Index n = m.rows();
    Vector v(n * (n + 1) / 2);
    const double rt2 = std::sqrt(2.0);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a; b < n; ++b)
            v(sym_coord_index(n, a, b)) = (a == b) ? m(a, a) : rt2 * m(a, b);
    return v;
}

inline Matrix smat(const Vector& v, Eigen::Index n) {
    require_dims(v.size() == n * (n + 1) / 2, "smat: length mismatch");
    Matrix m(n, n);
    const double rt2inv = 1.0 / std::sqrt(2.0);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a; b < n; ++b) {
            const double x = v(sym_coord_index(n, a, b));
            if (a == b)
                m(a, a) = x;
            else
                m(a, b) = m(b, a) = rt2inv * x;
        }
    return m;
}

// ---------------------------------------------------------------------------
// AffineMatrixExpr: symmetric matrix expression, affine in the variables
// ---------------------------------------------------------------------------
// Every linear term is stored in symmetrized form, contribution
//   scale * (L op(V) R + (L op(V) R)^T),
// so evaluated expressions and compiled coefficient matrices are exactly
// symmetric by construction. op(V) is V, V^T, or v * I_k for scalars.

struct LinearTerm {
    VarRef var;
    Matrix left;
    Matrix right;
    bool transpose_var = false;
    double scale = 1.0;
};

class AffineMatrixExpr {
  public:
    explicit AffineMatrixExpr(Eigen::Index dim) : dim_(dim), constant_(Matrix::Zero(dim, dim)) {}

    Eigen::Index dim() const { return dim_; }
    const Matrix& constant() const { return constant_; }
    const std::vector<LinearTerm>& terms() const { return terms_; }

    void add_const_sym(const Matrix& c) {
        require_dims(c.rows() == dim_ && c.cols() == dim_, "expr: constant dimension mismatch");
        require_dims(inf_norm(c - c.transpose()) <= 1e-12 * (1.0 + inf_norm(c)),
                     "expr: constant must be symmetric");
        constant_ += 0.5 * (c + c.transpose());
    }

    void add_const_sy(const Matrix& c) {
        require_dims(c.rows() == dim_ && c.cols() == dim_, "expr: constant dimension mismatch");
        constant_ += c + c.transpose();
    }

    // scale * Sy(L op(V) R)
    void add_sy(const VarRef& v, Matrix l, Matrix r, bool transpose_var = false, double scale = 1.0) {
        check_term(v, l, r, transpose_var);
        terms_.push_back({v, std::move(l), std::move(r), transpose_var, scale});
    }

    // scale * L V L^T for symmetric or scalar V (exactly symmetric via Sy/2)
    void add_quad(const VarRef& v, const Matrix& l, double scale = 1.0) {
        require(v.kind != VarKind::full, "expr: add_quad requires a symmetric or scalar variable");
        add_sy(v, l, l.transpose(), false, 0.5 * scale);
    }

    // v * C for a scalar variable and fixed symmetric C
    void add_scalar_times_sym(const VarRef& v, const Matrix& c) {
        require(v.kind == VarKind::scalar, "expr: variable must be scalar");
        require_dims(c.rows() == dim_ && c.cols() == dim_, "expr: matrix dimension mismatch");
        add_sy(v, c, Matrix::Identity(dim_, dim_), false, 0.5);
    }

    // place a smaller symmetric expression on the diagonal at `offset`
    void add_embedded(const AffineMatrixExpr& e, Eigen::Index offset) {
        const Matrix emb = selector(dim_, offset, e.dim());  // e.dim x dim
        constant_ += emb.transpose() * e.constant_ * emb;
        for (const auto& t : e.terms_)
            terms_.push_back({t.var, emb.transpose() * t.left, t.right * emb, t.transpose_var, t.scale});
    }

    Matrix eval(const Assignment& values) const {
        Matrix out = constant_;
        for (const auto& t : terms_) {
            const auto it = values.find(t.var.id);
            require(it != values.end(), "expr: assignment is missing a variable");
            out += term_value(t, it->second);
        }
        return out;
    }

    // contribution of one unit coordinate of `v`; coordinates follow svec
    // order for symmetric variables and row-major order for full ones
    Matrix coord_matrix(const LinearTerm& t, Eigen::Index coord) const {
        const VarRef& v = t.var;
        Matrix m;
        if (v.kind == VarKind::scalar) {
            m = t.left * t.right;
        } else if (v.kind == VarKind::full) {
            const Eigen::Index a = coord / v.cols;
            const Eigen::Index b = coord % v.cols;
            if (!t.transpose_var)
                m = t.left.col(a) * t.right.row(b);
            else
                m = t.left.col(b) * t.right.row(a);
        } else {
            // invert svec index
            Eigen::Index a = 0, rem = coord;
            while (rem >= v.rows - a) {
                rem -= v.rows - a;
                ++a;
            }
            const Eigen::Index b = a + rem;
            if (a == b) {
                m = t.left.col(a) * t.right.row(a);
            } else {
                const double s = 1.0 / std::sqrt(2.0);
                m = s * (t.left.col(a) * t.right.row(b) + t.left.col(b) * t.right.row(a));
            }
        }
        m *= t.scale;
        return m + m.transpose();
    }

  private:
    void check_term(const VarRef& v, const Matrix& l, const Matrix& r, bool transpose_var) const {
        require_dims(l.rows() == dim_ && r.cols() == dim_, "expr: term outer dimension mismatch");
        if (v.kind == VarKind::scalar) {
            require_dims(l.cols() == r.rows(), "expr: scalar term inner dimension mismatch");
        } else {
            const Eigen::Index vr = transpose_var ? v.cols : v.rows;
            const Eigen::Index vc = transpose_var ? v.rows : v.cols;
            require_dims(l.cols() == vr && r.rows() == vc, "expr: term inner dimension mismatch");
        }
    }

    static Matrix op_value(const LinearTerm& t, const Matrix& value) {
        if (t.var.kind == VarKind::scalar)
            return value(0, 0) * Matrix::Identity(t.left.cols(), t.left.cols());
        return t.transpose_var ? value.transpose() : value;
    }

    static Matrix term_value(const LinearTerm& t, const Matrix& value) {
        Matrix m = t.scale * (t.left * op_value(t, value) * t.right);
        return m + m.transpose();
    }

    Eigen::Index dim_;
    Matrix constant_;
    std::vector<LinearTerm> terms_;
};

// ---------------------------------------------------------------------------
// LmiProblem
// ---------------------------------------------------------------------------

enum class Sense { psd_geq, nsd_leq };  // expr >= eps*I   /   expr <= -eps*I

struct LmiConstraint {
    AffineMatrixExpr expr;
    Sense sense;
    double eps;
    std::string label;
};

class LmiProblem {
  public:
    VarRef add_symmetric(const std::string& name, Eigen::Index n) {
        return add_var(name, VarKind::symmetric, n, n);
    }
    VarRef add_full(const std::string& name, Eigen::Index r, Eigen::Index c) {
        return add_var(name, VarKind::full, r, c);
    }
    VarRef add_scalar(const std::string& name) { return add_var(name, VarKind::scalar, 1, 1); }

    void add_constraint(AffineMatrixExpr expr, Sense sense, double eps, std::string label) {
        for (const auto& t : expr.terms())
            require(t.var.id >= 0 && t.var.id < int(vars_.size()), "problem: unregistered variable");
        constraints_.push_back({std::move(expr), sense, eps, std::move(label)});
    }

    // objective contribution tr(W^T V), minimized
    void add_objective(const VarRef& v, Matrix weight) {
        require_dims(weight.rows() == v.rows && weight.cols() == v.cols, "objective weight shape");
        objective_.emplace_back(v, std::move(weight));
    }

    const std::vector<VarRef>& vars() const { return vars_; }
    const std::string& var_name(int id) const { return names_[static_cast<std::size_t>(id)]; }
    const std::vector<LmiConstraint>& constraints() const { return constraints_; }
    const std::vector<std::pair<VarRef, Matrix>>& objective() const { return objective_; }

    double objective_value(const Assignment& values) const {
        double obj = 0.0;
        for (const auto& [v, w] : objective_) {
            const auto it = values.find(v.id);
            require(it != values.end(), "objective: assignment missing a variable");
            obj += (w.transpose() * it->second).trace();
        }
        return obj;
    }

    // worst constraint violation at a candidate point (in eigenvalue terms)
    double max_violation(const Assignment& values) const {
        double worst = 0.0;
        for (const auto& c : constraints_) {
            Matrix m = c.expr.eval(values);
            if (c.sense == Sense::nsd_leq) m = -m;
            m -= c.eps * Matrix::Identity(m.rows(), m.cols());
            Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
            worst = std::max(worst, -es.eigenvalues().minCoeff());
        }
        return worst;
    }

    std::string describe() const {
        std::ostringstream os;
        os << "variables:\n";
        Eigen::Index offset = 0;
        for (const auto& v : vars_) {
            os << "  " << var_name(v.id) << "  ";
            switch (v.kind) {
                case VarKind::symmetric: os << "sym " << v.rows << "x" << v.rows; break;
                case VarKind::full: os << "full " << v.rows << "x" << v.cols; break;
                case VarKind::scalar: os << "scalar"; break;
            }
            os << "  coords [" << offset << ", " << offset + v.coord_count() << ")\n";
            offset += v.coord_count();
        }
        os << "constraints:\n";
        for (const auto& c : constraints_) {
            os << "  " << c.label << "  " << c.expr.dim() << "x" << c.expr.dim()
               << (c.sense == Sense::psd_geq ? "  >= " : "  <= -") << c.eps << "*I\n";
        }
        os << "objective terms: " << objective_.size() << "\n";
        return os.str();
    }

  private:
    VarRef add_var(const std::string& name, VarKind kind, Eigen::Index r, Eigen::Index c) {
        VarRef v{int(vars_.size()), kind, r, c};
        vars_.push_back(v);
        names_.push_back(name);
        return v;
    }

    std::vector<VarRef> vars_;
    std::vector<std::string> names_;
    std::vector<LmiConstraint> constraints_;
    std::vector<std::pair<VarRef, Matrix>> objective_;
};

// ---------------------------------------------------------------------------
// StandardSdp:  min c^T x  s.t.  F0_b + sum_i x_i F_{b,i}  PSD for each block
// ---------------------------------------------------------------------------

struct SdpTriplet {
    int r, c;
    double v;
};

struct SdpBlock {
    Eigen::Index dim;
    Matrix f0;
    // (coordinate index, coefficient matrix as triplets); exactly symmetric
    std::vector<std::pair<Eigen::Index, std::vector<SdpTriplet>>> coeffs;
    std::string label;
    double eps;
};

struct StandardSdp {
    Eigen::Index num_coords = 0;
    Vector c;
    std::vector<SdpBlock> blocks;
    std::vector<VarRef> vars;
    std::vector<std::string> var_names;
    std::vector<Eigen::Index> var_offset;

    Assignment unpack(const Vector& x) const {
        require_dims(x.size() == num_coords, "unpack: length mismatch");
        Assignment out;
        for (std::size_t i = 0; i < vars.size(); ++i) {
            const VarRef& v = vars[i];
            const auto seg = x.segment(var_offset[i], v.coord_count());
            if (v.kind == VarKind::symmetric) {
                out[v.id] = smat(seg, v.rows);
            } else if (v.kind == VarKind::full) {
                Matrix m(v.rows, v.cols);
                for (Eigen::Index a = 0; a < v.rows; ++a)
                    for (Eigen::Index b = 0; b < v.cols; ++b) m(a, b) = seg(a * v.cols + b);
                out[v.id] = m;
            } else {
                out[v.id] = seg.head(1);
            }
        }
        return out;
    }

    Vector pack(const Assignment& values) const {
        Vector x = Vector::Zero(num_coords);
        for (std::size_t i = 0; i < vars.size(); ++i) {
            const VarRef& v = vars[i];
            const auto it = values.find(v.id);
            require(it != values.end(), "pack: assignment missing a variable");
            auto seg = x.segment(var_offset[i], v.coord_count());
            if (v.kind == VarKind::symmetric)
                seg = svec(it->second);
            else if (v.kind == VarKind::full)
                for (Eigen::Index a = 0; a < v.rows; ++a)
                    for (Eigen::Index b = 0; b < v.cols; ++b) seg(a * v.cols + b) = it->second(a, b);
            else
                seg(0) = it->second(0, 0);
        }
        return x;
    }

    // dense slack F0 + sum x_i F_i of one block
    Matrix block_value(std::size_t b, const Vector& x) const {
        const SdpBlock& blk = blocks[b];
        Matrix s = blk.f0;
        for (const auto& [coord, trips] : blk.coeffs)
            for (const auto& t : trips) s(t.r, t.c) += x(coord) * t.v;
        return s;
    }

    std::string manifest() const {
        std::ostringstream os;
        os << "coords: " << num_coords << "\nblocks:";
        for (const auto& b : blocks) os << " " << b.dim << "(" << b.label << ")";
        os << "\n";
        return os.str();
    }
};

inline StandardSdp compile_to_standard_form(const LmiProblem& prob) {
    StandardSdp sdp;
    Eigen::Index offset = 0;
    for (const auto& v : prob.vars()) {
        sdp.vars.push_back(v);
        sdp.var_names.push_back(prob.var_name(v.id));
        sdp.var_offset.push_back(offset);
        offset += v.coord_count();
    }
    sdp.num_coords = offset;

    sdp.c = Vector::Zero(offset);
    const double rt2 = std::sqrt(2.0);
    for (const auto& [v, w] : prob.objective()) {
        const Eigen::Index base = sdp.var_offset[static_cast<std::size_t>(v.id)];
        if (v.kind == VarKind::symmetric) {
            for (Eigen::Index a = 0; a < v.rows; ++a)
                for (Eigen::Index b = a; b < v.rows; ++b)
                    sdp.c(base + sym_coord_index(v.rows, a, b)) +=
                        (a == b) ? w(a, a) : (w(a, b) + w(b, a)) / rt2;
        } else if (v.kind == VarKind::full) {
            for (Eigen::Index a = 0; a < v.rows; ++a)
                for (Eigen::Index b = 0; b < v.cols; ++b) sdp.c(base + a * v.cols + b) += w(a, b);
        } else {
            sdp.c(base) += w(0, 0);
        }
    }

    for (const auto& con : prob.constraints()) {
        const double sign = (con.sense == Sense::psd_geq) ? 1.0 : -1.0;
        SdpBlock blk;
        blk.dim = con.expr.dim();
        blk.label = con.label;
        blk.eps = con.eps;
        blk.f0 = sign * con.expr.constant() - con.eps * Matrix::Identity(blk.dim, blk.dim);

        std::map<Eigen::Index, Matrix> coord_mats;  // global coord -> dense F
        for (const auto& t : con.expr.terms()) {
            const Eigen::Index base = sdp.var_offset[static_cast<std::size_t>(t.var.id)];
            for (Eigen::Index c = 0; c < t.var.coord_count(); ++c) {
                Matrix f = con.expr.coord_matrix(t, c);
                if (inf_norm(f) == 0.0) continue;
                auto [it, fresh] = coord_mats.try_emplace(base + c, Matrix::Zero(blk.dim, blk.dim));
                it->second += sign * f;
            }
        }
        for (auto& [coord, f] : coord_mats) {
            std::vector<SdpTriplet> trips;
            for (Eigen::Index i = 0; i < blk.dim; ++i)
                for (Eigen::Index j = 0; j < blk.dim; ++j)
                    if (f(i, j) != 0.0) trips.push_back({int(i), int(j), f(i, j)});
            if (!trips.empty()) blk.coeffs.emplace_back(coord, std::move(trips));
        }
        sdp.blocks.push_back(std::move(blk));
    }
    return sdp;
}

// ---------------------------------------------------------------------------
// MaybeVar: a decision variable or a pinned value
// ---------------------------------------------------------------------------

struct MaybeVar {
    std::optional<VarRef> var;
    Matrix fixed;

    static MaybeVar of(VarRef v) { return {v, Matrix()}; }
    static MaybeVar value(Matrix m) { return {std::nullopt, std::move(m)}; }
    bool is_var() const { return var.has_value(); }
};

namespace detail {

// scale * Sy(L op(M) R) with M either a variable or a constant
inline void add_sy_any(AffineMatrixExpr& e, const MaybeVar& m, const Matrix& l, const Matrix& r,
                       bool transpose_var = false, double scale = 1.0) {
    if (m.is_var())
        e.add_sy(*m.var, l, r, transpose_var, scale);
    else
        e.add_const_sy(scale * (l * (transpose_var ? m.fixed.transpose() : m.fixed) * r));
}

// scale * L M L^T, M symmetric
inline void add_quad_any(AffineMatrixExpr& e, const MaybeVar& m, const Matrix& l, double scale = 1.0) {
    if (m.is_var())
        e.add_quad(*m.var, l, scale);
    else
        e.add_const_sy(0.5 * scale * (l * m.fixed * l.transpose()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// eps_strict: strictness margin from the problem data scale
// ---------------------------------------------------------------------------
// Scaled by the plant/supply constants; deliberately not by the derived basis
// quantities (F(0), PiHat), whose norms grow with the Gram condition number.

inline double eps_strict(const AugmentedSystem& aug, const SupplyRate& supply) {
    double scale = std::max({inf_norm(aug.bbA), inf_norm(aug.Sigma), inf_norm(supply.J1),
                             inf_norm(supply.Jtilde), inf_norm(supply.J2), inf_norm(supply.J3)});
    return tol::strict_margin_base * (1.0 + scale);
}

// ---------------------------------------------------------------------------
// Certificate positivity block (the Krasovskii functional lower bound)
// ---------------------------------------------------------------------------
//   [[P, Q], [Q^T, R + I_d (x) S]] >= eps I,   S >= eps I,   U >= eps I

inline void assemble_positivity(LmiProblem& prob, const AugLayout& lay, const MaybeVar& p,
                                const MaybeVar& q, const MaybeVar& r, const MaybeVar& s,
                                const MaybeVar& u, double eps) {
    const Eigen::Index nu = lay.nu, dnu = lay.dnu;
    AffineMatrixExpr big(nu + dnu);
    const Matrix etop = selector(nu + dnu, 0, nu);
    const Matrix ebot = selector(nu + dnu, nu, dnu);
    detail::add_quad_any(big, p, etop.transpose());
    detail::add_sy_any(big, q, etop.transpose(), ebot);
    detail::add_quad_any(big, r, ebot.transpose());
    for (Eigen::Index k = 0; k < lay.d; ++k)
        detail::add_quad_any(big, s, ebot.transpose() * selector(dnu, k * nu, nu).transpose());
    prob.add_constraint(std::move(big), Sense::psd_geq, eps, "kf-positivity");

    AffineMatrixExpr sblk(nu);
    detail::add_quad_any(sblk, s, Matrix::Identity(nu, nu));
    prob.add_constraint(std::move(sblk), Sense::psd_geq, eps, "S");

    AffineMatrixExpr ublk(nu);
    detail::add_quad_any(ublk, u, Matrix::Identity(nu, nu));
    prob.add_constraint(std::move(ublk), Sense::psd_geq, eps, "U");
}

// ---------------------------------------------------------------------------
// Phi: the gain-independent part of the dissipativity inequality
// ---------------------------------------------------------------------------
// Phi = Sy(L Rrow) + diag(S + rU, -S, -I_d (x) U, -J3, J1) + Sy(Mcol [Sigma 0])
// with L carrying Q at the chi rows and R at the eta rows, Rrow the derivative
// of the distributed state eta, the w-row factor -J2^T and the zeta-row factor
// Jtilde. Eliminating the zeta block by a Schur complement against J1
// reproduces the z-quadratic supply term -Sigma^T Jt^T J1^{-1} Jt Sigma, and
// the L2 template stays affine in gamma. The printed form of the condition
// (J1^{-1} and identity factors, positive J2/J3 signs) makes the w-diagonal
// positive semidefinite and is retained behind `literal_supply` only.

struct PhiOptions {
    bool literal_supply = false;
};

inline AffineMatrixExpr assemble_phi(const AugmentedSystem& aug, const SupplyRate& supply,
                                     const MaybeVar& q, const MaybeVar& r, const MaybeVar& s,
                                     const MaybeVar& u, const std::optional<VarRef>& gamma,
                                     const PhiOptions& opt = {}) {
    const AugLayout& lay = aug.layout;
    require(supply.gamma_role == gamma.has_value(),
            "assemble_phi: gamma variable must be present exactly when the supply is gamma-scaled");
    if (opt.literal_supply)
        require(!supply.gamma_role,
                "assemble_phi: the literal supply embedding is not affine in gamma; materialize first");

    AffineMatrixExpr phi(lay.ell);
    const Matrix echi = lay.sel_chi(), echir = lay.sel_chir(), eeta = lay.sel_eta();
    const Matrix ew = lay.sel_w(), ezeta = lay.sel_zeta();

    // Sy(L Rrow): eta'(t) = F(0) chi(t) - F(-r) chi(t-r) - PiHat eta(t)
    Matrix rrow = Matrix::Zero(lay.dnu, lay.ell);
    rrow.block(0, lay.off_chi(), lay.dnu, lay.nu) = aug.F0;
    rrow.block(0, lay.off_chir(), lay.dnu, lay.nu) = -aug.Fmr;
    rrow.block(0, lay.off_eta(), lay.dnu, lay.dnu) = -aug.PiHat;
    detail::add_sy_any(phi, q, echi.transpose(), rrow);
    detail::add_sy_any(phi, r, eeta.transpose(), rrow);

    // diag(S + rU, -S, -I_d (x) U)
    detail::add_quad_any(phi, s, echi.transpose());
    detail::add_quad_any(phi, u, echi.transpose(), aug.r);
    detail::add_quad_any(phi, s, echir.transpose(), -1.0);
    for (Eigen::Index k = 0; k < lay.d; ++k)
        detail::add_quad_any(phi, u, eeta.transpose() * selector(lay.dnu, k * lay.nu, lay.nu).transpose(),
                             -1.0);

    // supply blocks
    const double j3sign = opt.literal_supply ? 1.0 : -1.0;
    const Matrix j3blk = j3sign * (ew.transpose() * supply.J3 * ew);
    const Matrix j1zeta = opt.literal_supply
                              ? Matrix(ezeta.transpose() * supply.J1.inverse() * ezeta)
                              : Matrix(ezeta.transpose() * supply.J1 * ezeta);
    if (gamma) {
        phi.add_scalar_times_sym(*gamma, j3blk);
        phi.add_scalar_times_sym(*gamma, j1zeta);
    } else {
        phi.add_const_sym(j3blk);
        phi.add_const_sym(j1zeta);
    }

    const Matrix wfactor = opt.literal_supply ? Matrix(supply.J2.transpose())
                                              : Matrix(-supply.J2.transpose());
    const Matrix zfactor = opt.literal_supply ? Matrix::Identity(lay.m, lay.m) : supply.Jtilde;
    const Matrix mcol = ew.transpose() * wfactor + ezeta.transpose() * zfactor;  // ell x m
    const Matrix sigma_ext = aug.Sigma * lay.sel_y();                            // m x ell
    phi.add_const_sy(mcol * sigma_ext);
    return phi;
}

// Direct numeric evaluation of PhiHat = Phi + Sy(P^T (A + B K)); used as the
// independent feasibility check on accepted iterates, bypassing the
// expression/compilation machinery above.
inline Matrix eval_phi_hat(const AugmentedSystem& aug, const SupplyRate& supply_in,
                           const Certificate& cert, const ControllerGains& gains) {
    const AugLayout& lay = aug.layout;
    const SupplyRate supply = supply_in.gamma_role ? supply_in.materialize(cert.gamma) : supply_in;

    Matrix rrow = Matrix::Zero(lay.dnu, lay.ell);
    rrow.block(0, lay.off_chi(), lay.dnu, lay.nu) = aug.F0;
    rrow.block(0, lay.off_chir(), lay.dnu, lay.nu) = -aug.Fmr;
    rrow.block(0, lay.off_eta(), lay.dnu, lay.dnu) = -aug.PiHat;

    const Matrix echi = lay.sel_chi(), echir = lay.sel_chir(), eeta = lay.sel_eta();
    const Matrix ew = lay.sel_w(), ezeta = lay.sel_zeta();

    Matrix phi = sy((echi.transpose() * cert.Q + eeta.transpose() * cert.R) * rrow);
    phi += echi.transpose() * (cert.S + aug.r * cert.U) * echi;
    phi -= echir.transpose() * cert.S * echir;
    phi -= eeta.transpose() * kron(Matrix::Identity(lay.d, lay.d), cert.U) * eeta;
    phi -= ew.transpose() * supply.J3 * ew;
    phi += ezeta.transpose() * supply.J1 * ezeta;
    const Matrix mcol = -(ew.transpose() * supply.J2.transpose()) + ezeta.transpose() * supply.Jtilde;
    phi += sy(mcol * (aug.Sigma * lay.sel_y()));

    const Matrix pbb = cert.P * echi + cert.Q * eeta;  // nu x ell
    Matrix k = Matrix::Zero(lay.p, lay.ell);
    k.leftCols(2 * lay.nu + lay.dnu) = gains.packed();
    return phi + sy(pbb.transpose() * (aug.bbA + aug.bbB * k));
}

// ---------------------------------------------------------------------------
// Theorem-style synthesis problems
// ---------------------------------------------------------------------------

struct FixedGain {
    Matrix k_packed;  // p x (2 nu + d nu)
};
struct FixedPQ {
    Matrix p;  // nu x nu
    Matrix q;  // nu x (d nu)
};
using Theorem9Mode = std::variant<FixedGain, FixedPQ>;

struct SynthesisVars {
    std::optional<VarRef> p, q, r, s, u, k, gamma, z, t1, t2;
};

struct AssembledProblem {
    LmiProblem prob;
    SynthesisVars vars;
    double eps = 0.0;
};

namespace detail {

// Sy(P^T M) for M constant (nu x ell) with P-block vars or values
inline void add_pt_times(AffineMatrixExpr& e, const AugLayout& lay, const MaybeVar& p,
                         const MaybeVar& q, const Matrix& m) {
    add_sy_any(e, p, lay.sel_chi().transpose(), m);
    add_sy_any(e, q, lay.sel_eta().transpose(), m, /*transpose_var=*/true);
}

inline Matrix extend_gain(const AugLayout& lay, const Matrix& k_packed) {
    require_dims(k_packed.rows() == lay.p && k_packed.cols() == 2 * lay.nu + lay.dnu,
                 "gain block must be p x (2 nu + d nu)");
    Matrix k = Matrix::Zero(lay.p, lay.ell);
    k.leftCols(2 * lay.nu + lay.dnu) = k_packed;
    return k;
}

}  // namespace detail

inline AssembledProblem assemble_theorem9(const AugmentedSystem& aug, const SupplyRate& supply,
                                          const Theorem9Mode& mode, const PhiOptions& phi_opt = {}) {
    const AugLayout& lay = aug.layout;
    AssembledProblem out;
    LmiProblem& prob = out.prob;

    const bool gain_fixed = std::holds_alternative<FixedGain>(mode);
    MaybeVar p = gain_fixed ? MaybeVar::of(prob.add_symmetric("P", lay.nu))
                            : MaybeVar::value(std::get<FixedPQ>(mode).p);
    MaybeVar q = gain_fixed ? MaybeVar::of(prob.add_full("Q", lay.nu, lay.dnu))
                            : MaybeVar::value(std::get<FixedPQ>(mode).q);
    MaybeVar r = MaybeVar::of(prob.add_symmetric("R", lay.dnu));
    MaybeVar s = MaybeVar::of(prob.add_symmetric("S", lay.nu));
    MaybeVar u = MaybeVar::of(prob.add_symmetric("U", lay.nu));
    std::optional<VarRef> kvar;
    if (!gain_fixed) kvar = prob.add_full("K", lay.p, 2 * lay.nu + lay.dnu);
    std::optional<VarRef> gamma;
    if (supply.gamma_role) gamma = prob.add_scalar("gamma");

    out.vars.p = p.var;
    out.vars.q = q.var;
    out.vars.r = r.var;
    out.vars.s = s.var;
    out.vars.u = u.var;
    out.vars.k = kvar;
    out.vars.gamma = gamma;
    out.eps = eps_strict(aug, supply);

    assemble_positivity(prob, lay, p, q, r, s, u, out.eps);

    AffineMatrixExpr phi_hat = assemble_phi(aug, supply, q, r, s, u, gamma, phi_opt);
    detail::add_pt_times(phi_hat, lay, p, q, aug.bbA);
    if (gain_fixed) {
        const Matrix nbar = aug.bbB * detail::extend_gain(lay, std::get<FixedGain>(mode).k_packed);
        detail::add_pt_times(phi_hat, lay, p, q, nbar);
    } else {
        const Matrix pbar_t_b =
            (std::get<FixedPQ>(mode).p * lay.sel_chi() + std::get<FixedPQ>(mode).q * lay.sel_eta())
                .transpose() *
            aug.bbB;  // ell x p
        phi_hat.add_sy(*kvar, pbar_t_b, lay.sel_head());
    }
    prob.add_constraint(std::move(phi_hat), Sense::nsd_leq, out.eps, "dissipativity");

    if (gamma) {
        AffineMatrixExpr bound(1);
        bound.add_scalar_times_sym(*gamma, Matrix::Identity(1, 1));
        bound.add_const_sym(-tol::gamma_floor * Matrix::Identity(1, 1));
        prob.add_constraint(std::move(bound), Sense::psd_geq, 0.0, "gamma-floor");
        prob.add_objective(*gamma, Matrix::Identity(1, 1));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inner convex approximation of the bilinear inequality
// ---------------------------------------------------------------------------
// The bilinear term Sy(P^T B K) is replaced by its convex overestimate around
// the anchors (Ptilde, Qtilde, Ktilde); the quadratic penalty terms are pushed
// into a 3x3 block form by a Schur complement with the splitting Z + (I - Z):
//
//   [ Phi + Sy(P^T A) + Sy(Pt^T N + P^T Nt - Pt^T Nt)   (P - Pt)^T   (N - Nt)^T ]
//   [ *                                                 -Z            0          ]
//   [ *                                                 *            -(I - Z)    ]  <= -eps I

struct Anchors {
    Matrix p_tilde;  // nu x nu
    Matrix q_tilde;  // nu x (d nu)
    Matrix k_tilde;  // p x (2 nu + d nu)
};

inline AssembledProblem assemble_overestimate(const AugmentedSystem& aug, const SupplyRate& supply,
                                              const Anchors& anchors, const PhiOptions& phi_opt = {}) {
    const AugLayout& lay = aug.layout;
    AssembledProblem out;
    LmiProblem& prob = out.prob;

    MaybeVar p = MaybeVar::of(prob.add_symmetric("P", lay.nu));
    MaybeVar q = MaybeVar::of(prob.add_full("Q", lay.nu, lay.dnu));
    MaybeVar r = MaybeVar::of(prob.add_symmetric("R", lay.dnu));
    MaybeVar s = MaybeVar::of(prob.add_symmetric("S", lay.nu));
    MaybeVar u = MaybeVar::of(prob.add_symmetric("U", lay.nu));
    const VarRef kvar = prob.add_full("K", lay.p, 2 * lay.nu + lay.dnu);
    std::optional<VarRef> gamma;
    if (supply.gamma_role) gamma = prob.add_scalar("gamma");
    const VarRef zvar = prob.add_symmetric("Z", lay.nu);

    out.vars.p = p.var;
    out.vars.q = q.var;
    out.vars.r = r.var;
    out.vars.s = s.var;
    out.vars.u = u.var;
    out.vars.k = kvar;
    out.vars.gamma = gamma;
    out.vars.z = zvar;
    out.eps = eps_strict(aug, supply);

    assemble_positivity(prob, lay, p, q, r, s, u, out.eps);

    const Matrix p_tilde_bb = anchors.p_tilde * lay.sel_chi() + anchors.q_tilde * lay.sel_eta();
    const Matrix n_tilde = aug.bbB * detail::extend_gain(lay, anchors.k_tilde);

    const Eigen::Index big = lay.ell + 2 * lay.nu;
    const Matrix e1 = selector(big, 0, lay.ell);
    const Matrix e2 = selector(big, lay.ell, lay.nu);
    const Matrix e3 = selector(big, lay.ell + lay.nu, lay.nu);

    AffineMatrixExpr blk(big);
    // top-left: Phi + Sy(P^T A) + Sy(Pt^T N + P^T Nt - Pt^T Nt)
    {
        AffineMatrixExpr tl = assemble_phi(aug, supply, q, r, s, u, gamma, phi_opt);
        detail::add_pt_times(tl, lay, p, q, aug.bbA);
        tl.add_sy(kvar, p_tilde_bb.transpose() * aug.bbB, lay.sel_head());  // Sy(Pt^T B K)
        detail::add_pt_times(tl, lay, p, q, n_tilde);                       // Sy(P^T Nt)
        tl.add_const_sy(-p_tilde_bb.transpose() * n_tilde);                 // -Sy(Pt^T Nt)
        blk.add_embedded(tl, 0);
    }
    // (2,1): P - Ptilde acting on the ell coordinates
    blk.add_sy(*p.var, e2.transpose(), lay.sel_chi() * e1);
    blk.add_sy(*q.var, e2.transpose(), lay.sel_eta() * e1);
    blk.add_const_sy(e2.transpose() * (-p_tilde_bb) * e1);
    // (3,1): N - Ntilde = B(K - Ktilde)
    blk.add_sy(kvar, e3.transpose() * aug.bbB, lay.sel_head() * e1);
    blk.add_const_sy(e3.transpose() * (-n_tilde) * e1);
    // (2,2): -Z, (3,3): -(I - Z)
    blk.add_quad(zvar, e2.transpose(), -1.0);
    blk.add_const_sym(-e3.transpose() * e3);
    blk.add_quad(zvar, e3.transpose(), 1.0);
    prob.add_constraint(std::move(blk), Sense::nsd_leq, out.eps, "inner-approximation");

    AffineMatrixExpr zlo(lay.nu);
    zlo.add_quad(zvar, Matrix::Identity(lay.nu, lay.nu));
    prob.add_constraint(std::move(zlo), Sense::psd_geq, out.eps, "Z-low");
    AffineMatrixExpr zhi(lay.nu);
    zhi.add_const_sym(Matrix::Identity(lay.nu, lay.nu));
    zhi.add_quad(zvar, Matrix::Identity(lay.nu, lay.nu), -1.0);
    prob.add_constraint(std::move(zhi), Sense::psd_geq, out.eps, "Z-high");

    if (gamma) {
        AffineMatrixExpr bound(1);
        bound.add_scalar_times_sym(*gamma, Matrix::Identity(1, 1));
        bound.add_const_sym(-tol::gamma_floor * Matrix::Identity(1, 1));
        prob.add_constraint(std::move(bound), Sense::psd_geq, 0.0, "gamma-floor");
        prob.add_objective(*gamma, Matrix::Identity(1, 1));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Proximal epigraphs: tr T1 >= ||Lambda - Lambda_tilde||_F^2 and likewise for K
// ---------------------------------------------------------------------------

inline void proximal_epigraph(AssembledProblem& ap, const AugLayout& lay, const Anchors& anchors,
                              double rho1, double rho2) {
    if (!(rho1 > 0.0) || !(rho2 > 0.0))
        throw ParameterError("proximal_epigraph: weights must be positive");
    LmiProblem& prob = ap.prob;
    require(ap.vars.p && ap.vars.q && ap.vars.k, "proximal_epigraph: requires free P, Q, K");

    const Eigen::Index lam_cols = lay.nu + lay.dnu;
    const VarRef t1 = prob.add_symmetric("T1", lam_cols);
    const VarRef t2 = prob.add_symmetric("T2", 2 * lay.nu + lay.dnu);
    ap.vars.t1 = t1;
    ap.vars.t2 = t2;

    {
        const Eigen::Index dim = lam_cols + lay.nu;
        const Matrix et = selector(dim, 0, lam_cols);
        const Matrix ei = selector(dim, lam_cols, lay.nu);
        AffineMatrixExpr e(dim);
        e.add_quad(t1, et.transpose());
        e.add_sy(*ap.vars.p, ei.transpose(), selector(lam_cols, 0, lay.nu) * et);
        e.add_sy(*ap.vars.q, ei.transpose(), selector(lam_cols, lay.nu, lay.dnu) * et);
        Matrix lam_tilde(lay.nu, lam_cols);
        lam_tilde << anchors.p_tilde, anchors.q_tilde;
        e.add_const_sy(ei.transpose() * (-lam_tilde) * et);
        e.add_const_sym(ei.transpose() * ei);
        prob.add_constraint(std::move(e), Sense::psd_geq, 0.0, "prox-Lambda");
        prob.add_objective(t1, rho1 * Matrix::Identity(lam_cols, lam_cols));
    }
    {
        const Eigen::Index kc = 2 * lay.nu + lay.dnu;
        const Eigen::Index dim = kc + lay.p;
        const Matrix et = selector(dim, 0, kc);
        const Matrix ei = selector(dim, kc, lay.p);
        AffineMatrixExpr e(dim);
        e.add_quad(t2, et.transpose());
        e.add_sy(*ap.vars.k, ei.transpose(), et);
        e.add_const_sy(ei.transpose() * (-anchors.k_tilde) * et);
        e.add_const_sym(ei.transpose() * ei);
        prob.add_constraint(std::move(e), Sense::psd_geq, 0.0, "prox-K");
        prob.add_objective(t2, rho2 * Matrix::Identity(kc, kc));
    }
}

}  // namespace delsyn
