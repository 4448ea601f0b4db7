#pragma once

// Independent validation of closed loops: characteristic roots through
// Chebyshev pseudospectral collocation, time-domain simulation by the method
// of steps, Krasovskii-functional dissipation checks and an empirical L2-gain
// estimate. Nothing here shares code with the synthesis path.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "delsyn/basis.hpp"
#include "delsyn/common.hpp"
#include "delsyn/model.hpp"

namespace delsyn {

// ---------------------------------------------------------------------------
// Certificate: Krasovskii decision matrices and the performance level
// ---------------------------------------------------------------------------

struct Certificate {
    Matrix P;  // nu x nu symmetric
    Matrix Q;  // nu x (d nu)
    Matrix R;  // (d nu) x (d nu) symmetric
    Matrix S;  // nu x nu symmetric
    Matrix U;  // nu x nu symmetric
    double gamma = 0.0;
};

// ---------------------------------------------------------------------------
// ClosedLoop: chi' = A0 chi(t) + A1 chi(t-r) + \int A3 F(tau) chi(t+tau) + Dw w
// ---------------------------------------------------------------------------

struct ClosedLoop {
    Matrix A0;   // nu x nu
    Matrix A1;   // nu x nu
    Matrix A3;   // nu x (d nu)
    Matrix Dw;   // nu x q
    Matrix C1, C2, C3, D3;  // output map, C3 in orthonormal coordinates
    double r = 0.0;
    BasisSpec spec;
    GramData gram;

    Eigen::Index nu() const { return A0.rows(); }
    Eigen::Index q() const { return Dw.cols(); }
    Eigen::Index m() const { return C1.rows(); }
};

inline ClosedLoop make_closed_loop(const PlantModel& plant, const ControllerGains& gains,
                                   const GramData& g, const BasisSpec& spec) {
    const Eigen::Index n = plant.n(), p = plant.p(), nu = plant.nu(), dnu = spec.d * nu;
    require_dims(gains.K1.rows() == p && gains.K1.cols() == nu, "make_closed_loop: K1 shape");
    require_dims(gains.K2.rows() == p && gains.K2.cols() == nu, "make_closed_loop: K2 shape");
    require_dims(gains.K3.rows() == p && gains.K3.cols() == dnu, "make_closed_loop: K3 shape");

    ClosedLoop cl;
    cl.A0 = Matrix::Zero(nu, nu);
    cl.A0.topLeftCorner(n, n) = plant.A;
    cl.A0.bottomRows(p) = gains.K1;
    cl.A1 = Matrix::Zero(nu, nu);
    cl.A1.block(0, n, n, p) = plant.B;
    cl.A1.bottomRows(p) = gains.K2;
    cl.A3 = Matrix::Zero(nu, dnu);
    cl.A3.bottomRows(p) = gains.K3;
    cl.Dw = Matrix(nu, plant.q());
    cl.Dw << plant.D1, plant.D2;
    cl.C1 = plant.C1;
    cl.C2 = plant.C2;
    cl.C3 = orthonormalize_coeffs(plant.C3bar, g);
    cl.D3 = plant.D3;
    cl.r = plant.r;
    cl.spec = spec;
    cl.gram = g;
    return cl;
}

// ---------------------------------------------------------------------------
// Chebyshev utilities
// ---------------------------------------------------------------------------

// Differentiation matrix on the points x_j = cos(j pi / N), j = 0..N.
inline Matrix cheb_diff(int n) {
    require(n >= 1, "cheb_diff: N >= 1 required");
    Matrix d(n + 1, n + 1);
    Vector x(n + 1), c(n + 1);
    for (int i = 0; i <= n; ++i) {
        x(i) = std::cos(i * M_PI / n);
        c(i) = ((i == 0 || i == n) ? 2.0 : 1.0) * ((i % 2 == 0) ? 1.0 : -1.0);
    }
    for (int i = 0; i <= n; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j <= n; ++j) {
            if (i == j) continue;
            d(i, j) = (c(i) / c(j)) / (x(i) - x(j));
            rowsum += d(i, j);
        }
        d(i, i) = -rowsum;
    }
    return d;
}

// Clenshaw-Curtis weights for the same points; they sum to 2 on [-1, 1].
inline Vector clencurt(int n) {
    require(n >= 1, "clencurt: N >= 1 required");
    Vector w = Vector::Zero(n + 1);
    if (n == 1) {
        w(0) = w(1) = 1.0;
        return w;
    }
    if (n % 2 == 0) {
        w(0) = w(n) = 1.0 / double(n * n - 1);
        for (int i = 1; i < n; ++i) {
            double v = 1.0;
            for (int k = 1; k <= n / 2 - 1; ++k)
                v -= 2.0 * std::cos(2.0 * k * i * M_PI / n) / (4.0 * k * k - 1.0);
            v -= std::cos(double(n) * i * M_PI / n) / (double(n) * n - 1.0);
            w(i) = 2.0 * v / n;
        }
    } else {
        w(0) = w(n) = 1.0 / double(n * n);
        for (int i = 1; i < n; ++i) {
            double v = 1.0;
            for (int k = 1; k <= (n - 1) / 2; ++k)
                v -= 2.0 * std::cos(2.0 * k * i * M_PI / n) / (4.0 * k * k - 1.0);
            w(i) = 2.0 * v / n;
        }
    }
    return w;
}

// ---------------------------------------------------------------------------
// Spectral abscissa via pseudospectral collocation
// ---------------------------------------------------------------------------
// Discretizes the solution segment on [-r, 0] at N+1 Chebyshev points; rows of
// the interior nodes apply the spectral differentiation matrix and the tau = 0
// row enforces the delay dynamics with Clenshaw-Curtis quadrature for the
// distributed term. Eigenvalues approximate the characteristic roots.

struct SpectrumReport {
    std::vector<int> n_list;
    std::vector<double> abscissa_per_n;
    std::vector<std::complex<double>> roots;  // full set at the largest N
    double abscissa = 0.0;                    // from the largest N
    bool converged = false;
};

inline Matrix spectral_generator(const ClosedLoop& cl, int n) {
    const Eigen::Index nu = cl.nu();
    const double r = cl.r;
    const Matrix d = (2.0 / r) * cheb_diff(n);
    const Vector w = (r / 2.0) * clencurt(n);

    Matrix gen = Matrix::Zero((n + 1) * nu, (n + 1) * nu);
    for (int j = 1; j <= n; ++j)
        for (int k = 0; k <= n; ++k)
            gen.block(j * nu, k * nu, nu, nu) = d(j, k) * Matrix::Identity(nu, nu);

    // tau = 0 row: chi'(t) = A0 chi(t) + A1 chi(t-r) + \int A3 F(tau) chi(t+tau)
    gen.block(0, 0, nu, nu) = cl.A0;
    gen.block(0, n * nu, nu, nu) += cl.A1;
    for (int k = 0; k <= n; ++k) {
        const double tau = (std::cos(k * M_PI / n) - 1.0) * r / 2.0;
        gen.block(0, k * nu, nu, nu) += w(k) * cl.A3 * eval_F(cl.gram, cl.spec, tau);
    }
    return gen;
}

inline SpectrumReport spectral_abscissa(const ClosedLoop& cl, std::vector<int> n_list = {10, 20, 40}) {
    require(!n_list.empty(), "spectral_abscissa: empty N list");
    for (int n : n_list) require(n >= 5, "spectral_abscissa: N >= 5 required");

    SpectrumReport rep;
    rep.n_list = n_list;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        Eigen::VectorXcd ev = eigenvalues(spectral_generator(cl, n_list[i]));
        rep.abscissa_per_n.push_back(ev.real().maxCoeff());
        if (i + 1 == n_list.size()) {
            rep.roots.assign(ev.data(), ev.data() + ev.size());
            rep.abscissa = rep.abscissa_per_n.back();
        }
    }
    if (rep.abscissa_per_n.size() >= 2) {
        const auto& a = rep.abscissa_per_n;
        rep.converged = std::abs(a[a.size() - 1] - a[a.size() - 2]) < tol::abscissa_converged;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Disturbance signals
// ---------------------------------------------------------------------------

struct InputSignal {
    enum class Kind { zero, step, sine, noise };
    Kind kind = Kind::zero;
    double amplitude = 1.0;
    double omega = 1.0;     // rad/s, sine only
    unsigned seed = 0;      // noise only

    static InputSignal zero() { return {}; }
    static InputSignal step(double amp = 1.0) { return {Kind::step, amp, 1.0, 0}; }
    static InputSignal sine(double omega, double amp = 1.0) { return {Kind::sine, amp, omega, 0}; }
    static InputSignal noise(unsigned seed, double amp = 1.0) { return {Kind::noise, amp, 1.0, seed}; }

    // Band-limited seeded noise: a deterministic sum of random sinusoids, so
    // the signal is smooth and independent of the integration grid.
    Vector sample(double t, Eigen::Index q) const {
        switch (kind) {
            case Kind::zero:
                return Vector::Zero(q);
            case Kind::step:
                return (t >= 0.0 ? amplitude : 0.0) * Vector::Ones(q);
            case Kind::sine:
                return amplitude * std::sin(omega * t) * Vector::Ones(q);
            case Kind::noise: {
                Vector v(q);
                for (Eigen::Index c = 0; c < q; ++c) {
                    std::mt19937 rng(seed + 977u * static_cast<unsigned>(c));
                    std::uniform_real_distribution<double> uphase(0.0, 2.0 * M_PI);
                    std::uniform_real_distribution<double> ufreq(0.1, 8.0);
                    double acc = 0.0;
                    for (int i = 0; i < 8; ++i) {
                        const double w0 = ufreq(rng), ph = uphase(rng);
                        acc += std::sin(w0 * t + ph);
                    }
                    v(c) = amplitude * acc / std::sqrt(8.0);
                }
                return (t >= 0.0) ? v : Vector::Zero(q);
            }
        }
        return Vector::Zero(q);
    }

    std::string name() const {
        switch (kind) {
            case Kind::zero: return "zero";
            case Kind::step: return "step";
            case Kind::sine: return "sine(" + std::to_string(omega) + ")";
            case Kind::noise: return "noise:" + std::to_string(seed);
        }
        return "?";
    }
};

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

struct Trajectory {
    double h = 0.0;              // grid spacing
    Eigen::Index hist = 0;       // number of history intervals; t=0 at index hist
    std::vector<double> times;   // uniform grid from -r
    Matrix chi;                  // nu x times.size()
    Matrix z;                    // m x (#nodes with t >= 0)
    Matrix w;                    // q x (#nodes with t >= 0)
    bool diverged = false;

    double t_at(Eigen::Index i) const { return times[static_cast<std::size_t>(i)]; }
    Eigen::Index out_index(Eigen::Index i) const { return i - hist; }  // into z/w columns
};

// ---------------------------------------------------------------------------
// Method-of-steps simulation with classical RK4
// ---------------------------------------------------------------------------
// The grid is aligned with the delay (h = r / M), so delayed and distributed
// evaluations during a step never leave the stored history; the tau = 0
// endpoint of the distributed integral uses the current stage value.

inline Trajectory simulate(const ClosedLoop& cl, const std::function<Vector(double)>& psi,
                           const InputSignal& input, double horizon, double step = 0.0) {
    const double r = cl.r;
    const Eigen::Index nu = cl.nu(), q = cl.q(), m = cl.m();
    if (step <= 0.0) step = r / 100.0;
    require(step <= r / 10.0 + 1e-15, "simulate: step must be at most r/10");
    require(horizon > 0.0, "simulate: horizon must be positive");

    Eigen::Index hist = static_cast<Eigen::Index>(std::ceil(r / step));
    if (hist % 2 == 1) ++hist;  // composite Simpson needs an even interval count
    const double h = r / double(hist);
    const Eigen::Index steps = static_cast<Eigen::Index>(std::ceil(horizon / h - 1e-12));
    const Eigen::Index total = hist + steps + 1;

    Trajectory traj;
    traj.h = h;
    traj.hist = hist;
    traj.times.resize(static_cast<std::size_t>(total));
    traj.chi.resize(nu, total);
    for (Eigen::Index i = 0; i < total; ++i) traj.times[static_cast<std::size_t>(i)] = -r + double(i) * h;
    for (Eigen::Index i = 0; i <= hist; ++i) traj.chi.col(i) = psi(traj.times[static_cast<std::size_t>(i)]);

    // kernel samples on the aligned tau grid
    std::vector<Matrix> a3f(static_cast<std::size_t>(hist + 1));
    std::vector<Matrix> c3f(static_cast<std::size_t>(hist + 1));
    for (Eigen::Index k = 0; k <= hist; ++k) {
        const Matrix f = eval_F(cl.gram, cl.spec, -r + double(k) * h);
        a3f[static_cast<std::size_t>(k)] = cl.A3 * f;
        c3f[static_cast<std::size_t>(k)] = cl.C3 * f;
    }
    auto simpson_coeff = [&](Eigen::Index k) {
        if (k == 0 || k == hist) return h / 3.0;
        return (k % 2 == 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0;
    };

    // cubic (4-point Lagrange) interpolation into the stored grid; the window
    // never straddles a multiple of r, where solution derivatives jump
    auto interp = [&](double t, Eigen::Index last) -> Vector {
        const double pos = (t + r) / h;
        Eigen::Index j = static_cast<Eigen::Index>(std::floor(pos));
        const double frac = pos - double(j);
        if (j >= last) return traj.chi.col(last);
        if (std::abs(frac) < 1e-12) return traj.chi.col(j);
        Eigen::Index j0 = std::max<Eigen::Index>(0, std::min(j - 1, last - 3));
        const Eigen::Index bp = ((j + hist / 2) / hist) * hist;  // nearest breakpoint
        if (bp > j0 && bp < j0 + 3) {
            if (j < bp)
                j0 = std::max<Eigen::Index>(0, bp - 3);
            else
                j0 = std::min(bp, last - 3);
        }
        Vector out = Vector::Zero(nu);
        for (Eigen::Index a = 0; a < 4; ++a) {
            double lag = 1.0;
            for (Eigen::Index b = 0; b < 4; ++b) {
                if (a == b) continue;
                lag *= (pos - double(j0 + b)) / double(a - b);
            }
            out += lag * traj.chi.col(j0 + a);
        }
        return out;
    };

    auto deriv = [&](double s, const Vector& y, Eigen::Index last) -> Vector {
        Vector acc = cl.A0 * y + cl.A1 * interp(s - r, last) + cl.Dw * input.sample(s, q);
        for (Eigen::Index k = 0; k < hist; ++k)
            acc += simpson_coeff(k) * (a3f[static_cast<std::size_t>(k)] * interp(s - r + double(k) * h, last));
        acc += simpson_coeff(hist) * (a3f[static_cast<std::size_t>(hist)] * y);
        return acc;
    };

    Eigen::Index filled = hist;
    for (Eigen::Index i = hist; i < total - 1; ++i) {
        const double t = traj.times[static_cast<std::size_t>(i)];
        const Vector y = traj.chi.col(i);
        const Vector k1 = deriv(t, y, i);
        const Vector k2 = deriv(t + h / 2.0, y + (h / 2.0) * k1, i);
        const Vector k3 = deriv(t + h / 2.0, y + (h / 2.0) * k2, i);
        const Vector k4 = deriv(t + h, y + h * k3, i);
        Vector next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e12) {
            traj.diverged = true;
            filled = i;
            break;
        }
        traj.chi.col(i + 1) = next;
        filled = i + 1;
    }
    if (traj.diverged) {
        const Eigen::Index keep = filled + 1;
        traj.times.resize(static_cast<std::size_t>(keep));
        traj.chi.conservativeResize(nu, keep);
    }

    const Eigen::Index total_now = traj.chi.cols();
    const Eigen::Index outs = total_now - hist;
    traj.z.resize(m, outs);
    traj.w.resize(q, outs);
    for (Eigen::Index i = hist; i < total_now; ++i) {
        const double t = traj.times[static_cast<std::size_t>(i)];
        Vector zz = cl.C1 * traj.chi.col(i) + cl.C2 * traj.chi.col(i - hist);
        for (Eigen::Index k = 0; k <= hist; ++k)
            zz += simpson_coeff(k) * (c3f[static_cast<std::size_t>(k)] * traj.chi.col(i - hist + k));
        const Vector ww = input.sample(t, q);
        traj.z.col(i - hist) = zz + cl.D3 * ww;
        traj.w.col(i - hist) = ww;
    }
    return traj;
}

// eta(t_i) = \int F(tau) chi(t_i + tau) dtau on the aligned grid
inline Vector eta_at(const Trajectory& traj, const ClosedLoop& cl, Eigen::Index i) {
    const Eigen::Index hist = traj.hist;
    require(i >= hist && i < traj.chi.cols(), "eta_at: node lacks a full history");
    const double h = traj.h;
    Vector eta = Vector::Zero(cl.spec.d * cl.nu());
    for (Eigen::Index k = 0; k <= hist; ++k) {
        const double c = (k == 0 || k == hist) ? h / 3.0 : ((k % 2 == 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
        eta += c * (eval_F(cl.gram, cl.spec, -cl.r + double(k) * h) * traj.chi.col(i - hist + k));
    }
    return eta;
}

// ---------------------------------------------------------------------------
// Krasovskii functional evaluation and the sampled dissipation inequality
// ---------------------------------------------------------------------------

struct DissipationReport {
    bool pass = false;
    double worst_violation = 0.0;  // max of vdot - s - tol_d over checked nodes
    double worst_time = 0.0;
    double tol_d = 0.0;
    double min_v = 0.0;
    bool positivity_ok = false;
    std::vector<double> v_trace;
};

inline double kf_value(const Trajectory& traj, const ClosedLoop& cl, const Certificate& cert,
                       Eigen::Index i) {
    const Eigen::Index hist = traj.hist;
    const double h = traj.h;
    const Vector chi = traj.chi.col(i);
    const Vector eta = eta_at(traj, cl, i);
    double v = chi.dot(cert.P * chi) + 2.0 * chi.dot(cert.Q * eta) + eta.dot(cert.R * eta);
    for (Eigen::Index k = 0; k <= hist; ++k) {
        const double c = (k == 0 || k == hist) ? h / 3.0 : ((k % 2 == 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
        const double tau = -cl.r + double(k) * h;
        const Vector x = traj.chi.col(i - hist + k);
        v += c * x.dot((cert.S + (tau + cl.r) * cert.U) * x);
    }
    return v;
}

inline DissipationReport dissipation_check(const Trajectory& traj, const Certificate& cert,
                                           const SupplyRate& supply_in, const ClosedLoop& cl) {
    require(!traj.diverged, "dissipation_check: trajectory diverged");
    require(traj.times.back() >= 2.0 * cl.r - 1e-9, "dissipation_check: trajectory must cover at least 2r");
    const SupplyRate supply = supply_in.gamma_role ? supply_in.materialize(cert.gamma) : supply_in;

    const Eigen::Index hist = traj.hist;
    const Eigen::Index total = traj.chi.cols();
    DissipationReport rep;

    std::vector<double> v(static_cast<std::size_t>(total - hist));
    std::vector<double> s(static_cast<std::size_t>(total - hist));
    double max_abs_s = 0.0;
    for (Eigen::Index i = hist; i < total; ++i) {
        v[static_cast<std::size_t>(i - hist)] = kf_value(traj, cl, cert, i);
        s[static_cast<std::size_t>(i - hist)] =
            supply.eval(traj.z.col(i - hist), traj.w.col(i - hist));
        max_abs_s = std::max(max_abs_s, std::abs(s[static_cast<std::size_t>(i - hist)]));
    }
    rep.tol_d = tol::dissipation_scale * (1.0 + max_abs_s);
    rep.v_trace = v;
    rep.min_v = *std::min_element(v.begin(), v.end());
    rep.positivity_ok = rep.min_v >= tol::kf_positivity;

    double worst = -std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    for (std::size_t j = 1; j + 1 < v.size(); ++j) {
        const double vdot = (v[j + 1] - v[j - 1]) / (2.0 * traj.h);
        const double viol = vdot - s[j];
        if (viol > worst) {
            worst = viol;
            worst_t = traj.times[static_cast<std::size_t>(traj.hist) + j];
        }
    }
    rep.worst_violation = worst - rep.tol_d;
    rep.worst_time = worst_t;
    rep.pass = (worst <= rep.tol_d) && rep.positivity_ok;
    return rep;
}

// ---------------------------------------------------------------------------
// Empirical L2 gain over a small input library
// ---------------------------------------------------------------------------

struct L2GainEstimate {
    double gamma = 0.0;
    std::string worst_input;
    bool diverged = false;
};

inline L2GainEstimate l2_gain_estimate(const ClosedLoop& cl, double horizon,
                                       std::vector<InputSignal> library = {}) {
    if (library.empty()) {
        library.push_back(InputSignal::step());
        for (double w : {0.2, 0.5, 1.0, 2.0, 5.0}) library.push_back(InputSignal::sine(w));
        library.push_back(InputSignal::noise(20240u));
    }
    auto psi0 = [&](double) { return Vector::Zero(cl.nu()); };

    L2GainEstimate est;
    for (const auto& sig : library) {
        Trajectory traj = simulate(cl, psi0, sig, horizon);
        if (traj.diverged) {
            est.diverged = true;
            est.worst_input = sig.name();
            return est;
        }
        double nz = 0.0, nw = 0.0;
        for (Eigen::Index j = 0; j < traj.z.cols(); ++j) {
            const double wt = (j == 0 || j + 1 == traj.z.cols()) ? 0.5 : 1.0;  // trapezoid
            nz += wt * traj.z.col(j).squaredNorm() * traj.h;
            nw += wt * traj.w.col(j).squaredNorm() * traj.h;
        }
        if (nw <= 1e-14) continue;
        const double g = std::sqrt(nz / nw);
        if (g > est.gamma) {
            est.gamma = g;
            est.worst_input = sig.name();
        }
    }
    return est;
}

}  // namespace delsyn
