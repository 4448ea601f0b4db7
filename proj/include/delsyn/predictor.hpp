#pragma once

// Predictor-based initialization of the dynamical state-feedback gains. The
// seed gains place the closed-loop spectrum exactly at eig(A+BK) u eig(X),
// which makes them a feasible starting point for the synthesis iteration.

#include <Eigen/Dense>

#include <optional>
#include <utility>

#include "delsyn/basis.hpp"
#include "delsyn/common.hpp"
#include "delsyn/matfun.hpp"
#include "delsyn/model.hpp"

namespace delsyn {

struct PredictorSeed {
    Matrix K;               // p x n, A + BK Hurwitz
    Matrix X;               // p x p, Hurwitz
    ControllerGains gains;  // K1 = [(KA-XK)e^{Ar}, KB+X], K2 = 0, K3 = Gamma
    Matrix Gamma;           // p x (d nu), orthonormal coordinates
    Matrix expAr;           // e^{A r}
    double expand_residual; // basis-representation defect of (KA-XK)e^{-A tau}B
};

inline PredictorSeed predictor_init(const PlantModel& plant, const BasisSpec& spec, const GramData& g,
                                    std::optional<Matrix> k_opt = std::nullopt,
                                    std::optional<Matrix> x_opt = std::nullopt) {
    const Eigen::Index n = plant.n(), p = plant.p(), nu = plant.nu();

    Matrix k = k_opt ? *k_opt : stabilizing_gain(plant.A, plant.B);
    require_dims(k.rows() == p && k.cols() == n, "predictor_init: K must be p x n");
    if (matrix_abscissa(plant.A + plant.B * k) >= 0.0)
        throw StabilizabilityError("predictor_init: A + BK is not Hurwitz");

    Matrix x = x_opt ? *x_opt : Matrix(-0.1 * Matrix::Identity(p, p));
    require_dims(x.rows() == p && x.cols() == p, "predictor_init: X must be p x p");
    if (matrix_abscissa(x) >= 0.0) throw ParameterError("predictor_init: X must be Hurwitz");

    const Matrix m = k * plant.A - x * k;  // p x n
    // plain coefficients of [0_{p x n}, (KA - XK) e^{-A tau} B]; the x-columns
    // vanish identically, only the u-columns need the expansion
    auto [ucoeff, resid] = expand_in_basis(m, plant.A, plant.B, spec);
    Matrix plain = Matrix::Zero(p, spec.d * nu);
    for (Eigen::Index i = 0; i < spec.d; ++i)
        plain.middleCols(i * nu + n, p) = ucoeff.middleCols(i * p, p);
    Matrix gamma = orthonormalize_coeffs(plain, g);

    const Matrix expAr = expm(plant.A, plant.r);
    ControllerGains gains;
    gains.K1 = Matrix(p, nu);
    gains.K1 << m * expAr, k * plant.B + x;
    gains.K2 = Matrix::Zero(p, nu);
    gains.K3 = gamma;

    return PredictorSeed{std::move(k), std::move(x), std::move(gains), std::move(gamma),
                         expAr, resid};
}

}  // namespace delsyn
