#pragma once

// Shared plant/basis fixtures used across the test suites: the worked example
// shipped with the demo subcommand and a one-dimensional toy.

#include "delsyn/basis.hpp"
#include "delsyn/model.hpp"

namespace fixtures {

using delsyn::BasisSpec;
using delsyn::Matrix;
using delsyn::PlantModel;
using delsyn::Vector;

// Two-state plant with one delayed input, two regulated outputs and a scalar
// disturbance; the distributed output kernel mixes constant and exponential
// terms so the five-function basis below represents it exactly.
inline PlantModel demo_plant(double r = 1.0) {
    PlantModel p;
    p.A = (Matrix(2, 2) << -1.0, 1.0, 0.0, 0.1).finished();
    p.B = (Matrix(2, 1) << 0.0, 1.0).finished();
    p.D1 = (Matrix(2, 1) << 0.1, -0.1).finished();
    p.C1 = (Matrix(2, 3) << -0.3, 0.4, 0.1, -0.3, 0.1, -0.1).finished();
    p.C2 = (Matrix(2, 3) << 0.0, 0.2, 0.0, -0.2, 0.1, 0.0).finished();
    // plain-basis blocks of the distributed kernel
    //   [[0.2 + 0.1 e^t, 0.1, 0.12 e^{3t}], [-0.2, 0.3 + 0.14 e^{2t}, 0.11 e^{3t}]]
    // against the basis (1, e^t, e^{2t}, e^{3t}, e^{-0.1 t})
    Matrix c3 = Matrix::Zero(2, 15);
    c3.block(0, 0, 2, 3) = (Matrix(2, 3) << 0.2, 0.1, 0.0, -0.2, 0.3, 0.0).finished();
    c3(0, 3 + 0) = 0.1;                         // e^t block, (1,1)
    c3(1, 6 + 1) = 0.14;                        // e^{2t} block, (2,2)
    c3(0, 9 + 2) = 0.12;                        // e^{3t} block, (1,3)
    c3(1, 9 + 2) = 0.11;                        // e^{3t} block, (2,3)
    p.C3bar = c3;
    p.D2 = (Matrix(1, 1) << 0.12).finished();
    p.D3 = (Matrix(2, 1) << 0.14, 0.1).finished();
    p.r = r;
    return p;
}

inline BasisSpec demo_basis(double r = 1.0) {
    BasisSpec b;
    b.d = 5;
    b.Pi = Matrix::Zero(5, 5);
    b.Pi(1, 1) = 1.0;
    b.Pi(2, 2) = 2.0;
    b.Pi(3, 3) = 3.0;
    b.Pi(4, 4) = -0.1;
    b.f0 = Vector::Ones(5);
    b.r = r;
    return b;
}

// Scalar plant (n = p = q = m = 1) with a single-function basis that matches
// the open-loop mode, for grid oracles and hand-checkable assemblies.
inline PlantModel toy_plant(double a = 0.1, double r = 0.5) {
    PlantModel p;
    p.A = (Matrix(1, 1) << a).finished();
    p.B = (Matrix(1, 1) << 1.0).finished();
    p.D1 = (Matrix(1, 1) << 1.0).finished();
    p.C1 = (Matrix(1, 2) << 1.0, 0.0).finished();
    p.C2 = Matrix::Zero(1, 2);
    p.C3bar = Matrix::Zero(1, 2);
    p.D2 = Matrix::Zero(1, 1);
    p.D3 = Matrix::Zero(1, 1);
    p.r = r;
    return p;
}

inline BasisSpec toy_basis(double a = 0.1, double r = 0.5) {
    BasisSpec b;
    b.d = 1;
    b.Pi = (Matrix(1, 1) << -a).finished();  // spans e^{-a tau}
    b.f0 = Vector::Ones(1);
    b.r = r;
    return b;
}

}  // namespace fixtures
