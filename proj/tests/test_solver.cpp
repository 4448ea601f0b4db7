#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "delsyn/lmi.hpp"
#include "delsyn/solver.hpp"
#include "oracles.hpp"

using namespace delsyn;

namespace {

// min x  s.t.  [[x, 1], [1, x]] >= 0; optimum x = 1
StandardSdp arrow_problem() {
    LmiProblem prob;
    const VarRef x = prob.add_scalar("x");
    AffineMatrixExpr e(2);
    Matrix c(2, 2);
    c << 0.0, 1.0, 1.0, 0.0;
    e.add_const_sym(c);
    e.add_scalar_times_sym(x, Matrix::Identity(2, 2));
    prob.add_constraint(std::move(e), Sense::psd_geq, 0.0, "arrow");
    prob.add_objective(x, Matrix::Identity(1, 1));
    return compile_to_standard_form(prob);
}

// min tr(M)  s.t.  M >= I; optimum M = I, objective 2
StandardSdp trace_problem() {
    LmiProblem prob;
    const VarRef m = prob.add_symmetric("M", 2);
    AffineMatrixExpr e(2);
    e.add_const_sym(-Matrix::Identity(2, 2));
    e.add_quad(m, Matrix::Identity(2, 2));
    prob.add_constraint(std::move(e), Sense::psd_geq, 0.0, "M-I");
    prob.add_objective(m, Matrix::Identity(2, 2));
    return compile_to_standard_form(prob);
}

StandardSdp infeasible_problem() {
    LmiProblem prob;
    const VarRef x = prob.add_scalar("x");
    AffineMatrixExpr lo(1);
    lo.add_scalar_times_sym(x, Matrix::Identity(1, 1));
    lo.add_const_sym(-Matrix::Identity(1, 1));
    prob.add_constraint(std::move(lo), Sense::psd_geq, 0.0, "x>=1");
    AffineMatrixExpr hi(1);
    hi.add_scalar_times_sym(x, -Matrix::Identity(1, 1));
    hi.add_const_sym(-Matrix::Identity(1, 1));
    prob.add_constraint(std::move(hi), Sense::psd_geq, 0.0, "-x>=1");
    prob.add_objective(x, Matrix::Identity(1, 1));
    return compile_to_standard_form(prob);
}

StandardSdp unbounded_problem() {
    LmiProblem prob;
    const VarRef x = prob.add_scalar("x");
    AffineMatrixExpr e(1);
    e.add_scalar_times_sym(x, -Matrix::Identity(1, 1));
    e.add_const_sym(5.0 * Matrix::Identity(1, 1));
    prob.add_constraint(std::move(e), Sense::psd_geq, 0.0, "x<=5");
    prob.add_objective(x, Matrix::Identity(1, 1));
    return compile_to_standard_form(prob);
}

}  // namespace

TEST_CASE("solve: 2x2 determinant condition") {
    for (auto backend : {SolveOptions::Backend::nt, SolveOptions::Backend::barrier}) {
        SolveOptions opts;
        opts.backend = backend;
        const SdpSolution sol = solve(arrow_problem(), opts);
        REQUIRE(sol.status == SolveStatus::optimal);
        REQUIRE(sol.objective == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("solve: trace minimization lands on the identity") {
    for (auto backend : {SolveOptions::Backend::nt, SolveOptions::Backend::barrier}) {
        SolveOptions opts;
        opts.backend = backend;
        const SdpSolution sol = solve(trace_problem(), opts);
        REQUIRE(sol.status == SolveStatus::optimal);
        REQUIRE(sol.objective == Catch::Approx(2.0).margin(1e-6));
        const Matrix m = sol.values.at(0);
        REQUIRE(inf_norm(m - Matrix::Identity(2, 2)) < 1e-5);
    }
}

TEST_CASE("solve: inconsistent bounds report infeasible") {
    for (auto backend : {SolveOptions::Backend::nt, SolveOptions::Backend::barrier}) {
        SolveOptions opts;
        opts.backend = backend;
        const SdpSolution sol = solve(infeasible_problem(), opts);
        REQUIRE(sol.status == SolveStatus::infeasible);
    }
}

TEST_CASE("solve: unbounded objective is detected") {
    for (auto backend : {SolveOptions::Backend::nt, SolveOptions::Backend::barrier}) {
        SolveOptions opts;
        opts.backend = backend;
        const SdpSolution sol = solve(unbounded_problem(), opts);
        REQUIRE(sol.status == SolveStatus::unbounded);
    }
}

TEST_CASE("solve: optimal solutions satisfy the residual floor") {
    const StandardSdp sdp = arrow_problem();
    const SdpSolution sol = solve(sdp);
    REQUIRE(sol.status == SolveStatus::optimal);
    REQUIRE(constraint_floor(sdp, sol.x) >= -10.0 * tol::solver_feas * 2.0);
}

TEST_CASE("solve: deterministic across repeated runs") {
    const StandardSdp sdp = trace_problem();
    const SdpSolution a = solve(sdp);
    const SdpSolution b = solve(sdp);
    REQUIRE(a.status == SolveStatus::optimal);
    REQUIRE(std::abs(a.objective - b.objective) < 1e-9);
}

TEST_CASE("solve: backends agree on a seeded random LMI") {
    std::mt19937 rng(314);
    LmiProblem prob;
    const VarRef m = prob.add_symmetric("M", 3);
    const VarRef t = prob.add_scalar("t");

    const Matrix a = oracles::random_spd(rng, 3, 0.5);
    // t I - M >= 0 and M >= A: minimizing t drives t to lambda_max(A)
    AffineMatrixExpr upper(3);
    upper.add_scalar_times_sym(t, Matrix::Identity(3, 3));
    upper.add_quad(m, Matrix::Identity(3, 3), -1.0);
    prob.add_constraint(std::move(upper), Sense::psd_geq, 0.0, "tI-M");
    AffineMatrixExpr lower(3);
    lower.add_quad(m, Matrix::Identity(3, 3));
    lower.add_const_sym(-a);
    prob.add_constraint(std::move(lower), Sense::psd_geq, 0.0, "M-A");
    prob.add_objective(t, Matrix::Identity(1, 1));
    const StandardSdp sdp = compile_to_standard_form(prob);

    SolveOptions nt, barrier;
    barrier.backend = SolveOptions::Backend::barrier;
    const SdpSolution s1 = solve(sdp, nt);
    const SdpSolution s2 = solve(sdp, barrier);
    REQUIRE(s1.status == SolveStatus::optimal);
    REQUIRE(s2.status == SolveStatus::optimal);
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    REQUIRE(s1.objective == Catch::Approx(es.eigenvalues().maxCoeff()).margin(1e-5));
    REQUIRE(std::abs(s1.objective - s2.objective) < 1e-4);
}
