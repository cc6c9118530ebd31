#pragma once

// Dense convex quadratic programming.
//
//     minimize    1/2 x' H x + c' x
//     subject to  A x  = b
//                 G x <= h
//
// H must be positive semidefinite. The solver is a primal-dual interior
// point method (Mehrotra predictor-corrector) followed by an active-set
// polish: the constraints identified as active are imposed as equalities and
// the resulting KKT system is solved directly. The polished point replaces
// the interior iterate only if it stays feasible with nonnegative
// multipliers. Everything is sequential and deterministic.

#include <Eigen/Dense>

namespace mvindex {

struct QuadraticProgram {
    Eigen::MatrixXd H;
    Eigen::VectorXd c;
    Eigen::MatrixXd A;  // p x n, may have zero rows
    Eigen::VectorXd b;
    Eigen::MatrixXd G;  // m x n, may have zero rows
    Eigen::VectorXd h;

    Eigen::Index variables() const { return H.rows(); }
};

struct QpSettings {
    int max_iterations = 10000;
    /// Target for the scaled residuals and the complementarity gap.
    double tolerance = 1e-12;
    /// Accepted if the iteration stalls before reaching `tolerance`.
    double acceptable_tolerance = 1e-8;
    bool polish = true;
};

struct QpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd y;  // equality multipliers
    Eigen::VectorXd z;  // inequality multipliers (>= 0)
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    bool polished = false;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
};

/// Throws ValidationError on inconsistent dimensions. Never throws on
/// non-convergence; inspect `converged`.
QpResult solve_qp(const QuadraticProgram& qp, const QpSettings& settings = {});

}  // namespace mvindex
