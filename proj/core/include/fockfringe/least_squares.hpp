#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>

namespace fockfringe {

/// A nonlinear least-squares problem min_p 0.5 |r(p)|^2.
///
/// `jacobian` is optional; without it a central-difference Jacobian is
/// used. `project` is applied after every trial step and may clamp
/// parameters onto their feasible set.
struct LeastSquaresProblem {
    std::size_t residual_count = 0;
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> residual;
    std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)> jacobian;
    std::function<void(Eigen::VectorXd&)> project;
};

struct LeastSquaresOptions {
    int max_iterations = 200;
    double relative_tolerance = 1e-10; // on the cost change of an accepted step
    double initial_damping = 1e-3;
    double finite_difference_step = 1e-7; // relative
};

struct LeastSquaresResult {
    Eigen::VectorXd params;
    // Pseudo-inverse of J^T J scaled by the residual variance 2 cost / (m - n).
    Eigen::MatrixXd covariance;
    Eigen::VectorXd residuals;
    double cost = 0.0; // 0.5 |r|^2
    int iterations = 0;
    bool converged = false;
};

// Levenberg-Marquardt with Marquardt diagonal scaling.
LeastSquaresResult levenberg_marquardt(const LeastSquaresProblem& problem, Eigen::VectorXd initial,
                                       const LeastSquaresOptions& options = {});

Eigen::MatrixXd finite_difference_jacobian(const LeastSquaresProblem& problem,
                                           const Eigen::VectorXd& params, double relative_step);

// (J^T J)^+ after scaling J to unit column norms; eigenvalues of the scaled
// normal matrix below `rcond * max eigenvalue` are dropped.
Eigen::MatrixXd normal_matrix_pseudo_inverse(const Eigen::MatrixXd& jacobian, double rcond = 1e-12);

} // namespace fockfringe
