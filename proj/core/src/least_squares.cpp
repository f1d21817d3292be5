#include "fockfringe/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fockfringe/errors.hpp"

namespace fockfringe {

namespace {

constexpr double kMaxDamping = 1e16;
constexpr int kMaxDampingTries = 40;

void evaluate_jacobian(const LeastSquaresProblem& problem, const Eigen::VectorXd& params,
                       double relative_step, Eigen::MatrixXd& jacobian) {
    if (problem.jacobian) {
        jacobian.resize(static_cast<Eigen::Index>(problem.residual_count), params.size());
        problem.jacobian(params, jacobian);
    } else {
        jacobian = finite_difference_jacobian(problem, params, relative_step);
    }
}

double half_squared_norm(const Eigen::VectorXd& r) { return 0.5 * r.squaredNorm(); }

} // namespace

Eigen::MatrixXd finite_difference_jacobian(const LeastSquaresProblem& problem,
                                           const Eigen::VectorXd& params, double relative_step) {
    const auto m = static_cast<Eigen::Index>(problem.residual_count);
    const auto n = params.size();
    Eigen::MatrixXd jacobian(m, n);
    Eigen::VectorXd plus(m);
    Eigen::VectorXd minus(m);
    Eigen::VectorXd probe = params;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = relative_step * std::max(std::abs(params[j]), 1.0);
        probe[j] = params[j] + h;
        problem.residual(probe, plus);
        probe[j] = params[j] - h;
        problem.residual(probe, minus);
        probe[j] = params[j];
        jacobian.col(j) = (plus - minus) / (2.0 * h);
    }
    return jacobian;
}

Eigen::MatrixXd normal_matrix_pseudo_inverse(const Eigen::MatrixXd& jacobian, double rcond) {
    // Columns are scaled to unit norm first so parameters in very different
    // units (metres next to radians) do not push each other below the cutoff.
    const auto n = jacobian.cols();
    Eigen::VectorXd scale = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double norm = jacobian.col(j).norm();
        scale[j] = norm > 0.0 && std::isfinite(norm) ? 1.0 / norm : 0.0;
    }
    const Eigen::MatrixXd scaled = jacobian * scale.asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinV);
    const Eigen::VectorXd& singular = svd.singularValues();
    const double largest = singular.size() > 0 ? singular[0] * singular[0] : 0.0;
    Eigen::VectorXd inverted = Eigen::VectorXd::Zero(singular.size());
    for (Eigen::Index i = 0; i < singular.size(); ++i) {
        const double value = singular[i] * singular[i];
        if (value > rcond * largest && value > 0.0) {
            inverted[i] = 1.0 / value;
        }
    }
    const Eigen::MatrixXd& v = svd.matrixV();
    return scale.asDiagonal() * (v * inverted.asDiagonal() * v.transpose()) * scale.asDiagonal();
}

LeastSquaresResult levenberg_marquardt(const LeastSquaresProblem& problem, Eigen::VectorXd params,
                                       const LeastSquaresOptions& options) {
    if (!problem.residual) {
        throw DomainError("least-squares problem has no residual function");
    }
    const auto m = static_cast<Eigen::Index>(problem.residual_count);
    const auto n = params.size();
    if (m < 1 || n < 1) {
        throw ArityError("least-squares problem needs at least one residual and one parameter");
    }
    if (problem.project) {
        problem.project(params);
    }

    Eigen::VectorXd residuals(m);
    problem.residual(params, residuals);
    double cost = half_squared_norm(residuals);
    if (!std::isfinite(cost)) {
        throw DomainError("initial point gives a non-finite cost");
    }

    Eigen::MatrixXd jacobian;
    evaluate_jacobian(problem, params, options.finite_difference_step, jacobian);

    LeastSquaresResult result;
    double damping = options.initial_damping;
    Eigen::VectorXd trial(n);
    Eigen::VectorXd trial_residuals(m);

    while (result.iterations < options.max_iterations) {
        if (cost == 0.0) {
            result.converged = true;
            break;
        }
        const Eigen::MatrixXd normal = jacobian.transpose() * jacobian;
        const Eigen::VectorXd gradient = jacobian.transpose() * residuals;
        const double diag_max = std::max(normal.diagonal().maxCoeff(), std::numeric_limits<double>::min());
        Eigen::VectorXd scale = normal.diagonal().cwiseMax(1e-12 * diag_max);

        bool accepted = false;
        bool stalled = false;
        double relative_change = 0.0;
        for (int attempt = 0; attempt < kMaxDampingTries; ++attempt) {
            Eigen::MatrixXd damped = normal;
            damped.diagonal() += damping * scale;
            const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
            if (!step.allFinite()) {
                damping *= 4.0;
                continue;
            }
            trial = params + step;
            if (problem.project) {
                problem.project(trial);
            }
            if ((trial - params).norm() <= 1e-15 * (params.norm() + 1e-300)) {
                stalled = true;
                break;
            }
            problem.residual(trial, trial_residuals);
            const double trial_cost = half_squared_norm(trial_residuals);
            if (std::isfinite(trial_cost) && trial_cost < cost) {
                relative_change = (cost - trial_cost) / cost;
                params = trial;
                residuals = trial_residuals;
                cost = trial_cost;
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                break;
            }
            damping *= 4.0;
            if (damping > kMaxDamping) {
                stalled = true;
                break;
            }
        }

        if (!accepted) {
            // No descent direction left at the working precision.
            result.converged = stalled;
            break;
        }
        ++result.iterations;
        evaluate_jacobian(problem, params, options.finite_difference_step, jacobian);
        if (relative_change < options.relative_tolerance) {
            result.converged = true;
            break;
        }
    }

    result.params = params;
    result.residuals = residuals;
    result.cost = cost;
    const double dof = static_cast<double>(m - n);
    const double variance = dof > 0.0 ? 2.0 * cost / dof : 0.0;
    result.covariance = normal_matrix_pseudo_inverse(jacobian) * variance;
    return result;
}

} // namespace fockfringe
