#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fockfringe/errors.hpp"
#include "fockfringe/least_squares.hpp"

using namespace fockfringe;

TEST_CASE("linear model matches ordinary least squares") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(0.25 * i);
        y.push_back(1.5 - 0.7 * x.back() + noise(rng));
    }
    LeastSquaresProblem problem;
    problem.residual_count = x.size();
    problem.residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            r[static_cast<Eigen::Index>(i)] = p[0] + p[1] * x[i] - y[i];
        }
    };
    const auto fit = levenberg_marquardt(problem, Eigen::Vector2d(0.0, 0.0));
    CHECK(fit.converged);

    Eigen::MatrixXd design(x.size(), 2);
    Eigen::VectorXd target(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        design(static_cast<Eigen::Index>(i), 0) = 1.0;
        design(static_cast<Eigen::Index>(i), 1) = x[i];
        target[static_cast<Eigen::Index>(i)] = y[i];
    }
    const Eigen::Vector2d ols = (design.transpose() * design).ldlt().solve(design.transpose() * target);
    CHECK(fit.params[0] == doctest::Approx(ols[0]).epsilon(1e-8));
    CHECK(fit.params[1] == doctest::Approx(ols[1]).epsilon(1e-8));
    const double s2 = (design * ols - target).squaredNorm() / (x.size() - 2.0);
    const Eigen::Matrix2d expected = s2 * (design.transpose() * design).inverse();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            CHECK(fit.covariance(i, j) == doctest::Approx(expected(i, j)).epsilon(1e-6));
        }
    }
}

TEST_CASE("Rosenbrock valley with a finite-difference Jacobian") {
    LeastSquaresProblem problem;
    problem.residual_count = 2;
    problem.residual = [](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        r[0] = 10.0 * (p[1] - p[0] * p[0]);
        r[1] = 1.0 - p[0];
    };
    const auto fit = levenberg_marquardt(problem, Eigen::Vector2d(-1.2, 1.0));
    CHECK(fit.converged);
    CHECK(fit.params[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fit.params[1] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("finite-difference Jacobian agrees with the analytic one") {
    LeastSquaresProblem problem;
    problem.residual_count = 5;
    problem.residual = [](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (int i = 0; i < 5; ++i) {
            r[i] = p[0] * std::exp(-p[1] * i);
        }
    };
    const Eigen::Vector2d at(2.0, 0.3);
    const auto numeric = finite_difference_jacobian(problem, at, 1e-7);
    for (int i = 0; i < 5; ++i) {
        CHECK(numeric(i, 0) == doctest::Approx(std::exp(-0.3 * i)).epsilon(1e-7));
        CHECK(numeric(i, 1) == doctest::Approx(-2.0 * i * std::exp(-0.3 * i)).epsilon(1e-6));
    }
}

TEST_CASE("projection holds a bound") {
    LeastSquaresProblem problem;
    problem.residual_count = 1;
    problem.residual = [](const Eigen::VectorXd& p, Eigen::VectorXd& r) { r[0] = p[0] + 1.0; };
    problem.project = [](Eigen::VectorXd& p) { p[0] = std::max(p[0], 0.0); };
    const auto fit = levenberg_marquardt(problem, Eigen::VectorXd::Constant(1, 3.0));
    CHECK(fit.params[0] == 0.0);
    CHECK(fit.converged);
}

TEST_CASE("pseudo-inverse is insensitive to parameter units") {
    // Two nearly collinear columns whose units differ by 1e10.
    Eigen::MatrixXd j(3, 2);
    j << 1.0, 1.0e-10, 1.0, 1.1e-10, 1.0, 0.9e-10;
    j.col(1) *= 1.0 + 1e-3;
    const Eigen::MatrixXd pinv = normal_matrix_pseudo_inverse(j);
    const Eigen::MatrixXd direct = (j.transpose() * j).inverse();
    CHECK(pinv(1, 1) == doctest::Approx(direct(1, 1)).epsilon(1e-6));
    CHECK(pinv(0, 0) == doctest::Approx(direct(0, 0)).epsilon(1e-6));

    Eigen::MatrixXd rank_deficient(3, 2);
    rank_deficient << 1.0, 2.0, 2.0, 4.0, 3.0, 6.0;
    CHECK(normal_matrix_pseudo_inverse(rank_deficient).allFinite());
}

TEST_CASE("argument errors") {
    LeastSquaresProblem empty;
    CHECK_THROWS_AS(levenberg_marquardt(empty, Eigen::VectorXd::Zero(1)), DomainError);
    LeastSquaresProblem none;
    none.residual = [](const Eigen::VectorXd&, Eigen::VectorXd&) {};
    CHECK_THROWS_AS(levenberg_marquardt(none, Eigen::VectorXd::Zero(1)), ArityError);
}
