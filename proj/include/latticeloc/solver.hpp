#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace latticeloc {

template <typename Scalar>
struct DampedGaussNewtonOptions
{
    Scalar step_tolerance = Scalar(1e-4);  // on Problem::step_norm, micrometres for our models
    int max_iterations = 100;
    Scalar initial_damping = Scalar(1e-3);
    Scalar damping_factor = Scalar(10);
    Scalar max_damping = Scalar(1e16);
};

template <typename Scalar>
struct DampedGaussNewtonResult
{
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vector params;
    Scalar cost = 0;  // sum of squared (weighted) residuals
    Matrix normal_matrix;  // J^T J at the solution
    Scalar gradient_norm = 0;
    int iterations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt style damped Gauss-Newton.
///
/// Problem must provide:
///   using Scalar;
///   void evaluate(const Vector& p, Vector& residuals, Matrix& jacobian) const;
///   Scalar step_norm(const Vector& dp) const;   // convergence measure
///   bool admissible(const Vector& p) const;
///
/// A step is accepted when it lowers the cost; the damping is divided by
/// damping_factor on acceptance and multiplied by it on rejection. The solve
/// has converged once a step shorter than step_tolerance is accepted, or is
/// rejected only by round-off.
template <typename Problem>
DampedGaussNewtonResult<typename Problem::Scalar> damped_gauss_newton(
    const Problem& problem, Eigen::Matrix<typename Problem::Scalar, Eigen::Dynamic, 1> p,
    const DampedGaussNewtonOptions<typename Problem::Scalar>& opt = {})
{
    using Scalar = typename Problem::Scalar;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    DampedGaussNewtonResult<Scalar> out;
    Vector r, r_trial;
    Matrix J, J_trial;
    problem.evaluate(p, r, J);
    Scalar cost = r.squaredNorm();
    Scalar lambda = opt.initial_damping;

    Matrix JtJ = J.transpose() * J;
    Vector g = J.transpose() * r;

    for (int it = 0; it < opt.max_iterations; ++it) {
        out.iterations = it + 1;
        Matrix A = JtJ;
        for (Eigen::Index k = 0; k < A.rows(); ++k) {
            const Scalar d = JtJ(k, k) > Scalar(0) ? JtJ(k, k) : Scalar(1);
            A(k, k) += lambda * d;
        }
        const Vector dp = A.ldlt().solve(-g);
        if (!dp.allFinite())
            break;

        const Vector trial = p + dp;
        const bool small_step = problem.step_norm(dp) < opt.step_tolerance;
        if (problem.admissible(trial)) {
            problem.evaluate(trial, r_trial, J_trial);
            const Scalar trial_cost = r_trial.squaredNorm();
            if (std::isfinite(trial_cost) && trial_cost <= cost) {
                p = trial;
                r.swap(r_trial);
                J.swap(J_trial);
                cost = trial_cost;
                JtJ = J.transpose() * J;
                g = J.transpose() * r;
                lambda = std::max(lambda / opt.damping_factor, std::numeric_limits<Scalar>::epsilon());
                if (small_step) {
                    out.converged = true;
                    break;
                }
                continue;
            }
            if (small_step && trial_cost <= cost * (Scalar(1) + Scalar(1e-10))) {
                // At the minimum up to round-off.
                out.converged = true;
                break;
            }
        }
        lambda *= opt.damping_factor;
        if (lambda > opt.max_damping)
            break;
    }

    out.params = p;
    out.cost = cost;
    out.normal_matrix = JtJ;
    out.gradient_norm = g.norm();
    return out;
}

} // namespace latticeloc
