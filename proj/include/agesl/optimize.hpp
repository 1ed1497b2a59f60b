#pragma once

#include <Eigen/Dense>

#include <functional>

namespace agesl::optim {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct BfgsOptions {
    int max_iter = 500;
    double grad_tol = 1e-6;   // on the inf-norm of the gradient
    double rel_f_tol = 1e-12;  // relative objective change treated as stalled
    double fd_step = 1e-6;
};

struct BfgsResult {
    Eigen::VectorXd x;
    double f = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Central-difference gradient with step h * max(1, |x_i|).
Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double h = 1e-6);
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double h = 1e-4);

/// Quasi-Newton minimisation with an inverse-Hessian BFGS update and a
/// backtracking Armijo line search. Objective values of +inf or NaN are
/// treated as infeasible and rejected by the line search.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

}  // namespace agesl::optim
