#include "agesl/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace agesl::optim {

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double step = h * std::max(1.0, std::abs(x(i)));
        xp(i) = x(i) + step;
        const double fp = f(xp);
        xp(i) = x(i) - step;
        const double fm = f(xp);
        xp(i) = x(i);
        g(i) = (fp - fm) / (2.0 * step);
    }
    return g;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double h) {
    const auto n = x.size();
    Eigen::MatrixXd hess(n, n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double hi = h * std::max(1.0, std::abs(x(i)));
        for (Eigen::Index j = i; j < n; ++j) {
            const double hj = h * std::max(1.0, std::abs(x(j)));
            auto eval = [&](double si, double sj) {
                xp = x;
                xp(i) += si;
                xp(j) += sj;
                return f(xp);
            };
            const double v = (eval(hi, hj) - eval(hi, -hj) - eval(-hi, hj) + eval(-hi, -hj)) / (4.0 * hi * hj);
            hess(i, j) = hess(j, i) = v;
        }
    }
    return hess;
}

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x, const BfgsOptions& opt) {
    const auto n = x.size();
    BfgsResult res;
    double fx = f(x);
    if (!std::isfinite(fx)) {
        res.x = x;
        res.f = fx;
        return res;
    }
    Eigen::VectorXd g = numeric_gradient(f, x, opt.fd_step);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    int stalls = 0;
    bool reset_once = false;

    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = -hinv * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            hinv.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        // Keep the first trial step from leaving the region where the
        // reparameterised objectives are well conditioned.
        const double dnorm = dir.norm();
        double step = dnorm > 10.0 ? 10.0 / dnorm : 1.0;
        double f_new = 0.0;
        Eigen::VectorXd x_new;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = x + step * dir;
            f_new = f(x_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!reset_once) {
                reset_once = true;
                hinv.setIdentity();
                continue;
            }
            // No descent possible at working precision: a numerical stationary point.
            res.converged = g.lpNorm<Eigen::Infinity>() < std::sqrt(opt.grad_tol) * std::max(1.0, std::abs(fx));
            break;
        }
        reset_once = false;
        const Eigen::VectorXd g_new = numeric_gradient(f, x_new, opt.fd_step);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
            hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        const double rel = std::abs(fx - f_new) / std::max(1.0, std::abs(fx));
        x = x_new;
        fx = f_new;
        g = g_new;
        stalls = rel < opt.rel_f_tol ? stalls + 1 : 0;
        if (stalls >= 3) {
            res.converged = true;
            ++it;
            break;
        }
    }
    res.x = x;
    res.f = fx;
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    res.iterations = it;
    if (!res.converged && g.lpNorm<Eigen::Infinity>() < opt.grad_tol) res.converged = true;
    return res;
}

}  // namespace agesl::optim
