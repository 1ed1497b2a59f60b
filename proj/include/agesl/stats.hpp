#pragma once

#include <Eigen/Dense>

#include <span>

namespace agesl::stats {

/// Hypothesis-test outcome shared by every diagnostic in the toolkit.
struct TestReport {
    double statistic = 0.0;
    double p_value = 1.0;
    int lags_used = 0;
    bool reject_at_5pct = false;
};

TestReport make_report(double statistic, double p_value, int lags_used);

struct OlsFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd std_err;
    Eigen::VectorXd residuals;
    double ssr = 0.0;
    double r_squared = 0.0;  // centred
    double loglik = 0.0;     // Gaussian, sigma^2 = ssr / n
    double aic = 0.0;        // -2 loglik + 2 k
    int nobs = 0;
};

/// Ordinary least squares via column-pivoted QR. `x` is nobs x k and must
/// have full column rank for the standard errors to be meaningful.
OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

double mean(std::span<const double> v);
/// Population variance (divides by n).
double variance(std::span<const double> v);

/// Upper tail of a chi-square distribution with `dof` degrees of freedom.
double chi_square_sf(double x, double dof);
double normal_cdf(double z);
/// 2 * (1 - Phi(|z|)).
double normal_two_sided_p(double z);

}  // namespace agesl::stats
