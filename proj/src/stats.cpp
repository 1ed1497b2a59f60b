#include "agesl/stats.hpp"
#include "agesl/error.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace agesl::stats {

TestReport make_report(double statistic, double p_value, int lags_used) {
    TestReport r;
    r.statistic = statistic;
    r.p_value = std::clamp(p_value, 0.0, 1.0);
    r.lags_used = lags_used;
    r.reject_at_5pct = r.p_value < 0.05;
    return r;
}

OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const auto n = x.rows();
    const auto k = x.cols();
    if (n <= k) throw Error(ErrorKind::InsufficientData, "ols: fewer observations than regressors");

    OlsFit fit;
    fit.nobs = static_cast<int>(n);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    fit.coef = qr.solve(y);
    fit.residuals = y - x * fit.coef;
    fit.ssr = fit.residuals.squaredNorm();

    const double ybar = y.mean();
    const double tss = (y.array() - ybar).square().sum();
    fit.r_squared = tss > 0.0 ? 1.0 - fit.ssr / tss : 0.0;

    const double nd = static_cast<double>(n);
    fit.loglik = -0.5 * nd * (std::log(2.0 * std::numbers::pi) + std::log(fit.ssr / nd) + 1.0);
    fit.aic = -2.0 * fit.loglik + 2.0 * static_cast<double>(k);

    const double s2 = fit.ssr / static_cast<double>(n - k);
    const Eigen::MatrixXd xtx_inv =
        (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    fit.std_err = (s2 * xtx_inv.diagonal().array()).sqrt();
    return fit;
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size());
}

double chi_square_sf(double x, double dof) {
    if (dof <= 0.0) throw Error(ErrorKind::Range, "chi-square needs positive degrees of freedom");
    if (x <= 0.0) return 1.0;
    if (!std::isfinite(x)) return 0.0;
    boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, x));
}

double normal_cdf(double z) {
    if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::normal(), z);
}

double normal_two_sided_p(double z) {
    if (!std::isfinite(z)) return 0.0;
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), std::abs(z)));
}

}  // namespace agesl::stats
