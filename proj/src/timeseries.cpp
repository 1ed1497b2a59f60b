#include "agesl/timeseries.hpp"
#include "agesl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace agesl {

PriceSeries::PriceSeries(std::vector<Date> dates, std::vector<double> values)
    : dates_(std::move(dates)), values_(std::move(values)) {
    if (dates_.size() != values_.size()) {
        throw Error(ErrorKind::Range, "price series: dates and values differ in length");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw Error(ErrorKind::NonFinite, "price series: non-finite value on " + dates_[i].iso());
        }
        if (i > 0 && !(dates_[i - 1] < dates_[i])) {
            throw Error(ErrorKind::Range, "price series: dates not strictly increasing at " + dates_[i].iso());
        }
    }
}

PriceSeries PriceSeries::head(std::size_t n) const {
    n = std::min(n, size());
    return PriceSeries({dates_.begin(), dates_.begin() + static_cast<std::ptrdiff_t>(n)},
                       {values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(n)});
}

namespace ts {

std::vector<double> difference(std::span<const double> series, int d) {
    if (d < 0) throw Error(ErrorKind::Range, "difference: negative order");
    if (series.size() <= static_cast<std::size_t>(d)) {
        throw Error(ErrorKind::InsufficientData, "difference: series length must exceed the order");
    }
    std::vector<double> out(series.begin(), series.end());
    for (int k = 0; k < d; ++k) {
        for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
        out.pop_back();
    }
    return out;
}

std::vector<double> integrate(std::span<const double> history, std::span<const double> diffs, int d) {
    if (d == 0) return {diffs.begin(), diffs.end()};
    if (history.size() < static_cast<std::size_t>(d)) {
        throw Error(ErrorKind::InsufficientData, "integrate: history shorter than differencing order");
    }
    // Last value of each lower-order differenced series, from level 0 up to d-1.
    std::vector<double> tail(history.end() - d, history.end());
    std::vector<double> last(static_cast<std::size_t>(d));
    for (int level = 0; level < d; ++level) {
        last[static_cast<std::size_t>(level)] = tail.back();
        for (std::size_t i = 0; i + 1 < tail.size(); ++i) tail[i] = tail[i + 1] - tail[i];
        tail.pop_back();
    }
    std::vector<double> out;
    out.reserve(diffs.size());
    for (double dv : diffs) {
        double v = dv;
        for (int level = d - 1; level >= 0; --level) {
            v += last[static_cast<std::size_t>(level)];
            last[static_cast<std::size_t>(level)] = v;
        }
        out.push_back(v);
    }
    return out;
}

int default_adf_max_lag(std::size_t n) {
    return static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

double adf_pvalue(double statistic) {
    // MacKinnon (1994), N = 1, constant only.
    constexpr double kMax = 2.74, kMin = -18.83, kStar = -1.61;
    constexpr double kSmall[] = {2.1659, 1.4412, 0.038269};
    constexpr double kLarge[] = {1.7339, 0.93202, -0.12745, -0.010368};
    if (statistic > kMax) return 1.0;
    if (statistic < kMin) return 0.0;
    double z = 0.0;
    if (statistic <= kStar) {
        for (int i = 2; i >= 0; --i) z = z * statistic + kSmall[i];
    } else {
        for (int i = 3; i >= 0; --i) z = z * statistic + kLarge[i];
    }
    return stats::normal_cdf(z);
}

namespace {

// MacKinnon (2010) finite-sample critical values, constant only, N = 1.
double adf_critical(double nobs, int level) {
    static constexpr double kTable[3][4] = {
        {-3.43035, -6.5393, -16.786, -79.433},
        {-2.86154, -2.8903, -4.234, -40.040},
        {-2.56677, -1.5384, -2.809, 0.0},
    };
    const double inv = 1.0 / nobs;
    const auto& c = kTable[level];
    return c[0] + inv * (c[1] + inv * (c[2] + inv * c[3]));
}

// Rows j = first..n-2 of the differenced series. Columns: level, k lagged
// differences, then the constant when `constant_last`, else constant first.
Eigen::MatrixXd adf_design(std::span<const double> x, std::span<const double> dx, std::size_t first, int k,
                           bool constant_last) {
    const std::size_t rows = dx.size() - first;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), k + 2);
    const int off = constant_last ? 0 : 1;
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t j = first + r;
        const auto row = static_cast<Eigen::Index>(r);
        m(row, constant_last ? k + 1 : 0) = 1.0;
        m(row, off) = x[j];
        for (int l = 1; l <= k; ++l) m(row, off + l) = dx[j - static_cast<std::size_t>(l)];
    }
    return m;
}

Eigen::VectorXd tail_vector(std::span<const double> v, std::size_t first) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(v.size() - first));
    for (std::size_t i = first; i < v.size(); ++i) y(static_cast<Eigen::Index>(i - first)) = v[i];
    return y;
}

}  // namespace

AdfReport adf_test(std::span<const double> series, int max_lag) {
    if (max_lag < 0) max_lag = default_adf_max_lag(series.size());
    if (series.size() < static_cast<std::size_t>(10 + max_lag)) {
        throw Error(ErrorKind::InsufficientData,
                    "adf_test: series needs at least 10 + max_lag observations");
    }
    const std::vector<double> dx = difference(series, 1);
    const auto L = static_cast<std::size_t>(max_lag);

    // Lag selection on the common sample that max_lag allows.
    const Eigen::MatrixXd full = adf_design(series, dx, L, max_lag, false);
    const Eigen::VectorXd y_common = tail_vector(dx, L);
    int best_k = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= max_lag; ++k) {
        const auto fit = stats::ols(full.leftCols(k + 2), y_common);
        if (fit.aic < best_aic) {
            best_aic = fit.aic;
            best_k = k;
        }
    }

    const auto first = static_cast<std::size_t>(best_k);
    const auto fit = stats::ols(adf_design(series, dx, first, best_k, true), tail_vector(dx, first));
    const double tstat = fit.coef(0) / fit.std_err(0);

    AdfReport report;
    static_cast<TestReport&>(report) = stats::make_report(tstat, adf_pvalue(tstat), best_k);
    report.nobs = fit.nobs;
    report.crit_1pct = adf_critical(fit.nobs, 0);
    report.crit_5pct = adf_critical(fit.nobs, 1);
    report.crit_10pct = adf_critical(fit.nobs, 2);
    return report;
}

std::vector<double> acf(std::span<const double> series, int max_lag) {
    const std::size_t n = series.size();
    if (max_lag < 0 || static_cast<std::size_t>(max_lag) >= n) {
        throw Error(ErrorKind::Range, "acf: max_lag must lie in [0, n-1]");
    }
    const double m = stats::mean(series);
    double c0 = 0.0;
    for (double v : series) c0 += (v - m) * (v - m);
    if (!(c0 > 0.0)) throw Error(ErrorKind::Degenerate, "acf: constant series has no autocorrelation");
    std::vector<double> r(static_cast<std::size_t>(max_lag) + 1);
    r[0] = 1.0;
    for (int k = 1; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) {
            ck += (series[t] - m) * (series[t - static_cast<std::size_t>(k)] - m);
        }
        r[static_cast<std::size_t>(k)] = ck / c0;
    }
    return r;
}

std::vector<double> pacf_durbin_levinson(std::span<const double> r) {
    const std::size_t max_lag = r.empty() ? 0 : r.size() - 1;
    std::vector<double> pacf(max_lag + 1, 0.0);
    pacf[0] = 1.0;
    std::vector<double> phi, prev;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double num = r[k];
        double den = 1.0;
        for (std::size_t j = 1; j < k; ++j) {
            num -= prev[j - 1] * r[k - j];
            den -= prev[j - 1] * r[j];
        }
        const double pkk = std::abs(den) > 0.0 ? num / den : 0.0;
        phi.assign(k, 0.0);
        for (std::size_t j = 1; j < k; ++j) phi[j - 1] = prev[j - 1] - pkk * prev[k - j - 1];
        phi[k - 1] = pkk;
        prev = phi;
        pacf[k] = std::clamp(pkk, -1.0, 1.0);
    }
    return pacf;
}

Correlogram correlogram(std::span<const double> series, int max_lag) {
    if (max_lag < 1 || static_cast<std::size_t>(max_lag) >= series.size()) {
        throw Error(ErrorKind::Range, "correlogram: require 1 <= max_lag < n");
    }
    Correlogram c;
    c.n = series.size();
    c.acf = acf(series, max_lag);
    c.pacf = pacf_durbin_levinson(c.acf);
    return c;
}

double portmanteau_statistic(std::span<const double> r, std::size_t n, int lags, bool ljung_box) {
    if (lags < 1 || r.size() <= static_cast<std::size_t>(lags)) {
        throw Error(ErrorKind::Range, "portmanteau: need autocorrelations up to the requested lag");
    }
    const double nd = static_cast<double>(n);
    double q = 0.0;
    for (int k = 1; k <= lags; ++k) {
        const double rk2 = r[static_cast<std::size_t>(k)] * r[static_cast<std::size_t>(k)];
        q += ljung_box ? rk2 / (nd - k) : rk2;
    }
    return ljung_box ? nd * (nd + 2.0) * q : nd * q;
}

TestReport box_pierce(std::span<const double> residuals, int lags, PortmanteauOptions options) {
    if (lags < 1 || static_cast<std::size_t>(lags) >= residuals.size()) {
        throw Error(ErrorKind::Range, "box_pierce: require 1 <= lags < n");
    }
    const auto r = acf(residuals, lags);
    const double q = portmanteau_statistic(r, residuals.size(), lags, options.ljung_box);
    const int dof = lags - options.fitted_params;
    const double p = dof > 0 ? stats::chi_square_sf(q, dof) : std::nan("");
    return stats::make_report(q, std::isnan(p) ? 1.0 : p, lags);
}

}  // namespace ts
}  // namespace agesl
