#pragma once

#include "agesl/date.hpp"
#include "agesl/stats.hpp"

#include <span>
#include <vector>

namespace agesl {

/// Daily closing prices indexed by trading day. Gaps in the calendar are not
/// imputed; consecutive entries are one trading step apart.
class PriceSeries {
public:
    PriceSeries() = default;
    /// Validates strictly increasing dates, matching lengths, and finite values.
    PriceSeries(std::vector<Date> dates, std::vector<double> values);

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    const std::vector<Date>& dates() const noexcept { return dates_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::span<const double> view() const noexcept { return values_; }

    /// First `n` observations.
    PriceSeries head(std::size_t n) const;

private:
    std::vector<Date> dates_;
    std::vector<double> values_;
};

namespace ts {

using stats::TestReport;

/// d-th order difference; output has `series.size() - d` elements.
std::vector<double> difference(std::span<const double> series, int d);

/// Undoes `difference(.., d)` for values appended after `history`: given the
/// tail of the original series and forecasts on the d-times differenced
/// scale, returns forecasts on the original scale.
std::vector<double> integrate(std::span<const double> history, std::span<const double> diffs, int d);

/// floor(12 * (n / 100)^(1/4)).
int default_adf_max_lag(std::size_t n);

struct AdfReport : TestReport {
    double crit_1pct = 0.0;
    double crit_5pct = 0.0;
    double crit_10pct = 0.0;
    int nobs = 0;
};

/// Augmented Dickey-Fuller test with a constant, lag order chosen by AIC over
/// 0..max_lag on a common sample. Pass max_lag < 0 for the default rule.
AdfReport adf_test(std::span<const double> series, int max_lag = -1);

/// MacKinnon (1994) asymptotic p-value for the constant-only ADF statistic.
double adf_pvalue(double statistic);

struct Correlogram {
    std::vector<double> acf;   // acf[0] == 1
    std::vector<double> pacf;  // pacf[0] == 1
    std::size_t n = 0;
};

Correlogram correlogram(std::span<const double> series, int max_lag);

/// Sample autocorrelations r_0..r_max_lag of the demeaned series.
std::vector<double> acf(std::span<const double> series, int max_lag);

/// Partial autocorrelations from an autocorrelation sequence by the
/// Durbin-Levinson recursion.
std::vector<double> pacf_durbin_levinson(std::span<const double> acf);

/// Q = n * sum r_k^2 (Box-Pierce) or n(n+2) * sum r_k^2 / (n-k) (Ljung-Box)
/// over k = 1..lags, from precomputed autocorrelations.
double portmanteau_statistic(std::span<const double> acf, std::size_t n, int lags,
                             bool ljung_box = false);

struct PortmanteauOptions {
    int fitted_params = 0;  // subtracted from the chi-square dof
    bool ljung_box = false;
};

TestReport box_pierce(std::span<const double> residuals, int lags, PortmanteauOptions options = {});

}  // namespace ts
}  // namespace agesl
