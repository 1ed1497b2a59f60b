#pragma once

#include "agesl/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <span>
#include <vector>

namespace agesl::arima {

/// ARIMA(p, d, q). p = q = 0 is the intercept-only model on the differenced scale.
struct ArimaSpec {
    int p = 1;
    int d = 0;
    int q = 0;

    bool intercept_only() const noexcept { return p == 0 && q == 0; }
    int num_coefficients() const noexcept { return 1 + p + q; }  // intercept included
    void validate() const;

    bool operator==(const ArimaSpec&) const = default;
};

/// Fitted ARMA(p, q) on the d-times differenced series:
///   w_t = c + sum_i ar_i w_{t-i} + e_t + sum_j ma_j e_{t-j}.
struct ArimaModel {
    ArimaSpec spec;
    double intercept = 0.0;
    std::vector<double> ar;
    std::vector<double> ma;
    double sigma2 = 1.0;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    /// One per differenced observation; the first p are pre-sample zeros.
    std::vector<double> residuals;
    /// Asymptotic standard errors in the order intercept, ar..., ma...
    std::vector<double> std_errors;
    int iterations = 0;
};

struct FitOptions {
    int max_iter = 500;
};

ArimaModel fit(std::span<const double> series, const ArimaSpec& spec, const FitOptions& options = {});
inline ArimaModel fit(const PriceSeries& series, const ArimaSpec& spec, const FitOptions& options = {}) {
    return fit(series.view(), spec, options);
}

/// Chooses d as the smallest order (capped at 2) whose differenced series
/// rejects a unit root, then (p, q) on [0, max_p] x [0, max_q] by BIC with
/// ties going to smaller p + q, then smaller p.
ArimaSpec select_order(std::span<const double> series, int max_p, int max_q);

/// Mean forecasts on the original scale for steps 1..horizon after `history`.
std::vector<double> forecast(const ArimaModel& model, std::span<const double> history, int horizon);

/// Same recursion on the differenced scale; `differenced` is the already
/// differenced history.
std::vector<double> forecast_differenced(const ArimaModel& model, std::span<const double> differenced, int horizon);

/// Conditional residuals of `differenced` under the model's coefficients.
std::vector<double> filter_residuals(const ArimaModel& model, std::span<const double> differenced);

/// pred[t] is the one-step forecast of series[t] from series[0..t) with the
/// model's parameters held fixed; NaN where fewer than d + 1 values precede t.
std::vector<double> one_step_predictions(const ArimaModel& model, std::span<const double> series);

struct RollingOptions {
    int refit_every = 20;
};

struct RollingForecast {
    /// Same length as the input series; NaN before `start`.
    std::vector<double> predictions;
    int refits = 0;
    int failed_refits = 0;  // blocks that fell back to the previous observation
};

/// Expanding-window rolling one-step forecasts for indices [start, n). The
/// model is refit on series[0..i) at every block start i and held within the
/// block. Blocks are independent and evaluated in parallel.
RollingForecast rolling_forecast(std::span<const double> series, const ArimaSpec& spec, std::size_t start,
                                 const RollingOptions& options = {});
/// Plain sequential loop over the same scheme; reference for the parallel kernel.
RollingForecast rolling_forecast_serial(std::span<const double> series, const ArimaSpec& spec, std::size_t start,
                                        const RollingOptions& options = {});

/// True when all roots of 1 - sum ar_i z^i lie outside the unit circle.
bool is_stationary(std::span<const double> ar);
/// True when all roots of 1 + sum ma_j z^j lie outside the unit circle.
bool is_invertible(std::span<const double> ma);

/// Draws n values of the ARMA recursion with N(0, sigma2) innovations after
/// discarding `burn_in` warm-up steps.
std::vector<double> simulate(double intercept, std::span<const double> ar, std::span<const double> ma, double sigma2,
                             std::size_t n, std::mt19937_64& rng, std::size_t burn_in = 200);

nlohmann::json to_json(const ArimaModel& model);
ArimaModel model_from_json(const nlohmann::json& doc);

}  // namespace agesl::arima
