#pragma once

#include "agesl/stats.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <span>
#include <vector>

namespace agesl::garch {

/// GARCH(m, s) on innovations a_t = sigma_t u_t with u_t ~ N(0, 1):
///   sigma_t^2 = alpha0 + sum_i alpha_i a_{t-i}^2 + sum_j beta_j sigma_{t-j}^2.
struct GarchModel {
    double alpha0 = 0.0;
    std::vector<double> alpha;  // m ARCH terms
    std::vector<double> beta;   // s GARCH terms
    std::vector<double> sigma2_path;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    /// Set when the estimate had to be pulled back inside sum(alpha + beta) < 1.
    bool projected = false;
    int iterations = 0;

    int m() const noexcept { return static_cast<int>(alpha.size()); }
    int s() const noexcept { return static_cast<int>(beta.size()); }
    double persistence() const noexcept;
    double unconditional_variance() const noexcept;
};

/// Engle's LM test: n * R^2 from regressing a_t^2 on a constant and `lags`
/// of its own lags, n being the number of usable rows.
stats::TestReport lm_arch_test(std::span<const double> residuals, int lags);

struct FitOptions {
    int max_iter = 500;
};

GarchModel fit(std::span<const double> residuals, int m = 1, int s = 1, const FitOptions& options = {});

/// Fits every (m, s) in {1, 2} x {1, 2} and keeps the smallest BIC.
GarchModel fit_best(std::span<const double> residuals);

/// Forecasts sigma^2 for steps 1..horizon. The histories hold the most recent
/// values last; missing lags are filled with the oldest value supplied.
std::vector<double> forecast_variance(const GarchModel& model, std::span<const double> resid2_history,
                                      std::span<const double> sigma2_history, int horizon);
std::vector<double> forecast_variance(const GarchModel& model, double last_resid2, double last_sigma2, int horizon);

/// sigma_t^2 for t = 0..n (the last entry is the forecast for t = n) with the
/// model's parameters held fixed; pre-sample terms use the sample variance.
std::vector<double> conditional_variances(const GarchModel& model, std::span<const double> residuals);

struct RollingOptions {
    int refit_every = 20;
    int m = 1;
    int s = 1;
};

struct RollingVariance {
    std::vector<double> variances;  // NaN before start
    int refits = 0;
    int failed_refits = 0;
};

/// One-step variance forecasts for indices [start, n) with expanding-window
/// refits; blocks run in parallel.
RollingVariance rolling_variance(std::span<const double> residuals, std::size_t start, const RollingOptions& options = {});
RollingVariance rolling_variance_serial(std::span<const double> residuals, std::size_t start,
                                        const RollingOptions& options = {});

std::vector<double> simulate(double alpha0, std::span<const double> alpha, std::span<const double> beta, std::size_t n,
                             std::mt19937_64& rng, std::size_t burn_in = 500);

nlohmann::json to_json(const GarchModel& model);
GarchModel model_from_json(const nlohmann::json& doc);

}  // namespace agesl::garch
