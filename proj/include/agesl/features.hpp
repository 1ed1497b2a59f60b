#pragma once

#include "agesl/date.hpp"
#include "agesl/events.hpp"
#include "agesl/sentiment.hpp"
#include "agesl/timeseries.hpp"

#include <Eigen/Dense>

#include <array>
#include <map>
#include <span>
#include <vector>

namespace agesl::pipeline {

inline constexpr std::size_t kNumLags = 20;
inline constexpr int kFeatureDim = events::kTypeDim + events::kArgDim + static_cast<int>(kNumLags);

/// Inputs for forecasting the close of trading day `index`. Everything in the
/// row is known by the close of day index - 1: the 20 previous closes, the
/// news of day index - 1, and the one-step ARIMA mean and GARCH variance.
struct FeatureRow {
    Date date;                 // date of the forecast target
    std::size_t index = 0;     // position of the target in the price series
    Eigen::VectorXd type_vec;  // 100
    Eigen::VectorXd arg_embedding;  // 200
    std::array<double, kNumLags> price_lags{};  // oldest first; the last entry is the previous close
    sentiment::SentimentVector sentiment{0.0, 1.0, 0.0, 0.0};
    bool has_news = false;
    double arima_mean = 0.0;
    double garch_var = 0.0;
    double target = 0.0;

    double last_price() const noexcept { return price_lags.back(); }
    /// type_vec, arg_embedding and price_lags concatenated (320 values).
    Eigen::VectorXd concatenated() const;
};

/// One row per price index i in [20, n). Sentiment and events are keyed by
/// trading date; a key that is not a trading date in `prices` is an error
/// naming every such key. Days without news get the neutral sentiment vector
/// and a padded event record.
std::vector<FeatureRow> build_features(const PriceSeries& prices,
                                       const std::map<Date, sentiment::SentimentVector>& sentiments,
                                       const std::map<Date, events::EventRecord>& events,
                                       std::span<const double> arima_mean, std::span<const double> garch_var,
                                       int type_dim = events::kTypeDim, int arg_dim = events::kArgDim);

/// Observation index boundaries: train [0, train_end), validation
/// [train_end, val_end), test [val_end, test_end).
struct SplitPlan {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t test_end = 0;

    bool operator==(const SplitPlan&) const = default;
};

/// val_end = floor(train_ratio * n), train_end = floor((1 - val_fraction) * val_end).
SplitPlan plan_split(std::size_t n, double train_ratio = 0.8, double val_fraction = 0.1);

}  // namespace agesl::pipeline
