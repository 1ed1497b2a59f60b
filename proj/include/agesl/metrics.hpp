#pragma once

#include "agesl/stats.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace agesl::metrics {

struct EvalReport {
    double rmse = 0.0;
    double mape = 0.0;
    double ds = 0.0;
    std::size_t n = 0;
};

/// How a day's direction is judged for DS.
///  AsWritten:    (y[t+1] - y[t]) * (y[t+1] - pred[t+1]) >= 0
///  Conventional: (y[t+1] - y[t]) * (pred[t+1] - y[t]) >= 0
enum class DirectionRule { AsWritten, Conventional };

double rmse(std::span<const double> actuals, std::span<const double> predictions);
/// Mean absolute percentage error as a fraction; errors on a zero actual.
double mape(std::span<const double> actuals, std::span<const double> predictions);
/// Fraction of the n - 1 consecutive pairs with alpha_t = 1; 0 when n < 2.
double direction_statistic(std::span<const double> actuals, std::span<const double> predictions,
                           DirectionRule rule = DirectionRule::AsWritten);

EvalReport point_metrics(std::span<const double> actuals, std::span<const double> predictions,
                         DirectionRule rule = DirectionRule::AsWritten);

/// Diebold-Mariano test on two loss sequences. The long-run variance of the
/// differential uses autocovariances up to lag horizon - 1; if that estimate
/// is not positive the lag-0 variance is used instead.
stats::TestReport dm_test(std::span<const double> losses_a, std::span<const double> losses_b, int horizon = 1);

struct SchemaEvent {
    std::string trigger;
    std::vector<std::string> arguments;
};

struct SchemaCluster {
    std::string cluster;
    std::vector<SchemaEvent> events;
};

struct SchemaScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

/// P = TP/(TP+FP), R = TP/(TP+FN), F1 their harmonic mean; 0 when undefined.
SchemaScores scores_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

/// Greedy one-to-one matching inside each cluster: predicted events in order
/// take the unmatched gold event with the same trigger (case-insensitive)
/// and the largest argument overlap.
SchemaScores schema_match_eval(std::span<const SchemaCluster> predicted, std::span<const SchemaCluster> gold);

/// JSONL, one cluster per line: {"cluster": ..., "events": [{"trigger": ..., "arguments": [...]}]}.
std::vector<SchemaCluster> read_schema_jsonl(const std::filesystem::path& path);

}  // namespace agesl::metrics
