#pragma once

#include "agesl/arima.hpp"
#include "agesl/conllu.hpp"
#include "agesl/embeddings.hpp"
#include "agesl/events.hpp"
#include "agesl/features.hpp"
#include "agesl/garch.hpp"
#include "agesl/ingest.hpp"
#include "agesl/metrics.hpp"
#include "agesl/sentiment.hpp"
#include "agesl/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace agesl::pipeline {

inline const std::vector<std::string> kAllModels = {"ARIMA", "LSTM", "LSTM-Sent", "LSTM-Event", "ARIMA-GARCH-Sent", "AGESL"};

struct NetworkConfig {
    int hidden = 64;
    int window = 20;
    int epochs = 60;
    int batch_size = 32;
    double lr = 1e-3;
    int patience = 10;
    double clip_norm = 5.0;
};

/// Input the AGESL head passes through unchanged before training.
enum class AgeslInit { Lstm, Arima };

/// Every relative path is resolved against the directory of the config file.
struct ExperimentConfig {
    std::filesystem::path prices;
    std::filesystem::path news;
    std::filesystem::path manifest;
    std::filesystem::path embeddings;
    std::filesystem::path lexicon;      // empty: bundled VADER lexicon
    std::filesystem::path supersenses;  // empty: bundled table
    std::filesystem::path output_dir = "out";
    std::vector<std::string> filter_terms;
    std::size_t items_per_day = 5;
    double train_ratio = 0.8;
    double val_fraction = 0.1;
    int arima_max_p = 3;
    int arima_max_q = 3;
    int arima_refit_every = 20;
    int garch_refit_every = 20;
    events::OdeeConfig odee;
    NetworkConfig lstm;
    NetworkConfig fusion{16, 0, 80, 32, 1e-3, 15, 5.0};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    metrics::DirectionRule direction_rule = metrics::DirectionRule::AsWritten;
    std::vector<std::string> models = kAllModels;
    AgeslInit agesl_init = AgeslInit::Lstm;
    bool verbose = false;

    static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
    static ExperimentConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

/// Everything that does not depend on the seed: cleaned prices, news aligned
/// to trading days, daily sentiment, event clusters, and the ARIMA and GARCH
/// one-step forecasts.
struct PreparedData {
    PriceSeries prices;
    std::vector<ingest::OutlierReplacement> replacements;
    std::vector<std::string> rejected_rows;
    std::size_t dropped_news = 0;
    std::vector<std::vector<ingest::RawNewsItem>> kept_news;  // per trading day, at most items_per_day
    std::map<Date, sentiment::SentimentVector> sentiments;     // trading days with news
    std::vector<std::optional<events::NewsCluster>> clusters;  // per trading day
    text::EmbeddingTable embeddings;
    events::SupersenseTable supersenses;
    SplitPlan split;
    arima::ArimaModel arima;
    std::vector<double> arima_mean;  // per trading day, NaN where undefined
    garch::GarchModel garch;
    std::vector<double> garch_var;
    std::size_t garch_offset = 0;  // first trading day with a GARCH residual
};

/// Reads prices and news and keeps the `items_per_day` items with the largest
/// |compound| per trading day.
PreparedData load_inputs(const ExperimentConfig& config);
/// load_inputs followed by the ARIMA and GARCH stages.
PreparedData prepare(const ExperimentConfig& config);
void fit_mean_model(PreparedData& data, const ExperimentConfig& config);
void fit_volatility_model(PreparedData& data, const ExperimentConfig& config);

/// ODEE trained on the training-split clusters, then an event record for
/// every trading day with news.
struct EventStage {
    events::OdeeParams params;
    std::map<Date, events::EventRecord> records;
};
EventStage extract_events(const PreparedData& data, const ExperimentConfig& config, std::uint64_t seed);

struct ModelRun {
    std::string model;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<double> predictions;  // one per test day
    metrics::EvalReport report;
    double seconds = 0.0;
    std::vector<double> val_rmse;  // validation curve of the last trained network, z scale
    int best_epoch = 0;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<ModelRun> runs;
    std::vector<double> odee_elbo;
};

/// Trains and evaluates every configured model for one seed. Failures are
/// recorded in the run and do not stop the others.
SeedResult run_seed(const PreparedData& data, const ExperimentConfig& config, std::uint64_t seed);

struct ModelSummary {
    std::string model;
    std::size_t ok_runs = 0;
    std::vector<std::string> errors;
    metrics::EvalReport mean;
    metrics::EvalReport median;
    std::vector<double> mean_predictions;  // per test day, averaged over seeds
};

struct DmEntry {
    std::string a;
    std::string b;
    stats::TestReport report;
};

struct ExperimentResult {
    std::vector<Date> test_dates;
    std::vector<double> actuals;
    std::vector<SeedResult> seeds;
    std::vector<ModelSummary> summaries;
    std::vector<DmEntry> dm;
    SplitPlan split;
    arima::ArimaSpec arima_spec;
    double seconds = 0.0;

    const ModelSummary* summary(std::string_view model) const;
};

/// Summaries and the pairwise DM matrix (squared-error losses averaged over
/// seeds) from finished seed runs.
ExperimentResult summarize(const PreparedData& data, std::vector<SeedResult> seeds, const std::vector<std::string>& models);

ExperimentResult run_experiment(const ExperimentConfig& config);

/// metrics.csv, summary.csv, predictions.csv, dm.csv and report.json.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace agesl::pipeline
