#pragma once

#include "agesl/events.hpp"
#include "agesl/timeseries.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace agesl::synthetic {

/// Clusters drawn from the event generative model itself: a few prototype
/// type vectors, slot proportions softmax(A t), per-slot head vocabularies,
/// Gaussian features and redundancy ratios.
struct OdeeCorpus {
    std::vector<events::NewsCluster> clusters;
    std::vector<std::vector<int>> true_slots;  // per cluster, per entity
    std::vector<int> true_type;                // prototype behind each cluster
};

struct OdeeCorpusOptions {
    int num_clusters = 200;
    int num_slots = 3;
    int num_types = 4;
    int feature_dim = 16;
    int words_per_slot = 12;
    int min_entities = 6;
    int max_entities = 14;
    double feature_sd = 0.6;
};

OdeeCorpus generate_odee_corpus(const OdeeCorpusOptions& options, std::uint64_t seed);

/// A small oil-market world: daily news items built from event templates,
/// their dependency parses, word embeddings, and a price path in which the
/// previous day's events and sentiment move the next day's price.
///
///   d_t = ar d_{t-1} + pull (MA20_{t-1} - p_{t-1}) + anchor_pull (anchor - p_{t-1})
///         + rebound (|d_{t-1}| - sqrt(2/pi) sigma_{t-1})
///         + effect_{t-1} + kappa compound_{t-1} sigma_t + sigma_t u_t
///
/// with sigma_t^2 following GARCH(1,1) on a_t = sigma_t u_t. effect and
/// compound are averages over the day's five items with the largest
/// |compound|, the same items the forecasting pipeline keeps.
struct MarketOptions {
    std::size_t num_days = 2000;
    Date start{2010, 1, 4};
    double ar = 0.25;
    double pull = 0.15;
    double anchor = 70.0;
    double anchor_pull = 0.01;
    double rebound = 0.5;
    double kappa = 1.5;
    double effect_scale = 1.0;
    double omega = 0.0125;
    double alpha = 0.10;
    double beta = 0.85;
    double no_news_prob = 0.25;
    int min_items = 2;
    int max_items = 7;
    double dominance = 0.7;
    double off_topic_prob = 0.08;
    double weekend_prob = 0.4;  // share of Monday items dated on the weekend
    int embed_dim = events::kArgDim;
    double embed_noise = 0.5;
};

struct MarketItem {
    std::string id;
    Date date;
    std::string headline;
    std::string body;
    std::string source;
    int category = -1;  // -1 for off-topic items
    std::string conllu;  // the item's annotated document
};

struct MarketCorpus {
    PriceSeries prices;
    std::vector<MarketItem> items;  // in date order
    std::vector<std::pair<std::string, Eigen::VectorXd>> embeddings;
    std::vector<double> effect;    // per trading day
    std::vector<double> compound;  // per trading day
    std::vector<double> sigma2;    // per trading day
};

/// Event categories with their next-day price effects.
struct EventCategory {
    std::string name;
    double effect;
};
std::span<const EventCategory> market_categories();

MarketCorpus generate_market_corpus(const MarketOptions& options, std::uint64_t seed);

/// Writes prices.csv, news.jsonl, conllu/<month>.conllu, manifest.jsonl,
/// embeddings.txt and truth.csv under `dir`.
void write_market_corpus(const MarketCorpus& corpus, const std::filesystem::path& dir);

}  // namespace agesl::synthetic
