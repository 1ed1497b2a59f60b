#pragma once

#include "agesl/conllu.hpp"
#include "agesl/date.hpp"
#include "agesl/embeddings.hpp"
#include "agesl/neural.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace agesl::events {

inline constexpr int kTypeDim = 100;
inline constexpr int kArgDim = 200;
inline constexpr std::size_t kMaxEvents = 5;
inline constexpr std::size_t kMaxEventTokens = 20;
inline const std::string kOovToken = "<oov>";

/// An entity mention: head word h, feature vector f and redundancy ratio r.
struct Entity {
    std::string head;
    Eigen::VectorXd features;
    double redundancy = 0.0;
    std::size_t item = 0;
    std::size_t sentence = 0;
    int token = 0;
};

/// One calendar day's related news items.
struct NewsCluster {
    Date date;
    std::vector<text::Document> items;
    std::vector<Entity> entities;
};

/// Every NOUN/PROPN token is an entity. Its features are the head embedding
/// followed by the mean embedding of the tokens within `window` positions;
/// its redundancy is the fraction of items containing the same head word.
std::vector<Entity> extract_entities(std::span<const text::Document> items, const text::EmbeddingTable& embeddings,
                                     int window = 2);
NewsCluster make_cluster(Date date, std::vector<text::Document> items, const text::EmbeddingTable& embeddings);

struct OdeeConfig {
    int num_slots = 10;
    int type_dim = kTypeDim;
    int prior_hidden = 32;
    int inference_hidden = 64;
    int epochs = 50;
    int batch_size = 16;
    double lr = 0.005;
    double beta1 = 0.8;
    double beta2 = 0.999;
    std::size_t max_vocab = 5000;
    std::uint64_t seed = 1;
};

/// Parameters of the generative model
///   t ~ N(0, I),  s ~ Cat(softmax(MLP(t; theta))),
///   h ~ Cat(lambda_s),  f ~ N(beta_s, diag),  r ~ N(gamma_s, var),
/// plus the inference network q(t | cluster) = N(mu, diag(exp(logvar))).
struct OdeeParams {
    OdeeParams(int num_slots, int type_dim, int feature_dim, const OdeeConfig& config);

    int num_slots;
    int type_dim;
    int feature_dim;
    std::vector<std::string> vocab;  // the OOV bucket is index vocab.size()
    std::unordered_map<std::string, std::size_t> vocab_index;
    nn::MlpHead theta;                 // type_dim -> hidden -> num_slots
    Eigen::MatrixXd lambda_logits;     // num_slots x (vocab + 1)
    Eigen::MatrixXd beta_mean;         // num_slots x feature_dim
    Eigen::MatrixXd beta_logvar;       // num_slots x feature_dim
    Eigen::VectorXd gamma_mean;        // num_slots
    Eigen::VectorXd gamma_logvar;      // num_slots
    nn::MlpHead inference;             // feature_dim -> hidden -> 2 type_dim
    std::vector<double> elbo_history;  // per-entity ELBO after each epoch
    std::uint64_t seed = 1;

    std::size_t head_index(const std::string& head) const;
    /// Row s holds log lambda_s.
    Eigen::MatrixXd log_lambda() const;
    void set_vocab(std::vector<std::string> words);
};

OdeeParams train(std::span<const NewsCluster> corpus, const OdeeConfig& config);

/// Trainable parameters flattened in a fixed order (theta, lambda, beta mean,
/// beta log-variance, gamma mean, gamma log-variance, inference network).
Eigen::VectorXd pack(const OdeeParams& params);
void unpack(const Eigen::VectorXd& flat, OdeeParams& params);

struct ElboGradient {
    double elbo = 0.0;            // summed over clusters
    Eigen::VectorXd grad;         // d elbo / d pack(params)
    std::size_t entities = 0;
};

/// Single-sample reparameterized ELBO and its gradient, one noise vector per
/// cluster. Clusters are processed in parallel and reduced in input order.
ElboGradient elbo_gradient(const OdeeParams& params, std::span<const NewsCluster> clusters,
                           std::span<const Eigen::VectorXd> noise);
ElboGradient elbo_gradient_serial(const OdeeParams& params, std::span<const NewsCluster> clusters,
                                  std::span<const Eigen::VectorXd> noise);

/// Per-entity ELBO over the corpus, with the reparameterization noise drawn
/// from `noise_seed` so repeated evaluations are comparable.
double elbo(const OdeeParams& params, std::span<const NewsCluster> corpus, std::uint64_t noise_seed);

/// Posterior mean of t from the inference network.
Eigen::VectorXd infer_type(const OdeeParams& params, const NewsCluster& cluster);

/// log p(s | t) for every slot.
Eigen::VectorXd slot_log_prior(const OdeeParams& params, const Eigen::VectorXd& t);

/// argmax_s of log_prior[s] + log_head[s] + log_feature[s]; first index wins ties.
int argmax_slot(std::span<const double> log_prior, std::span<const double> log_head, std::span<const double> log_feature);

/// Slot per entity by the three-factor rule p(s|t) p(h|s) p(f|s), in log space.
std::vector<int> assign_slots(const OdeeParams& params, const NewsCluster& cluster, const Eigen::VectorXd& t);

/// Normalized three-factor posterior, num_slots x entities.
Eigen::MatrixXd slot_posteriors(const OdeeParams& params, const NewsCluster& cluster, const Eigen::VectorXd& t);

nlohmann::json to_json(const OdeeParams& params);
OdeeParams odee_from_json(const nlohmann::json& doc);

/// Word -> WordNet noun supersense ("noun.act", ...). Tab-separated file.
class SupersenseTable {
public:
    static SupersenseTable load(const std::filesystem::path& path);
    static const SupersenseTable& bundled();
    /// Empty string when the word has no entry.
    std::string lookup(std::string_view word) const;
    void add(std::string word, std::string tag) { table_[std::move(word)] = std::move(tag); }

private:
    std::unordered_map<std::string, std::string> table_;
};

struct Event {
    std::string trigger;
    std::vector<std::string> arguments;  // one phrase per argument
    std::vector<std::string> tokens;     // trigger then argument words, at most 20
    double score = 0.0;
    bool padding = false;
};

struct EventRecord {
    Eigen::VectorXd type_vec;
    std::vector<Event> events;  // always kMaxEvents entries; padding at the end
    std::size_t num_extracted = 0;
    Eigen::VectorXd arg_embedding;
};

/// Candidate events from the dependency parses: VERB tokens, tokens attached
/// by advcl/ccomp/xcomp/rcmod/acl:relcl, and nouns whose supersense is
/// noun.act, noun.phenomenon, noun.event or noun.attribute. Arguments are the
/// trigger's NOUN/PROPN dependents expanded with compound/amod/flat/nummod
/// modifiers. Candidates are ranked by the sum over their arguments of the
/// largest slot posterior (`posteriors` is slots x entities, may be empty).
EventRecord assemble_events(const NewsCluster& cluster, const Eigen::MatrixXd& posteriors,
                            const Eigen::VectorXd& type_vec, const text::EmbeddingTable& embeddings,
                            const SupersenseTable& supersenses = SupersenseTable::bundled());

/// Record for a day without news: zero type vector, padded events, zero
/// argument embedding.
EventRecord empty_record(int type_dim, int arg_dim);

}  // namespace agesl::events
