#include "agesl/synthetic.hpp"
#include "agesl/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace agesl::synthetic {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd normal_vector(int n, double sd, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, sd);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

std::size_t draw_categorical(const VectorXd& probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double target = u(rng);
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        target -= probs[i];
        if (target <= 0.0) return static_cast<std::size_t>(i);
    }
    return static_cast<std::size_t>(probs.size() - 1);
}

}  // namespace

OdeeCorpus generate_odee_corpus(const OdeeCorpusOptions& o, std::uint64_t seed) {
    if (o.num_clusters < 1 || o.num_slots < 1 || o.num_types < 1 || o.min_entities < 1 || o.max_entities < o.min_entities) {
        throw Error(ErrorKind::Range, "synthetic odee corpus: bad options");
    }
    std::mt19937_64 rng(seed);
    constexpr int kLatent = 8;
    const int K = o.num_slots;
    std::vector<VectorXd> prototypes;
    for (int k = 0; k < o.num_types; ++k) prototypes.push_back(normal_vector(kLatent, 1.0, rng));
    MatrixXd mix(K, kLatent);
    for (int s = 0; s < K; ++s) mix.row(s) = normal_vector(kLatent, 1.0, rng).transpose();
    std::vector<VectorXd> slot_mean;
    for (int s = 0; s < K; ++s) slot_mean.push_back(normal_vector(o.feature_dim, 1.0, rng));
    std::vector<VectorXd> head_probs;
    for (int s = 0; s < K; ++s) {
        VectorXd w(o.words_per_slot);
        for (int i = 0; i < o.words_per_slot; ++i) w[i] = 1.0 / (i + 1.0);
        head_probs.push_back(w / w.sum());
    }
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> n_entities(o.min_entities, o.max_entities);
    std::uniform_int_distribution<int> type_pick(0, o.num_types - 1);

    OdeeCorpus out;
    for (int c = 0; c < o.num_clusters; ++c) {
        const int type = type_pick(rng);
        const VectorXd t = prototypes[static_cast<std::size_t>(type)] + normal_vector(kLatent, 0.3, rng);
        VectorXd logits = mix * t;
        VectorXd probs = (logits.array() - logits.maxCoeff()).exp();
        probs /= probs.sum();
        events::NewsCluster cluster;
        cluster.date = Date::from_days(13514 + c);
        std::vector<int> slots;
        const int n = n_entities(rng);
        for (int e = 0; e < n; ++e) {
            const int s = static_cast<int>(draw_categorical(probs, rng));
            events::Entity ent;
            ent.head = "s" + std::to_string(s) + "w" + std::to_string(draw_categorical(head_probs[static_cast<std::size_t>(s)], rng));
            ent.features = slot_mean[static_cast<std::size_t>(s)] + normal_vector(o.feature_dim, o.feature_sd, rng);
            ent.redundancy = std::clamp(0.2 + 0.3 * s / std::max(1, K - 1) + 0.05 * normal(rng), 0.0, 1.0);
            ent.token = e + 1;
            cluster.entities.push_back(std::move(ent));
            slots.push_back(s);
        }
        out.clusters.push_back(std::move(cluster));
        out.true_slots.push_back(std::move(slots));
        out.true_type.push_back(type);
    }
    return out;
}

}  // namespace agesl::synthetic
