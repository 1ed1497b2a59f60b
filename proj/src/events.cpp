#include "agesl/events.hpp"
#include "agesl/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

namespace agesl::events {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kLogVarMin = -8.0;
constexpr double kLogVarMax = 8.0;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

bool is_nominal(const text::Token& t) { return t.upos == "NOUN" || t.upos == "PROPN"; }

std::string head_word(const text::Token& t) { return text::ascii_lower(t.form); }

VectorXd log_softmax(const VectorXd& z) {
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    return z.array() - lse;
}

double log_normal(double x, double mean, double logvar) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + logvar + d * d * std::exp(-logvar));
}

VectorXd log_normal_rows(const VectorXd& f, const MatrixXd& mean, const MatrixXd& logvar) {
    const MatrixXd d = mean.rowwise() - f.transpose();
    return -0.5 * ((logvar.array() + d.array().square() * (-logvar.array()).exp()).rowwise().sum() +
                   kLog2Pi * static_cast<double>(f.size()));
}

VectorXd mean_features(const OdeeParams& p, const NewsCluster& c) {
    VectorXd x = VectorXd::Zero(p.feature_dim);
    if (c.entities.empty()) return x;
    for (const auto& e : c.entities) x += e.features;
    return x / static_cast<double>(c.entities.size());
}

void check_features(const OdeeParams& p, const NewsCluster& c) {
    for (const auto& e : c.entities) {
        if (e.features.size() != p.feature_dim) {
            throw Error(ErrorKind::Range, "odee: entity '" + e.head + "' has feature dimension " +
                                              std::to_string(e.features.size()) + ", model expects " +
                                              std::to_string(p.feature_dim));
        }
    }
}

struct Offsets {
    Eigen::Index theta, lambda, bmean, blogvar, gmean, glogvar, inference, total;
};

Offsets offsets(const OdeeParams& p) {
    Offsets o{};
    o.theta = 0;
    o.lambda = o.theta + p.theta.params().size();
    o.bmean = o.lambda + p.lambda_logits.size();
    o.blogvar = o.bmean + p.beta_mean.size();
    o.gmean = o.blogvar + p.beta_logvar.size();
    o.glogvar = o.gmean + p.gamma_mean.size();
    o.inference = o.glogvar + p.gamma_logvar.size();
    o.total = o.inference + p.inference.params().size();
    return o;
}

// Entity features of a cluster as rows, plus their squares.
struct FeatureRows {
    MatrixXd f;
    MatrixXd f2;
};

FeatureRows feature_rows(const NewsCluster& c, int F) {
    FeatureRows out{MatrixXd(static_cast<Eigen::Index>(c.entities.size()), F), {}};
    for (std::size_t i = 0; i < c.entities.size(); ++i) out.f.row(static_cast<Eigen::Index>(i)) = c.entities[i].features.transpose();
    out.f2 = out.f.array().square();
    return out;
}

// log N(f_e | beta_s, diag exp(beta_logvar_s)) for every entity (rows) and slot (columns).
MatrixXd feature_loglik(const OdeeParams& p, const FeatureRows& rows, const MatrixXd& inv_var) {
    const MatrixXd scaled_mean = p.beta_mean.cwiseProduct(inv_var);
    const VectorXd per_slot = p.beta_logvar.rowwise().sum() + scaled_mean.cwiseProduct(p.beta_mean).rowwise().sum();
    MatrixXd quad = rows.f2 * inv_var.transpose() - 2.0 * rows.f * scaled_mean.transpose();
    quad.rowwise() += per_slot.transpose();
    return -0.5 * (quad.array() + kLog2Pi * static_cast<double>(p.feature_dim)).matrix();
}

// ELBO of one cluster at t = mu + sigma * eps; accumulates the gradient into
// `grad` (laid out as pack()) when it is non-null.
double cluster_elbo(const OdeeParams& p, const MatrixXd& log_lam, const NewsCluster& c, const VectorXd& eps,
                    VectorXd* grad) {
    const Offsets o = offsets(p);
    const int T = p.type_dim;
    const int K = p.num_slots;
    const auto E = static_cast<Eigen::Index>(c.entities.size());
    const VectorXd xbar = mean_features(p, c);
    const auto inf_cache = p.inference.forward(xbar);
    const VectorXd mu = inf_cache.output.col(0).head(T);
    const VectorXd logvar = inf_cache.output.col(0).tail(T);
    const VectorXd sigma = (0.5 * logvar.array()).exp();
    const VectorXd t = mu + sigma.cwiseProduct(eps);
    const auto th_cache = p.theta.forward(t);
    const VectorXd log_pi = log_softmax(th_cache.output.col(0));
    const VectorXd pi = log_pi.array().exp();

    const double kl = 0.5 * (mu.squaredNorm() + logvar.array().exp().sum() - static_cast<double>(T) - logvar.sum());
    double value = -kl;
    if (E == 0) {
        if (grad) {
            VectorXd g_out(2 * T);
            g_out.head(T) = -mu;
            g_out.tail(T) = -0.5 * (logvar.array().exp() - 1.0);
            grad->segment(o.inference, p.inference.params().size()) += p.inference.backward(inf_cache, g_out).params;
        }
        return value;
    }

    const MatrixXd inv_var = (-p.beta_logvar.array()).exp();
    const FeatureRows rows = feature_rows(c, p.feature_dim);
    MatrixXd ell = feature_loglik(p, rows, inv_var);  // E x K
    std::vector<std::size_t> heads(c.entities.size());
    for (Eigen::Index i = 0; i < E; ++i) {
        const auto& e = c.entities[static_cast<std::size_t>(i)];
        heads[static_cast<std::size_t>(i)] = p.head_index(e.head);
        for (int s = 0; s < K; ++s) {
            ell(i, s) += log_pi[s] + log_lam(s, static_cast<Eigen::Index>(heads[static_cast<std::size_t>(i)])) +
                         log_normal(e.redundancy, p.gamma_mean[s], p.gamma_logvar[s]);
        }
    }
    MatrixXd rho(E, K);
    for (Eigen::Index i = 0; i < E; ++i) {
        const double m = ell.row(i).maxCoeff();
        const double lse = m + std::log((ell.row(i).array() - m).exp().sum());
        value += lse;
        rho.row(i) = (ell.row(i).array() - lse).exp();
    }
    if (!grad) return value;

    const VectorXd resp_sum = rho.colwise().sum().transpose();
    const VectorXd g_logits = resp_sum - static_cast<double>(E) * pi;
    MatrixXd g_lambda = MatrixXd::Zero(K, log_lam.cols());
    for (Eigen::Index i = 0; i < E; ++i) {
        g_lambda.col(static_cast<Eigen::Index>(heads[static_cast<std::size_t>(i)])) += rho.row(i).transpose();
    }
    // Multinomial logits: counts minus expected counts.
    g_lambda -= log_lam.array().exp().matrix().cwiseProduct(resp_sum.replicate(1, log_lam.cols()));

    // sum_e rho_es (f_e - m_s) and sum_e rho_es (f_e - m_s)^2, per slot row
    const MatrixXd rf = rho.transpose() * rows.f;
    const MatrixXd rf2 = rho.transpose() * rows.f2;
    const MatrixXd first = rf - p.beta_mean.cwiseProduct(resp_sum.replicate(1, p.feature_dim));
    const MatrixXd second = rf2 - 2.0 * rf.cwiseProduct(p.beta_mean) +
                            p.beta_mean.cwiseAbs2().cwiseProduct(resp_sum.replicate(1, p.feature_dim));
    const MatrixXd g_bmean = first.cwiseProduct(inv_var);
    const MatrixXd g_blogvar =
        0.5 * (second.cwiseProduct(inv_var) - resp_sum.replicate(1, p.feature_dim));

    VectorXd g_gmean = VectorXd::Zero(K);
    VectorXd g_glogvar = VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < E; ++i) {
        const double r = c.entities[static_cast<std::size_t>(i)].redundancy;
        for (int s = 0; s < K; ++s) {
            const double d = r - p.gamma_mean[s];
            const double iv = std::exp(-p.gamma_logvar[s]);
            g_gmean[s] += rho(i, s) * d * iv;
            g_glogvar[s] += rho(i, s) * 0.5 * (d * d * iv - 1.0);
        }
    }

    const auto th_grad = p.theta.backward(th_cache, g_logits);
    const VectorXd g_t = th_grad.input.col(0);
    VectorXd g_out(2 * T);
    g_out.head(T) = g_t - mu;
    g_out.tail(T) = (0.5 * g_t.array() * sigma.array() * eps.array() - 0.5 * (logvar.array().exp() - 1.0)).matrix();
    const auto inf_grad = p.inference.backward(inf_cache, g_out);

    VectorXd& g = *grad;
    g.segment(o.theta, th_grad.params.size()) += th_grad.params;
    g.segment(o.lambda, g_lambda.size()) += Eigen::Map<const VectorXd>(g_lambda.data(), g_lambda.size());
    g.segment(o.bmean, g_bmean.size()) += Eigen::Map<const VectorXd>(g_bmean.data(), g_bmean.size());
    g.segment(o.blogvar, g_blogvar.size()) += Eigen::Map<const VectorXd>(g_blogvar.data(), g_blogvar.size());
    g.segment(o.gmean, K) += g_gmean;
    g.segment(o.glogvar, K) += g_glogvar;
    g.segment(o.inference, inf_grad.params.size()) += inf_grad.params;
    return value;
}

void clamp_logvars(OdeeParams& p) {
    p.beta_logvar = p.beta_logvar.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
    p.gamma_logvar = p.gamma_logvar.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
}

std::vector<VectorXd> draw_noise(std::size_t n, int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::vector<VectorXd> out(n, VectorXd(dim));
    for (auto& v : out) {
        for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    }
    return out;
}

// k-means++ seeding followed by Lloyd iterations over the rows of x; returns
// the inertia.
double kmeans(MatrixXd& centers, const MatrixXd& x, const VectorXd& x_norm2, std::mt19937_64& rng, int iterations) {
    const auto K = centers.rows();
    const auto N = x.rows();
    VectorXd dist = VectorXd::Constant(N, std::numeric_limits<double>::infinity());
    std::uniform_int_distribution<Eigen::Index> first(0, N - 1);
    Eigen::Index pick = first(rng);
    for (Eigen::Index s = 0; s < K; ++s) {
        centers.row(s) = x.row(pick);
        dist = dist.cwiseMin(((x_norm2 - 2.0 * x * centers.row(s).transpose()).array() + centers.row(s).squaredNorm())
                                 .max(0.0)
                                 .matrix());
        const double total = dist.sum();
        if (s + 1 == K) break;
        if (total <= 0.0) {
            pick = first(rng);
            continue;
        }
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        pick = N - 1;
        for (Eigen::Index i = 0; i < N; ++i) {
            target -= dist[i];
            if (target <= 0.0) {
                pick = i;
                break;
            }
        }
    }
    double inertia = 0.0;
    for (int it = 0; it <= iterations; ++it) {
        MatrixXd d2 = -2.0 * x * centers.transpose();
        d2.colwise() += x_norm2;
        d2.rowwise() += centers.rowwise().squaredNorm().transpose();
        MatrixXd sums = MatrixXd::Zero(K, centers.cols());
        Eigen::VectorXi counts = Eigen::VectorXi::Zero(K);
        inertia = 0.0;
        for (Eigen::Index i = 0; i < N; ++i) {
            Eigen::Index best = 0;
            inertia += std::max(0.0, d2.row(i).minCoeff(&best));
            sums.row(best) += x.row(i);
            ++counts[best];
        }
        if (it == iterations) break;
        for (Eigen::Index s = 0; s < K; ++s) {
            if (counts[s] > 0) centers.row(s) = sums.row(s) / counts[s];
        }
    }
    return inertia;
}

void seed_slot_means(OdeeParams& p, const std::vector<const Entity*>& entities, std::mt19937_64& rng) {
    constexpr int kRestarts = 5;
    constexpr int kIterations = 10;
    constexpr std::size_t kMaxPoints = 4000;
    std::vector<const Entity*> points = entities;
    if (points.size() > kMaxPoints) {
        std::shuffle(points.begin(), points.end(), rng);
        points.resize(kMaxPoints);
    }
    MatrixXd x(static_cast<Eigen::Index>(points.size()), p.feature_dim);
    for (std::size_t i = 0; i < points.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = points[i]->features.transpose();
    const VectorXd x_norm2 = x.rowwise().squaredNorm();
    double best = std::numeric_limits<double>::infinity();
    MatrixXd centers(p.num_slots, p.feature_dim);
    for (int r = 0; r < kRestarts; ++r) {
        const double inertia = kmeans(centers, x, x_norm2, rng, kIterations);
        if (inertia < best) {
            best = inertia;
            p.beta_mean = centers;
        }
    }
}

}  // namespace

OdeeParams::OdeeParams(int num_slots_, int type_dim_, int feature_dim_, const OdeeConfig& config)
    : num_slots(num_slots_),
      type_dim(type_dim_),
      feature_dim(feature_dim_),
      theta({type_dim_, config.prior_hidden, num_slots_}, config.seed * 2 + 1),
      lambda_logits(MatrixXd::Zero(num_slots_, 1)),
      beta_mean(MatrixXd::Zero(num_slots_, feature_dim_)),
      beta_logvar(MatrixXd::Zero(num_slots_, feature_dim_)),
      gamma_mean(VectorXd::Zero(num_slots_)),
      gamma_logvar(VectorXd::Zero(num_slots_)),
      inference({feature_dim_, config.inference_hidden, 2 * type_dim_}, config.seed * 2 + 2),
      seed(config.seed) {
    if (num_slots_ < 1 || type_dim_ < 1 || feature_dim_ < 1) {
        throw Error(ErrorKind::Range, "odee: slots, type and feature dimensions must be positive");
    }
}

std::size_t OdeeParams::head_index(const std::string& head) const {
    const auto it = vocab_index.find(head);
    return it == vocab_index.end() ? vocab.size() : it->second;
}

MatrixXd OdeeParams::log_lambda() const {
    MatrixXd out(lambda_logits.rows(), lambda_logits.cols());
    for (Eigen::Index s = 0; s < out.rows(); ++s) out.row(s) = log_softmax(lambda_logits.row(s).transpose()).transpose();
    return out;
}

void OdeeParams::set_vocab(std::vector<std::string> words) {
    vocab = std::move(words);
    vocab_index.clear();
    for (std::size_t i = 0; i < vocab.size(); ++i) vocab_index.emplace(vocab[i], i);
    lambda_logits = MatrixXd::Zero(num_slots, static_cast<Eigen::Index>(vocab.size() + 1));
}

std::vector<Entity> extract_entities(std::span<const text::Document> items, const text::EmbeddingTable& embeddings,
                                     int window) {
    std::vector<std::set<std::string>> heads_per_item(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (const auto& sent : items[i].sentences) {
            for (const auto& tok : sent.tokens) {
                if (is_nominal(tok)) heads_per_item[i].insert(head_word(tok));
            }
        }
    }
    const int D = embeddings.dim();
    std::vector<Entity> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = 0; j < items[i].sentences.size(); ++j) {
            const auto& toks = items[i].sentences[j].tokens;
            for (std::size_t k = 0; k < toks.size(); ++k) {
                if (!is_nominal(toks[k])) continue;
                Entity e;
                e.head = head_word(toks[k]);
                e.item = i;
                e.sentence = j;
                e.token = toks[k].id;
                e.features = VectorXd::Zero(2 * D);
                e.features.head(D) = embeddings.lookup(toks[k].form);
                const std::size_t lo = k >= static_cast<std::size_t>(window) ? k - static_cast<std::size_t>(window) : 0;
                const std::size_t hi = std::min(toks.size(), k + static_cast<std::size_t>(window) + 1);
                int n = 0;
                for (std::size_t m = lo; m < hi; ++m) {
                    if (m == k) continue;
                    e.features.tail(D) += embeddings.lookup(toks[m].form);
                    ++n;
                }
                if (n > 0) e.features.tail(D) /= static_cast<double>(n);
                const auto mentions = std::count_if(heads_per_item.begin(), heads_per_item.end(),
                                                    [&](const auto& hs) { return hs.contains(e.head); });
                e.redundancy = static_cast<double>(mentions) / static_cast<double>(items.size());
                out.push_back(std::move(e));
            }
        }
    }
    return out;
}

NewsCluster make_cluster(Date date, std::vector<text::Document> items, const text::EmbeddingTable& embeddings) {
    NewsCluster c;
    c.date = date;
    c.entities = extract_entities(items, embeddings);
    c.items = std::move(items);
    return c;
}

VectorXd pack(const OdeeParams& p) {
    const Offsets o = offsets(p);
    VectorXd flat(o.total);
    flat.segment(o.theta, p.theta.params().size()) = p.theta.params();
    flat.segment(o.lambda, p.lambda_logits.size()) = Eigen::Map<const VectorXd>(p.lambda_logits.data(), p.lambda_logits.size());
    flat.segment(o.bmean, p.beta_mean.size()) = Eigen::Map<const VectorXd>(p.beta_mean.data(), p.beta_mean.size());
    flat.segment(o.blogvar, p.beta_logvar.size()) = Eigen::Map<const VectorXd>(p.beta_logvar.data(), p.beta_logvar.size());
    flat.segment(o.gmean, p.num_slots) = p.gamma_mean;
    flat.segment(o.glogvar, p.num_slots) = p.gamma_logvar;
    flat.segment(o.inference, p.inference.params().size()) = p.inference.params();
    return flat;
}

void unpack(const VectorXd& flat, OdeeParams& p) {
    const Offsets o = offsets(p);
    if (flat.size() != o.total) throw Error(ErrorKind::Range, "odee: flat parameter vector has the wrong size");
    p.theta.params_mut() = flat.segment(o.theta, p.theta.params().size());
    Eigen::Map<VectorXd>(p.lambda_logits.data(), p.lambda_logits.size()) = flat.segment(o.lambda, p.lambda_logits.size());
    Eigen::Map<VectorXd>(p.beta_mean.data(), p.beta_mean.size()) = flat.segment(o.bmean, p.beta_mean.size());
    Eigen::Map<VectorXd>(p.beta_logvar.data(), p.beta_logvar.size()) = flat.segment(o.blogvar, p.beta_logvar.size());
    p.gamma_mean = flat.segment(o.gmean, p.num_slots);
    p.gamma_logvar = flat.segment(o.glogvar, p.num_slots);
    p.inference.params_mut() = flat.segment(o.inference, p.inference.params().size());
}

ElboGradient elbo_gradient(const OdeeParams& params, std::span<const NewsCluster> clusters,
                           std::span<const VectorXd> noise) {
    if (noise.size() != clusters.size()) throw Error(ErrorKind::Range, "odee: one noise vector per cluster required");
    const MatrixXd log_lam = params.log_lambda();
    const auto n = static_cast<std::int64_t>(clusters.size());
    const Eigen::Index total = offsets(params).total;
    std::vector<VectorXd> grads(clusters.size());
    std::vector<double> values(clusters.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        grads[k] = VectorXd::Zero(total);
        values[k] = cluster_elbo(params, log_lam, clusters[k], noise[k], &grads[k]);
    }
    ElboGradient out{0.0, VectorXd::Zero(total), 0};
    for (std::size_t k = 0; k < clusters.size(); ++k) {
        out.elbo += values[k];
        out.grad += grads[k];
        out.entities += clusters[k].entities.size();
    }
    return out;
}

ElboGradient elbo_gradient_serial(const OdeeParams& params, std::span<const NewsCluster> clusters,
                                  std::span<const VectorXd> noise) {
    if (noise.size() != clusters.size()) throw Error(ErrorKind::Range, "odee: one noise vector per cluster required");
    const MatrixXd log_lam = params.log_lambda();
    ElboGradient out{0.0, VectorXd::Zero(offsets(params).total), 0};
    for (std::size_t k = 0; k < clusters.size(); ++k) {
        VectorXd g = VectorXd::Zero(out.grad.size());
        out.elbo += cluster_elbo(params, log_lam, clusters[k], noise[k], &g);
        out.grad += g;
        out.entities += clusters[k].entities.size();
    }
    return out;
}

double elbo(const OdeeParams& params, std::span<const NewsCluster> corpus, std::uint64_t noise_seed) {
    std::mt19937_64 rng(noise_seed);
    const auto noise = draw_noise(corpus.size(), params.type_dim, rng);
    const MatrixXd log_lam = params.log_lambda();
    double total = 0.0;
    std::size_t entities = 0;
    for (std::size_t k = 0; k < corpus.size(); ++k) {
        check_features(params, corpus[k]);
        total += cluster_elbo(params, log_lam, corpus[k], noise[k], nullptr);
        entities += corpus[k].entities.size();
    }
    return total / static_cast<double>(std::max<std::size_t>(entities, 1));
}

OdeeParams train(std::span<const NewsCluster> corpus, const OdeeConfig& config) {
    if (corpus.empty()) throw Error(ErrorKind::InsufficientData, "odee: empty corpus");
    if (config.num_slots < 1) throw Error(ErrorKind::Range, "odee: need at least one slot");
    if (config.epochs < 0 || config.batch_size < 1) throw Error(ErrorKind::Range, "odee: bad epochs or batch size");
    std::vector<const Entity*> entities;
    std::map<std::string, std::size_t> counts;
    for (const auto& c : corpus) {
        for (const auto& e : c.entities) {
            entities.push_back(&e);
            ++counts[e.head];
        }
    }
    if (entities.size() < static_cast<std::size_t>(config.num_slots)) {
        throw Error(ErrorKind::InsufficientData, "odee: " + std::to_string(config.num_slots) + " slots but only " +
                                                     std::to_string(entities.size()) + " entities");
    }
    const int F = static_cast<int>(entities.front()->features.size());
    OdeeParams p(config.num_slots, config.type_dim, F, config);
    for (const auto& c : corpus) check_features(p, c);

    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > config.max_vocab) ranked.resize(config.max_vocab);
    std::vector<std::string> words;
    for (auto& [w, n] : ranked) words.push_back(w);
    std::sort(words.begin(), words.end());
    p.set_vocab(std::move(words));

    std::mt19937_64 rng(config.seed);
    seed_slot_means(p, entities, rng);
    {
        VectorXd mean = VectorXd::Zero(F);
        for (const auto* e : entities) mean += e->features;
        mean /= static_cast<double>(entities.size());
        VectorXd var = VectorXd::Zero(F);
        for (const auto* e : entities) var += (e->features - mean).cwiseAbs2();
        var = var / static_cast<double>(entities.size()) + VectorXd::Constant(F, 1e-4);
        p.beta_logvar = var.array().log().matrix().transpose().replicate(p.num_slots, 1);
        double rm = 0.0, rv = 0.0;
        for (const auto* e : entities) rm += e->redundancy;
        rm /= static_cast<double>(entities.size());
        for (const auto* e : entities) rv += (e->redundancy - rm) * (e->redundancy - rm);
        rv = rv / static_cast<double>(entities.size()) + 1e-3;
        p.gamma_mean.setConstant(rm);
        p.gamma_logvar.setConstant(std::log(rv));
        clamp_logvars(p);
    }

    VectorXd flat = pack(p);
    nn::AdamState adam(static_cast<std::size_t>(flat.size()), config.lr, config.beta1, config.beta2);
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::uint64_t eval_seed = config.seed ^ 0x5eedULL;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
            std::vector<NewsCluster> batch;
            batch.reserve(hi - lo);
            for (std::size_t k = lo; k < hi; ++k) batch.push_back(corpus[order[k]]);
            const auto noise = draw_noise(batch.size(), p.type_dim, rng);
            const auto g = elbo_gradient(p, batch, noise);
            if (!std::isfinite(g.elbo)) {
                throw Error(ErrorKind::NonFinite, "odee: non-finite ELBO in epoch " + std::to_string(epoch + 1));
            }
            const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(g.entities, 1));
            nn::adam_step(adam, flat, -scale * g.grad);
            unpack(flat, p);
            clamp_logvars(p);
            flat = pack(p);
        }
        const double value = elbo(p, corpus, eval_seed);
        if (!std::isfinite(value)) {
            throw Error(ErrorKind::NonFinite, "odee: non-finite ELBO after epoch " + std::to_string(epoch + 1));
        }
        p.elbo_history.push_back(value);
    }
    return p;
}

VectorXd infer_type(const OdeeParams& params, const NewsCluster& cluster) {
    check_features(params, cluster);
    return params.inference.forward_one(mean_features(params, cluster)).head(params.type_dim);
}

VectorXd slot_log_prior(const OdeeParams& params, const VectorXd& t) {
    if (t.size() != params.type_dim) throw Error(ErrorKind::Range, "odee: type vector has the wrong dimension");
    return log_softmax(params.theta.forward_one(t));
}

int argmax_slot(std::span<const double> log_prior, std::span<const double> log_head, std::span<const double> log_feature) {
    if (log_prior.empty() || log_prior.size() != log_head.size() || log_prior.size() != log_feature.size()) {
        throw Error(ErrorKind::Range, "argmax_slot: factor vectors must be nonempty and equally long");
    }
    int best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < log_prior.size(); ++s) {
        const double v = log_prior[s] + log_head[s] + log_feature[s];
        if (v > best_value) {
            best_value = v;
            best = static_cast<int>(s);
        }
    }
    return best;
}

namespace {

// Unnormalized three-factor log posterior, slots x entities.
MatrixXd slot_log_scores(const OdeeParams& params, const NewsCluster& cluster, const VectorXd& t) {
    check_features(params, cluster);
    const VectorXd log_prior = slot_log_prior(params, t);
    const MatrixXd log_lam = params.log_lambda();
    MatrixXd out(params.num_slots, static_cast<Eigen::Index>(cluster.entities.size()));
    for (std::size_t e = 0; e < cluster.entities.size(); ++e) {
        const auto& ent = cluster.entities[e];
        out.col(static_cast<Eigen::Index>(e)) = log_prior +
                                                 log_lam.col(static_cast<Eigen::Index>(params.head_index(ent.head))) +
                                                 log_normal_rows(ent.features, params.beta_mean, params.beta_logvar);
    }
    return out;
}

}  // namespace

std::vector<int> assign_slots(const OdeeParams& params, const NewsCluster& cluster, const VectorXd& t) {
    check_features(params, cluster);
    const VectorXd log_prior = slot_log_prior(params, t);
    const MatrixXd log_lam = params.log_lambda();
    std::vector<int> out;
    out.reserve(cluster.entities.size());
    for (const auto& ent : cluster.entities) {
        const VectorXd head = log_lam.col(static_cast<Eigen::Index>(params.head_index(ent.head)));
        const VectorXd feat = log_normal_rows(ent.features, params.beta_mean, params.beta_logvar);
        out.push_back(argmax_slot({log_prior.data(), static_cast<std::size_t>(log_prior.size())},
                                  {head.data(), static_cast<std::size_t>(head.size())},
                                  {feat.data(), static_cast<std::size_t>(feat.size())}));
    }
    return out;
}

MatrixXd slot_posteriors(const OdeeParams& params, const NewsCluster& cluster, const VectorXd& t) {
    MatrixXd scores = slot_log_scores(params, cluster, t);
    for (Eigen::Index e = 0; e < scores.cols(); ++e) {
        const double m = scores.col(e).maxCoeff();
        scores.col(e) = (scores.col(e).array() - m).exp();
        scores.col(e) /= scores.col(e).sum();
    }
    return scores;
}

namespace {

nlohmann::json matrix_json(const MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw Error(ErrorKind::Parse, std::string("odee document: bad shape for ") + what);
    }
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row = j[static_cast<std::size_t>(r)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw Error(ErrorKind::Parse, std::string("odee document: bad shape for ") + what);
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

std::vector<double> vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json to_json(const OdeeParams& p) {
    return {{"format", "agesl.odee"},
            {"version", 1},
            {"seed", p.seed},
            {"num_slots", p.num_slots},
            {"type_dim", p.type_dim},
            {"feature_dim", p.feature_dim},
            {"vocab", p.vocab},
            {"theta", nn::to_json(p.theta)},
            {"inference", nn::to_json(p.inference)},
            {"lambda_logits", matrix_json(p.lambda_logits)},
            {"beta_mean", matrix_json(p.beta_mean)},
            {"beta_logvar", matrix_json(p.beta_logvar)},
            {"gamma_mean", vec(p.gamma_mean)},
            {"gamma_logvar", vec(p.gamma_logvar)},
            {"elbo_history", p.elbo_history}};
}

OdeeParams odee_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "agesl.odee" || doc.value("version", 0) != 1) {
        throw Error(ErrorKind::Parse, "odee document: unsupported format or version");
    }
    try {
        auto theta = nn::mlp_from_json(doc.at("theta"));
        auto inference = nn::mlp_from_json(doc.at("inference"));
        OdeeConfig cfg;
        cfg.seed = doc.at("seed").get<std::uint64_t>();
        cfg.prior_hidden = theta.dims()[1];
        cfg.inference_hidden = inference.dims()[1];
        OdeeParams p(doc.at("num_slots").get<int>(), doc.at("type_dim").get<int>(), doc.at("feature_dim").get<int>(), cfg);
        p.set_vocab(doc.at("vocab").get<std::vector<std::string>>());
        if (theta.dims() != p.theta.dims() || inference.dims() != p.inference.dims()) {
            throw Error(ErrorKind::Parse, "odee document: network shapes disagree with dimensions");
        }
        p.theta = std::move(theta);
        p.inference = std::move(inference);
        const auto K = static_cast<Eigen::Index>(p.num_slots);
        p.lambda_logits = matrix_from_json(doc.at("lambda_logits"), K, static_cast<Eigen::Index>(p.vocab.size() + 1), "lambda");
        p.beta_mean = matrix_from_json(doc.at("beta_mean"), K, p.feature_dim, "beta_mean");
        p.beta_logvar = matrix_from_json(doc.at("beta_logvar"), K, p.feature_dim, "beta_logvar");
        const auto gm = doc.at("gamma_mean").get<std::vector<double>>();
        const auto gv = doc.at("gamma_logvar").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(gm.size()) != K || static_cast<Eigen::Index>(gv.size()) != K) {
            throw Error(ErrorKind::Parse, "odee document: bad gamma shape");
        }
        p.gamma_mean = Eigen::Map<const VectorXd>(gm.data(), K);
        p.gamma_logvar = Eigen::Map<const VectorXd>(gv.data(), K);
        p.elbo_history = doc.value("elbo_history", std::vector<double>{});
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("odee document: ") + e.what());
    }
}

SupersenseTable SupersenseTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open supersense table " + path.string());
    SupersenseTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": expected word<TAB>supersense");
        }
        table.add(text::ascii_lower(line.substr(0, tab)), line.substr(tab + 1));
    }
    return table;
}

const SupersenseTable& SupersenseTable::bundled() {
    static const SupersenseTable kTable = load(std::filesystem::path(AGESL_DATA_DIR) / "noun_supersenses.tsv");
    return kTable;
}

std::string SupersenseTable::lookup(std::string_view word) const {
    const auto it = table_.find(text::ascii_lower(word));
    return it == table_.end() ? std::string{} : it->second;
}

namespace {

const std::set<std::string> kTriggerRelations = {"advcl", "ccomp", "xcomp", "rcmod", "acl:relcl"};
const std::set<std::string> kEventSupersenses = {"noun.act", "noun.phenomenon", "noun.event", "noun.attribute"};
const std::set<std::string> kModifierRelations = {"compound", "amod", "flat", "nummod"};

std::string base_relation(const std::string& deprel) { return deprel.substr(0, deprel.find(':')); }

std::string supersense_of(const text::Token& tok, const SupersenseTable& table) {
    if (auto tag = tok.misc_value("SST"); !tag.empty()) return tag;
    if (!tok.lemma.empty() && tok.lemma != "_") {
        if (auto tag = table.lookup(tok.lemma); !tag.empty()) return tag;
    }
    return table.lookup(tok.form);
}

bool is_trigger(const text::Token& tok, const SupersenseTable& table) {
    if (tok.upos == "VERB") return true;
    if (kTriggerRelations.contains(tok.deprel) || kTriggerRelations.contains(base_relation(tok.deprel))) return true;
    return tok.upos == "NOUN" && kEventSupersenses.contains(supersense_of(tok, table));
}

Event padding_event() {
    Event e;
    e.trigger = kOovToken;
    e.tokens = {kOovToken};
    e.padding = true;
    return e;
}

}  // namespace

EventRecord empty_record(int type_dim, int arg_dim) {
    EventRecord r;
    r.type_vec = VectorXd::Zero(type_dim);
    r.arg_embedding = VectorXd::Zero(arg_dim);
    r.events.assign(kMaxEvents, padding_event());
    return r;
}

EventRecord assemble_events(const NewsCluster& cluster, const MatrixXd& posteriors, const VectorXd& type_vec,
                            const text::EmbeddingTable& embeddings, const SupersenseTable& supersenses) {
    std::map<std::tuple<std::size_t, std::size_t, int>, std::size_t> entity_at;
    for (std::size_t e = 0; e < cluster.entities.size(); ++e) {
        const auto& ent = cluster.entities[e];
        entity_at.emplace(std::make_tuple(ent.item, ent.sentence, ent.token), e);
    }
    const bool have_posteriors = posteriors.size() > 0 && posteriors.cols() == static_cast<Eigen::Index>(cluster.entities.size());

    struct Candidate {
        Event event;
        std::vector<std::string> words;  // argument words for the embedding
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < cluster.items.size(); ++i) {
        const auto& doc = cluster.items[i];
        for (std::size_t j = 0; j < doc.sentences.size(); ++j) {
            const auto& sent = doc.sentences[j];
            for (const auto& tok : sent.tokens) {
                if (!tok.annotated()) {
                    throw Error(ErrorKind::MissingAnnotation,
                                "document '" + doc.id + "' sentence " + std::to_string(j + 1) + " token " +
                                    std::to_string(tok.id) + " lacks UPOS/head/deprel; annotate the news with the preproc tool first");
                }
            }
            std::map<int, std::vector<const text::Token*>> children;
            for (const auto& tok : sent.tokens) children[tok.head].push_back(&tok);
            for (const auto& tok : sent.tokens) {
                if (!is_trigger(tok, supersenses)) continue;
                Candidate cand;
                cand.event.trigger = tok.form;
                cand.event.tokens.push_back(tok.form);
                for (const auto* arg : children[tok.id]) {
                    if (!is_nominal(*arg)) continue;
                    std::vector<const text::Token*> phrase{arg};
                    for (const auto* mod : children[arg->id]) {
                        if (kModifierRelations.contains(base_relation(mod->deprel))) phrase.push_back(mod);
                    }
                    std::sort(phrase.begin(), phrase.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
                    std::string text;
                    for (const auto* w : phrase) {
                        if (!text.empty()) text += ' ';
                        text += w->form;
                        cand.event.tokens.push_back(w->form);
                        cand.words.push_back(w->form);
                    }
                    cand.event.arguments.push_back(std::move(text));
                    if (have_posteriors) {
                        if (const auto it = entity_at.find({i, j, arg->id}); it != entity_at.end()) {
                            cand.event.score += posteriors.col(static_cast<Eigen::Index>(it->second)).maxCoeff();
                        }
                    }
                }
                candidates.push_back(std::move(cand));
            }
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.event.score > b.event.score; });
    if (candidates.size() > kMaxEvents) candidates.resize(kMaxEvents);

    EventRecord record;
    record.type_vec = type_vec;
    record.num_extracted = candidates.size();
    record.arg_embedding = VectorXd::Zero(embeddings.dim());
    std::size_t n_words = 0;
    for (auto& cand : candidates) {
        if (cand.event.tokens.size() > kMaxEventTokens) cand.event.tokens.resize(kMaxEventTokens);
        for (const auto& w : cand.words) {
            record.arg_embedding += embeddings.lookup(w);
            ++n_words;
        }
        record.events.push_back(std::move(cand.event));
    }
    if (n_words > 0) record.arg_embedding /= static_cast<double>(n_words);
    while (record.events.size() < kMaxEvents) record.events.push_back(padding_event());
    return record;
}

}  // namespace agesl::events
