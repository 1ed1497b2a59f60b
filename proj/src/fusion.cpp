#include "agesl/fusion.hpp"
#include "agesl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace agesl::pipeline {

namespace {

using Eigen::VectorXd;
using nn::Mat;

void clip(VectorXd& g, double max_norm) {
    if (max_norm <= 0.0) return;
    const double norm = g.norm();
    if (norm > max_norm) g *= max_norm / norm;
}

double rmse(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return a.empty() ? 0.0 : std::sqrt(s / static_cast<double>(a.size()));
}

void check_finite(double loss, const char* what, int epoch) {
    if (!std::isfinite(loss) || loss > 1e8) {
        throw Error(ErrorKind::NonFinite, std::string(what) + ": loss diverged (" + std::to_string(loss) + ") in epoch " +
                                              std::to_string(epoch));
    }
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, int batch_size, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t lo = 0; lo < n; lo += static_cast<std::size_t>(batch_size)) {
        const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(batch_size));
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    return out;
}

std::vector<Mat> stack_selected(const SequenceSet& set, const std::vector<std::size_t>& idx) {
    std::vector<Mat> seqs;
    seqs.reserve(idx.size());
    for (std::size_t k : idx) seqs.push_back(set.sequences[k]);
    return nn::stack_steps(seqs);
}

}  // namespace

int input_dim(InputKind kind, int type_dim, int arg_dim) {
    switch (kind) {
        case InputKind::Lags:
            return static_cast<int>(kNumLags);
        case InputKind::LagsSentiment:
            return static_cast<int>(kNumLags) + 4;
        case InputKind::Full:
            return type_dim + arg_dim + static_cast<int>(kNumLags);
    }
    return 0;
}

VectorXd encode_row(const FeatureRow& row, InputKind kind) {
    VectorXd lags(static_cast<Eigen::Index>(kNumLags));
    for (std::size_t k = 0; k < kNumLags; ++k) lags[static_cast<Eigen::Index>(k)] = row.price_lags[k] - row.last_price();
    switch (kind) {
        case InputKind::Lags:
            return lags;
        case InputKind::LagsSentiment: {
            VectorXd out(lags.size() + 4);
            out << lags, row.sentiment.neg, row.sentiment.neu, row.sentiment.pos, row.sentiment.compound;
            return out;
        }
        case InputKind::Full: {
            VectorXd out(row.type_vec.size() + row.arg_embedding.size() + lags.size());
            out << row.type_vec, row.arg_embedding, lags;
            return out;
        }
    }
    return lags;
}

Standardizer Standardizer::fit(const std::vector<VectorXd>& samples) {
    if (samples.empty()) throw Error(ErrorKind::InsufficientData, "standardizer: no samples");
    Standardizer s;
    const auto d = samples.front().size();
    s.mean = VectorXd::Zero(d);
    for (const auto& x : samples) s.mean += x;
    s.mean /= static_cast<double>(samples.size());
    VectorXd var = VectorXd::Zero(d);
    for (const auto& x : samples) var += (x - s.mean).cwiseAbs2();
    var /= static_cast<double>(samples.size());
    s.scale = var.cwiseSqrt();
    for (Eigen::Index i = 0; i < d; ++i) {
        if (s.scale[i] < 1e-12) s.scale[i] = 1.0;
    }
    return s;
}

VectorXd Standardizer::apply(const VectorXd& x) const { return (x - mean).cwiseQuotient(scale); }

TargetScaler TargetScaler::fit(std::span<const FeatureRow> rows) {
    if (rows.size() < 2) throw Error(ErrorKind::InsufficientData, "target scaler: need at least two rows");
    double m = 0.0;
    for (const auto& r : rows) m += r.target - r.last_price();
    m /= static_cast<double>(rows.size());
    double v = 0.0;
    for (const auto& r : rows) v += (r.target - r.last_price() - m) * (r.target - r.last_price() - m);
    v /= static_cast<double>(rows.size());
    if (v <= 0.0) throw Error(ErrorKind::Degenerate, "target scaler: price changes have no variance");
    return {m, std::sqrt(v)};
}

SequenceSet make_sequences(const std::vector<VectorXd>& encoded, const std::vector<double>& targets, std::size_t begin,
                           std::size_t end, int window) {
    if (window < 1) throw Error(ErrorKind::Range, "make_sequences: window must be positive");
    if (encoded.size() != targets.size() || end > encoded.size()) {
        throw Error(ErrorKind::Range, "make_sequences: inputs and targets misaligned");
    }
    const auto w = static_cast<std::size_t>(window);
    SequenceSet set;
    for (std::size_t j = std::max(begin, w - 1); j < end; ++j) {
        Mat seq(encoded[j].size(), window);
        for (std::size_t k = 0; k < w; ++k) seq.col(static_cast<Eigen::Index>(k)) = encoded[j + 1 - w + k];
        set.sequences.push_back(std::move(seq));
        set.targets.push_back(targets[j]);
        set.rows.push_back(j);
    }
    return set;
}

std::vector<double> predict_lstm(const nn::LstmRegressor& model, const SequenceSet& set, int batch) {
    std::vector<double> out(set.sequences.size());
    const std::size_t b = static_cast<std::size_t>(std::max(batch, 1));
    for (std::size_t lo = 0; lo < set.sequences.size(); lo += b) {
        const std::size_t hi = std::min(set.sequences.size(), lo + b);
        const auto steps = nn::stack_steps(std::span(set.sequences).subspan(lo, hi - lo));
        const auto cache = model.forward(steps);
        for (std::size_t k = lo; k < hi; ++k) out[k] = cache.prediction[static_cast<Eigen::Index>(k - lo)];
    }
    return out;
}

TrainHistory train_lstm(nn::LstmRegressor& model, const SequenceSet& train, const SequenceSet& val,
                        const TrainOptions& options) {
    if (train.sequences.empty()) throw Error(ErrorKind::InsufficientData, "train_lstm: no training sequences");
    std::mt19937_64 rng(options.seed);
    nn::AdamState adam(model.num_params(), options.lr);
    TrainHistory h;
    const auto val_rmse = [&] { return val.sequences.empty() ? 0.0 : rmse(predict_lstm(model, val), val.targets); };
    h.best_val_rmse = val_rmse();
    h.val_rmse.push_back(h.best_val_rmse);
    VectorXd best = model.params();
    int since_best = 0;
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        double loss = 0.0;
        for (const auto& idx : batches(train.sequences.size(), options.batch_size, rng)) {
            std::vector<Mat> seqs;
            std::vector<double> ys;
            for (std::size_t k : idx) {
                seqs.push_back(train.sequences[k]);
                ys.push_back(train.targets[k]);
            }
            auto g = nn::lstm_batch_gradient(model, seqs, ys, options.chunk);
            check_finite(g.loss, "train_lstm", epoch);
            loss += g.loss * static_cast<double>(idx.size());
            clip(g.grad, options.clip_norm);
            nn::adam_step(adam, model.params_mut(), g.grad);
        }
        h.train_loss.push_back(loss / static_cast<double>(train.sequences.size()));
        const double v = val_rmse();
        h.val_rmse.push_back(v);
        if (v < h.best_val_rmse) {
            h.best_val_rmse = v;
            h.best_epoch = epoch;
            best = model.params();
            since_best = 0;
        } else if (++since_best >= options.patience) {
            break;
        }
    }
    model.params_mut() = best;
    return h;
}

FusionHead::FusionHead(int inputs, int hidden, std::uint64_t seed)
    : linear_(VectorXd::Zero(inputs + 1)), mlp_({inputs, hidden, 1}, seed) {}

void FusionHead::identity_init(int index) {
    if (index < 0 || index >= inputs()) throw Error(ErrorKind::Range, "fusion head: identity index out of range");
    linear_.setZero();
    linear_[index] = 1.0;
    mlp_.weight(mlp_.num_layers() - 1).setZero();
    mlp_.bias(mlp_.num_layers() - 1).setZero();
}

VectorXd FusionHead::forward(const Mat& z) const {
    if (z.rows() != inputs()) throw Error(ErrorKind::Range, "fusion head: input dimension mismatch");
    VectorXd out = z.transpose() * linear_.head(inputs());
    out.array() += linear_[inputs()];
    out += mlp_.forward(z).output.row(0).transpose();
    return out;
}

FusionHead::Gradients FusionHead::backward(const Mat& z, const VectorXd& upstream) const {
    const int m = inputs();
    const auto cache = mlp_.forward(z);
    const auto mg = mlp_.backward(cache, upstream.transpose());
    Gradients g;
    g.params = VectorXd(m + 1 + mlp_.params().size());
    g.params.head(m) = z * upstream;
    g.params[m] = upstream.sum();
    g.params.tail(mlp_.params().size()) = mg.params;
    g.input = mg.input + linear_.head(m) * upstream.transpose();
    return g;
}

VectorXd FusionHead::pack() const {
    VectorXd flat(linear_.size() + mlp_.params().size());
    flat << linear_, mlp_.params();
    return flat;
}

void FusionHead::unpack(const VectorXd& flat) {
    if (flat.size() != linear_.size() + mlp_.params().size()) throw Error(ErrorKind::Range, "fusion head: bad parameter size");
    linear_ = flat.head(linear_.size());
    mlp_.params_mut() = flat.tail(mlp_.params().size());
}

namespace {

void check_fusion_data(const FusionHead& head, const nn::LstmRegressor* lstm, int slot, const FusionData& d) {
    if (d.z.rows() != head.inputs() || static_cast<std::size_t>(d.z.cols()) != d.targets.size()) {
        throw Error(ErrorKind::Range, "fusion: inputs and targets misaligned");
    }
    if (lstm) {
        if (slot < 0 || slot >= head.inputs()) throw Error(ErrorKind::Range, "fusion: LSTM slot out of range");
        if (!d.sequences || d.sequences->sequences.size() != d.targets.size()) {
            throw Error(ErrorKind::Range, "fusion: LSTM sequences missing or misaligned");
        }
    }
}

}  // namespace

std::vector<double> predict_fusion(const FusionHead& head, const nn::LstmRegressor* lstm, int lstm_slot,
                                   const FusionData& data) {
    check_fusion_data(head, lstm, lstm_slot, data);
    Mat z = data.z;
    if (lstm) {
        const auto l = predict_lstm(*lstm, *data.sequences);
        for (std::size_t k = 0; k < l.size(); ++k) z(lstm_slot, static_cast<Eigen::Index>(k)) = l[k];
    }
    const VectorXd out = head.forward(z);
    return {out.data(), out.data() + out.size()};
}

TrainHistory fuse_and_train(FusionHead& head, nn::LstmRegressor* lstm, int lstm_slot, const FusionData& train,
                            const FusionData& val, const TrainOptions& options) {
    check_fusion_data(head, lstm, lstm_slot, train);
    check_fusion_data(head, lstm, lstm_slot, val);
    TrainHistory h;
    const auto val_rmse = [&] {
        return val.targets.empty() ? 0.0 : rmse(predict_fusion(head, lstm, lstm_slot, val), val.targets);
    };
    h.best_val_rmse = val_rmse();
    h.val_rmse.push_back(h.best_val_rmse);
    if (options.epochs <= 0 || train.targets.empty()) return h;

    std::mt19937_64 rng(options.seed);
    VectorXd head_flat = head.pack();
    nn::AdamState head_adam(static_cast<std::size_t>(head_flat.size()), options.lr);
    std::optional<nn::AdamState> lstm_adam;
    if (lstm) lstm_adam.emplace(lstm->num_params(), options.lr);
    VectorXd best_head = head_flat;
    VectorXd best_lstm = lstm ? lstm->params() : VectorXd();
    int since_best = 0;
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        double loss = 0.0;
        for (const auto& idx : batches(train.targets.size(), options.batch_size, rng)) {
            const auto B = static_cast<Eigen::Index>(idx.size());
            Mat z(head.inputs(), B);
            VectorXd y(B);
            for (Eigen::Index k = 0; k < B; ++k) {
                z.col(k) = train.z.col(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]));
                y[k] = train.targets[idx[static_cast<std::size_t>(k)]];
            }
            std::optional<nn::LstmCache> cache;
            if (lstm) {
                cache = lstm->forward(stack_selected(*train.sequences, idx));
                z.row(lstm_slot) = cache->prediction.transpose();
            }
            const VectorXd out = head.forward(z);
            const auto lg = nn::mse(out, y);
            check_finite(lg.loss, "fuse_and_train", epoch);
            loss += lg.loss * static_cast<double>(B);
            auto g = head.backward(z, lg.grad);
            if (lstm) {
                VectorXd lgrad = lstm->backward(*cache, g.input.row(lstm_slot).transpose());
                VectorXd all(g.params.size() + lgrad.size());
                all << g.params, lgrad;
                clip(all, options.clip_norm);
                g.params = all.head(g.params.size());
                lgrad = all.tail(lgrad.size());
                nn::adam_step(*lstm_adam, lstm->params_mut(), lgrad);
            } else {
                clip(g.params, options.clip_norm);
            }
            nn::adam_step(head_adam, head_flat, g.params);
            head.unpack(head_flat);
        }
        h.train_loss.push_back(loss / static_cast<double>(train.targets.size()));
        const double v = val_rmse();
        h.val_rmse.push_back(v);
        if (v < h.best_val_rmse) {
            h.best_val_rmse = v;
            h.best_epoch = epoch;
            best_head = head_flat;
            if (lstm) best_lstm = lstm->params();
            since_best = 0;
        } else if (++since_best >= options.patience) {
            break;
        }
    }
    head.unpack(best_head);
    if (lstm) lstm->params_mut() = best_lstm;
    return h;
}

}  // namespace agesl::pipeline
