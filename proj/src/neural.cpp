#include "agesl/neural.hpp"
#include "agesl/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace agesl::nn {

namespace {

void fill_uniform(double* data, std::size_t n, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < n; ++i) data[i] = u(rng);
}

Mat sigmoid(const Mat& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_vector(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

LstmRegressor::LstmRegressor(int input_dim, int hidden_dim, std::uint64_t seed)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), seed_(seed) {
    if (input_dim < 1 || hidden_dim < 1) throw Error(ErrorKind::Range, "lstm: dimensions must be positive");
    const std::size_t h = static_cast<std::size_t>(hidden_dim);
    params_ = Vec::Zero(static_cast<Eigen::Index>(w_size() + 4 * h + h + 1));
    std::mt19937_64 rng(seed);
    fill_uniform(params_.data(), w_size(), 1.0 / std::sqrt(static_cast<double>(input_dim + hidden_dim)), rng);
    fill_uniform(params_.data() + w_size() + 4 * h, h, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
    params_.segment(static_cast<Eigen::Index>(w_size() + h), hidden_dim).setOnes();  // forget gate
}

std::size_t LstmRegressor::w_size() const noexcept {
    return static_cast<std::size_t>(4 * hidden_dim_) * static_cast<std::size_t>(input_dim_ + hidden_dim_);
}

Eigen::Map<const Mat> LstmRegressor::weights() const {
    return {params_.data(), 4 * hidden_dim_, input_dim_ + hidden_dim_};
}

Eigen::Map<const Vec> LstmRegressor::bias() const {
    return {params_.data() + w_size(), 4 * hidden_dim_};
}

Eigen::Map<const Vec> LstmRegressor::out_weights() const {
    return {params_.data() + w_size() + 4 * static_cast<std::size_t>(hidden_dim_), hidden_dim_};
}

LstmCache LstmRegressor::forward(std::span<const Mat> steps) const {
    if (steps.empty()) throw Error(ErrorKind::Range, "lstm: empty sequence");
    const int H = hidden_dim_;
    const int I = input_dim_;
    const auto B = steps.front().cols();
    LstmCache cache;
    cache.version = version_;
    cache.batch = static_cast<int>(B);
    const auto W = weights();
    const auto b = bias();
    Mat h = Mat::Zero(H, B);
    Mat c = Mat::Zero(H, B);
    for (const auto& x : steps) {
        if (x.rows() != I || x.cols() != B) {
            throw Error(ErrorKind::Range, "lstm: expected input of dimension " + std::to_string(I) + ", got " +
                                              std::to_string(x.rows()));
        }
        Mat xh(I + H, B);
        xh.topRows(I) = x;
        xh.bottomRows(H) = h;
        Mat z = W * xh;
        z.colwise() += b;
        Mat gates(4 * H, B);
        gates.topRows(2 * H) = sigmoid(z.topRows(2 * H));
        gates.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
        gates.bottomRows(H) = sigmoid(z.bottomRows(H));
        c = (gates.middleRows(H, H).array() * c.array() + gates.topRows(H).array() * gates.middleRows(2 * H, H).array())
                .matrix();
        h = (gates.bottomRows(H).array() * c.array().tanh()).matrix();
        cache.xh.push_back(std::move(xh));
        cache.gates.push_back(std::move(gates));
        cache.cell.push_back(c);
    }
    cache.prediction = (out_weights().transpose() * h).transpose();
    cache.prediction.array() += out_bias();
    return cache;
}

double LstmRegressor::predict(const Mat& sequence) const {
    std::vector<Mat> steps;
    steps.reserve(static_cast<std::size_t>(sequence.cols()));
    for (Eigen::Index t = 0; t < sequence.cols(); ++t) steps.emplace_back(sequence.col(t));
    return forward(steps).prediction[0];
}

Vec LstmRegressor::backward(const LstmCache& cache, const Vec& upstream) const {
    if (cache.version != version_) throw Error(ErrorKind::Range, "lstm: cache is stale, parameters changed since forward");
    if (upstream.size() != cache.batch) throw Error(ErrorKind::Range, "lstm: upstream gradient has wrong batch size");
    const int H = hidden_dim_;
    const int I = input_dim_;
    const std::size_t T = cache.xh.size();
    Vec grad = Vec::Zero(params_.size());
    Eigen::Map<Mat> dW(grad.data(), 4 * H, I + H);
    Eigen::Map<Vec> db(grad.data() + w_size(), 4 * H);
    Eigen::Map<Vec> dw_out(grad.data() + w_size() + 4 * static_cast<std::size_t>(H), H);

    const auto W = weights();
    const Mat& c_last = cache.cell.back();
    const Mat h_last = (cache.gates.back().bottomRows(H).array() * c_last.array().tanh()).matrix();
    dw_out = h_last * upstream;
    grad[grad.size() - 1] = upstream.sum();

    Mat dh = out_weights() * upstream.transpose();
    Mat dc = Mat::Zero(H, cache.batch);
    Mat dz(4 * H, cache.batch);
    for (std::size_t k = T; k-- > 0;) {
        const Mat& g = cache.gates[k];
        const auto gi = g.topRows(H).array();
        const auto gf = g.middleRows(H, H).array();
        const auto gg = g.middleRows(2 * H, H).array();
        const auto go = g.bottomRows(H).array();
        const Eigen::ArrayXXd tc = cache.cell[k].array().tanh();
        const Eigen::ArrayXXd c_prev =
            k > 0 ? Eigen::ArrayXXd(cache.cell[k - 1].array()) : Eigen::ArrayXXd::Zero(H, cache.batch);
        dc.array() += dh.array() * go * (1.0 - tc.square());
        dz.topRows(H) = (dc.array() * gg * gi * (1.0 - gi)).matrix();
        dz.middleRows(H, H) = (dc.array() * c_prev * gf * (1.0 - gf)).matrix();
        dz.middleRows(2 * H, H) = (dc.array() * gi * (1.0 - gg.square())).matrix();
        dz.bottomRows(H) = (dh.array() * tc * go * (1.0 - go)).matrix();
        dW.noalias() += dz * cache.xh[k].transpose();
        db += dz.rowwise().sum();
        dh = (W.rightCols(H).transpose() * dz);
        dc = (dc.array() * gf).matrix();
    }
    return grad;
}

std::vector<Mat> stack_steps(std::span<const Mat> sequences) {
    if (sequences.empty()) return {};
    const auto I = sequences.front().rows();
    const auto T = sequences.front().cols();
    std::vector<Mat> steps(static_cast<std::size_t>(T), Mat(I, static_cast<Eigen::Index>(sequences.size())));
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        if (sequences[s].rows() != I || sequences[s].cols() != T) {
            throw Error(ErrorKind::Range, "lstm: sequences in a batch must share shape");
        }
        for (Eigen::Index t = 0; t < T; ++t) steps[static_cast<std::size_t>(t)].col(static_cast<Eigen::Index>(s)) = sequences[s].col(t);
    }
    return steps;
}

MlpHead::MlpHead(std::vector<int> dims, std::uint64_t seed) : dims_(std::move(dims)), seed_(seed) {
    if (dims_.size() < 2) throw Error(ErrorKind::Range, "mlp: need at least input and output dimensions");
    for (int d : dims_) {
        if (d < 1) throw Error(ErrorKind::Range, "mlp: dimensions must be positive");
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(offset(num_layers())));
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < num_layers(); ++l) {
        auto w = weight(l);
        fill_uniform(w.data(), static_cast<std::size_t>(w.size()), 1.0 / std::sqrt(static_cast<double>(dims_[l])), rng);
    }
}

std::size_t MlpHead::offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) {
        off += static_cast<std::size_t>(dims_[l + 1]) * static_cast<std::size_t>(dims_[l] + 1);
    }
    return off;
}

Eigen::Map<Mat> MlpHead::weight(std::size_t layer) {
    return {params_.data() + offset(layer), dims_[layer + 1], dims_[layer]};
}
Eigen::Map<const Mat> MlpHead::weight(std::size_t layer) const {
    return {params_.data() + offset(layer), dims_[layer + 1], dims_[layer]};
}
Eigen::Map<Vec> MlpHead::bias(std::size_t layer) {
    return {params_.data() + offset(layer) + static_cast<std::size_t>(dims_[layer + 1] * dims_[layer]), dims_[layer + 1]};
}
Eigen::Map<const Vec> MlpHead::bias(std::size_t layer) const {
    return {params_.data() + offset(layer) + static_cast<std::size_t>(dims_[layer + 1] * dims_[layer]), dims_[layer + 1]};
}

MlpCache MlpHead::forward(const Mat& input) const {
    if (input.rows() != input_dim()) {
        throw Error(ErrorKind::Range, "mlp: expected input of dimension " + std::to_string(input_dim()) + ", got " +
                                          std::to_string(input.rows()));
    }
    MlpCache cache;
    Mat a = input;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        cache.inputs.push_back(a);
        Mat z = weight(l) * a;
        z.colwise() += bias(l);
        if (l + 1 < num_layers()) {
            a = z.array().tanh().matrix();
            cache.hidden.push_back(a);
        } else {
            a = std::move(z);
        }
    }
    cache.output = std::move(a);
    return cache;
}

Vec MlpHead::forward_one(const Vec& input) const { return forward(input).output.col(0); }

MlpHead::Gradients MlpHead::backward(const MlpCache& cache, const Mat& upstream) const {
    if (upstream.rows() != output_dim() || upstream.cols() != cache.output.cols()) {
        throw Error(ErrorKind::Range, "mlp: upstream gradient shape mismatch");
    }
    Gradients g;
    g.params = Vec::Zero(params_.size());
    Mat delta = upstream;
    for (std::size_t l = num_layers(); l-- > 0;) {
        Eigen::Map<Mat> dW(g.params.data() + offset(l), dims_[l + 1], dims_[l]);
        Eigen::Map<Vec> db(g.params.data() + offset(l) + static_cast<std::size_t>(dims_[l + 1] * dims_[l]), dims_[l + 1]);
        dW.noalias() = delta * cache.inputs[l].transpose();
        db = delta.rowwise().sum();
        Mat back = weight(l).transpose() * delta;
        if (l > 0) {
            const Mat& h = cache.hidden[l - 1];
            delta = (back.array() * (1.0 - h.array().square())).matrix();
        } else {
            g.input = std::move(back);
        }
    }
    return g;
}

AdamState::AdamState(std::size_t n, double lr_, double beta1_, double beta2_, double eps_)
    : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_), m(Vec::Zero(static_cast<Eigen::Index>(n))),
      v(Vec::Zero(static_cast<Eigen::Index>(n))) {}

void adam_step(AdamState& s, Vec& params, const Vec& grads) {
    if (grads.size() != params.size() || s.m.size() != params.size()) {
        throw Error(ErrorKind::Range, "adam: parameter, gradient and state sizes differ");
    }
    for (Eigen::Index i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw Error(ErrorKind::NonFinite, "adam: non-finite gradient at index " + std::to_string(i) + " (step " +
                                                  std::to_string(s.step + 1) + ")");
        }
    }
    ++s.step;
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
    s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    params.array() -= s.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < floor) return 0.0;
    return std::abs(analytic - numeric) / scale;
}

LossGrad mse(const Vec& predictions, const Vec& targets) {
    if (predictions.size() != targets.size() || predictions.size() == 0) {
        throw Error(ErrorKind::Range, "mse: predictions and targets must be nonempty and equally long");
    }
    const Vec diff = predictions - targets;
    const double n = static_cast<double>(diff.size());
    return {diff.squaredNorm() / n, 2.0 * diff / n};
}

LossGrad lstm_batch_gradient(const LstmRegressor& model, std::span<const Mat> sequences, std::span<const double> targets,
                             int chunk) {
    if (sequences.size() != targets.size() || sequences.empty()) {
        throw Error(ErrorKind::Range, "lstm: sequences and targets must be nonempty and equally long");
    }
    if (chunk < 1) throw Error(ErrorKind::Range, "lstm: chunk size must be positive");
    const std::size_t n = sequences.size();
    const std::size_t c = static_cast<std::size_t>(chunk);
    const auto chunks = static_cast<std::int64_t>((n + c - 1) / c);
    std::vector<Vec> grads(static_cast<std::size_t>(chunks));
    std::vector<double> losses(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < chunks; ++k) {
        const std::size_t lo = static_cast<std::size_t>(k) * c;
        const std::size_t hi = std::min(n, lo + c);
        const auto steps = stack_steps(sequences.subspan(lo, hi - lo));
        const auto cache = model.forward(steps);
        const Eigen::Map<const Vec> y(targets.data() + lo, static_cast<Eigen::Index>(hi - lo));
        const Vec diff = cache.prediction - y;
        losses[static_cast<std::size_t>(k)] = diff.squaredNorm();
        grads[static_cast<std::size_t>(k)] = model.backward(cache, 2.0 * diff / static_cast<double>(n));
    }
    LossGrad out{0.0, Vec::Zero(static_cast<Eigen::Index>(model.num_params()))};
    for (std::size_t k = 0; k < grads.size(); ++k) {
        out.loss += losses[k];
        out.grad += grads[k];
    }
    out.loss /= static_cast<double>(n);
    return out;
}

LossGrad lstm_batch_gradient_serial(const LstmRegressor& model, std::span<const Mat> sequences,
                                    std::span<const double> targets) {
    if (sequences.size() != targets.size() || sequences.empty()) {
        throw Error(ErrorKind::Range, "lstm: sequences and targets must be nonempty and equally long");
    }
    const double n = static_cast<double>(sequences.size());
    LossGrad out{0.0, Vec::Zero(static_cast<Eigen::Index>(model.num_params()))};
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto steps = stack_steps(sequences.subspan(s, 1));
        const auto cache = model.forward(steps);
        const double diff = cache.prediction[0] - targets[s];
        out.loss += diff * diff;
        out.grad += model.backward(cache, Vec::Constant(1, 2.0 * diff / n));
    }
    out.loss /= n;
    return out;
}

nlohmann::json to_json(const LstmRegressor& model) {
    return {{"format", "agesl.lstm"},
            {"version", 1},
            {"input_dim", model.input_dim()},
            {"hidden_dim", model.hidden_dim()},
            {"seed", model.seed()},
            {"params", to_vector(model.params())}};
}

LstmRegressor lstm_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "agesl.lstm" || doc.value("version", 0) != 1) {
        throw Error(ErrorKind::Parse, "lstm checkpoint: unsupported format or version");
    }
    LstmRegressor model(doc.at("input_dim").get<int>(), doc.at("hidden_dim").get<int>(),
                        doc.at("seed").get<std::uint64_t>());
    const auto p = doc.at("params").get<std::vector<double>>();
    if (p.size() != model.num_params()) throw Error(ErrorKind::Parse, "lstm checkpoint: parameter count mismatch");
    model.params_mut() = from_vector(p);
    return model;
}

nlohmann::json to_json(const MlpHead& head) {
    return {{"format", "agesl.mlp"},
            {"version", 1},
            {"dims", head.dims()},
            {"seed", head.seed()},
            {"params", to_vector(head.params())}};
}

MlpHead mlp_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "agesl.mlp" || doc.value("version", 0) != 1) {
        throw Error(ErrorKind::Parse, "mlp checkpoint: unsupported format or version");
    }
    MlpHead head(doc.at("dims").get<std::vector<int>>(), doc.at("seed").get<std::uint64_t>());
    const auto p = doc.at("params").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(p.size()) != head.params().size()) {
        throw Error(ErrorKind::Parse, "mlp checkpoint: parameter count mismatch");
    }
    head.params_mut() = from_vector(p);
    return head;
}

}  // namespace agesl::nn
