#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace agesl::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Activations kept by a batched LSTM forward pass. `steps[t]` inputs are
/// (input_dim x batch); the cache remembers which parameter version produced it.
struct LstmCache {
    std::uint64_t version = 0;
    int batch = 0;
    std::vector<Mat> xh;     // [x_t; h_{t-1}]
    std::vector<Mat> gates;  // activated i, f, g, o stacked
    std::vector<Mat> cell;   // c_t
    Vec prediction;          // one per batch column
};

/// Single-layer LSTM whose final hidden state is projected to a scalar.
/// All parameters live in one contiguous vector:
///   W (4H x (I+H), gate rows ordered i, f, g, o), b (4H), w_out (H), b_out.
class LstmRegressor {
public:
    LstmRegressor(int input_dim, int hidden_dim, std::uint64_t seed);

    int input_dim() const noexcept { return input_dim_; }
    int hidden_dim() const noexcept { return hidden_dim_; }
    std::size_t num_params() const noexcept { return static_cast<std::size_t>(params_.size()); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t version() const noexcept { return version_; }

    const Vec& params() const noexcept { return params_; }
    /// Mutable access; invalidates caches from earlier forward passes.
    Vec& params_mut() noexcept {
        ++version_;
        return params_;
    }

    Eigen::Map<const Mat> weights() const;
    Eigen::Map<const Vec> bias() const;
    Eigen::Map<const Vec> out_weights() const;
    double out_bias() const { return params_[params_.size() - 1]; }

    LstmCache forward(std::span<const Mat> steps) const;
    /// Prediction for one sequence given as (input_dim x T), one column per step.
    double predict(const Mat& sequence) const;
    /// Gradient of sum_b upstream[b] * prediction[b] with respect to params().
    Vec backward(const LstmCache& cache, const Vec& upstream) const;

private:
    std::size_t w_size() const noexcept;

    int input_dim_;
    int hidden_dim_;
    std::uint64_t seed_;
    std::uint64_t version_ = 0;
    Vec params_;
};

/// Splits a list of (input_dim x T) sequences into per-step batch matrices.
std::vector<Mat> stack_steps(std::span<const Mat> sequences);

struct MlpCache {
    std::vector<Mat> inputs;  // input to each layer
    std::vector<Mat> hidden;  // tanh outputs of hidden layers
    Mat output;
};

/// Fully connected layers, tanh on hidden layers and identity on the output.
/// Parameters are stored layer by layer as W (out x in) then b (out).
class MlpHead {
public:
    MlpHead(std::vector<int> dims, std::uint64_t seed);

    const std::vector<int>& dims() const noexcept { return dims_; }
    int input_dim() const noexcept { return dims_.front(); }
    int output_dim() const noexcept { return dims_.back(); }
    std::size_t num_layers() const noexcept { return dims_.size() - 1; }
    std::uint64_t seed() const noexcept { return seed_; }

    const Vec& params() const noexcept { return params_; }
    Vec& params_mut() noexcept { return params_; }

    Eigen::Map<Mat> weight(std::size_t layer);
    Eigen::Map<const Mat> weight(std::size_t layer) const;
    Eigen::Map<Vec> bias(std::size_t layer);
    Eigen::Map<const Vec> bias(std::size_t layer) const;

    /// Columns of `input` are samples.
    MlpCache forward(const Mat& input) const;
    Vec forward_one(const Vec& input) const;

    struct Gradients {
        Vec params;
        Mat input;
    };
    Gradients backward(const MlpCache& cache, const Mat& upstream) const;

private:
    std::size_t offset(std::size_t layer) const;

    std::vector<int> dims_;
    std::uint64_t seed_;
    Vec params_;
};

struct AdamState {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    Vec m;
    Vec v;
    std::int64_t step = 0;

    AdamState() = default;
    AdamState(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
};

/// One bias-corrected Adam update (descent direction). Throws NonFinite if
/// any gradient entry is NaN or infinite; params are left untouched then.
void adam_step(AdamState& state, Vec& params, const Vec& grads);

/// Gradient check helper: |a - n| / max(|a|, |n|), 0 when both are below `floor`.
double relative_error(double analytic, double numeric, double floor = 1e-10);

/// Mean squared error loss over a batch and its gradient with respect to the
/// predictions.
struct LossGrad {
    double loss = 0.0;
    Vec grad;
};
LossGrad mse(const Vec& predictions, const Vec& targets);

/// Gradient of the mean squared error over all samples. Samples are cut into
/// fixed chunks of `chunk` sequences, each chunk is a batched pass, and the
/// per-chunk gradients are added in chunk order, so the result does not depend
/// on the thread count.
LossGrad lstm_batch_gradient(const LstmRegressor& model, std::span<const Mat> sequences, std::span<const double> targets,
                             int chunk = 32);
/// Reference: one sample at a time, no threads.
LossGrad lstm_batch_gradient_serial(const LstmRegressor& model, std::span<const Mat> sequences,
                                    std::span<const double> targets);

nlohmann::json to_json(const LstmRegressor& model);
LstmRegressor lstm_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const MlpHead& head);
MlpHead mlp_from_json(const nlohmann::json& doc);

}  // namespace agesl::nn
