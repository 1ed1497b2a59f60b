#pragma once

#include "agesl/features.hpp"
#include "agesl/neural.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace agesl::pipeline {

/// Which parts of a FeatureRow an LSTM sees at each step.
enum class InputKind {
    Lags,           // 20 price lags
    LagsSentiment,  // + neg, neu, pos, compound
    Full,           // type vector, argument embedding, price lags
};

int input_dim(InputKind kind, int type_dim = events::kTypeDim, int arg_dim = events::kArgDim);

/// Price lags enter relative to the previous close (lag_k - last price).
Eigen::VectorXd encode_row(const FeatureRow& row, InputKind kind);

/// Per-dimension z-score fitted on a training subset. Dimensions with no
/// spread get unit scale.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer fit(const std::vector<Eigen::VectorXd>& samples);
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

/// Models predict the standardized next-day change; this maps between that
/// scale and prices.
struct TargetScaler {
    double mean = 0.0;
    double sd = 1.0;

    static TargetScaler fit(std::span<const FeatureRow> rows);
    double to_z(const FeatureRow& row, double price) const { return (price - row.last_price() - mean) / sd; }
    double to_price(const FeatureRow& row, double z) const { return row.last_price() + mean + sd * z; }
};

struct SequenceSet {
    std::vector<nn::Mat> sequences;  // (input_dim x window)
    std::vector<double> targets;     // standardized change
    std::vector<std::size_t> rows;   // position of the last step in the row list
};

/// Sequences of `window` consecutive encoded rows ending at each position in
/// [begin, end); positions before window - 1 are skipped.
SequenceSet make_sequences(const std::vector<Eigen::VectorXd>& encoded, const std::vector<double>& targets,
                           std::size_t begin, std::size_t end, int window);

struct TrainOptions {
    int epochs = 60;
    int batch_size = 32;
    double lr = 1e-3;
    int patience = 10;
    double clip_norm = 5.0;
    int chunk = 8;
    std::uint64_t seed = 1;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_rmse;  // index 0 is before any update
    int best_epoch = 0;
    double best_val_rmse = 0.0;
};

std::vector<double> predict_lstm(const nn::LstmRegressor& model, const SequenceSet& set, int batch = 256);

/// Minibatch Adam on the mean squared error, early stopping on validation
/// RMSE; the best parameters are restored at the end.
TrainHistory train_lstm(nn::LstmRegressor& model, const SequenceSet& train, const SequenceSet& val,
                        const TrainOptions& options);

/// out = u . z + b + MLP(z) over standardized inputs z.
class FusionHead {
public:
    FusionHead(int inputs, int hidden, std::uint64_t seed);

    int inputs() const noexcept { return static_cast<int>(linear_.size()) - 1; }
    /// u = e_index, b = 0 and the MLP's output layer zeroed, so the head
    /// returns input `index` unchanged.
    void identity_init(int index);

    Eigen::VectorXd forward(const nn::Mat& z) const;

    struct Gradients {
        Eigen::VectorXd params;  // same layout as pack()
        nn::Mat input;
    };
    Gradients backward(const nn::Mat& z, const Eigen::VectorXd& upstream) const;

    Eigen::VectorXd pack() const;
    void unpack(const Eigen::VectorXd& flat);

    const Eigen::VectorXd& linear() const noexcept { return linear_; }
    const nn::MlpHead& mlp() const noexcept { return mlp_; }

private:
    Eigen::VectorXd linear_;  // u then b
    nn::MlpHead mlp_;
};

/// Training data for the fusion head. `z` holds one standardized input column
/// per sample; when an LSTM is trained jointly its output replaces row
/// `lstm_slot` of z and `sequences` supplies its inputs.
struct FusionData {
    nn::Mat z;
    std::vector<double> targets;
    const SequenceSet* sequences = nullptr;
};

/// Joint training of the head and (optionally) the LSTM feeding input
/// `lstm_slot`. Zero epochs leave both untouched. Throws NonFinite if the
/// loss diverges.
TrainHistory fuse_and_train(FusionHead& head, nn::LstmRegressor* lstm, int lstm_slot, const FusionData& train,
                            const FusionData& val, const TrainOptions& options);

/// Head outputs for `data`, running the LSTM first when given.
std::vector<double> predict_fusion(const FusionHead& head, const nn::LstmRegressor* lstm, int lstm_slot,
                                   const FusionData& data);

}  // namespace agesl::pipeline
