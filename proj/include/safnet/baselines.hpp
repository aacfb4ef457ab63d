#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "safnet/matrix.hpp"
#include "safnet/model.hpp"
#include "safnet/training.hpp"

namespace safnet {

/// Flattened feature matrix F (row-major), the input of both baselines.
inline std::span<const double> flatten_features(const MultiViewSample& s) { return s.features.values(); }

// ---------------------------------------------------------------- KNN

class KnnModel {
 public:
  KnnModel(std::span<const MultiViewSample> train, std::size_t k);
  KnnModel(Matrix points, std::vector<int> labels, std::size_t k);

  std::size_t k() const { return k_; }
  std::size_t dim() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  Matrix points_;  // one stored vector per row
  std::vector<int> labels_;
  std::size_t k_;
};

struct KnnPrediction {
  int label = 0;
  double positive_fraction = 0.0;
};

/// Squared Euclidean distance from query to every stored point.
std::vector<double> squared_distances(const Matrix& points, std::span<const double> query);
std::vector<double> squared_distances_serial(const Matrix& points, std::span<const double> query);

/// Majority vote of the k nearest points. Equal distances rank the lower
/// index first; an even vote goes to the positive class.
KnnPrediction knn_predict(const KnnModel& model, std::span<const double> query);

inline constexpr std::array<std::size_t, 6> kKnnGrid = {1, 3, 5, 7, 9, 11};

// ---------------------------------------------------------------- MLP

/// One ReLU hidden layer and a sigmoid output.
struct MlpParams {
  static constexpr std::size_t kTensorCount = 4;
  static constexpr std::array<std::string_view, kTensorCount> kTensorNames = {
      "hidden_weights", "hidden_bias", "out_weights", "out_bias"};

  Matrix hidden_weights;  // hidden x input
  Matrix hidden_bias;     // hidden x 1
  Matrix out_weights;     // 1 x hidden
  Matrix out_bias;        // 1 x 1

  static MlpParams zeros(std::size_t input, std::size_t hidden);
  static MlpParams glorot(std::size_t input, std::size_t hidden, std::uint64_t seed);

  std::size_t input_size() const { return hidden_weights.cols(); }
  std::size_t hidden_size() const { return hidden_weights.rows(); }

  std::array<Matrix*, kTensorCount> tensors();
  std::array<const Matrix*, kTensorCount> tensors() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct MlpConfig {
  std::size_t hidden = 128;
  TrainConfig train;  // class weights are ignored: the MLP uses plain BCE
};

double mlp_predict_proba(const MlpParams& params, std::span<const double> input);
int mlp_predict(const MlpParams& params, std::span<const double> input, double threshold = 0.5);

struct MlpLossAndGrad {
  double loss = 0.0;
  MlpParams grads;
};

/// Mean unweighted BCE over the batch and its gradient.
MlpLossAndGrad mlp_backward(std::span<const MultiViewSample> batch, const MlpParams& params);
double mlp_batch_loss(std::span<const MultiViewSample> batch, const MlpParams& params);

struct MlpTrainResult {
  MlpParams params;
  TrainHistory history;
};

MlpTrainResult mlp_train(std::span<const MultiViewSample> train_set, const MlpConfig& config);

}  // namespace safnet
