#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "safnet/matrix.hpp"
#include "safnet/model.hpp"

namespace safnet {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 500;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  // Unset weights are derived from the training set as N / (2 * N_c).
  std::optional<double> class_weight_pos;
  std::optional<double> class_weight_neg;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double threshold = 0.5;

  void validate() const;
};

struct ClassWeights {
  double pos = 1.0;
  double neg = 1.0;
};

/// Inverse-frequency weights N / (2 * N_c). Throws ConfigError when either
/// class is absent.
ClassWeights inverse_frequency_weights(std::span<const int> labels);
ClassWeights resolve_class_weights(std::span<const MultiViewSample> train, const TrainConfig& config);

inline constexpr double kProbClamp = 1e-12;

double weighted_bce(double prob, int label, const ClassWeights& weights);

/// d(weighted_bce)/d(logit), zero where the probability clamp is active.
double weighted_bce_logit_grad(double prob, int label, const ClassWeights& weights);

struct LossAndGrad {
  double loss = 0.0;
  GradientSet grads;
};

double batch_loss(std::span<const MultiViewSample> batch, const SafNetParams& params,
                  const ClassWeights& weights);

/// Mean weighted BCE over the batch and its exact gradient. Samples are split
/// into a fixed number of contiguous chunks that are processed in parallel and
/// summed in chunk order, so the result does not depend on the thread count.
LossAndGrad backward(std::span<const MultiViewSample> batch, const SafNetParams& params,
                     const ClassWeights& weights);

/// Single-threaded reference: accumulates samples strictly in batch order.
LossAndGrad backward_serial(std::span<const MultiViewSample> batch, const SafNetParams& params,
                            const ClassWeights& weights);

/// Adds one sample's (unaveraged) gradient into grads and returns its loss.
double accumulate_sample_gradient(const MultiViewSample& sample, const SafNetParams& params,
                                  const ClassWeights& weights, GradientSet& grads);

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step_count = 0;

  template <class Params>
  static AdamState for_params(const Params& params) {
    AdamState s;
    for (const Matrix* t : params.tensors()) {
      s.first_moment.emplace_back(t->rows(), t->cols());
      s.second_moment.emplace_back(t->rows(), t->cols());
    }
    return s;
  }
};

/// Bias-corrected Adam update over parallel lists of tensors.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, const TrainConfig& config);

template <class Params>
void adam_step(Params& params, const Params& grads, AdamState& state, const TrainConfig& config) {
  auto p = params.tensors();
  auto g = grads.tensors();
  adam_step(std::span<Matrix* const>(p.data(), p.size()),
            std::span<const Matrix* const>(g.data(), g.size()), state, config);
}

struct TrainHistory {
  std::vector<double> loss;  // mean weighted loss per epoch
  std::size_t final_epoch = 0;
};

struct TrainResult {
  SafNetParams params;
  TrainHistory history;
  ClassWeights weights;
};

/// Glorot initialization from config.seed followed by config.epochs of
/// backward + adam_step.
TrainResult train_model(std::span<const MultiViewSample> train_set, const ModelDims& dims,
                        const TrainConfig& config);

/// Batches for one epoch: a single full batch, or a seeded shuffle cut into
/// batch_size pieces.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::mt19937_64& rng);

}  // namespace safnet
