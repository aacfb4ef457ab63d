#include "safnet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "safnet/errors.hpp"

namespace safnet {

namespace {

constexpr std::size_t kParallelPoints = 64;
constexpr std::size_t kGradientChunks = 8;
const ClassWeights kUnweighted{1.0, 1.0};

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

Matrix stack_features(std::span<const MultiViewSample> train) {
  if (train.empty()) throw UsageError("KnnModel: empty training set");
  const std::size_t dim = train.front().features.size();
  Matrix points(train.size(), dim);
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto src = flatten_features(train[i]);
    if (src.size() != dim) {
      throw ShapeError("KnnModel: sample " + train[i].patient_id + " has " + std::to_string(src.size()) +
                       " features, expected " + std::to_string(dim));
    }
    std::copy(src.begin(), src.end(), points.row(i).begin());
  }
  return points;
}

std::vector<int> stack_labels(std::span<const MultiViewSample> train) {
  std::vector<int> labels;
  for (const auto& s : train) labels.push_back(s.label);
  return labels;
}

}  // namespace

KnnModel::KnnModel(std::span<const MultiViewSample> train, std::size_t k)
    : KnnModel(stack_features(train), stack_labels(train), k) {}

KnnModel::KnnModel(Matrix points, std::vector<int> labels, std::size_t k)
    : points_(std::move(points)), labels_(std::move(labels)), k_(k) {
  if (labels_.size() != points_.rows()) throw UsageError("KnnModel: label count does not match points");
  if (k_ == 0 || k_ > labels_.size()) {
    throw UsageError("KnnModel: k = " + std::to_string(k_) + " must lie in [1, " +
                     std::to_string(labels_.size()) + "]");
  }
}

std::vector<double> squared_distances_serial(const Matrix& points, std::span<const double> query) {
  std::vector<double> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) out[i] = squared_distance(points.row(i), query);
  return out;
}

std::vector<double> squared_distances(const Matrix& points, std::span<const double> query) {
  std::vector<double> out(points.rows());
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static) if (points.rows() >= kParallelPoints)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    out[r] = squared_distance(points.row(r), query);
  }
  return out;
}

KnnPrediction knn_predict(const KnnModel& model, std::span<const double> query) {
  if (query.size() != model.dim()) {
    throw UsageError("knn_predict: query has " + std::to_string(query.size()) + " features, model expects " +
                     std::to_string(model.dim()));
  }
  const std::vector<double> dist = squared_distances(model.points(), query);
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto kth = order.begin() + static_cast<std::ptrdiff_t>(model.k());
  std::partial_sort(order.begin(), kth, order.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  });
  std::size_t positives = 0;
  for (auto it = order.begin(); it != kth; ++it) positives += model.labels()[*it] == 1 ? 1 : 0;
  KnnPrediction p;
  p.positive_fraction = static_cast<double>(positives) / static_cast<double>(model.k());
  p.label = 2 * positives >= model.k() ? 1 : 0;
  return p;
}

// ---------------------------------------------------------------- MLP

MlpParams MlpParams::zeros(std::size_t input, std::size_t hidden) {
  return {Matrix(hidden, input), Matrix(hidden, 1), Matrix(1, hidden), Matrix(1, 1)};
}

MlpParams MlpParams::glorot(std::size_t input, std::size_t hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MlpParams p = zeros(input, hidden);
  p.hidden_weights = glorot_uniform(hidden, input, rng);
  p.out_weights = glorot_uniform(1, hidden, rng);
  return p;
}

std::array<Matrix*, MlpParams::kTensorCount> MlpParams::tensors() {
  return {&hidden_weights, &hidden_bias, &out_weights, &out_bias};
}

std::array<const Matrix*, MlpParams::kTensorCount> MlpParams::tensors() const {
  return {&hidden_weights, &hidden_bias, &out_weights, &out_bias};
}

namespace {

// Hidden pre-activations for one input.
std::vector<double> hidden_pre(const MlpParams& params, std::span<const double> input) {
  if (input.size() != params.input_size()) {
    throw ShapeError("mlp: input has " + std::to_string(input.size()) + " features, expected " +
                     std::to_string(params.input_size()));
  }
  std::vector<double> z(params.hidden_size());
  for (std::size_t h = 0; h < z.size(); ++h) {
    auto w = params.hidden_weights.row(h);
    double acc = params.hidden_bias[h];
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * input[i];
    z[h] = acc;
  }
  return z;
}

double output_logit(const MlpParams& params, std::span<const double> pre) {
  double logit = params.out_bias[0];
  for (std::size_t h = 0; h < pre.size(); ++h) logit += params.out_weights[h] * std::max(0.0, pre[h]);
  return logit;
}

double accumulate_mlp_gradient(const MultiViewSample& sample, const MlpParams& params, MlpParams& grads) {
  const auto x = flatten_features(sample);
  const std::vector<double> z = hidden_pre(params, x);
  const double prob = sigmoid(output_logit(params, z));
  const double loss = weighted_bce(prob, sample.label, kUnweighted);
  const double d_logit = weighted_bce_logit_grad(prob, sample.label, kUnweighted);
  if (d_logit == 0.0) return loss;
  grads.out_bias[0] += d_logit;
  for (std::size_t h = 0; h < z.size(); ++h) {
    if (z[h] <= 0.0) continue;
    grads.out_weights[h] += d_logit * z[h];
    const double dz = d_logit * params.out_weights[h];
    grads.hidden_bias[h] += dz;
    auto gw = grads.hidden_weights.row(h);
    for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dz * x[i];
  }
  return loss;
}

}  // namespace

double mlp_predict_proba(const MlpParams& params, std::span<const double> input) {
  return sigmoid(output_logit(params, hidden_pre(params, input)));
}

int mlp_predict(const MlpParams& params, std::span<const double> input, double threshold) {
  return mlp_predict_proba(params, input) >= threshold ? 1 : 0;
}

double mlp_batch_loss(std::span<const MultiViewSample> batch, const MlpParams& params) {
  if (batch.empty()) throw UsageError("mlp_batch_loss: empty batch");
  double total = 0.0;
  for (const auto& s : batch) {
    total += weighted_bce(mlp_predict_proba(params, flatten_features(s)), s.label, kUnweighted);
  }
  return total / static_cast<double>(batch.size());
}

MlpLossAndGrad mlp_backward(std::span<const MultiViewSample> batch, const MlpParams& params) {
  if (batch.empty()) throw UsageError("mlp_backward: empty batch");
  const std::size_t chunks = std::min(kGradientChunks, batch.size());
  std::vector<MlpLossAndGrad> partial(chunks);
  const auto n_chunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n_chunks; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    MlpLossAndGrad& acc = partial[ci];
    acc.grads = MlpParams::zeros(params.input_size(), params.hidden_size());
    for (std::size_t i = batch.size() * ci / chunks; i < batch.size() * (ci + 1) / chunks; ++i) {
      acc.loss += accumulate_mlp_gradient(batch[i], params, acc.grads);
    }
  }
  MlpLossAndGrad out = std::move(partial[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    out.loss += partial[c].loss;
    auto dst = out.grads.tensors();
    auto src = partial[c].grads.tensors();
    for (std::size_t t = 0; t < dst.size(); ++t) *dst[t] += *src[t];
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv_n;
  for (Matrix* t : out.grads.tensors()) *t *= inv_n;
  return out;
}

MlpTrainResult mlp_train(std::span<const MultiViewSample> train_set, const MlpConfig& config) {
  if (train_set.empty()) throw UsageError("mlp_train: empty training set");
  if (config.hidden == 0) throw ConfigError("mlp hidden width must be positive");
  config.train.validate();
  // Fails on a single-class set, matching the SAF-Net contract.
  (void)resolve_class_weights(train_set, config.train);

  const std::size_t input = train_set.front().features.size();
  MlpTrainResult result;
  result.params = MlpParams::glorot(input, config.hidden, config.train.seed);
  AdamState state = AdamState::for_params(result.params);
  std::mt19937_64 shuffle_rng(config.train.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<MultiViewSample> scratch;
  for (std::size_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto batches = epoch_batches(train_set.size(), config.train.batch_size, shuffle_rng);
    for (const auto& idx : batches) {
      MlpLossAndGrad lg;
      if (batches.size() == 1) {
        lg = mlp_backward(train_set, result.params);
      } else {
        scratch.clear();
        for (std::size_t i : idx) scratch.push_back(train_set[i]);
        lg = mlp_backward(scratch, result.params);
      }
      epoch_loss += lg.loss * static_cast<double>(idx.size());
      adam_step(result.params, lg.grads, state, config.train);
    }
    result.history.loss.push_back(epoch_loss / static_cast<double>(train_set.size()));
    result.history.final_epoch = epoch + 1;
  }
  return result;
}

}  // namespace safnet
