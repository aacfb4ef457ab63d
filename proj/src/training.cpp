#include "safnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "safnet/errors.hpp"

namespace safnet {

namespace {

constexpr std::size_t kGradientChunks = 8;

void zero_like(GradientSet& g, const SafNetParams& params) { g = SafNetParams::zeros(params.dims); }

void scale(GradientSet& g, double s) {
  for (Matrix* t : g.tensors()) *t *= s;
}

void add_into(GradientSet& dst, const GradientSet& src) {
  auto d = dst.tensors();
  auto s = src.tensors();
  for (std::size_t i = 0; i < d.size(); ++i) *d[i] += *s[i];
}

void require_batch(std::span<const MultiViewSample> batch) {
  if (batch.empty()) throw UsageError("backward: empty batch");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be nonnegative");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must lie in (0,1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must lie in (0,1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (class_weight_pos && !(*class_weight_pos > 0.0)) throw ConfigError("class_weight_pos must be positive");
  if (class_weight_neg && !(*class_weight_neg > 0.0)) throw ConfigError("class_weight_neg must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
}

ClassWeights inverse_frequency_weights(std::span<const int> labels) {
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw ConfigError("class weights undefined: training set has " + std::to_string(n_pos) +
                      " positive and " + std::to_string(n_neg) + " negative samples");
  }
  const auto n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(n_pos)), n / (2.0 * static_cast<double>(n_neg))};
}

ClassWeights resolve_class_weights(std::span<const MultiViewSample> train, const TrainConfig& config) {
  std::vector<int> labels;
  labels.reserve(train.size());
  for (const auto& s : train) labels.push_back(s.label);
  ClassWeights w = inverse_frequency_weights(labels);
  if (config.class_weight_pos) w.pos = *config.class_weight_pos;
  if (config.class_weight_neg) w.neg = *config.class_weight_neg;
  return w;
}

double weighted_bce(double prob, int label, const ClassWeights& weights) {
  const double p = std::clamp(prob, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -weights.pos * std::log(p) : -weights.neg * std::log1p(-p);
}

double weighted_bce_logit_grad(double prob, int label, const ClassWeights& weights) {
  if (prob < kProbClamp || prob > 1.0 - kProbClamp) return 0.0;
  return (label == 1 ? weights.pos : weights.neg) * (prob - static_cast<double>(label));
}

double batch_loss(std::span<const MultiViewSample> batch, const SafNetParams& params,
                  const ClassWeights& weights) {
  require_batch(batch);
  double total = 0.0;
  for (const auto& s : batch) total += weighted_bce(forward(s, params).prob, s.label, weights);
  return total / static_cast<double>(batch.size());
}

double accumulate_sample_gradient(const MultiViewSample& sample, const SafNetParams& params,
                                  const ClassWeights& weights, GradientSet& grads) {
  const ForwardTrace t = forward(sample, params);
  const std::size_t n = t.latent.rows();
  const std::size_t d_k = params.wq.cols();
  const double loss = weighted_bce(t.prob, sample.label, weights);
  const double d_logit = weighted_bce_logit_grad(t.prob, sample.label, weights);
  if (d_logit == 0.0) return loss;

  // Head: logit = head_weights . flatten(attn_out) + head_bias
  grads.head_bias[0] += d_logit;
  Matrix d_out(n, d_k);
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    grads.head_weights[i] += d_logit * t.attn_out[i];
    d_out[i] = d_logit * params.head_weights[i];
  }

  // attn_out = A V
  const Matrix d_attn = matmul_bt(d_out, t.v);
  const Matrix d_v = matmul_at(t.attn_weights, d_out);

  // A = softmax(S), S = Q K^T / sqrt(d_k)
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_k));
  Matrix d_scores(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += d_attn(i, j) * t.attn_weights(i, j);
    for (std::size_t j = 0; j < n; ++j) {
      d_scores(i, j) = t.attn_weights(i, j) * (d_attn(i, j) - dot) * inv_scale;
    }
  }
  const Matrix d_q = matmul_serial(d_scores, t.k);
  const Matrix d_k_mat = matmul_at(d_scores, t.q);

  grads.wq += matmul_at(t.latent, d_q);
  grads.wk += matmul_at(t.latent, d_k_mat);
  grads.wv += matmul_at(t.latent, d_v);

  Matrix d_latent = matmul_bt(d_q, params.wq);
  d_latent += matmul_bt(d_k_mat, params.wk);
  d_latent += matmul_bt(d_v, params.wv);

  // ReLU, then the shared embedding applied to each view column.
  const Matrix& features = sample.features;
  for (std::size_t m = 0; m < d_latent.cols(); ++m) {
    auto gw = grads.embed_weights.row(m);
    for (std::size_t i = 0; i < n; ++i) {
      if (t.pre_activation(i, m) <= 0.0) continue;
      const double dz = d_latent(i, m);
      grads.embed_bias[m] += dz;
      for (std::size_t k = 0; k < gw.size(); ++k) gw[k] += dz * features(k, i);
    }
  }
  return loss;
}

LossAndGrad backward_serial(std::span<const MultiViewSample> batch, const SafNetParams& params,
                            const ClassWeights& weights) {
  require_batch(batch);
  LossAndGrad out;
  zero_like(out.grads, params);
  for (const auto& s : batch) out.loss += accumulate_sample_gradient(s, params, weights, out.grads);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv_n;
  scale(out.grads, inv_n);
  return out;
}

LossAndGrad backward(std::span<const MultiViewSample> batch, const SafNetParams& params,
                     const ClassWeights& weights) {
  require_batch(batch);
  const std::size_t chunks = std::min(kGradientChunks, batch.size());
  std::vector<LossAndGrad> partial(chunks);
  const auto n_chunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n_chunks; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const std::size_t begin = batch.size() * ci / chunks;
    const std::size_t end = batch.size() * (ci + 1) / chunks;
    LossAndGrad& acc = partial[ci];
    zero_like(acc.grads, params);
    for (std::size_t i = begin; i < end; ++i) {
      acc.loss += accumulate_sample_gradient(batch[i], params, weights, acc.grads);
    }
  }
  LossAndGrad out = std::move(partial[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    out.loss += partial[c].loss;
    add_into(out.grads, partial[c].grads);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv_n;
  scale(out.grads, inv_n);
  return out;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, const TrainConfig& config) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw UsageError("adam_step: parameter, gradient and state tensor counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.first_moment[i]) ||
        !params[i]->same_shape(state.second_moment[i])) {
      throw UsageError("adam_step: shape mismatch at tensor " + std::to_string(i) + " (" +
                       params[i]->shape_string() + " vs gradient " + grads[i]->shape_string() + ")");
    }
  }
  state.step_count += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const auto t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i]->values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
  }
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (batch_size == 0 || batch_size >= n) return {order};
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

TrainResult train_model(std::span<const MultiViewSample> train_set, const ModelDims& dims,
                        const TrainConfig& config) {
  if (train_set.empty()) throw UsageError("train_model: empty training set");
  config.validate();
  dims.validate();
  for (const auto& s : train_set) {
    if (s.features.rows() != dims.d_in || s.features.cols() != dims.n_views) {
      throw ShapeError("train_model: sample " + s.patient_id + " has features " +
                       s.features.shape_string() + ", expected " + std::to_string(dims.d_in) + "x" +
                       std::to_string(dims.n_views));
    }
  }

  TrainResult result;
  result.weights = resolve_class_weights(train_set, config);
  result.params = SafNetParams::glorot(dims, config.seed);
  AdamState state = AdamState::for_params(result.params);
  // Separate stream for batch shuffling so initialization is independent of batching.
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<MultiViewSample> scratch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto batches = epoch_batches(train_set.size(), config.batch_size, shuffle_rng);
    for (const auto& idx : batches) {
      LossAndGrad lg;
      if (batches.size() == 1) {
        lg = backward(train_set, result.params, result.weights);
      } else {
        scratch.clear();
        for (std::size_t i : idx) scratch.push_back(train_set[i]);
        lg = backward(scratch, result.params, result.weights);
      }
      epoch_loss += lg.loss * static_cast<double>(idx.size());
      adam_step(result.params, lg.grads, state, config);
    }
    result.history.loss.push_back(epoch_loss / static_cast<double>(train_set.size()));
    result.history.final_epoch = epoch + 1;
  }
  return result;
}

}  // namespace safnet
