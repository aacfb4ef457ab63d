#include "safnet/model.hpp"

#include <cmath>

#include "safnet/errors.hpp"

namespace safnet {

void ModelDims::validate() const {
  if (d_in == 0 || d_model == 0 || d_k == 0 || n_views == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_k >= d_model) {
    throw ConfigError("d_k (" + std::to_string(d_k) + ") must be smaller than d_model (" +
                      std::to_string(d_model) + ")");
  }
}

SafNetParams SafNetParams::zeros(const ModelDims& dims) {
  SafNetParams p;
  p.dims = dims;
  p.embed_weights = Matrix(dims.d_model, dims.d_in);
  p.embed_bias = Matrix(dims.d_model, 1);
  p.wq = Matrix(dims.d_model, dims.d_k);
  p.wk = Matrix(dims.d_model, dims.d_k);
  p.wv = Matrix(dims.d_model, dims.d_k);
  p.head_weights = Matrix(1, dims.n_views * dims.d_k);
  p.head_bias = Matrix(1, 1);
  return p;
}

SafNetParams SafNetParams::glorot(const ModelDims& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SafNetParams p = zeros(dims);
  p.embed_weights = glorot_uniform(dims.d_model, dims.d_in, rng);
  p.wq = glorot_uniform(dims.d_model, dims.d_k, rng);
  p.wk = glorot_uniform(dims.d_model, dims.d_k, rng);
  p.wv = glorot_uniform(dims.d_model, dims.d_k, rng);
  p.head_weights = glorot_uniform(1, dims.n_views * dims.d_k, rng);
  return p;
}

std::array<Matrix*, SafNetParams::kTensorCount> SafNetParams::tensors() {
  return {&embed_weights, &embed_bias, &wq, &wk, &wv, &head_weights, &head_bias};
}

std::array<const Matrix*, SafNetParams::kTensorCount> SafNetParams::tensors() const {
  return {&embed_weights, &embed_bias, &wq, &wk, &wv, &head_weights, &head_bias};
}

void SafNetParams::check_shapes() const {
  const SafNetParams expected = zeros(dims);
  const auto have = tensors();
  const auto want = expected.tensors();
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    if (!have[i]->same_shape(*want[i])) {
      throw ShapeError(std::string(kTensorNames[i]) + " has shape " + have[i]->shape_string() +
                       ", expected " + want[i]->shape_string());
    }
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix embed_pre_activation(const Matrix& features, const SafNetParams& params) {
  const Matrix& w = params.embed_weights;
  if (features.rows() != w.cols()) {
    throw ShapeError("embed_views: features " + features.shape_string() +
                     " incompatible with embed_weights " + w.shape_string());
  }
  const std::size_t n = features.cols();
  Matrix z(n, w.rows());
  for (std::size_t m = 0; m < w.rows(); ++m) {
    auto wm = w.row(m);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = params.embed_bias[m];
      for (std::size_t k = 0; k < wm.size(); ++k) acc += wm[k] * features(k, i);
      z(i, m) = acc;
    }
  }
  return z;
}

Matrix embed_views(const MultiViewSample& sample, const SafNetParams& params) {
  return relu(embed_pre_activation(sample.features, params));
}

AttentionResult self_attention(const Matrix& latent, const SafNetParams& params) {
  if (latent.cols() != params.wq.rows()) {
    throw ShapeError("self_attention: latent " + latent.shape_string() +
                     " incompatible with wq " + params.wq.shape_string());
  }
  AttentionResult r;
  r.q = matmul_serial(latent, params.wq);
  r.k = matmul_serial(latent, params.wk);
  r.v = matmul_serial(latent, params.wv);
  Matrix scores = matmul_bt(r.q, r.k);
  scores *= 1.0 / std::sqrt(static_cast<double>(params.wq.cols()));
  r.weights = row_softmax(scores);
  r.out = matmul_serial(r.weights, r.v);
  return r;
}

Classification classify(const Matrix& attn_out, const SafNetParams& params) {
  if (attn_out.size() != params.head_weights.size()) {
    throw ShapeError("classify: attention output " + attn_out.shape_string() +
                     " does not match head_weights " + params.head_weights.shape_string());
  }
  double logit = params.head_bias[0];
  for (std::size_t i = 0; i < attn_out.size(); ++i) logit += params.head_weights[i] * attn_out[i];
  return {logit, sigmoid(logit)};
}

ForwardTrace forward(const MultiViewSample& sample, const SafNetParams& params) {
  ForwardTrace t;
  t.pre_activation = embed_pre_activation(sample.features, params);
  t.latent = relu(t.pre_activation);
  AttentionResult attn = self_attention(t.latent, params);
  t.q = std::move(attn.q);
  t.k = std::move(attn.k);
  t.v = std::move(attn.v);
  t.attn_weights = std::move(attn.weights);
  t.attn_out = std::move(attn.out);
  const Classification c = classify(t.attn_out, params);
  t.logit = c.logit;
  t.prob = c.prob;
  return t;
}

}  // namespace safnet
