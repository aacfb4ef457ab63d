#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "safnet/matrix.hpp"

namespace safnet {

/// One patient: a d_in x n_views feature matrix (column 0 = A2C, column 1 = A4C).
struct MultiViewSample {
  std::string patient_id;
  int label = 0;  // 1 = MI
  Matrix features;
};

struct ModelDims {
  std::size_t d_in = 5120;
  std::size_t d_model = 64;
  std::size_t d_k = 32;
  std::size_t n_views = 2;

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Learnable weights. Every tensor is a Matrix so the optimizer and the
/// gradient checker can treat them uniformly; vectors are stored as columns
/// (embed_bias) or rows (head_weights).
struct SafNetParams {
  static constexpr std::size_t kTensorCount = 7;
  static constexpr std::array<std::string_view, kTensorCount> kTensorNames = {
      "embed_weights", "embed_bias", "wq", "wk", "wv", "head_weights", "head_bias"};

  ModelDims dims;
  Matrix embed_weights;  // d_model x d_in
  Matrix embed_bias;     // d_model x 1
  Matrix wq;             // d_model x d_k
  Matrix wk;
  Matrix wv;
  Matrix head_weights;   // 1 x (n_views * d_k)
  Matrix head_bias;      // 1 x 1

  static SafNetParams zeros(const ModelDims& dims);
  /// Glorot-uniform weights, zero biases. Draw order: embed, wq, wk, wv, head.
  static SafNetParams glorot(const ModelDims& dims, std::uint64_t seed);

  std::array<Matrix*, kTensorCount> tensors();
  std::array<const Matrix*, kTensorCount> tensors() const;

  /// Throws ShapeError unless every tensor matches dims.
  void check_shapes() const;

  friend bool operator==(const SafNetParams&, const SafNetParams&) = default;
};

using GradientSet = SafNetParams;

struct AttentionResult {
  Matrix q;        // n_views x d_k
  Matrix k;
  Matrix v;
  Matrix weights;  // n_views x n_views, rows sum to 1
  Matrix out;      // weights * v
};

/// Intermediates of one forward pass, kept for backpropagation.
struct ForwardTrace {
  Matrix pre_activation;  // n_views x d_model, before ReLU
  Matrix latent;          // n_views x d_model
  Matrix q;
  Matrix k;
  Matrix v;
  Matrix attn_weights;
  Matrix attn_out;
  double logit = 0.0;
  double prob = 0.5;
};

double sigmoid(double x);

/// Token-major pre-activations: row i = embed_weights * features[:, i] + embed_bias.
Matrix embed_pre_activation(const Matrix& features, const SafNetParams& params);
Matrix embed_views(const MultiViewSample& sample, const SafNetParams& params);

/// Scaled dot-product self-attention over the view tokens.
AttentionResult self_attention(const Matrix& latent, const SafNetParams& params);

struct Classification {
  double logit;
  double prob;
};
Classification classify(const Matrix& attn_out, const SafNetParams& params);

ForwardTrace forward(const MultiViewSample& sample, const SafNetParams& params);

inline double predict_proba(const MultiViewSample& sample, const SafNetParams& params) {
  return forward(sample, params).prob;
}

}  // namespace safnet
