#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "safnet/errors.hpp"
#include "safnet/model.hpp"

using namespace safnet;

namespace {

MultiViewSample make_sample(const Matrix& features, int label = 1) { return {"p", label, features}; }

// Reorders token rows.
Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < m.cols(); ++c) out(i, c) = m(perm[i], c);
  return out;
}

}  // namespace

TEST_CASE("embed_views: zero weights give zero latent") {
  const ModelDims dims{6, 3, 2, 2};
  std::mt19937_64 rng(1);
  const SafNetParams p = SafNetParams::zeros(dims);
  CHECK(embed_views(make_sample(oracle::random_matrix(6, 2, rng)), p) == Matrix(2, 3));
}

TEST_CASE("embed_views: identity weights copy nonnegative feature columns") {
  const ModelDims dims{4, 4, 2, 2};
  SafNetParams p = SafNetParams::zeros(dims);
  p.embed_weights = Matrix::identity(4);
  const Matrix f = Matrix::from_rows({{1, 5}, {2, 6}, {3, 7}, {0, 8}});
  const Matrix latent = embed_views(make_sample(f), p);
  CHECK(latent == transpose(f));
}

TEST_CASE("embed_views matches per-element oracle") {
  const ModelDims dims{6, 3, 2, 2};
  std::mt19937_64 rng(2);
  const SafNetParams p = oracle::random_params(dims, rng);
  const Matrix f = oracle::random_matrix(6, 2, rng);
  const auto expected =
      oracle::embed(oracle::to_grid(f), oracle::to_grid(p.embed_weights), oracle::to_grid(p.embed_bias));
  CHECK(oracle::max_diff(embed_views(make_sample(f), p), expected) <= 1e-12);
}

TEST_CASE("embed_views rejects mismatched feature rows") {
  const SafNetParams p = SafNetParams::zeros({6, 3, 2, 2});
  CHECK_THROWS_AS(embed_views(make_sample(Matrix(5, 2)), p), ShapeError);
}

TEST_CASE("self_attention: zero query gives uniform weights and mean of V") {
  const ModelDims dims{4, 4, 2, 2};
  std::mt19937_64 rng(3);
  SafNetParams p = oracle::random_params(dims, rng);
  p.wq.fill(0.0);
  const Matrix latent = oracle::random_matrix(2, 4, rng);
  const AttentionResult r = self_attention(latent, p);
  for (double w : r.weights.values()) CHECK(std::abs(w - 0.5) <= 1e-12);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(r.out(i, c) - 0.5 * (r.v(0, c) + r.v(1, c))) <= 1e-12);
}

TEST_CASE("self_attention: a single token attends to itself") {
  const ModelDims dims{4, 4, 2, 1};
  std::mt19937_64 rng(4);
  const SafNetParams p = oracle::random_params(dims, rng);
  const AttentionResult r = self_attention(oracle::random_matrix(1, 4, rng), p);
  CHECK(r.weights == Matrix::from_rows({{1.0}}));
  CHECK(r.out == r.v);
}

TEST_CASE("self_attention matches naive scaled dot-product oracle") {
  const ModelDims dims{4, 4, 2, 2};
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const SafNetParams p = oracle::random_params(dims, rng);
    const Matrix latent = oracle::random_matrix(2, 4, rng);
    const auto expected = oracle::attention(oracle::to_grid(latent), oracle::to_grid(p.wq), oracle::to_grid(p.wk),
                                            oracle::to_grid(p.wv));
    const AttentionResult r = self_attention(latent, p);
    CHECK(oracle::max_diff(r.weights, expected.weights) <= 1e-12);
    CHECK(oracle::max_diff(r.out, expected.out) <= 1e-12);
  }
}

TEST_CASE("self_attention is token-permutation equivariant") {
  std::mt19937_64 rng(6);
  for (std::size_t n : {2u, 3u, 5u}) {
    const ModelDims dims{8, 8, 4, n};
    const SafNetParams p = oracle::random_params(dims, rng);
    const Matrix latent = oracle::random_matrix(n, 8, rng);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = (i + 1) % n;
    const AttentionResult base = self_attention(latent, p);
    const AttentionResult moved = self_attention(permute_rows(latent, perm), p);
    CHECK(max_abs_diff(moved.out, permute_rows(base.out, perm)) <= 1e-12);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(moved.weights(i, j) - base.weights(perm[i], perm[j])) <= 1e-12);
  }
}

TEST_CASE("attention weights unchanged by a constant added to a score row") {
  // One row of Q K^T shifted by a constant.
  std::mt19937_64 rng(7);
  const Matrix scores = oracle::random_matrix(2, 2, rng);
  Matrix shifted = scores;
  shifted(1, 0) += 3.25;
  shifted(1, 1) += 3.25;
  const Matrix a = row_softmax(scores);
  const Matrix b = row_softmax(shifted);
  CHECK(std::abs(a(1, 0) - b(1, 0)) <= 1e-12);
  CHECK(std::abs(a(1, 1) - b(1, 1)) <= 1e-12);
  CHECK(a(0, 0) == b(0, 0));
}

TEST_CASE("classify examples") {
  const ModelDims dims{4, 4, 2, 2};
  SafNetParams p = SafNetParams::zeros(dims);
  std::mt19937_64 rng(8);
  const Matrix out = oracle::random_matrix(2, 2, rng);
  CHECK(classify(out, p).prob == 0.5);

  p.head_bias[0] = 30.0;
  CHECK(classify(out, p).prob > 1.0 - 1e-9);

  p.head_bias[0] = std::log(3.0);
  CHECK(std::abs(classify(out, p).prob - 0.75) <= 1e-15);

  CHECK_THROWS_AS(classify(Matrix(3, 2), p), ShapeError);
}

TEST_CASE("forward examples") {
  const ModelDims dims{6, 4, 2, 2};
  std::mt19937_64 rng(9);
  const Matrix f = oracle::random_matrix(6, 2, rng);

  CHECK(forward(make_sample(f), SafNetParams::zeros(dims)).prob == 0.5);

  const SafNetParams p = oracle::random_params(dims, rng);
  Matrix twin(6, 2);
  for (std::size_t k = 0; k < 6; ++k) twin(k, 0) = twin(k, 1) = f(k, 0);
  const ForwardTrace t = forward(make_sample(twin), p);
  for (const Matrix* m : {&t.q, &t.k, &t.v, &t.attn_out}) {
    for (std::size_t c = 0; c < m->cols(); ++c) CHECK((*m)(0, c) == (*m)(1, c));
  }

  const ForwardTrace a = forward(make_sample(f), p);
  const ForwardTrace b = forward(make_sample(f), p);
  CHECK(a.attn_out == b.attn_out);
  CHECK(a.logit == b.logit);
  CHECK(a.prob == b.prob);
  CHECK(a.prob == sigmoid(a.logit));
}

TEST_CASE("forward trace invariants on random instances") {
  std::mt19937_64 rng(10);
  const ModelDims dims{10, 6, 3, 2};
  for (int trial = 0; trial < 100; ++trial) {
    const SafNetParams p = oracle::random_params(dims, rng);
    const ForwardTrace t = forward(make_sample(oracle::random_matrix(10, 2, rng)), p);
    for (std::size_t r = 0; r < 2; ++r) {
      double total = 0.0;
      for (double w : t.attn_weights.row(r)) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        total += w;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
    CHECK(t.prob > 0.0);
    CHECK(t.prob < 1.0);
  }
}

TEST_CASE("ModelDims validation") {
  CHECK_THROWS_AS((ModelDims{10, 4, 4, 2}.validate()), ConfigError);
  CHECK_THROWS_AS((ModelDims{0, 4, 2, 2}.validate()), ConfigError);
  CHECK_NOTHROW((ModelDims{}.validate()));
}

TEST_CASE("glorot parameters are seeded and shaped") {
  const ModelDims dims{12, 8, 4, 2};
  const SafNetParams a = SafNetParams::glorot(dims, 5);
  CHECK(a == SafNetParams::glorot(dims, 5));
  CHECK_FALSE(a == SafNetParams::glorot(dims, 6));
  CHECK_NOTHROW(a.check_shapes());
  for (double b : a.embed_bias.values()) CHECK(b == 0.0);
}
