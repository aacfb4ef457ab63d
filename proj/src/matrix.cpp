#include "safnet/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "safnet/errors.hpp"

namespace safnet {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

void require_product(const Matrix& a, const Matrix& b, std::size_t inner_a,
                     std::size_t inner_b, const char* op) {
  if (inner_a != inner_b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() +
                     " and " + b.shape_string());
  }
}

void matmul_rows(const Matrix& a, const Matrix& b, Matrix& out, std::size_t r) {
  auto dst = out.row(r);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double aik = a(r, k);
    if (aik == 0.0) continue;
    auto src = b.row(k);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] += aik * src[j];
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                     " does not match " + shape_string());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix& Matrix::operator+=(const Matrix& other) {
  if (!same_shape(other)) {
    throw ShapeError("Matrix +=: " + shape_string() + " vs " + other.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double scale) {
  for (auto& x : data_) x *= scale;
  return *this;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_product(a, b, a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
  const bool parallel = a.rows() * a.cols() * b.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t r = 0; r < rows; ++r) matmul_rows(a, b, out, static_cast<std::size_t>(r));
  return out;
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  require_product(a, b, a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) matmul_rows(a, b, out, r);
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  require_product(a, b, a.cols(), b.cols(), "matmul_bt");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) acc += ai[k] * bj[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  require_product(a, b, a.rows(), b.rows(), "matmul_at");
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto bk = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < bk.size(); ++j) dst[j] += aki * bk[j];
    }
  }
  return out;
}

Matrix row_softmax(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r);
    auto dst = out.row(r);
    if (src.empty()) continue;
    const double peak = *std::max_element(src.begin(), src.end());
    double total = 0.0;
    for (std::size_t c = 0; c < src.size(); ++c) {
      dst[c] = std::exp(src[c] - peak);
      total += dst[c];
    }
    for (auto& x : dst) x /= total;
  }
  return out;
}

Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (auto& x : out.values()) x = x > 0.0 ? x : 0.0;
  return out;
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (auto& x : m.values()) x = dist(rng);
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: " + a.shape_string() + " vs " + b.shape_string());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace safnet
