#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "safnet/model.hpp"

namespace safnet {

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;  // fold index per sample
  // Set when some class has fewer than k members, so some folds lack it.
  bool sparse_class = false;

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Shuffles each class by seed, then deals positives followed by negatives
/// round-robin with one dealer position, so fold sizes differ by at most one.
FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

/// Positive class = MI.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Predicted positive iff prob >= threshold.
ConfusionMatrix confusion(std::span<const double> probs, std::span<const int> labels, double threshold);

struct Metrics {
  double sen = 0.0;
  double spe = 0.0;
  double pre = 0.0;
  double f1 = 0.0;
  double acc = 0.0;
  double gm = 0.0;
  // Names of metrics whose denominator was zero (reported as 0).
  std::vector<std::string> degenerate;
};

Metrics metrics_from_cm(const ConfusionMatrix& cm);

struct FoldResult {
  ConfusionMatrix cm;
  Metrics metrics;
  std::map<std::string, double> details;  // e.g. hyper-parameters chosen on this fold
};

struct MetricReport {
  std::vector<FoldResult> per_fold;
  Metrics averaged;
  ConfusionMatrix cumulative;
};

MetricReport aggregate_folds(std::vector<FoldResult> per_fold);

/// A trained model: probability of the positive class for one sample.
struct FittedModel {
  std::function<double(const MultiViewSample&)> predict;
  std::map<std::string, double> details;
};

/// Fits a model on a training set with a given seed.
using Learner = std::function<FittedModel(const std::vector<MultiViewSample>& train, std::uint64_t seed)>;

struct GridCandidate {
  std::string label;
  std::map<std::string, double> params;
  Learner learner;
};

struct GridSearchResult {
  std::size_t best = 0;
  std::vector<double> mean_accuracy;  // one per candidate, grid order
};

inline constexpr std::size_t kInnerFolds = 3;

/// Stratified 3-fold CV per candidate; highest mean accuracy wins, ties go to
/// the earliest candidate.
GridSearchResult grid_search(std::span<const GridCandidate> grid, const std::vector<MultiViewSample>& train_set,
                             std::uint64_t seed, double threshold = 0.5, std::size_t folds = kInnerFolds);

struct ExperimentConfig {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  std::size_t jobs = 1;  // folds evaluated concurrently
};

/// Seed used to train on a given outer fold.
std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold);

/// Stratified k-fold cross-validation of one learner.
MetricReport run_experiment(const std::vector<MultiViewSample>& dataset, const Learner& learner,
                            const ExperimentConfig& config);

std::vector<MultiViewSample> select(const std::vector<MultiViewSample>& samples,
                                    std::span<const std::size_t> indices);

}  // namespace safnet
