#include "safnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include "safnet/errors.hpp"

namespace safnet {

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw UsageError("stratified_kfold: k must be at least 2, got " + std::to_string(k));
  if (k > labels.size()) {
    throw UsageError("stratified_kfold: k = " + std::to_string(k) + " exceeds sample count " +
                     std::to_string(labels.size()));
  }
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);

  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.assignments.assign(labels.size(), 0);
  plan.sparse_class = (!pos.empty() && pos.size() < k) || (!neg.empty() && neg.size() < k);
  std::size_t dealer = 0;
  for (const auto* group : {&pos, &neg}) {
    for (std::size_t idx : *group) {
      plan.assignments[idx] = dealer;
      dealer = (dealer + 1) % k;
    }
  }
  return plan;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionMatrix confusion(std::span<const double> probs, std::span<const int> labels, double threshold) {
  if (probs.size() != labels.size()) {
    throw UsageError("confusion: " + std::to_string(probs.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? cm.tp : cm.fn) += 1;
    } else {
      (predicted ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

namespace {

double ratio(double num, double den, const char* name, std::vector<std::string>& degenerate) {
  if (den == 0.0) {
    degenerate.emplace_back(name);
    return 0.0;
  }
  return num / den;
}

}  // namespace

Metrics metrics_from_cm(const ConfusionMatrix& cm) {
  Metrics m;
  const auto tp = static_cast<double>(cm.tp);
  const auto fp = static_cast<double>(cm.fp);
  const auto tn = static_cast<double>(cm.tn);
  const auto fn = static_cast<double>(cm.fn);
  m.sen = ratio(tp, tp + fn, "sen", m.degenerate);
  m.spe = ratio(tn, tn + fp, "spe", m.degenerate);
  m.pre = ratio(tp, tp + fp, "pre", m.degenerate);
  m.f1 = ratio(2.0 * m.pre * m.sen, m.pre + m.sen, "f1", m.degenerate);
  m.acc = ratio(tp + tn, static_cast<double>(cm.total()), "acc", m.degenerate);
  m.gm = std::sqrt(m.sen * m.spe);
  return m;
}

MetricReport aggregate_folds(std::vector<FoldResult> per_fold) {
  if (per_fold.empty()) throw UsageError("aggregate_folds: no folds");
  MetricReport report;
  const auto n = static_cast<double>(per_fold.size());
  for (const auto& f : per_fold) {
    report.cumulative += f.cm;
    report.averaged.sen += f.metrics.sen;
    report.averaged.spe += f.metrics.spe;
    report.averaged.pre += f.metrics.pre;
    report.averaged.f1 += f.metrics.f1;
    report.averaged.acc += f.metrics.acc;
    report.averaged.gm += f.metrics.gm;
  }
  report.averaged.sen /= n;
  report.averaged.spe /= n;
  report.averaged.pre /= n;
  report.averaged.f1 /= n;
  report.averaged.acc /= n;
  report.averaged.gm /= n;
  report.per_fold = std::move(per_fold);
  return report;
}

std::vector<MultiViewSample> select(const std::vector<MultiViewSample>& samples,
                                    std::span<const std::size_t> indices) {
  std::vector<MultiViewSample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(samples.at(i));
  return out;
}

namespace {

std::vector<int> labels_of(const std::vector<MultiViewSample>& samples) {
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  return labels;
}

FoldResult evaluate_fold(const std::vector<MultiViewSample>& dataset, const FoldPlan& plan,
                         std::size_t fold, const Learner& learner, std::uint64_t seed,
                         double threshold) {
  const auto train_idx = plan.train_indices(fold);
  const auto test_idx = plan.test_indices(fold);
  const FittedModel model = learner(select(dataset, train_idx), seed);
  std::vector<double> probs;
  std::vector<int> labels;
  for (std::size_t i : test_idx) {
    probs.push_back(model.predict(dataset[i]));
    labels.push_back(dataset[i].label);
  }
  FoldResult r;
  r.cm = confusion(probs, labels, threshold);
  r.metrics = metrics_from_cm(r.cm);
  r.details = model.details;
  return r;
}

}  // namespace

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(fold) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

GridSearchResult grid_search(std::span<const GridCandidate> grid, const std::vector<MultiViewSample>& train_set,
                             std::uint64_t seed, double threshold, std::size_t folds) {
  if (grid.empty()) throw UsageError("grid_search: empty grid");
  GridSearchResult result;
  const std::vector<int> labels = labels_of(train_set);
  const FoldPlan plan = stratified_kfold(labels, folds, seed);
  for (const auto& candidate : grid) {
    double acc = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
      acc += evaluate_fold(train_set, plan, f, candidate.learner, fold_seed(seed, f), threshold).metrics.acc;
    }
    result.mean_accuracy.push_back(acc / static_cast<double>(folds));
  }
  // strict > keeps the first of equal scores
  for (std::size_t i = 1; i < result.mean_accuracy.size(); ++i) {
    if (result.mean_accuracy[i] > result.mean_accuracy[result.best]) result.best = i;
  }
  return result;
}

MetricReport run_experiment(const std::vector<MultiViewSample>& dataset, const Learner& learner,
                            const ExperimentConfig& config) {
  const std::vector<int> labels = labels_of(dataset);
  const auto n_pos = std::count(labels.begin(), labels.end(), 1);
  if (n_pos == 0 || static_cast<std::size_t>(n_pos) == labels.size()) {
    throw UsageError("run_experiment: dataset must contain both classes");
  }
  const FoldPlan plan = stratified_kfold(labels, config.folds, config.seed);
  std::vector<FoldResult> results(config.folds);
  std::vector<std::exception_ptr> errors(config.folds);
  const auto folds = static_cast<std::ptrdiff_t>(config.folds);
  const int jobs = static_cast<int>(std::max<std::size_t>(1, config.jobs));
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
  for (std::ptrdiff_t f = 0; f < folds; ++f) {
    const auto fi = static_cast<std::size_t>(f);
    try {
      results[fi] = evaluate_fold(dataset, plan, fi, learner, fold_seed(config.seed, fi), config.threshold);
    } catch (...) {
      errors[fi] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return aggregate_folds(std::move(results));
}

}  // namespace safnet
