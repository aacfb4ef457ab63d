// Runs the eight acceptance criteria and prints one PASS/FAIL line for each.
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "safnet/dataio.hpp"
#include "safnet/evaluation.hpp"
#include "safnet/experiment.hpp"
#include "safnet/gradcheck.hpp"
#include "safnet/model.hpp"
#include "safnet/training.hpp"

using namespace safnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

Outcome metric_oracle() {
  struct Row {
    const char* model;
    std::size_t tn, fp, fn, tp;
    double published;
  };
  const Row rows[] = {{"SAF-Net", 45, 12, 23, 80, 78.13}, {"RF", 30, 27, 12, 91, 75.62},
                      {"DT", 29, 28, 35, 68, 60.63},      {"KNN", 34, 23, 18, 85, 74.37},
                      {"SVM", 23, 34, 10, 93, 72.50},     {"MLP", 37, 20, 24, 79, 72.50}};
  Outcome o{true, ""};
  for (const Row& r : rows) {
    const double acc = 100.0 * metrics_from_cm({r.tp, r.fp, r.tn, r.fn}).acc;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s %.3f ", r.model, acc);
    o.detail += buf;
    if (std::abs(acc - r.published) > 0.01 + 1e-9) o.passed = false;
  }
  return o;
}

Outcome gradient_check() {
  const ModelDims dims{20, 8, 4, 2};
  std::mt19937_64 rng(2);
  const auto batch = oracle::random_samples(6, dims.d_in, rng);
  SafNetParams params = SafNetParams::glorot(dims, 1);
  params.embed_bias.fill(0.1);
  const ClassWeights w = inverse_frequency_weights(std::vector<int>{0, 1, 0, 1, 0, 1});
  const LossAndGrad lg = backward(batch, params, w);
  const GradCheckReport report = grad_check(
      params, lg.grads, [&](const SafNetParams& p) { return batch_loss(batch, p, w); }, 1e-6, kGradCheckStep);
  Outcome o{report.passed(), ""};
  double worst = 0.0;
  for (const auto& t : report.tensors) {
    worst = std::max(worst, t.max_rel_error);
    if (!t.passed) o.detail += t.name + " ";
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max rel error %.2e over %zu tensors", worst, report.tensors.size());
  o.detail += buf;
  return o;
}

Outcome attention_invariants() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> width(1, 12);
  double sum_err = 0.0, perm_err = 0.0, uniform_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d_k = width(rng);
    const ModelDims dims{4, d_k + width(rng), d_k, 2};
    SafNetParams p = oracle::random_params(dims, rng);
    const Matrix latent = oracle::random_matrix(2, dims.d_model, rng, 1.0 + trial % 5);

    const AttentionResult base = self_attention(latent, p);
    for (std::size_t r = 0; r < 2; ++r) sum_err = std::max(sum_err, std::abs(base.weights(r, 0) + base.weights(r, 1) - 1.0));

    Matrix swapped(2, dims.d_model);
    for (std::size_t c = 0; c < dims.d_model; ++c) {
      swapped(0, c) = latent(1, c);
      swapped(1, c) = latent(0, c);
    }
    const AttentionResult moved = self_attention(swapped, p);
    for (std::size_t c = 0; c < d_k; ++c) {
      perm_err = std::max(perm_err, std::abs(moved.out(0, c) - base.out(1, c)));
      perm_err = std::max(perm_err, std::abs(moved.out(1, c) - base.out(0, c)));
    }
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        perm_err = std::max(perm_err, std::abs(moved.weights(i, j) - base.weights(1 - i, 1 - j)));

    p.wq.fill(0.0);
    const AttentionResult flat = self_attention(latent, p);
    for (double v : flat.weights.values()) uniform_err = std::max(uniform_err, std::abs(v - 0.5));
  }
  Outcome o;
  o.passed = sum_err <= 1e-12 && perm_err <= 1e-12 && uniform_err <= 1e-12;
  char buf[160];
  std::snprintf(buf, sizeof buf, "row sum %.2e, permutation %.2e, zero-query %.2e", sum_err, perm_err, uniform_err);
  o.detail = buf;
  return o;
}

Outcome stratification() {
  std::vector<int> labels(160, 0);
  for (std::size_t i = 0; i < 103; ++i) labels[i] = 1;
  Outcome o{true, ""};
  for (std::uint64_t seed : {0, 1, 42, 2024}) {
    const FoldPlan plan = stratified_kfold(labels, 10, seed);
    std::vector<int> hits(160, 0);
    for (std::size_t f = 0; f < 10; ++f) {
      const auto idx = plan.test_indices(f);
      std::size_t pos = 0;
      for (std::size_t i : idx) {
        ++hits[i];
        pos += static_cast<std::size_t>(labels[i]);
      }
      const std::size_t neg = idx.size() - pos;
      if (idx.size() != 16 || pos < 10 || pos > 11 || neg < 5 || neg > 6) o.passed = false;
    }
    for (int h : hits)
      if (h != 1) o.passed = false;
  }
  o.detail = "4 seeds, 10 folds each";
  return o;
}

MetricReport safnet_cv(const Dataset& ds, std::uint64_t seed) {
  ModelSpec spec;
  spec.kind = ModelKind::safnet;
  ExperimentConfig cfg;
  cfg.seed = seed;
  return run_experiment(ds.samples, learner_for(spec), cfg);
}

Outcome synthetic_linear() {
  SynthSpec spec;
  spec.mode = SynthMode::linear;
  spec.signal_strength = 3.0;
  spec.noise_sigma = 1.0;
  spec.seed = 11;
  const MetricReport r = safnet_cv(synth_generate(spec), 7);
  const double acc = 100.0 * r.averaged.acc;
  Outcome o;
  o.passed = acc >= 95.0 && acc >= 64.375 + 30.0;
  o.detail = "mean acc " + std::to_string(acc) + "%";
  return o;
}

Outcome synthetic_interaction() {
  SynthSpec spec;
  spec.mode = SynthMode::interaction;
  spec.seed = 12;
  spec.noise_sigma = 0.0;
  const Dataset clean = synth_generate(spec);
  double gap = 0.0;
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t f = 0; f < spec.d_in; ++f) {
      double pos = 0.0, neg = 0.0;
      for (const auto& s : clean.samples) (s.label ? pos : neg) += s.features(f, v);
      gap = std::max(gap, std::abs(pos / static_cast<double>(spec.n_pos) -
                                   neg / static_cast<double>(spec.n_samples - spec.n_pos)));
    }

  spec.noise_sigma = 0.05;
  const MetricReport r = safnet_cv(synth_generate(spec), 7);
  const double acc = 100.0 * r.averaged.acc;
  Outcome o;
  o.passed = acc >= 85.0 && gap <= 1e-12;
  char buf[128];
  std::snprintf(buf, sizeof buf, "mean acc %.3f%%, largest per-view class-mean gap %.2e", acc, gap);
  o.detail = buf;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "safnet_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string csv = (dir / "features.csv").string();
  std::ostringstream sink;
  if (cli::run({"synth", "--seed", "5", "--dim", "16", "--out", csv}, sink, sink) != 0) return {false, "synth failed"};
  std::vector<std::string> reports;
  for (const char* name : {"a", "b"}) {
    const std::vector<std::string> args{"cv",       "--features", csv, "--model", "safnet",         "--seed", "9",
                                        "--epochs", "100",        "--out", (dir / name).string()};
    if (cli::run(args, sink, sink) != 0) return {false, "cv failed: " + sink.str()};
    reports.push_back(slurp(dir / name / "report.json"));
  }
  fs::remove_all(dir);
  Outcome o;
  o.passed = !reports[0].empty() && reports[0] == reports[1];
  o.detail = std::to_string(reports[0].size()) + " bytes compared";
  return o;
}

Outcome csv_round_trip() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> count(1, 20);
  std::uniform_int_distribution<int> exponent(-300, 300);
  std::uniform_real_distribution<double> mantissa(-1.0, 1.0);
  std::size_t values = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Dataset ds;
    const std::size_t d = count(rng);
    ds.d_in = d;
    const std::size_t n = count(rng);
    for (std::size_t i = 0; i < n; ++i) {
      MultiViewSample s{"r" + std::to_string(trial) + "_" + std::to_string(i), static_cast<int>(rng() % 2), Matrix(d, 2)};
      for (double& v : s.features.values()) {
        v = trial % 3 == 0 ? std::ldexp(mantissa(rng), exponent(rng)) : mantissa(rng) * 100.0;
        ++values;
      }
      ds.samples.push_back(std::move(s));
    }
    std::stringstream buf;
    write_feature_csv(ds, buf);
    const Dataset back = read_feature_csv(buf);
    if (back.samples.size() != n || back.d_in != ds.d_in) return {false, "shape changed in trial " + std::to_string(trial)};
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = ds.samples[i];
      const auto& b = back.samples[i];
      if (a.patient_id != b.patient_id || a.label != b.label || !(a.features == b.features))
        return {false, "mismatch in trial " + std::to_string(trial)};
    }
  }
  return {true, "100 datasets, " + std::to_string(values) + " values"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "metric oracle on published confusion matrices", 1.0, metric_oracle},
      {2, "analytic gradients vs finite differences", 60.0, gradient_check},
      {3, "attention invariants", 60.0, attention_invariants},
      {4, "stratified 10-fold on 103/57", 60.0, stratification},
      {5, "synthetic linear 10-fold CV", 300.0, synthetic_linear},
      {6, "synthetic cross-view interaction 10-fold CV", 600.0, synthetic_interaction},
      {7, "byte-identical cv reports", 300.0, determinism},
      {8, "CSV round trip", 60.0, csv_round_trip},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.budget_seconds) {
      o.passed = false;
      o.detail += " (over time budget)";
    }
    failures += o.passed ? 0 : 1;
    std::printf("AC%d %s: %s [%.2fs] %s\n", c.id, o.passed ? "PASS" : "FAIL", c.name, seconds, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
