#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "safnet/baselines.hpp"
#include "safnet/dataio.hpp"
#include "safnet/errors.hpp"
#include "safnet/evaluation.hpp"
#include "safnet/experiment.hpp"
#include "safnet/gradcheck.hpp"
#include "safnet/report.hpp"
#include "safnet/training.hpp"

namespace safnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag values. A --config file fills these first; flags given on the command
// line then overwrite them.
struct RunConfig {
  std::string features;
  std::string model = "safnet";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;
  std::size_t folds = 10;
  bool grid = false;
  bool standardize = false;
  std::string model_file;

  // training
  std::size_t epochs = 500;
  double lr = 1e-3;
  std::size_t batch_size = 0;
  std::optional<double> class_weight_pos;
  std::optional<double> class_weight_neg;
  double threshold = 0.5;
  std::size_t d_model = 64;
  std::size_t d_k = 32;
  std::size_t k = 5;
  std::size_t hidden = 128;
  std::vector<std::size_t> knn_grid{kKnnGrid.begin(), kKnnGrid.end()};
  std::vector<std::size_t> hidden_grid{32, 64, 128};
  std::vector<std::size_t> d_k_grid{8, 16, 32};

  // synth
  std::size_t n = 160;
  std::size_t pos = 103;
  std::size_t dim = 64;
  std::string mode = "linear";
  double signal = 3.0;
  double noise = 1.0;

  // gradcheck, desk-scale dimensions
  std::size_t d_in = 20;
  std::size_t gc_d_model = 8;
  std::size_t gc_d_k = 4;
  std::size_t gc_hidden = 6;
  std::size_t samples = 6;
  double tolerance = 1e-6;
};

template <class T>
void take(const json& j, const char* key, T& dst, std::set<std::string>& used) {
  if (j.contains(key)) {
    dst = j.at(key).get<T>();
    used.insert(key);
  }
}

template <class T>
void take(const json& j, const char* key, std::optional<T>& dst, std::set<std::string>& used) {
  if (j.contains(key)) {
    dst = j.at(key).get<T>();
    used.insert(key);
  }
}

void apply_config_file(const std::string& path, RunConfig& c) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  std::set<std::string> used;
  try {
    take(j, "features", c.features, used);
    take(j, "model", c.model, used);
    take(j, "seed", c.seed, used);
    take(j, "out", c.out, used);
    take(j, "jobs", c.jobs, used);
    take(j, "folds", c.folds, used);
    take(j, "grid", c.grid, used);
    take(j, "standardize", c.standardize, used);
    take(j, "model_file", c.model_file, used);
    take(j, "epochs", c.epochs, used);
    take(j, "lr", c.lr, used);
    take(j, "batch_size", c.batch_size, used);
    take(j, "class_weight_pos", c.class_weight_pos, used);
    take(j, "class_weight_neg", c.class_weight_neg, used);
    take(j, "threshold", c.threshold, used);
    take(j, "d_model", c.d_model, used);
    take(j, "d_k", c.d_k, used);
    take(j, "k", c.k, used);
    take(j, "hidden", c.hidden, used);
    take(j, "knn_grid", c.knn_grid, used);
    take(j, "hidden_grid", c.hidden_grid, used);
    take(j, "d_k_grid", c.d_k_grid, used);
    take(j, "n", c.n, used);
    take(j, "pos", c.pos, used);
    take(j, "dim", c.dim, used);
    take(j, "mode", c.mode, used);
    take(j, "signal", c.signal, used);
    take(j, "noise", c.noise, used);
    take(j, "d_in", c.d_in, used);
    take(j, "samples", c.samples, used);
    take(j, "tolerance", c.tolerance, used);
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (!used.count(key)) throw UsageError("config file " + path + ": unknown key '" + key + "'");
  }
}

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

void add_common(CLI::App* cmd, std::string& config_path) {
  cmd->add_option("--config", config_path, "JSON file with option values (flags override)");
}

void add_training(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--epochs", c.epochs, "Training epochs");
  cmd->add_option("--lr", c.lr, "Adam learning rate");
  cmd->add_option("--batch-size", c.batch_size, "Mini-batch size (0 = full batch)");
  cmd->add_option("--class-weight-pos", c.class_weight_pos, "Override positive class weight");
  cmd->add_option("--class-weight-neg", c.class_weight_neg, "Override negative class weight");
  cmd->add_option("--threshold", c.threshold, "Decision threshold on the positive probability");
  cmd->add_option("--d-model", c.d_model, "SAF-Net embedding width");
  cmd->add_option("--d-k", c.d_k, "SAF-Net attention projection width");
  cmd->add_option("--k", c.k, "KNN neighbour count");
  cmd->add_option("--hidden", c.hidden, "MLP hidden width");
  cmd->add_flag("--standardize", c.standardize, "Z-score features using training-set statistics");
}

std::uint64_t require_seed(const RunConfig& c) {
  if (!c.seed) throw UsageError("--seed is required");
  return *c.seed;
}

Dataset load_dataset(const RunConfig& c) {
  if (c.features.empty()) throw UsageError("--features is required");
  if (!fs::exists(c.features)) throw IngestionError("feature file not found: " + c.features);
  Dataset ds = load_feature_csv(c.features);
  if (ds.samples.empty()) throw IngestionError(c.features + ": no samples (feature dimension undefined)");
  return ds;
}

ModelSpec model_spec(const RunConfig& c) {
  ModelSpec s;
  s.kind = parse_model_kind(c.model);
  s.d_model = c.d_model;
  s.d_k = c.d_k;
  s.train.learning_rate = c.lr;
  s.train.epochs = c.epochs;
  s.train.batch_size = c.batch_size;
  s.train.class_weight_pos = c.class_weight_pos;
  s.train.class_weight_neg = c.class_weight_neg;
  s.train.threshold = c.threshold;
  s.train.validate();
  s.knn_k = c.k;
  if (c.k == 0) throw UsageError("--k must be positive");
  s.mlp_hidden = c.hidden;
  s.standardize = c.standardize;
  s.grid = c.grid;
  s.knn_grid = c.knn_grid;
  s.mlp_hidden_grid = c.hidden_grid;
  s.d_k_grid = c.d_k_grid;
  if (s.kind == ModelKind::safnet) ModelDims{1, s.d_model, s.d_k, 2}.validate();
  return s;
}

json spec_json(const RunConfig& c, const ModelSpec& s) {
  json j = {{"model", to_string(s.kind)}, {"seed", *c.seed}, {"standardize", s.standardize}, {"grid", s.grid},
            {"threshold", s.train.threshold}};
  switch (s.kind) {
    case ModelKind::safnet:
      j["d_model"] = s.d_model;
      j["d_k"] = s.d_k;
      break;
    case ModelKind::knn:
      j["k"] = s.knn_k;
      break;
    case ModelKind::mlp:
      j["hidden"] = s.mlp_hidden;
      break;
  }
  if (s.kind != ModelKind::knn) {
    j["epochs"] = s.train.epochs;
    j["learning_rate"] = s.train.learning_rate;
    j["batch_size"] = s.train.batch_size;
  }
  if (s.grid) {
    if (s.kind == ModelKind::knn) j["grid_values"] = s.knn_grid;
    if (s.kind == ModelKind::mlp) j["grid_values"] = s.mlp_hidden_grid;
    if (s.kind == ModelKind::safnet) j["grid_values"] = s.d_k_grid;
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

fs::path output_dir(const RunConfig& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

int cmd_cv(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  const ModelSpec spec = model_spec(c);
  const Dataset ds = load_dataset(c);
  ExperimentConfig ec;
  ec.folds = c.folds;
  ec.seed = seed;
  ec.threshold = spec.train.threshold;
  ec.jobs = c.jobs;
  const MetricReport report = run_experiment(ds.samples, learner_for(spec), ec);

  json rj = report_json(report);
  rj["config"] = spec_json(c, spec);
  rj["n_samples"] = ds.samples.size();
  rj["d_in"] = *ds.d_in;
  const std::string table = report_table(to_string(spec.kind), report);
  if (!c.out.empty()) {
    const fs::path dir = output_dir(c);
    write_text(dir / "report.json", rj.dump(2) + "\n");
    write_text(dir / "report.txt", table);
    write_text(dir / "confusion.json", confusion_json(report).dump(2) + "\n");
  }
  out << table;
  return kExitOk;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  const ModelSpec spec = model_spec(c);
  if (c.out.empty()) throw UsageError("--out is required for train");
  const Dataset ds = load_dataset(c);
  std::vector<MultiViewSample> train = ds.samples;
  json model;
  json history = json::array();
  std::optional<Standardizer> scaler;
  if (spec.standardize) {
    scaler = Standardizer::fit(train);
    train = scaler->apply(train);
  }
  switch (spec.kind) {
    case ModelKind::safnet: {
      TrainConfig cfg = spec.train;
      cfg.seed = seed;
      const ModelDims dims{*ds.d_in, spec.d_model, spec.d_k, 2};
      const TrainResult r = train_model(train, dims, cfg);
      model = params_to_json(r.params);
      history = r.history.loss;
      out << "final loss " << r.history.loss.back() << "\n";
      break;
    }
    case ModelKind::mlp: {
      MlpConfig cfg;
      cfg.hidden = spec.mlp_hidden;
      cfg.train = spec.train;
      cfg.train.seed = seed;
      const MlpTrainResult r = mlp_train(train, cfg);
      model = params_to_json(r.params);
      history = r.history.loss;
      out << "final loss " << r.history.loss.back() << "\n";
      break;
    }
    case ModelKind::knn: {
      const KnnModel knn(train, spec.knn_k);
      model = {{"model", "knn"}, {"k", knn.k()}, {"points", matrix_to_json(knn.points())}, {"labels", knn.labels()}};
      out << "stored " << knn.labels().size() << " training points\n";
      break;
    }
  }
  model["threshold"] = spec.train.threshold;
  if (scaler) model["standardizer"] = {{"mean", scaler->mean()}, {"scale", scaler->scale()}};
  const fs::path dir = output_dir(c);
  write_text(dir / "model.json", model.dump() + "\n");
  if (!history.empty()) write_text(dir / "history.json", json{{"loss", history}}.dump(2) + "\n");
  return kExitOk;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  if (c.model_file.empty()) throw UsageError("--model-file is required for eval");
  std::ifstream in(c.model_file);
  if (!in) throw IngestionError("model file not found: " + c.model_file);
  json model;
  try {
    in >> model;
  } catch (const json::exception& e) {
    throw IngestionError("model file " + c.model_file + ": " + e.what());
  }
  const Dataset ds = load_dataset(c);
  std::vector<MultiViewSample> samples = ds.samples;
  if (model.contains("standardizer")) {
    const auto mean = model["standardizer"]["mean"].get<std::vector<double>>();
    const auto scale = model["standardizer"]["scale"].get<std::vector<double>>();
    if (mean.size() != *ds.d_in) throw ShapeError("standardizer dimension does not match features");
    for (auto& s : samples)
      for (std::size_t j = 0; j < mean.size(); ++j)
        for (std::size_t v = 0; v < s.features.cols(); ++v) s.features(j, v) = (s.features(j, v) - mean[j]) / scale[j];
  }
  const double threshold = model.value("threshold", 0.5);
  std::vector<double> probs;
  const std::string kind = model.value("model", "");
  if (kind == "safnet") {
    const SafNetParams p = safnet_params_from_json(model);
    for (const auto& s : samples) probs.push_back(predict_proba(s, p));
  } else if (kind == "mlp") {
    const MlpParams p = mlp_params_from_json(model);
    for (const auto& s : samples) probs.push_back(mlp_predict_proba(p, flatten_features(s)));
  } else if (kind == "knn") {
    const KnnModel knn(matrix_from_json(model.at("points")), model.at("labels").get<std::vector<int>>(),
                       model.at("k").get<std::size_t>());
    for (const auto& s : samples) probs.push_back(knn_predict(knn, flatten_features(s)).positive_fraction);
  } else {
    throw IngestionError("model file " + c.model_file + ": unknown model '" + kind + "'");
  }
  const ConfusionMatrix cm = confusion(probs, ds.labels(), threshold);
  MetricReport single = aggregate_folds({FoldResult{cm, metrics_from_cm(cm), {}}});
  const std::string table = report_table(kind, single);
  if (!c.out.empty()) {
    const fs::path dir = output_dir(c);
    json ej = {{"confusion", to_json(cm)}, {"metrics", to_json(single.per_fold[0].metrics)}, {"probabilities", probs}};
    write_text(dir / "eval.json", ej.dump(2) + "\n");
  }
  out << table;
  return kExitOk;
}

int cmd_gridsearch(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = require_seed(c);
  ModelSpec spec = model_spec(c);
  const Dataset ds = load_dataset(c);
  const auto grid = make_grid(spec);
  const GridSearchResult r = grid_search(grid, ds.samples, seed, spec.train.threshold);
  json candidates = json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    candidates.push_back({{"label", grid[i].label}, {"params", grid[i].params}, {"mean_accuracy", r.mean_accuracy[i]}});
    out << grid[i].label << "  mean acc " << r.mean_accuracy[i] * 100.0 << "%" << (i == r.best ? "  <- best" : "")
        << "\n";
  }
  if (!c.out.empty()) {
    const fs::path dir = output_dir(c);
    json gj = {{"model", to_string(spec.kind)}, {"seed", seed}, {"folds", kInnerFolds}, {"candidates", candidates},
               {"best", grid[r.best].params}};
    write_text(dir / "gridsearch.json", gj.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
  SynthSpec spec;
  spec.seed = require_seed(c);
  if (c.out.empty()) throw UsageError("--out is required for synth");
  spec.n_samples = c.n;
  spec.n_pos = c.pos;
  spec.d_in = c.dim;
  spec.mode = parse_synth_mode(c.mode);
  spec.signal_strength = c.signal;
  spec.noise_sigma = c.noise;
  spec.validate();
  const Dataset ds = synth_generate(spec);
  write_feature_csv(ds, fs::path(c.out));
  out << "wrote " << ds.samples.size() << " patients (" << ds.positives() << " positive) to " << c.out << "\n";
  return kExitOk;
}

std::vector<MultiViewSample> random_batch(std::size_t n, std::size_t d_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<MultiViewSample> batch(n);
  for (std::size_t i = 0; i < n; ++i) {
    batch[i].patient_id = "G" + std::to_string(i);
    batch[i].label = static_cast<int>(i % 2);
    batch[i].features = Matrix(d_in, 2);
    for (auto& x : batch[i].features.values()) x = normal(rng);
  }
  return batch;
}

int cmd_gradcheck(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = c.seed.value_or(0);
  if (c.samples < 2) throw UsageError("--samples must be at least 2 (both classes are needed)");
  if (!(c.tolerance > 0.0)) throw UsageError("--tolerance must be positive");
  std::mt19937_64 rng(seed);
  const auto batch = random_batch(c.samples, c.d_in, rng);
  GradCheckReport report;
  const ModelKind kind = parse_model_kind(c.model);
  if (kind == ModelKind::safnet) {
    const ModelDims dims{c.d_in, c.gc_d_model, c.gc_d_k, 2};
    dims.validate();
    SafNetParams params = SafNetParams::glorot(dims, seed + 1);
    for (auto& x : params.embed_bias.values()) x = 0.1;
    const ClassWeights w = resolve_class_weights(batch, TrainConfig{});
    const LossAndGrad lg = backward_serial(batch, params, w);
    report = grad_check(params, lg.grads, [&](const SafNetParams& p) { return batch_loss(batch, p, w); }, c.tolerance);
  } else if (kind == ModelKind::mlp) {
    const MlpParams params = MlpParams::glorot(2 * c.d_in, c.gc_hidden, seed + 1);
    const MlpLossAndGrad lg = mlp_backward(batch, params);
    report = grad_check(params, lg.grads, [&](const MlpParams& p) { return mlp_batch_loss(batch, p); }, c.tolerance);
  } else {
    throw UsageError("gradcheck applies to safnet or mlp");
  }
  char line[160];
  for (const auto& t : report.tensors) {
    std::snprintf(line, sizeof line, "%-16s max_rel_error %.3e  max_abs_error %.3e  %s\n", t.name.c_str(),
                  t.max_rel_error, t.max_abs_error, t.passed ? "ok" : "FAIL");
    out << line;
  }
  out << (report.passed() ? "PASS" : "FAIL") << " (tolerance " << c.tolerance << ")\n";
  return report.passed() ? kExitOk : kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::string config_path;
  try {
    if (auto path = find_config_path(args)) apply_config_file(*path, c);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App app{"SAF-Net multi-view fusion classifier"};
  app.require_subcommand(1);

  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  auto* train = app.add_subcommand("train", "Train on a feature file and save the model");
  auto* eval = app.add_subcommand("eval", "Evaluate a saved model on a feature file");
  auto* gridsearch = app.add_subcommand("gridsearch", "Inner 3-fold grid search over one model family");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic feature file");
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");

  for (auto* cmd : {cv, train, eval, gridsearch}) {
    add_common(cmd, config_path);
    cmd->add_option("--features", c.features, "Feature CSV");
    cmd->add_option("--model", c.model, "safnet, knn or mlp");
    cmd->add_option("--seed", c.seed, "Random seed");
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option("--jobs", c.jobs, "Folds evaluated concurrently");
    add_training(cmd, c);
  }
  cv->add_option("--folds", c.folds, "Outer fold count");
  cv->add_flag("--grid", c.grid, "Grid-search hyper-parameters on each training fold");
  eval->add_option("--model-file", c.model_file, "model.json written by train");

  add_common(synth, config_path);
  synth->add_option("--n", c.n, "Patients");
  synth->add_option("--pos", c.pos, "Positive patients");
  synth->add_option("--dim", c.dim, "Features per view");
  synth->add_option("--mode", c.mode, "linear or interaction");
  synth->add_option("--signal", c.signal, "Signal strength");
  synth->add_option("--noise", c.noise, "Gaussian noise sigma");
  synth->add_option("--seed", c.seed, "Random seed");
  synth->add_option("--out", c.out, "Output CSV path");

  add_common(gradcheck, config_path);
  gradcheck->add_option("--model", c.model, "safnet or mlp");
  gradcheck->add_option("--d-in", c.d_in, "Features per view");
  gradcheck->add_option("--d-model", c.gc_d_model, "Embedding width");
  gradcheck->add_option("--d-k", c.gc_d_k, "Attention projection width");
  gradcheck->add_option("--hidden", c.gc_hidden, "MLP hidden width");
  gradcheck->add_option("--samples", c.samples, "Batch size");
  gradcheck->add_option("--seed", c.seed, "Random seed");
  gradcheck->add_option("--tolerance", c.tolerance, "Maximum relative error");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (cv->parsed()) return cmd_cv(c, out);
    if (train->parsed()) return cmd_train(c, out);
    if (eval->parsed()) return cmd_eval(c, out);
    if (gridsearch->parsed()) return cmd_gridsearch(c, out);
    if (synth->parsed()) return cmd_synth(c, out);
    if (gradcheck->parsed()) return cmd_gradcheck(c, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IngestionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace safnet::cli
