#include "safnet/experiment.hpp"

#include <memory>

#include "safnet/dataio.hpp"
#include "safnet/errors.hpp"

namespace safnet {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "safnet") return ModelKind::safnet;
  if (name == "knn") return ModelKind::knn;
  if (name == "mlp") return ModelKind::mlp;
  throw UsageError("unknown model '" + name + "' (expected safnet, knn or mlp)");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::safnet:
      return "safnet";
    case ModelKind::knn:
      return "knn";
    case ModelKind::mlp:
      return "mlp";
  }
  return "unknown";
}

namespace {

Learner base_learner(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::safnet:
      return [spec](const std::vector<MultiViewSample>& train, std::uint64_t seed) {
        ModelDims dims;
        dims.d_in = train.front().features.rows();
        dims.n_views = train.front().features.cols();
        dims.d_model = spec.d_model;
        dims.d_k = spec.d_k;
        TrainConfig cfg = spec.train;
        cfg.seed = seed;
        auto params = std::make_shared<const SafNetParams>(train_model(train, dims, cfg).params);
        return FittedModel{[params](const MultiViewSample& s) { return predict_proba(s, *params); }, {}};
      };
    case ModelKind::knn:
      return [spec](const std::vector<MultiViewSample>& train, std::uint64_t) {
        auto model = std::make_shared<const KnnModel>(train, std::min(spec.knn_k, train.size()));
        return FittedModel{
            [model](const MultiViewSample& s) { return knn_predict(*model, flatten_features(s)).positive_fraction; },
            {{"k", static_cast<double>(model->k())}}};
      };
    case ModelKind::mlp:
      return [spec](const std::vector<MultiViewSample>& train, std::uint64_t seed) {
        MlpConfig cfg;
        cfg.hidden = spec.mlp_hidden;
        cfg.train = spec.train;
        cfg.train.seed = seed;
        auto params = std::make_shared<const MlpParams>(mlp_train(train, cfg).params);
        return FittedModel{[params](const MultiViewSample& s) { return mlp_predict_proba(*params, flatten_features(s)); },
                           {}};
      };
  }
  throw UsageError("unknown model kind");
}

// Fits the standardizer on the training fold only and applies it to queries.
Learner with_standardization(Learner inner) {
  return [inner = std::move(inner)](const std::vector<MultiViewSample>& train, std::uint64_t seed) {
    auto scaler = std::make_shared<const Standardizer>(Standardizer::fit(train));
    FittedModel fitted = inner(scaler->apply(train), seed);
    auto predict = std::move(fitted.predict);
    fitted.predict = [scaler, predict](const MultiViewSample& s) { return predict(scaler->apply(s)); };
    return fitted;
  };
}

}  // namespace

Learner make_learner(const ModelSpec& spec) {
  Learner l = base_learner(spec);
  return spec.standardize ? with_standardization(std::move(l)) : l;
}

std::vector<GridCandidate> make_grid(const ModelSpec& spec) {
  std::vector<GridCandidate> grid;
  auto add = [&](const std::string& key, std::size_t value, ModelSpec variant) {
    variant.grid = false;
    grid.push_back({key + "=" + std::to_string(value), {{key, static_cast<double>(value)}}, make_learner(variant)});
  };
  switch (spec.kind) {
    case ModelKind::knn:
      for (std::size_t k : spec.knn_grid) {
        ModelSpec v = spec;
        v.knn_k = k;
        add("k", k, v);
      }
      break;
    case ModelKind::mlp:
      for (std::size_t h : spec.mlp_hidden_grid) {
        ModelSpec v = spec;
        v.mlp_hidden = h;
        add("hidden", h, v);
      }
      break;
    case ModelKind::safnet:
      for (std::size_t dk : spec.d_k_grid) {
        ModelSpec v = spec;
        v.d_k = dk;
        add("d_k", dk, v);
      }
      break;
  }
  if (grid.empty()) throw UsageError("grid search: empty grid for model " + to_string(spec.kind));
  return grid;
}

Learner make_grid_learner(const ModelSpec& spec) {
  auto grid = std::make_shared<const std::vector<GridCandidate>>(make_grid(spec));
  const double threshold = spec.train.threshold;
  return [grid, threshold](const std::vector<MultiViewSample>& train, std::uint64_t seed) {
    const GridSearchResult search = grid_search(*grid, train, seed, threshold);
    const GridCandidate& best = (*grid)[search.best];
    FittedModel fitted = best.learner(train, seed);
    for (const auto& [key, value] : best.params) fitted.details[key] = value;
    fitted.details["inner_cv_accuracy"] = search.mean_accuracy[search.best];
    return fitted;
  };
}

Learner learner_for(const ModelSpec& spec) { return spec.grid ? make_grid_learner(spec) : make_learner(spec); }

}  // namespace safnet
