#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "safnet/baselines.hpp"
#include "safnet/evaluation.hpp"
#include "safnet/model.hpp"
#include "safnet/training.hpp"

namespace safnet {

enum class ModelKind { safnet, knn, mlp };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);

/// Everything needed to build a Learner for one model family.
struct ModelSpec {
  ModelKind kind = ModelKind::safnet;
  std::size_t d_model = 64;
  std::size_t d_k = 32;
  TrainConfig train;
  std::size_t knn_k = 5;
  std::size_t mlp_hidden = 128;
  bool standardize = false;
  // Inner grid search per training set when enabled.
  bool grid = false;
  std::vector<std::size_t> knn_grid{kKnnGrid.begin(), kKnnGrid.end()};
  std::vector<std::size_t> mlp_hidden_grid{32, 64, 128};
  std::vector<std::size_t> d_k_grid{8, 16, 32};
};

/// Learner for the spec without any grid search.
Learner make_learner(const ModelSpec& spec);

/// One candidate per value of the family's grid parameter.
std::vector<GridCandidate> make_grid(const ModelSpec& spec);

/// Learner that grid-searches its training set before fitting the winner;
/// the chosen parameter is recorded in FittedModel::details.
Learner make_grid_learner(const ModelSpec& spec);

/// make_grid_learner when spec.grid is set, make_learner otherwise.
Learner learner_for(const ModelSpec& spec);

}  // namespace safnet
