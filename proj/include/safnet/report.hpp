#pragma once

#include <string>

#include <json.hpp>

#include "safnet/baselines.hpp"
#include "safnet/evaluation.hpp"
#include "safnet/model.hpp"

namespace safnet {

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const FoldResult& fold);

/// Per-fold array, averaged metrics and cumulative confusion matrix.
nlohmann::json report_json(const MetricReport& report);

/// Ground-truth-by-prediction layout, rows Non-MI then MI.
nlohmann::json confusion_json(const MetricReport& report);

/// Aligned table of averaged metrics in percent with two decimals.
std::string report_table(const std::string& model_name, const MetricReport& report);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json params_to_json(const SafNetParams& p);
SafNetParams safnet_params_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const MlpParams& p);
MlpParams mlp_params_from_json(const nlohmann::json& j);

}  // namespace safnet
