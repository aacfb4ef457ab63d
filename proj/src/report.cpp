#include "safnet/report.hpp"

#include <cstdio>

#include "safnet/errors.hpp"

namespace safnet {

using nlohmann::json;

json to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

json to_json(const Metrics& m) {
  json j = {{"sen", m.sen}, {"spe", m.spe}, {"pre", m.pre}, {"f1", m.f1}, {"acc", m.acc}, {"gm", m.gm}};
  if (!m.degenerate.empty()) j["degenerate"] = m.degenerate;
  return j;
}

json to_json(const FoldResult& fold) {
  json j = {{"n_test", fold.cm.total()}, {"confusion", to_json(fold.cm)}, {"metrics", to_json(fold.metrics)}};
  if (!fold.details.empty()) j["details"] = fold.details;
  return j;
}

json report_json(const MetricReport& report) {
  json folds = json::array();
  for (std::size_t i = 0; i < report.per_fold.size(); ++i) {
    json f = to_json(report.per_fold[i]);
    f["fold"] = i;
    folds.push_back(std::move(f));
  }
  Metrics averaged = report.averaged;
  averaged.degenerate.clear();
  return {{"folds", report.per_fold.size()},
          {"per_fold", std::move(folds)},
          {"averaged", to_json(averaged)},
          {"cumulative", to_json(report.cumulative)}};
}

namespace {

json table2(const ConfusionMatrix& cm) {
  return {{"labels", {"Non-MI", "MI"}},
          {"matrix", {{cm.tn, cm.fp}, {cm.fn, cm.tp}}},
          {"tn", cm.tn},
          {"fp", cm.fp},
          {"fn", cm.fn},
          {"tp", cm.tp}};
}

}  // namespace

json confusion_json(const MetricReport& report) {
  json folds = json::array();
  for (const auto& f : report.per_fold) folds.push_back(table2(f.cm));
  return {{"cumulative", table2(report.cumulative)}, {"per_fold", std::move(folds)}};
}

std::string report_table(const std::string& model_name, const MetricReport& report) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%-8s %7s %7s %7s %7s %7s %7s\n", "Model", "Sen", "Spe", "Pre", "F1", "Acc", "GM");
  out += line;
  const Metrics& m = report.averaged;
  std::snprintf(line, sizeof line, "%-8s %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f\n", model_name.c_str(), 100 * m.sen,
                100 * m.spe, 100 * m.pre, 100 * m.f1, 100 * m.acc, 100 * m.gm);
  out += line;
  return out;
}

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), j.at("data").get<std::vector<double>>());
}

json params_to_json(const SafNetParams& p) {
  json j = {{"model", "safnet"},
            {"dims", {{"d_in", p.dims.d_in}, {"d_model", p.dims.d_model}, {"d_k", p.dims.d_k}, {"n_views", p.dims.n_views}}}};
  const auto tensors = p.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) j["tensors"][std::string(SafNetParams::kTensorNames[i])] = matrix_to_json(*tensors[i]);
  return j;
}

SafNetParams safnet_params_from_json(const json& j) {
  if (j.value("model", "") != "safnet") throw UsageError("model file does not hold SAF-Net parameters");
  SafNetParams p;
  const json& d = j.at("dims");
  p.dims = {d.at("d_in").get<std::size_t>(), d.at("d_model").get<std::size_t>(), d.at("d_k").get<std::size_t>(),
            d.at("n_views").get<std::size_t>()};
  auto tensors = p.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i)
    *tensors[i] = matrix_from_json(j.at("tensors").at(std::string(SafNetParams::kTensorNames[i])));
  p.check_shapes();
  return p;
}

json params_to_json(const MlpParams& p) {
  json j = {{"model", "mlp"}};
  const auto tensors = p.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) j["tensors"][std::string(MlpParams::kTensorNames[i])] = matrix_to_json(*tensors[i]);
  return j;
}

MlpParams mlp_params_from_json(const json& j) {
  if (j.value("model", "") != "mlp") throw UsageError("model file does not hold MLP parameters");
  MlpParams p;
  auto tensors = p.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i)
    *tensors[i] = matrix_from_json(j.at("tensors").at(std::string(MlpParams::kTensorNames[i])));
  const MlpParams expected = MlpParams::zeros(p.input_size(), p.hidden_size());
  const auto want = expected.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (!tensors[i]->same_shape(*want[i])) throw ShapeError("model file: inconsistent MLP tensor shapes");
  }
  return p;
}

}  // namespace safnet
