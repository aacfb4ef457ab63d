#include "safnet/dataio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string_view>
#include <unordered_map>

#include "safnet/errors.hpp"

namespace safnet {

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const MultiViewSample& s) { return s.label == 1; }));
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::string feature_csv_header(std::size_t d) {
  std::string h = "patient_id,label,view";
  char buf[32];
  for (std::size_t i = 0; i < d; ++i) {
    std::snprintf(buf, sizeof buf, ",f%04zu", i);
    h += buf;
  }
  return h;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string where(const std::string& source, std::size_t line_no) {
  return source + ":" + std::to_string(line_no) + ": ";
}

int view_index(std::string_view v) {
  if (v == "A2C") return 0;
  if (v == "A4C") return 1;
  return -1;
}

struct PendingPatient {
  int label = -1;
  std::vector<double> views[2];
  bool seen[2] = {false, false};
};

}  // namespace

Dataset read_feature_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(source + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split(line);
  if (header.size() < 3 || header[0] != "patient_id" || header[1] != "label" || header[2] != "view") {
    throw IngestionError(source + ": header must start with patient_id,label,view");
  }
  const std::size_t d = header.size() - 3;
  if (line != feature_csv_header(d)) {
    throw IngestionError(source + ": feature columns must be f0000..f" + std::to_string(d == 0 ? 0 : d - 1) +
                         " in order");
  }

  std::vector<std::string> order;
  std::unordered_map<std::string, PendingPatient> patients;
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw IngestionError(where(source, line_no) + "expected " + std::to_string(d) + " features, got " +
                           std::to_string(fields.size() < 3 ? 0 : fields.size() - 3));
    }
    const std::string id(fields[0]);
    if (id.empty()) throw IngestionError(where(source, line_no) + "empty patient_id");
    int label;
    if (fields[1] == "0") {
      label = 0;
    } else if (fields[1] == "1") {
      label = 1;
    } else {
      throw IngestionError(where(source, line_no) + "label must be 0 or 1, got '" + std::string(fields[1]) + "'");
    }
    const int view = view_index(fields[2]);
    if (view < 0) {
      throw IngestionError(where(source, line_no) + "view must be A2C or A4C, got '" + std::string(fields[2]) + "'");
    }

    auto [it, inserted] = patients.try_emplace(id);
    if (inserted) order.push_back(id);
    PendingPatient& p = it->second;
    if (p.label >= 0 && p.label != label) {
      throw IngestionError(where(source, line_no) + "label disagreement for patient " + id);
    }
    if (p.seen[view]) {
      throw IngestionError(where(source, line_no) + "duplicate " + kViewNames[view] + " row for patient " + id);
    }
    p.label = label;
    p.seen[view] = true;
    auto& values = p.views[view];
    values.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      const std::string_view f = fields[j + 3];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[j]);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(values[j])) {
        throw IngestionError(where(source, line_no) + "bad value '" + std::string(f) + "' in column f" +
                             std::to_string(j));
      }
    }
    ++rows;
  }

  Dataset ds;
  if (rows == 0) return ds;
  ds.d_in = d;
  ds.samples.reserve(order.size());
  for (const auto& id : order) {
    PendingPatient& p = patients.at(id);
    for (int v = 0; v < 2; ++v) {
      if (!p.seen[v]) throw IngestionError(source + ": patient " + id + " is missing view " + kViewNames[v]);
    }
    MultiViewSample s;
    s.patient_id = id;
    s.label = p.label;
    s.features = Matrix(d, 2);
    for (std::size_t j = 0; j < d; ++j) {
      s.features(j, 0) = p.views[0][j];
      s.features(j, 1) = p.views[1][j];
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset load_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open feature file " + path.string());
  return read_feature_csv(in, path.string());
}

void write_feature_csv(const Dataset& dataset, std::ostream& out) {
  std::size_t d = dataset.d_in.value_or(0);
  if (!dataset.samples.empty()) d = dataset.samples.front().features.rows();
  out << feature_csv_header(d) << '\n';
  char buf[64];
  std::string row;
  for (const auto& s : dataset.samples) {
    if (s.features.rows() != d || s.features.cols() != 2) {
      throw ShapeError("write_feature_csv: patient " + s.patient_id + " has features " +
                       s.features.shape_string() + ", expected " + std::to_string(d) + "x2");
    }
    for (int v = 0; v < 2; ++v) {
      row = s.patient_id;
      row += s.label == 1 ? ",1," : ",0,";
      row += kViewNames[v];
      for (std::size_t j = 0; j < d; ++j) {
        const auto res = std::to_chars(buf, buf + sizeof buf, s.features(j, static_cast<std::size_t>(v)),
                                       std::chars_format::general, 17);
        row += ',';
        row.append(buf, res.ptr);
      }
      row += '\n';
      out << row;
    }
  }
}

void write_feature_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_feature_csv(dataset, out);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

SynthMode parse_synth_mode(const std::string& name) {
  if (name == "linear") return SynthMode::linear;
  if (name == "interaction" || name == "cross-view-interaction") return SynthMode::interaction;
  throw UsageError("unknown synth mode '" + name + "' (expected linear or interaction)");
}

std::string to_string(SynthMode mode) { return mode == SynthMode::linear ? "linear" : "interaction"; }

void SynthSpec::validate() const {
  if (n_pos == 0 || n_pos >= n_samples) {
    throw UsageError("synth: need 0 < n_pos < n_samples, got n_pos=" + std::to_string(n_pos) +
                     " n_samples=" + std::to_string(n_samples));
  }
  if (d_in == 0) throw UsageError("synth: d_in must be positive");
  if (!(signal_strength >= 0.0)) throw UsageError("synth: signal_strength must be nonnegative");
  if (!(noise_sigma >= 0.0)) throw UsageError("synth: noise_sigma must be nonnegative");
}

namespace {

std::vector<double> random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

// Latent coordinates for one class with |u| = strength and an exactly zero
// sum in each view: antisymmetric pairs, plus an (s, s, -2s) triple when the
// count is odd. `agree` gives the sign relation between views (positive
// class: same sign).
std::vector<std::array<double, 2>> balanced_coordinates(std::size_t count, bool agree, double strength,
                                                        std::mt19937_64& rng) {
  const double a = strength;
  const double b = agree ? strength : -strength;
  std::vector<std::array<double, 2>> out;
  std::size_t remaining = count;
  if (count == 1) {
    out.push_back({0.0, 0.0});
    remaining = 0;
  } else if (count % 2 == 1) {
    out.push_back({a, b});
    out.push_back({a, b});
    out.push_back({-2.0 * a, -2.0 * b});
    remaining -= 3;
  }
  for (; remaining > 0; remaining -= 2) {
    out.push_back({a, b});
    out.push_back({-a, -b});
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

Dataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::vector<double> directions[2] = {random_unit(spec.d_in, rng), random_unit(spec.d_in, rng)};

  std::vector<int> labels(spec.n_samples, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(spec.n_pos), 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  // Latent coordinate along each view's direction, per sample.
  std::vector<std::array<double, 2>> latent(spec.n_samples);
  if (spec.mode == SynthMode::linear) {
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
      const double shift = labels[i] == 1 ? spec.signal_strength : -spec.signal_strength;
      latent[i] = {shift, shift};
    }
  } else {
    const auto pos = balanced_coordinates(spec.n_pos, true, spec.signal_strength, rng);
    const auto neg = balanced_coordinates(spec.n_samples - spec.n_pos, false, spec.signal_strength, rng);
    std::size_t next_pos = 0;
    std::size_t next_neg = 0;
    for (std::size_t i = 0; i < spec.n_samples; ++i) latent[i] = labels[i] == 1 ? pos[next_pos++] : neg[next_neg++];
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.d_in = spec.d_in;
  ds.samples.reserve(spec.n_samples);
  char id[32];
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    MultiViewSample s;
    std::snprintf(id, sizeof id, "P%04zu", i);
    s.patient_id = id;
    s.label = labels[i];
    s.features = Matrix(spec.d_in, 2);
    for (std::size_t v = 0; v < 2; ++v) {
      for (std::size_t j = 0; j < spec.d_in; ++j) {
        const double n = spec.noise_sigma > 0.0 ? spec.noise_sigma * noise(rng) : 0.0;
        s.features(j, v) = latent[i][v] * directions[v][j] + n;
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Standardizer Standardizer::fit(std::span<const MultiViewSample> samples) {
  if (samples.empty()) throw UsageError("Standardizer::fit: no samples");
  const std::size_t d = samples.front().features.rows();
  Standardizer st;
  st.mean_.assign(d, 0.0);
  st.scale_.assign(d, 0.0);
  double count = 0.0;
  for (const auto& s : samples) {
    if (s.features.rows() != d) throw ShapeError("Standardizer::fit: inconsistent feature dimension");
    for (std::size_t v = 0; v < s.features.cols(); ++v)
      for (std::size_t j = 0; j < d; ++j) st.mean_[j] += s.features(j, v);
    count += static_cast<double>(s.features.cols());
  }
  for (auto& m : st.mean_) m /= count;
  for (const auto& s : samples) {
    for (std::size_t v = 0; v < s.features.cols(); ++v) {
      for (std::size_t j = 0; j < d; ++j) {
        const double c = s.features(j, v) - st.mean_[j];
        st.scale_[j] += c * c;
      }
    }
  }
  for (auto& sc : st.scale_) {
    sc = std::sqrt(sc / count);
    if (sc == 0.0) sc = 1.0;  // constant feature: centre only
  }
  return st;
}

MultiViewSample Standardizer::apply(const MultiViewSample& sample) const {
  if (sample.features.rows() != mean_.size()) throw ShapeError("Standardizer::apply: feature dimension mismatch");
  MultiViewSample out = sample;
  for (std::size_t j = 0; j < mean_.size(); ++j)
    for (std::size_t v = 0; v < out.features.cols(); ++v)
      out.features(j, v) = (out.features(j, v) - mean_[j]) / scale_[j];
  return out;
}

std::vector<MultiViewSample> Standardizer::apply(std::span<const MultiViewSample> samples) const {
  std::vector<MultiViewSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(apply(s));
  return out;
}

}  // namespace safnet
