#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "safnet/model.hpp"

namespace safnet {

inline constexpr std::size_t kRealFeatureDim = 5120;
inline constexpr const char* kViewNames[2] = {"A2C", "A4C"};

struct Dataset {
  std::vector<MultiViewSample> samples;
  std::optional<std::size_t> d_in;  // unset for an empty dataset

  std::size_t positives() const;
  std::vector<int> labels() const;
};

/// "patient_id,label,view,f0000,...,f{d-1}"
std::string feature_csv_header(std::size_t d);

/// One row per (patient, view); patients appear in first-seen order.
Dataset read_feature_csv(std::istream& in, const std::string& source = "<stream>");
Dataset load_feature_csv(const std::filesystem::path& path);

/// A2C row then A4C row per patient, floats with 17 significant digits.
void write_feature_csv(const Dataset& dataset, std::ostream& out);
void write_feature_csv(const Dataset& dataset, const std::filesystem::path& path);

enum class SynthMode { linear, interaction };

SynthMode parse_synth_mode(const std::string& name);
std::string to_string(SynthMode mode);

struct SynthSpec {
  std::size_t n_samples = 160;
  std::size_t n_pos = 103;
  std::size_t d_in = 64;
  SynthMode mode = SynthMode::linear;
  double signal_strength = 3.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear mode shifts each view by +-signal_strength along a per-view random
/// unit direction. Interaction mode places a coordinate u_v of magnitude
/// signal_strength on each view's direction with sign(u_A2C * u_A4C) giving
/// the label; within each class the u_v sum to zero (an odd class gets one
/// (s, s, -2s) triple), so per-view class means coincide.
Dataset synth_generate(const SynthSpec& spec);

/// Per-feature z-scoring fitted on a training set. Statistics pool both views
/// because the embedding weights are shared between them.
class Standardizer {
 public:
  static Standardizer fit(std::span<const MultiViewSample> samples);
  MultiViewSample apply(const MultiViewSample& sample) const;
  std::vector<MultiViewSample> apply(std::span<const MultiViewSample> samples) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace safnet
