#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sigprune {

/// N labeled segments of fixed length d, stored row-major.
struct SignalDataset {
  std::size_t length = 0;   // d
  std::size_t classes = 0;  // K
  std::vector<double> samples;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> segment(std::size_t i) const { return {samples.data() + i * length, length}; }
  std::span<double> segment(std::size_t i) { return {samples.data() + i * length, length}; }

  std::vector<std::size_t> class_counts() const;
  SignalDataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const SignalDataset&, const SignalDataset&) = default;
};

struct ScalerParams {
  std::vector<double> mean;
  std::vector<double> stddev;

  friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

inline constexpr double kScalerEps = 1e-8;

struct SplitRatios {
  double train = 0.64;
  double val = 0.16;
  double test = 0.20;

  void validate() const;
};

/// Row indices (into the split input) of each partition, ascending.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct DataSplits {
  SignalDataset train;
  SignalDataset val;
  SignalDataset test;
  SplitIndices indices;
};

struct SynthConfig {
  std::size_t per_class = 400;
  std::size_t length = 178;
  std::size_t classes = 3;
  double noise_sigma = 0.3;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Parses the Segment-CSV format. Non-finite samples are kept for clean().
SignalDataset load_dataset(const std::filesystem::path& path);
SignalDataset parse_dataset(std::string_view text);
void save_dataset(const SignalDataset& ds, const std::filesystem::path& path);

/// Drops every row containing a non-finite sample.
SignalDataset clean(const SignalDataset& ds);

ScalerParams standardize_fit(const SignalDataset& train);
SignalDataset standardize_apply(const SignalDataset& ds, const ScalerParams& scaler);

/// Per class with n members: floor(train*n) to train, floor(val*n) to val, rest to test.
SplitIndices stratified_split_indices(const SignalDataset& ds, const SplitRatios& ratios, std::uint64_t seed);
DataSplits stratified_split(const SignalDataset& ds, const SplitRatios& ratios, std::uint64_t seed);

SignalDataset synth_generate(const SynthConfig& cfg);

}  // namespace sigprune
