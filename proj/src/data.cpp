#include "sigprune/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "sigprune/errors.hpp"

namespace sigprune {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_sample(std::string_view token, std::size_t line_no) {
  token = trim(token);
  if (token == "NaN" || token == "nan" || token == "NAN") return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec == std::errc::result_out_of_range) {
    // from_chars reports overflow; keep the row so clean() can drop it
    return std::numeric_limits<double>::infinity();
  }
  if (ec != std::errc() || ptr != end || token.empty()) {
    fail(ErrorKind::Parse, fmt::format("line {}: invalid sample '{}'", line_no, token));
  }
  return value;
}

int parse_label(std::string_view token, std::size_t line_no) {
  token = trim(token);
  int value = -1;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end || token.empty() || value < 0) {
    fail(ErrorKind::Parse, fmt::format("line {}: label '{}' is not a non-negative integer", line_no, token));
  }
  return value;
}

}  // namespace

std::vector<std::size_t> SignalDataset::class_counts() const {
  std::vector<std::size_t> counts(classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

SignalDataset SignalDataset::subset(std::span<const std::size_t> rows) const {
  SignalDataset out;
  out.length = length;
  out.classes = classes;
  out.samples.reserve(rows.size() * length);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) fail(ErrorKind::Shape, fmt::format("row {} out of range ({} rows)", r, size()));
    const auto seg = segment(r);
    out.samples.insert(out.samples.end(), seg.begin(), seg.end());
    out.labels.push_back(labels[r]);
  }
  return out;
}

void SplitRatios::validate() const {
  for (double r : {train, val, test}) {
    if (!(r > 0.0 && r < 1.0)) fail(ErrorKind::Config, "split ratios must lie in (0,1)");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) fail(ErrorKind::Config, "split ratios must sum to 1");
}

void SynthConfig::validate() const {
  if (per_class < 1) fail(ErrorKind::Config, "per_class must be >= 1");
  if (classes < 2) fail(ErrorKind::Config, "classes must be >= 2");
  if (length < 8) fail(ErrorKind::Config, "length must be >= 8");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail(ErrorKind::Config, "noise must be finite and >= 0");
}

SignalDataset parse_dataset(std::string_view text) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view header;
  if (!next_line(header) || trim(header).empty()) fail(ErrorKind::EmptyInput, "dataset file is empty");
  const auto columns = split_commas(header);
  if (columns.size() < 2 || trim(columns[0]) != "label") {
    fail(ErrorKind::Parse, "line 1: header must be 'label,s0,s1,...'");
  }

  SignalDataset ds;
  ds.length = columns.size() - 1;
  std::string_view line;
  int max_label = -1;
  while (next_line(line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != columns.size()) {
      fail(ErrorKind::Parse,
           fmt::format("line {}: expected {} columns, found {}", line_no, columns.size(), fields.size()));
    }
    const int label = parse_label(fields[0], line_no);
    max_label = std::max(max_label, label);
    ds.labels.push_back(label);
    for (std::size_t j = 1; j < fields.size(); ++j) ds.samples.push_back(parse_sample(fields[j], line_no));
  }
  if (ds.labels.empty()) fail(ErrorKind::EmptyInput, "dataset has a header but no rows");
  ds.classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

SignalDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str());
}

void save_dataset(const SignalDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  std::string line = "label";
  for (std::size_t j = 0; j < ds.length; ++j) line += fmt::format(",s{}", j);
  out << line << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    line = std::to_string(ds.labels[i]);
    for (double v : ds.segment(i)) {
      if (std::isnan(v)) {
        line += ",NaN";
      } else {
        // shortest round-trip representation
        line += fmt::format(",{}", v);
      }
    }
    out << line << '\n';
  }
  if (!out) fail(ErrorKind::Io, fmt::format("failed writing '{}'", path.string()));
}

SignalDataset clean(const SignalDataset& ds) {
  std::vector<std::size_t> keep;
  keep.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto seg = ds.segment(i);
    if (std::all_of(seg.begin(), seg.end(), [](double v) { return std::isfinite(v); })) keep.push_back(i);
  }
  if (keep.empty()) fail(ErrorKind::DegenerateDataset, "no finite rows remain after cleaning");
  SignalDataset out = ds.subset(keep);
  const auto before = ds.class_counts();
  const auto after = out.class_counts();
  for (std::size_t c = 0; c < before.size(); ++c) {
    if (before[c] > 0 && after[c] == 0) {
      fail(ErrorKind::DegenerateDataset, fmt::format("class {} vanished during cleaning", c));
    }
  }
  return out;
}

ScalerParams standardize_fit(const SignalDataset& train) {
  if (train.size() == 0) fail(ErrorKind::EmptyInput, "cannot fit a scaler on an empty dataset");
  const std::size_t d = train.length;
  const auto n = static_cast<double>(train.size());
  ScalerParams sc{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto seg = train.segment(i);
    for (std::size_t j = 0; j < d; ++j) sc.mean[j] += seg[j];
  }
  for (double& m : sc.mean) m /= n;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto seg = train.segment(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = seg[j] - sc.mean[j];
      sc.stddev[j] += diff * diff;
    }
  }
  for (double& s : sc.stddev) s = std::max(std::sqrt(s / n), kScalerEps);
  return sc;
}

SignalDataset standardize_apply(const SignalDataset& ds, const ScalerParams& scaler) {
  if (scaler.mean.size() != ds.length || scaler.stddev.size() != ds.length) {
    fail(ErrorKind::Shape,
         fmt::format("scaler has {} features, dataset has {}", scaler.mean.size(), ds.length));
  }
  SignalDataset out = ds;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto seg = out.segment(i);
    for (std::size_t j = 0; j < out.length; ++j) seg[j] = (seg[j] - scaler.mean[j]) / scaler.stddev[j];
  }
  return out;
}

SplitIndices stratified_split_indices(const SignalDataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::mt19937_64 rng(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 3) {
      fail(ErrorKind::Stratification, fmt::format("class {} has {} members; need at least 3", c, members.size()));
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = static_cast<double>(members.size());
    // tolerance absorbs representation error such as 0.64 * 50 = 32.000000000000004
    const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * n + 1e-9));
    out.train.insert(out.train.end(), members.begin(), members.begin() + n_train);
    out.val.insert(out.val.end(), members.begin() + n_train, members.begin() + n_train + n_val);
    out.test.insert(out.test.end(), members.begin() + n_train + n_val, members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

DataSplits stratified_split(const SignalDataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
  auto indices = stratified_split_indices(ds, ratios, seed);
  DataSplits out{ds.subset(indices.train), ds.subset(indices.val), ds.subset(indices.test), {}};
  out.indices = std::move(indices);
  return out;
}

SignalDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<double>(cfg.length);
  std::vector<std::vector<double>> templates(cfg.classes, std::vector<double>(cfg.length));
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const double cycles = 2.0 * static_cast<double>(c + 1);
    const double burst = 0.75 * static_cast<double>(c);
    const double centre = 0.5 * d;
    const double width = 0.08 * d;
    for (std::size_t t = 0; t < cfg.length; ++t) {
      const double u = static_cast<double>(t);
      const double z = (u - centre) / width;
      templates[c][t] = std::sin(2.0 * std::numbers::pi * cycles * u / d) + burst * std::exp(-0.5 * z * z);
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  SignalDataset ds;
  ds.length = cfg.length;
  ds.classes = cfg.classes;
  ds.samples.reserve(cfg.classes * cfg.per_class * cfg.length);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (std::size_t n = 0; n < cfg.per_class; ++n) {
      ds.labels.push_back(static_cast<int>(c));
      for (std::size_t t = 0; t < cfg.length; ++t) {
        const double eps = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * noise(rng) : 0.0;
        ds.samples.push_back(templates[c][t] + eps);
      }
    }
  }
  return ds;
}

}  // namespace sigprune
