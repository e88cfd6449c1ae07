#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sigprune/data.hpp"
#include "sigprune/errors.hpp"

namespace sigprune::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitNumeric = 4;

inline constexpr const char* kToolVersion = "1.0.0";

int run(int argc, char** argv);
/// Arguments without the program name.
int run(const std::vector<std::string>& args);

int exit_code(ErrorKind kind) noexcept;

/// Cleaned dataset, its split, and the standardized partitions (scaler fit on train only).
struct PreparedData {
  SignalDataset cleaned;
  SplitIndices split;
  ScalerParams scaler;
  SignalDataset train;
  SignalDataset val;
  SignalDataset test;
};

PreparedData prepare_data(const SignalDataset& raw, std::uint64_t seed, const SplitRatios& ratios = {});
/// Rebuilds the partitions from persisted split indices and scaler.
PreparedData restore_data(const SignalDataset& raw, const SplitIndices& split, const ScalerParams& scaler);

/// Reads a JSON object, or a flat TOML subset (`key = value`, `#` comments, section headers ignored).
nlohmann::json read_config_file(const std::filesystem::path& path);
nlohmann::json parse_flat_toml(std::string_view text);

}  // namespace sigprune::cli
