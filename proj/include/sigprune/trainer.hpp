#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sigprune/data.hpp"
#include "sigprune/network.hpp"

namespace sigprune {

struct TrainConfig {
  double lr0 = 0.0025;
  double weight_decay = 1e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 120;
  std::size_t patience = 10;
  std::size_t plateau_wait = 5;
  double lr_min = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  /// Minimum increase of validation macro-F1 that counts as an improvement.
  double min_delta = 1e-6;
  std::uint64_t seed = 42;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Keys absent from `j` keep the values already in `cfg`; unknown keys are a config error.
void apply_overrides(TrainConfig& cfg, const nlohmann::json& j);

struct LossResult {
  double loss = 0.0;
  Matrix grad_logits;
};

/// Mean negative log-likelihood (probabilities floored at 1e-12) and its gradient
/// with respect to the logits, (probs - onehot) / B.
LossResult cross_entropy(const Matrix& probs, std::span<const int> labels);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

/// Coupled L2 decay on conv and dense weights only.
void adam_step(Network& net, const NetworkGrads& grads, AdamState& state, const TrainConfig& cfg, double lr);

/// Early stopping on validation macro-F1 plus a halving plateau schedule.
class TrainingMonitor {
 public:
  struct Decision {
    bool improved = false;
    bool halve_lr = false;
    bool stop = false;
  };

  explicit TrainingMonitor(const TrainConfig& cfg) : cfg_(cfg) {}

  Decision observe(std::size_t epoch, double score);

  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_score() const noexcept { return best_score_; }

 private:
  TrainConfig cfg_;
  double best_score_ = -1.0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  std::size_t since_change_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
  double lr = 0.0;
  std::vector<std::string> events;  // "best", "lr-halved", "early-stop", "best-restored"
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;

  const EpochRecord& best() const;
};

struct TrainResult {
  Network best;
  TrainHistory history;
};

/// Returns the best validation snapshot, never the final state.
TrainResult train(Network net, const SignalDataset& train_ds, const SignalDataset& val_ds, const TrainConfig& cfg);

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);
TrainHistory read_history_csv(const std::filesystem::path& path);

}  // namespace sigprune
