#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sigprune/network.hpp"
#include "sigprune/trainer.hpp"

namespace sigprune {

/// Retained output-kernel indices per conv layer, ascending, plus the scores they were chosen from.
struct PruneDecision {
  double ratio = 0.5;
  std::array<std::vector<double>, kNumBlocks> scores;
  std::array<std::vector<std::size_t>, kNumBlocks> keep;

  std::array<std::size_t, kNumBlocks> widths() const;
};

/// s_j = sum over input channels and taps of |w_j|. Bias is not included.
std::vector<double> kernel_scores(const ConvParams& layer);

/// The max(1, ceil(ratio * n)) highest scores; ties go to the lower index. Sorted ascending.
std::vector<std::size_t> select_keep(std::span<const double> scores, double ratio);

/// Same ratio for every conv layer.
PruneDecision decide_pruning(const Network& net, double ratio);

/// Builds the smaller network: conv outputs, BN parameters and running statistics of
/// block l, the next conv's input channels and finally the dense input columns are all
/// restricted to keep_l. Every surviving value is copied unchanged.
Network rebuild_pruned(const Network& net, const PruneDecision& decision);

/// The unpruned network with every pruned channel cut off at its consumers: the next
/// conv's input weights (or the dense columns, for the last block) are set to zero.
/// Its eval-mode logits must equal those of rebuild_pruned(net, decision).
Network sever_pruned_channels(const Network& net, const PruneDecision& decision);

/// 100 * kernels(pruned) / kernels(original)
double retention_rate(const Network& original, const Network& pruned);

/// Largest absolute logit difference between the rebuilt and the severed network on
/// `samples` random standard-normal inputs.
double masked_equivalence_error(const Network& original, const PruneDecision& decision, std::size_t samples,
                                std::uint64_t seed);

struct PruneResult {
  Network pruned;
  TrainResult retrained;
  PruneDecision decision;
};

/// kernel_scores -> select_keep -> rebuild_pruned -> train with the baseline's config.
/// With `reinitialize` the pruned shape starts from fresh weights instead of the survivors.
PruneResult prune_and_retrain(const Network& net, const SignalDataset& train_ds, const SignalDataset& val_ds,
                              const TrainConfig& cfg, double ratio, bool reinitialize = false);

nlohmann::json to_json(const PruneDecision& decision);
PruneDecision decision_from_json(const nlohmann::json& j);

}  // namespace sigprune
