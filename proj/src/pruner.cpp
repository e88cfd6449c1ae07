#include "sigprune/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sigprune/errors.hpp"

namespace sigprune {

std::array<std::size_t, kNumBlocks> PruneDecision::widths() const {
  std::array<std::size_t, kNumBlocks> w{};
  for (std::size_t l = 0; l < kNumBlocks; ++l) w[l] = keep[l].size();
  return w;
}

std::vector<double> kernel_scores(const ConvParams& layer) {
  const std::size_t slab = layer.in_channels * layer.width;
  std::vector<double> scores(layer.out_channels, 0.0);
  for (std::size_t j = 0; j < layer.out_channels; ++j) {
    const double* w = layer.weight.data() + j * slab;
    double s = 0.0;
    for (std::size_t i = 0; i < slab; ++i) s += std::abs(w[i]);
    scores[j] = s;
  }
  return scores;
}

std::vector<std::size_t> select_keep(std::span<const double> scores, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) fail(ErrorKind::Config, fmt::format("retention ratio {} outside (0,1]", ratio));
  const std::size_t n = scores.size();
  if (n == 0) return {};
  // guard against ratio * n landing a hair above an integer
  const auto wanted = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  const std::size_t n_keep = std::clamp<std::size_t>(wanted, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(n_keep);
  std::sort(order.begin(), order.end());
  return order;
}

PruneDecision decide_pruning(const Network& net, double ratio) {
  PruneDecision d;
  d.ratio = ratio;
  for (std::size_t l = 0; l < kNumBlocks; ++l) {
    d.scores[l] = kernel_scores(net.blocks[l].conv);
    d.keep[l] = select_keep(d.scores[l], ratio);
  }
  return d;
}

namespace {

void check_decision(const Network& net, const PruneDecision& decision) {
  for (std::size_t l = 0; l < kNumBlocks; ++l) {
    const auto& keep = decision.keep[l];
    if (keep.empty()) fail(ErrorKind::Config, fmt::format("layer {} keeps no kernels", l));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (keep[i] >= net.blocks[l].conv.out_channels) {
        fail(ErrorKind::Decision, fmt::format("layer {} index {} out of range ({} kernels)", l, keep[i],
                                              net.blocks[l].conv.out_channels));
      }
      if (i > 0 && keep[i] <= keep[i - 1]) {
        fail(ErrorKind::Decision, fmt::format("layer {} indices are not strictly increasing", l));
      }
    }
  }
}

std::vector<double> pick(const std::vector<double>& values, std::span<const std::size_t> keep) {
  std::vector<double> out;
  out.reserve(keep.size());
  for (std::size_t j : keep) out.push_back(values[j]);
  return out;
}

}  // namespace

Network rebuild_pruned(const Network& net, const PruneDecision& decision) {
  net.validate();
  check_decision(net, decision);

  Network out;
  out.input_length = net.input_length;
  std::vector<std::size_t> in_keep{0};  // the single input channel
  for (std::size_t l = 0; l < kNumBlocks; ++l) {
    const auto& src = net.blocks[l];
    const auto& keep = decision.keep[l];
    auto& dst = out.blocks[l];
    dst.dropout = src.dropout;
    dst.pool_width = src.pool_width;

    dst.conv.out_channels = keep.size();
    dst.conv.in_channels = in_keep.size();
    dst.conv.width = src.conv.width;
    dst.conv.weight.reserve(keep.size() * in_keep.size() * src.conv.width);
    for (std::size_t j : keep)
      for (std::size_t i : in_keep) {
        const double* slab = src.conv.weight.data() + (j * src.conv.in_channels + i) * src.conv.width;
        dst.conv.weight.insert(dst.conv.weight.end(), slab, slab + src.conv.width);
      }
    dst.conv.bias = pick(src.conv.bias, keep);

    dst.bn.gamma = pick(src.bn.gamma, keep);
    dst.bn.beta = pick(src.bn.beta, keep);
    dst.bn.running_mean = pick(src.bn.running_mean, keep);
    dst.bn.running_var = pick(src.bn.running_var, keep);
    dst.bn.momentum = src.bn.momentum;
    dst.bn.eps = src.bn.eps;
    in_keep = keep;
  }

  // global average pooling keeps channel identity, so dense columns follow the last keep set
  out.dense.out_features = net.dense.out_features;
  out.dense.in_features = in_keep.size();
  out.dense.bias = net.dense.bias;
  for (std::size_t o = 0; o < net.dense.out_features; ++o)
    for (std::size_t i : in_keep) out.dense.weight.push_back(net.dense.weight[o * net.dense.in_features + i]);

  out.validate();
  return out;
}

Network sever_pruned_channels(const Network& net, const PruneDecision& decision) {
  net.validate();
  check_decision(net, decision);
  Network out = net;
  for (std::size_t l = 0; l < kNumBlocks; ++l) {
    std::vector<bool> kept(net.blocks[l].conv.out_channels, false);
    for (std::size_t j : decision.keep[l]) kept[j] = true;
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if (kept[j]) continue;
      if (l + 1 < kNumBlocks) {
        auto& next = out.blocks[l + 1].conv;
        for (std::size_t co = 0; co < next.out_channels; ++co)
          for (std::size_t kk = 0; kk < next.width; ++kk) next.weight[(co * next.in_channels + j) * next.width + kk] = 0.0;
      } else {
        for (std::size_t o = 0; o < out.dense.out_features; ++o) out.dense.weight[o * out.dense.in_features + j] = 0.0;
      }
    }
  }
  return out;
}

double retention_rate(const Network& original, const Network& pruned) {
  return 100.0 * static_cast<double>(pruned.total_kernels()) / static_cast<double>(original.total_kernels());
}

double masked_equivalence_error(const Network& original, const PruneDecision& decision, std::size_t samples,
                                std::uint64_t seed) {
  const Network rebuilt = rebuild_pruned(original, decision);
  const Network severed = sever_pruned_channels(original, decision);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor3 x(samples, 1, original.input_length);
  for (double& v : x.data()) v = normal(rng);
  const Matrix a = network_forward_eval(rebuilt, x);
  const Matrix b = network_forward_eval(severed, x);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

PruneResult prune_and_retrain(const Network& net, const SignalDataset& train_ds, const SignalDataset& val_ds,
                              const TrainConfig& cfg, double ratio, bool reinitialize) {
  PruneResult result;
  result.decision = decide_pruning(net, ratio);
  result.pruned = rebuild_pruned(net, result.decision);
  Network start = result.pruned;
  if (reinitialize) {
    start = init_network_unchecked(result.pruned.architecture(), cfg.seed);
  }
  result.retrained = train(std::move(start), train_ds, val_ds, cfg);
  return result;
}

nlohmann::json to_json(const PruneDecision& decision) {
  nlohmann::json j;
  j["ratio"] = decision.ratio;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < kNumBlocks; ++l) {
    layers.push_back({{"layer", l},
                      {"original_width", decision.scores[l].size()},
                      {"width", decision.keep[l].size()},
                      {"scores", decision.scores[l]},
                      {"retained", decision.keep[l]}});
  }
  j["widths"] = decision.widths();
  return j;
}

PruneDecision decision_from_json(const nlohmann::json& j) {
  try {
    PruneDecision d;
    d.ratio = j.at("ratio").get<double>();
    const auto& layers = j.at("layers");
    if (layers.size() != kNumBlocks) fail(ErrorKind::Parse, "prune decision must list three layers");
    for (std::size_t l = 0; l < kNumBlocks; ++l) {
      d.scores[l] = layers[l].at("scores").get<std::vector<double>>();
      d.keep[l] = layers[l].at("retained").get<std::vector<std::size_t>>();
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, fmt::format("malformed prune decision: {}", e.what()));
  }
}

}  // namespace sigprune
