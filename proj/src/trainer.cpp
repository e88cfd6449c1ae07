#include "sigprune/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sigprune/errors.hpp"
#include "sigprune/metrics.hpp"

namespace sigprune {

void TrainConfig::validate() const {
  if (!(lr_min > 0.0 && lr_min <= lr0)) fail(ErrorKind::Config, "require 0 < lr_min <= lr0");
  if (plateau_wait < 1 || patience < plateau_wait) fail(ErrorKind::Config, "require patience >= plateau_wait >= 1");
  if (batch_size < 1) fail(ErrorKind::Config, "batch_size must be >= 1");
  if (max_epochs < 1) fail(ErrorKind::Config, "max_epochs must be >= 1");
  if (weight_decay < 0.0) fail(ErrorKind::Config, "weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail(ErrorKind::Config, "betas must lie in [0,1)");
  if (!(eps_adam > 0.0)) fail(ErrorKind::Config, "eps_adam must be > 0");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"lr0", cfg.lr0},
          {"weight_decay", cfg.weight_decay},
          {"batch_size", cfg.batch_size},
          {"max_epochs", cfg.max_epochs},
          {"patience", cfg.patience},
          {"plateau_wait", cfg.plateau_wait},
          {"lr_min", cfg.lr_min},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"eps_adam", cfg.eps_adam},
          {"min_delta", cfg.min_delta},
          {"seed", cfg.seed}};
}

void apply_overrides(TrainConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::Config, "train config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lr0") cfg.lr0 = value.get<double>();
      else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
      else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
      else if (key == "max_epochs") cfg.max_epochs = value.get<std::size_t>();
      else if (key == "patience") cfg.patience = value.get<std::size_t>();
      else if (key == "plateau_wait") cfg.plateau_wait = value.get<std::size_t>();
      else if (key == "lr_min") cfg.lr_min = value.get<double>();
      else if (key == "beta1") cfg.beta1 = value.get<double>();
      else if (key == "beta2") cfg.beta2 = value.get<double>();
      else if (key == "eps_adam") cfg.eps_adam = value.get<double>();
      else if (key == "min_delta") cfg.min_delta = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else fail(ErrorKind::Config, fmt::format("unknown train config key '{}'", key));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, fmt::format("bad train config value: {}", e.what()));
  }
  cfg.validate();
}

LossResult cross_entropy(const Matrix& probs, std::span<const int> labels) {
  if (labels.size() != probs.rows()) fail(ErrorKind::Shape, "label count differs from batch size");
  const auto batch = static_cast<double>(probs.rows());
  LossResult out{0.0, probs};
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
      fail(ErrorKind::Label, fmt::format("label {} outside [0, {})", y, probs.cols()));
    }
    const auto yu = static_cast<std::size_t>(y);
    out.loss -= std::log(std::max(probs(r, yu), 1e-12));
    out.grad_logits(r, yu) -= 1.0;
  }
  out.loss /= batch;
  for (double& g : out.grad_logits.data()) g /= batch;
  return out;
}

void adam_step(Network& net, const NetworkGrads& grads, AdamState& state, const TrainConfig& cfg, double lr) {
  auto slots = parameter_slots(net);
  std::erase_if(slots, [](const ParamSlot& s) { return !s.trainable; });
  const auto gslots = gradient_slots(grads);
  if (gslots.size() != slots.size()) fail(ErrorKind::Shape, "gradient record does not match network");
  if (state.m.empty()) {
    for (const auto& s : slots) {
      state.m.emplace_back(s.values.size(), 0.0);
      state.v.emplace_back(s.values.size(), 0.0);
    }
  }
  if (state.m.size() != slots.size()) fail(ErrorKind::Shape, "optimizer state does not match network");

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto theta = slots[s].values;
    const auto g = gslots[s];
    auto& m = state.m[s];
    auto& v = state.v[s];
    if (g.size() != theta.size() || m.size() != theta.size()) {
      fail(ErrorKind::Shape, fmt::format("size mismatch in '{}'", slots[s].name));
    }
    const double decay = slots[s].decay ? cfg.weight_decay : 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i] + decay * theta[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps_adam);
    }
  }
}

TrainingMonitor::Decision TrainingMonitor::observe(std::size_t epoch, double score) {
  Decision d;
  if (score >= best_score_ + cfg_.min_delta) {
    best_score_ = score;
    best_epoch_ = epoch;
    since_best_ = 0;
    since_change_ = 0;
    d.improved = true;
    return d;
  }
  ++since_best_;
  ++since_change_;
  if (since_best_ >= cfg_.patience) {
    d.stop = true;
    return d;
  }
  if (since_change_ >= cfg_.plateau_wait) {
    d.halve_lr = true;
    since_change_ = 0;
  }
  return d;
}

const EpochRecord& TrainHistory::best() const {
  for (const auto& e : epochs)
    if (e.epoch == best_epoch) return e;
  fail(ErrorKind::Config, "history has no best epoch");
}

TrainResult train(Network net, const SignalDataset& train_ds, const SignalDataset& val_ds, const TrainConfig& cfg) {
  cfg.validate();
  if (train_ds.size() == 0 || val_ds.size() == 0) fail(ErrorKind::EmptyInput, "training and validation sets must be non-empty");
  if (train_ds.length != net.input_length || val_ds.length != net.input_length) {
    fail(ErrorKind::Shape, "dataset segment length differs from network input length");
  }

  std::mt19937_64 rng(cfg.seed);
  AdamState adam;
  TrainingMonitor monitor(cfg);
  TrainResult result{net, {}};
  double lr = cfg.lr0;
  std::vector<std::size_t> order(train_ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch_labels;
  ForwardCache cache;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      batch_labels.clear();
      for (std::size_t r : rows) batch_labels.push_back(train_ds.labels[r]);

      const Matrix logits = network_forward(net, batch_from_rows(train_ds.samples, train_ds.length, rows),
                                            Mode::Train, rng, cache);
      const auto ce = cross_entropy(softmax(logits), batch_labels);
      if (!std::isfinite(ce.loss)) fail(ErrorKind::Divergence, fmt::format("non-finite loss in epoch {}", epoch));
      loss_sum += ce.loss * static_cast<double>(rows.size());
      const auto grads = network_backward(net, cache, ce.grad_logits);
      commit_running_stats(net, cache);
      adam_step(net, grads, adam, cfg, lr);
    }

    const auto val = predict(net, val_ds);
    const auto cm = confusion_matrix(val_ds.labels, val.labels, net.classes());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_ds.size());
    rec.val_loss = val.mean_loss;
    rec.val_accuracy = accuracy(cm);
    rec.val_macro_f1 = macro_f1(cm);
    rec.lr = lr;
    if (!std::isfinite(rec.val_loss)) fail(ErrorKind::Divergence, fmt::format("non-finite validation loss in epoch {}", epoch));

    const auto decision = monitor.observe(epoch, rec.val_macro_f1);
    if (decision.improved) result.best = net;
    if (decision.halve_lr) {
      const double halved = std::max(lr * 0.5, cfg.lr_min);
      if (halved < lr) rec.events.emplace_back("lr-halved");
      lr = halved;
    }
    if (decision.stop) rec.events.emplace_back("early-stop");
    result.history.epochs.push_back(std::move(rec));
    if (decision.stop) break;
  }

  result.history.best_epoch = monitor.best_epoch();
  auto& best = result.history.epochs[monitor.best_epoch() - 1];
  best.events.insert(best.events.begin(), "best");
  result.history.epochs.back().events.emplace_back("best-restored");
  return result;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out << "epoch,train_loss,val_loss,val_acc,val_macro_f1,lr,event\n";
  for (const auto& e : history.epochs) {
    std::string events;
    for (const auto& ev : e.events) events += (events.empty() ? "" : ";") + ev;
    out << fmt::format("{},{},{},{},{},{},{}\n", e.epoch, e.train_loss, e.val_loss, e.val_accuracy, e.val_macro_f1,
                       e.lr, events);
  }
}

TrainHistory read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  TrainHistory h;
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() == 6) fields.emplace_back();
    if (fields.size() != 7) fail(ErrorKind::Parse, fmt::format("{}:{}: expected 7 columns", path.string(), line_no));
    try {
      EpochRecord e;
      e.epoch = std::stoul(fields[0]);
      e.train_loss = std::stod(fields[1]);
      e.val_loss = std::stod(fields[2]);
      e.val_accuracy = std::stod(fields[3]);
      e.val_macro_f1 = std::stod(fields[4]);
      e.lr = std::stod(fields[5]);
      std::stringstream evs(fields[6]);
      while (std::getline(evs, f, ';'))
        if (!f.empty()) e.events.push_back(f);
      if (std::find(e.events.begin(), e.events.end(), "best") != e.events.end()) h.best_epoch = e.epoch;
      h.epochs.push_back(std::move(e));
    } catch (const std::exception&) {
      fail(ErrorKind::Parse, fmt::format("{}:{}: malformed number", path.string(), line_no));
    }
  }
  return h;
}

}  // namespace sigprune
