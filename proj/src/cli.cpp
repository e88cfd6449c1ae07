#include "sigprune/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sigprune/metrics.hpp"
#include "sigprune/network.hpp"
#include "sigprune/pruner.hpp"
#include "sigprune/report.hpp"
#include "sigprune/serialize.hpp"
#include "sigprune/trainer.hpp"

namespace sigprune::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json arch_json(const Architecture& a) {
  return {{"c1", a.widths[0]}, {"c2", a.widths[1]}, {"c3", a.widths[2]}, {"k", a.kernel},
          {"p_drop", a.dropout}, {"d", a.input_length}, {"K", a.classes}};
}

json scaler_json(const ScalerParams& sc) { return {{"mean", sc.mean}, {"std", sc.stddev}}; }

ScalerParams scaler_from(const json& j) {
  try {
    return {j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, fmt::format("malformed scaler: {}", e.what()));
  }
}

json split_json(const SplitIndices& s, const fs::path& dataset, std::size_t rows, std::uint64_t seed) {
  return {{"dataset", dataset.string()}, {"rows", rows},   {"seed", seed},
          {"train", s.train},            {"val", s.val},   {"test", s.test}};
}

SplitIndices split_from(const json& j) {
  try {
    return {j.at("train").get<std::vector<std::size_t>>(), j.at("val").get<std::vector<std::size_t>>(),
            j.at("test").get<std::vector<std::size_t>>()};
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, fmt::format("malformed split: {}", e.what()));
  }
}

/// Writes run_manifest.json after checking every listed artifact exists.
void write_run_manifest(const fs::path& dir, const std::string& command, json details, const std::vector<std::string>& artifacts) {
  json paths = json::object();
  for (const auto& name : artifacts) {
    const auto p = dir / name;
    if (!fs::exists(p)) fail(ErrorKind::Io, fmt::format("artifact '{}' was not written", p.string()));
    paths[name] = fs::absolute(p).string();
  }
  details["tool"] = "sigprune";
  details["version"] = kToolVersion;
  details["command"] = command;
  details["created_utc"] = utc_timestamp();
  details["artifacts"] = paths;
  write_json(dir / "run_manifest.json", details);
}

TrainConfig load_train_config(const std::optional<fs::path>& config_path, std::optional<std::uint64_t> seed,
                              std::optional<std::size_t> max_epochs) {
  TrainConfig cfg;
  if (config_path) apply_overrides(cfg, read_config_file(*config_path));
  if (seed) cfg.seed = *seed;
  if (max_epochs) cfg.max_epochs = *max_epochs;
  cfg.validate();
  return cfg;
}

struct ModelBundle {
  ModelFile model;
  ScalerParams scaler;
  SplitIndices split;
  json split_info;
  TrainConfig config;
};

ModelBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::Io, fmt::format("model directory '{}' does not exist", dir.string()));
  ModelBundle b;
  b.model = load_model(dir);
  b.scaler = scaler_from(read_json(dir / "scaler.json"));
  b.split_info = read_json(dir / "split.json");
  b.split = split_from(b.split_info);
  apply_overrides(b.config, read_json(dir / "train_config.json"));
  if (b.scaler.mean.size() != b.model.net.input_length) {
    fail(ErrorKind::Shape, fmt::format("scaler has {} features but the model expects {}", b.scaler.mean.size(),
                                       b.model.net.input_length));
  }
  return b;
}

PreparedData data_for(const ModelBundle& b, const std::optional<fs::path>& override_path) {
  const fs::path path = override_path ? *override_path : fs::path(b.split_info.at("dataset").get<std::string>());
  return restore_data(load_dataset(path), b.split, b.scaler);
}

void copy_into(const fs::path& from_dir, const fs::path& to_dir, const std::string& name) {
  fs::copy_file(from_dir / name, to_dir / name, fs::copy_options::overwrite_existing);
}

// ---- commands -------------------------------------------------------------

struct SynthOptions {
  SynthConfig cfg;
  fs::path out = "synthetic.csv";
};

int cmd_synth(const SynthOptions& o) {
  const auto ds = synth_generate(o.cfg);
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  save_dataset(ds, o.out);
  std::cout << fmt::format("wrote {} segments ({} classes, length {}) to {}\n", ds.size(), ds.classes, ds.length,
                           o.out.string());
  return kExitOk;
}

struct TrainOptions {
  fs::path data;
  fs::path out = "model";
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_epochs;
  std::size_t c1 = 16, c2 = 32, c3 = 64, kernel = 5;
  double dropout = 0.2;
};

int cmd_train(const TrainOptions& o) {
  const TrainConfig cfg = load_train_config(o.config, o.seed, o.max_epochs);
  const auto raw = load_dataset(o.data);
  const auto data = prepare_data(raw, cfg.seed);
  if (data.cleaned.classes < 2) fail(ErrorKind::DegenerateDataset, "need at least two classes");

  Architecture arch;
  arch.widths = {o.c1, o.c2, o.c3};
  arch.kernel = o.kernel;
  arch.dropout = o.dropout;
  arch.input_length = data.cleaned.length;
  arch.classes = data.cleaned.classes;
  auto result = train(init_network(arch, cfg.seed), data.train, data.val, cfg);

  fs::create_directories(o.out);
  save_model(result.best, o.out);
  write_json(o.out / "scaler.json", scaler_json(data.scaler));
  write_json(o.out / "split.json", split_json(data.split, fs::absolute(o.data), data.cleaned.size(), cfg.seed));
  write_json(o.out / "train_config.json", to_json(cfg));
  write_history_csv(result.history, o.out / "history.csv");
  write_run_manifest(o.out, "train",
                     {{"train_config", to_json(cfg)}, {"architecture", arch_json(arch)}, {"seeds", {{"split", cfg.seed}, {"train", cfg.seed}}}},
                     {"manifest.json", "params.bin", "scaler.json", "split.json", "train_config.json", "history.csv"});

  const auto& best = result.history.best();
  std::cout << fmt::format("trained {} epochs; best epoch {} val macro-F1 {:.4f} val acc {:.4f}; model in {}\n",
                           result.history.epochs.size(), best.epoch, best.val_macro_f1, best.val_accuracy,
                           o.out.string());
  return kExitOk;
}

struct PruneOptions {
  fs::path model;
  fs::path out = "model_pruned";
  std::optional<fs::path> data;
  double ratio = 0.5;
  bool verify = false;
  bool reinit = false;
};

int cmd_prune(const PruneOptions& o) {
  const auto base = load_bundle(o.model);
  const auto data = data_for(base, o.data);
  const Network& baseline = base.model.net;
  auto result = prune_and_retrain(baseline, data.train, data.val, base.config, o.ratio, o.reinit);

  json decision = to_json(result.decision);
  decision["original_widths"] = baseline.architecture().widths;
  if (o.verify) {
    const double err = masked_equivalence_error(baseline, result.decision, 50, base.config.seed);
    decision["verify"] = {{"masked_equivalence_max_abs", err}, {"tolerance", 1e-10}, {"passed", err <= 1e-10}};
    if (err > 1e-10) {
      std::cerr << fmt::format("masked-equivalence check failed: max |delta logits| = {}\n", err);
      return kExitNumeric;
    }
    std::cout << fmt::format("masked-equivalence check passed (max |delta logits| = {:.3g})\n", err);
  }

  fs::create_directories(o.out);
  save_model(result.retrained.best, o.out, base.model.original_kernels);
  write_json(o.out / "prune.json", decision);
  for (const auto* name : {"scaler.json", "split.json", "train_config.json"}) copy_into(o.model, o.out, name);
  write_history_csv(result.retrained.history, o.out / "history.csv");
  write_run_manifest(o.out, "prune",
                     {{"train_config", to_json(base.config)},
                      {"architecture", arch_json(result.retrained.best.architecture())},
                      {"ratio", o.ratio},
                      {"reinitialized", o.reinit},
                      {"baseline_model", fs::absolute(o.model).string()},
                      {"seeds", {{"split", base.config.seed}, {"train", base.config.seed}}}},
                     {"manifest.json", "params.bin", "prune.json", "scaler.json", "split.json", "train_config.json",
                      "history.csv"});

  const auto w = result.decision.widths();
  std::cout << fmt::format("pruned to widths ({},{},{}), {:g}% kernels retained; best val macro-F1 {:.4f}; model in {}\n",
                           w[0], w[1], w[2], retention_rate(baseline, result.pruned),
                           result.retrained.history.best().val_macro_f1, o.out.string());
  return kExitOk;
}

struct EvalOptions {
  fs::path model;
  std::optional<fs::path> data;
  std::optional<fs::path> out;
};

int cmd_eval(const EvalOptions& o) {
  const auto bundle = load_bundle(o.model);
  const auto data = data_for(bundle, o.data);
  const auto report = evaluate(bundle.model.net, data.test, bundle.model.original_kernels);

  const fs::path out = o.out ? *o.out : o.model;
  fs::create_directories(out);
  json j = to_json(report);
  j["model_dir"] = fs::absolute(o.model).string();
  j["test_indices"] = bundle.split.test;
  j["parameter_count"] = bundle.model.net.parameter_count();
  j["total_kernels"] = bundle.model.net.total_kernels();
  write_json(out / "report.json", j);
  write_confusion_csv(report.confusion, out / "confusion.csv");
  std::cout << fmt::format("test accuracy {:.4f}, macro-F1 {:.4f}, kernels {:g}%, {:.3f} ms per 1000 segments\n",
                           report.accuracy, report.macro_f1, report.kernels_retained_pct,
                           1000.0 * report.seconds_per_1000);
  return kExitOk;
}

struct ReportOptions {
  fs::path baseline;
  fs::path pruned;
  fs::path out = "report";
};

std::optional<TrainHistory> history_near(const json& report) {
  if (!report.contains("model_dir")) return std::nullopt;
  const fs::path p = fs::path(report["model_dir"].get<std::string>()) / "history.csv";
  if (!fs::exists(p)) return std::nullopt;
  return read_history_csv(p);
}

int cmd_report(const ReportOptions& o) {
  const json base_j = read_json(o.baseline);
  const json pruned_j = read_json(o.pruned);
  const auto base = report_from_json(base_j);
  const auto pruned = report_from_json(pruned_j);
  const auto cmp = compare(base, pruned);

  fs::create_directories(o.out);
  write_text(o.out / "comparison.md", render_markdown(cmp));
  write_text(o.out / "comparison.csv", render_csv(cmp));
  write_text(o.out / "curves.csv", render_curves_csv(history_near(base_j), history_near(pruned_j)));
  write_confusion_csv(base.confusion, o.out / "confusion_baseline.csv");
  write_confusion_csv(pruned.confusion, o.out / "confusion_pruned.csv");
  std::cout << render_markdown(cmp);
  return kExitOk;
}

}  // namespace

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config: return kExitUsage;
    case ErrorKind::Divergence: return kExitNumeric;
    default: return kExitInput;
  }
}

PreparedData prepare_data(const SignalDataset& raw, std::uint64_t seed, const SplitRatios& ratios) {
  PreparedData p;
  p.cleaned = clean(raw);
  p.split = stratified_split_indices(p.cleaned, ratios, seed);
  const auto train_raw = p.cleaned.subset(p.split.train);
  p.scaler = standardize_fit(train_raw);
  p.train = standardize_apply(train_raw, p.scaler);
  p.val = standardize_apply(p.cleaned.subset(p.split.val), p.scaler);
  p.test = standardize_apply(p.cleaned.subset(p.split.test), p.scaler);
  return p;
}

PreparedData restore_data(const SignalDataset& raw, const SplitIndices& split, const ScalerParams& scaler) {
  PreparedData p;
  p.cleaned = clean(raw);
  const std::size_t listed = split.train.size() + split.val.size() + split.test.size();
  if (listed != p.cleaned.size()) {
    fail(ErrorKind::DegenerateDataset,
         fmt::format("stored split covers {} rows but the cleaned dataset has {}", listed, p.cleaned.size()));
  }
  p.split = split;
  p.scaler = scaler;
  p.train = standardize_apply(p.cleaned.subset(split.train), scaler);
  p.val = standardize_apply(p.cleaned.subset(split.val), scaler);
  p.test = standardize_apply(p.cleaned.subset(split.test), scaler);
  return p;
}

json parse_flat_toml(std::string_view text) {
  json out = json::object();
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
    if (line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, fmt::format("config line {}: expected key = value", line_no));
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    if (key.empty() || value.empty()) fail(ErrorKind::Config, fmt::format("config line {}: expected key = value", line_no));
    try {
      out[key] = json::parse(value);
    } catch (const json::exception&) {
      fail(ErrorKind::Config, fmt::format("config line {}: unsupported value '{}'", line_no, value));
    }
  }
  return out;
}

json read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (path.extension() == ".toml") return parse_flat_toml(text);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Train, prune and evaluate 1D-CNN signal classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic Segment-CSV dataset");
  synth_cmd->add_option("--classes", synth.cfg.classes, "Number of classes")->capture_default_str();
  synth_cmd->add_option("--per-class", synth.cfg.per_class, "Segments per class")->capture_default_str();
  synth_cmd->add_option("--length", synth.cfg.length, "Samples per segment")->capture_default_str();
  synth_cmd->add_option("--noise", synth.cfg.noise_sigma, "Gaussian noise sigma")->capture_default_str();
  synth_cmd->add_option("--seed", synth.cfg.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output CSV path")->capture_default_str();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train the baseline network with early stopping");
  train_cmd->add_option("--data", tr.data, "Segment-CSV dataset")->required();
  train_cmd->add_option("--out", tr.out, "Model directory")->capture_default_str();
  train_cmd->add_option("--config", tr.config, "JSON or TOML file overriding training defaults");
  train_cmd->add_option("--seed", tr.seed, "Seed for the split, initialization and batching");
  train_cmd->add_option("--max-epochs", tr.max_epochs, "Epoch cap");
  train_cmd->add_option("--c1", tr.c1)->capture_default_str();
  train_cmd->add_option("--c2", tr.c2)->capture_default_str();
  train_cmd->add_option("--c3", tr.c3)->capture_default_str();
  train_cmd->add_option("--kernel", tr.kernel, "Odd kernel width")->capture_default_str();
  train_cmd->add_option("--dropout", tr.dropout)->capture_default_str();

  PruneOptions pr;
  auto* prune_cmd = app.add_subcommand("prune", "Prune kernels by L1 score and retrain");
  prune_cmd->add_option("--model", pr.model, "Baseline model directory")->required();
  prune_cmd->add_option("--out", pr.out, "Pruned model directory")->capture_default_str();
  prune_cmd->add_option("--data", pr.data, "Dataset (defaults to the one the baseline was trained on)");
  prune_cmd->add_option("--ratio", pr.ratio, "Fraction of kernels kept per layer")->capture_default_str();
  prune_cmd->add_flag("--verify", pr.verify, "Check the rebuilt network against the channel-severed original");
  prune_cmd->add_flag("--reinit", pr.reinit, "Retrain the pruned shape from fresh weights");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on its held-out test split");
  eval_cmd->add_option("--model", ev.model, "Model directory")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset (defaults to the recorded one)");
  eval_cmd->add_option("--out", ev.out, "Output directory (defaults to the model directory)");

  ReportOptions rp;
  auto* report_cmd = app.add_subcommand("report", "Compare baseline and pruned evaluation reports");
  report_cmd->add_option("--baseline", rp.baseline, "Baseline report.json")->required();
  report_cmd->add_option("--pruned", rp.pruned, "Pruned report.json")->required();
  report_cmd->add_option("--out", rp.out, "Output directory")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*train_cmd) return cmd_train(tr);
    if (*prune_cmd) return cmd_prune(pr);
    if (*eval_cmd) return cmd_eval(ev);
    if (*report_cmd) return cmd_report(rp);
  } catch (const Error& e) {
    std::cerr << "sigprune: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "sigprune: " << e.what() << '\n';
    return kExitInput;
  } catch (const json::exception& e) {
    std::cerr << "sigprune: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace sigprune::cli
