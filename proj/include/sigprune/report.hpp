#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sigprune/metrics.hpp"
#include "sigprune/trainer.hpp"

namespace sigprune {

struct ComparisonRow {
  std::string model;
  double accuracy_pct = 0.0;
  double macro_f1 = 0.0;
  double kernels_pct = 0.0;
  double seconds_per_1000 = 0.0;
};

struct Comparison {
  ComparisonRow baseline;
  ComparisonRow pruned;
  ComparisonRow delta;  // pruned - baseline
};

/// Throws a shape error when the reports disagree on the class count.
Comparison compare(const EvalReport& baseline, const EvalReport& pruned);

/// Markdown table: baseline row, pruned row, then the delta row.
std::string render_markdown(const Comparison& cmp);
std::string render_csv(const Comparison& cmp);

/// Loss/accuracy curves of both runs in long format: model,epoch,train_loss,val_loss,val_acc,val_macro_f1,lr
std::string render_curves_csv(const std::optional<TrainHistory>& baseline, const std::optional<TrainHistory>& pruned);

}  // namespace sigprune
