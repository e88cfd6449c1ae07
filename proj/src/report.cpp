#include "sigprune/report.hpp"

#include <fmt/format.h>

#include "sigprune/errors.hpp"

namespace sigprune {

namespace {

ComparisonRow row_of(std::string name, const EvalReport& r) {
  return {std::move(name), 100.0 * r.accuracy, r.macro_f1, r.kernels_retained_pct, r.seconds_per_1000};
}

std::string signed_fixed(double v, int digits) {
  const auto s = fmt::format("{:+.{}f}", v, digits);
  // avoid rendering a zero delta as "-0.00"
  return s.find_first_not_of("+-0.") == std::string::npos ? fmt::format("{:.{}f}", 0.0, digits) : s;
}

}  // namespace

Comparison compare(const EvalReport& baseline, const EvalReport& pruned) {
  if (baseline.confusion.classes() != pruned.confusion.classes()) {
    fail(ErrorKind::Shape, fmt::format("baseline has {} classes, pruned has {}", baseline.confusion.classes(),
                                       pruned.confusion.classes()));
  }
  Comparison c;
  c.baseline = row_of("Baseline 1D-CNN (Unpruned)", baseline);
  c.pruned = row_of(fmt::format("Pruned 1D-CNN ({:g}% Kernels)", pruned.kernels_retained_pct), pruned);
  c.delta = {"Delta (pruned - baseline)", c.pruned.accuracy_pct - c.baseline.accuracy_pct,
             c.pruned.macro_f1 - c.baseline.macro_f1, c.pruned.kernels_pct - c.baseline.kernels_pct,
             c.pruned.seconds_per_1000 - c.baseline.seconds_per_1000};
  return c;
}

std::string render_markdown(const Comparison& cmp) {
  std::string out = "| Model | Accuracy (%) | Macro F1 Score | No. of Kernels | Inference (ms / 1000 segments) |\n";
  out += "|---|---|---|---|---|\n";
  for (const auto* r : {&cmp.baseline, &cmp.pruned}) {
    out += fmt::format("| {} | {:.2f} | {:.4f} | {:g}% | {:.3f} |\n", r->model, r->accuracy_pct, r->macro_f1,
                       r->kernels_pct, 1000.0 * r->seconds_per_1000);
  }
  const auto& d = cmp.delta;
  out += fmt::format("| {} | {} | {} | {}% | {} |\n", d.model, signed_fixed(d.accuracy_pct, 2),
                     signed_fixed(d.macro_f1, 4), signed_fixed(d.kernels_pct, 1),
                     signed_fixed(1000.0 * d.seconds_per_1000, 3));
  return out;
}

std::string render_csv(const Comparison& cmp) {
  std::string out = "model,accuracy_pct,macro_f1,kernels_pct,seconds_per_1000\n";
  for (const auto* r : {&cmp.baseline, &cmp.pruned, &cmp.delta}) {
    out += fmt::format("\"{}\",{},{},{},{}\n", r->model, r->accuracy_pct, r->macro_f1, r->kernels_pct,
                       r->seconds_per_1000);
  }
  return out;
}

std::string render_curves_csv(const std::optional<TrainHistory>& baseline, const std::optional<TrainHistory>& pruned) {
  std::string out = "model,epoch,train_loss,val_loss,val_acc,val_macro_f1,lr\n";
  auto emit = [&out](const char* name, const std::optional<TrainHistory>& h) {
    if (!h) return;
    for (const auto& e : h->epochs) {
      out += fmt::format("{},{},{},{},{},{},{}\n", name, e.epoch, e.train_loss, e.val_loss, e.val_accuracy,
                         e.val_macro_f1, e.lr);
    }
  };
  emit("baseline", baseline);
  emit("pruned", pruned);
  return out;
}

}  // namespace sigprune
