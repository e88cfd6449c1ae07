#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sigprune/data.hpp"
#include "sigprune/network.hpp"

namespace sigprune {

/// counts(i, j): samples of true class i predicted as class j.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t& operator()(std::size_t truth, std::size_t pred) { return counts_[truth * classes_ + pred]; }
  std::uint64_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }

  std::uint64_t total() const noexcept;
  std::uint64_t trace() const noexcept;
  std::uint64_t row_sum(std::size_t truth) const noexcept;
  std::uint64_t col_sum(std::size_t pred) const noexcept;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const ClassScores&, const ClassScores&) = default;
};

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, std::size_t classes);
double accuracy(const ConfusionMatrix& cm);
/// 0/0 is taken as 0 for precision, recall and F1.
std::vector<ClassScores> per_class_prf(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);

/// Lowest index wins exact ties.
std::vector<int> argmax_rows(const Matrix& scores);

struct EvalReport {
  double accuracy = 0.0;
  std::vector<ClassScores> per_class;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion;
  double kernels_retained_pct = 100.0;
  double seconds_per_1000 = 0.0;
  double mean_loss = 0.0;
};

/// Eval-mode predictions in batches.
struct Predictions {
  std::vector<int> labels;
  double mean_loss = 0.0;
};

Predictions predict(const Network& net, const SignalDataset& ds, std::size_t batch_size = 256);

/// `original_kernels` is the kernel total of the unpruned ancestor (0 means this network is unpruned).
/// Inference time is the median of `timing_reps` passes over ds, scaled to 1000 segments.
EvalReport evaluate(const Network& net, const SignalDataset& ds, std::size_t original_kernels = 0,
                    int timing_reps = 5);

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);

}  // namespace sigprune
