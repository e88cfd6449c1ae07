#include "sigprune/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sigprune/errors.hpp"

namespace sigprune {

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t t = 0;
  for (std::size_t k = 0; k < classes_; ++k) t += (*this)(k, k);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const noexcept {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += (*this)(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const noexcept {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += (*this)(i, pred);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, std::size_t classes) {
  if (y_true.size() != y_pred.size()) {
    fail(ErrorKind::Shape, fmt::format("{} labels vs {} predictions", y_true.size(), y_pred.size()));
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes || static_cast<std::size_t>(p) >= classes) {
      fail(ErrorKind::Label, fmt::format("pair ({}, {}) outside [0, {})", t, p, classes));
    }
    ++cm(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) fail(ErrorKind::EmptyEval, "confusion matrix is empty");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

std::vector<ClassScores> per_class_prf(const ConfusionMatrix& cm) {
  if (cm.total() == 0) fail(ErrorKind::EmptyEval, "confusion matrix is empty");
  auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  std::vector<ClassScores> out(cm.classes());
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const auto tp = static_cast<double>(cm(k, k));
    const auto fp = static_cast<double>(cm.col_sum(k)) - tp;
    const auto fn = static_cast<double>(cm.row_sum(k)) - tp;
    auto& s = out[k];
    s.precision = ratio(tp, tp + fp);
    s.recall = ratio(tp, tp + fn);
    s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  }
  return out;
}

double macro_f1(const ConfusionMatrix& cm) {
  const auto scores = per_class_prf(cm);
  double sum = 0.0;
  for (const auto& s : scores) sum += s.f1;
  return sum / static_cast<double>(scores.size());
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Predictions predict(const Network& net, const SignalDataset& ds, std::size_t batch_size) {
  if (ds.length != net.input_length) {
    fail(ErrorKind::Shape, fmt::format("dataset length {} differs from network input {}", ds.length, net.input_length));
  }
  Predictions out;
  out.labels.reserve(ds.size());
  std::vector<std::size_t> rows;
  double loss = 0.0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t stop = std::min(ds.size(), start + batch_size);
    rows.resize(stop - start);
    std::iota(rows.begin(), rows.end(), start);
    const Matrix probs = softmax(network_forward_eval(net, batch_from_rows(ds.samples, ds.length, rows)));
    const auto labels = argmax_rows(probs);
    out.labels.insert(out.labels.end(), labels.begin(), labels.end());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto y = static_cast<std::size_t>(ds.labels[rows[i]]);
      if (y < probs.cols()) loss -= std::log(std::max(probs(i, y), 1e-12));
    }
  }
  out.mean_loss = ds.size() ? loss / static_cast<double>(ds.size()) : 0.0;
  return out;
}

EvalReport evaluate(const Network& net, const SignalDataset& ds, std::size_t original_kernels, int timing_reps) {
  if (ds.classes > net.classes()) {
    fail(ErrorKind::Shape, fmt::format("dataset has {} classes, network predicts {}", ds.classes, net.classes()));
  }
  const auto preds = predict(net, ds);
  EvalReport r;
  r.confusion = confusion_matrix(ds.labels, preds.labels, net.classes());
  r.accuracy = accuracy(r.confusion);
  r.per_class = per_class_prf(r.confusion);
  r.macro_f1 = macro_f1(r.confusion);
  r.mean_loss = preds.mean_loss;
  const std::size_t reference = original_kernels ? original_kernels : net.total_kernels();
  r.kernels_retained_pct = 100.0 * static_cast<double>(net.total_kernels()) / static_cast<double>(reference);

  std::vector<double> seconds;
  for (int rep = 0; rep < std::max(timing_reps, 1); ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto again = predict(net, ds);
    const auto t1 = std::chrono::steady_clock::now();
    if (again.labels != preds.labels) fail(ErrorKind::Divergence, "non-deterministic eval-mode predictions");
    seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(seconds.begin(), seconds.end());
  const double median = seconds.size() % 2 ? seconds[seconds.size() / 2]
                                           : 0.5 * (seconds[seconds.size() / 2 - 1] + seconds[seconds.size() / 2]);
  r.seconds_per_1000 = median * 1000.0 / static_cast<double>(ds.size());
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  j["macro_f1"] = report.macro_f1;
  j["kernels_retained_pct"] = report.kernels_retained_pct;
  j["inference_seconds_per_1000"] = report.seconds_per_1000;
  j["mean_loss"] = report.mean_loss;
  j["classes"] = report.confusion.classes();
  auto& per_class = j["per_class"] = nlohmann::json::array();
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    const auto& s = report.per_class[k];
    per_class.push_back({{"class", k}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}});
  }
  auto& rows = j["confusion"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.confusion.classes(); ++i) {
    auto row = nlohmann::json::array();
    for (std::size_t p = 0; p < report.confusion.classes(); ++p) row.push_back(report.confusion(i, p));
    rows.push_back(std::move(row));
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.kernels_retained_pct = j.at("kernels_retained_pct").get<double>();
    r.seconds_per_1000 = j.value("inference_seconds_per_1000", 0.0);
    r.mean_loss = j.value("mean_loss", 0.0);
    const auto classes = j.at("classes").get<std::size_t>();
    r.confusion = ConfusionMatrix(classes);
    const auto& rows = j.at("confusion");
    if (rows.size() != classes) fail(ErrorKind::Parse, "confusion matrix row count differs from class count");
    for (std::size_t i = 0; i < classes; ++i) {
      if (rows[i].size() != classes) fail(ErrorKind::Parse, "confusion matrix is not square");
      for (std::size_t p = 0; p < classes; ++p) r.confusion(i, p) = rows[i][p].get<std::uint64_t>();
    }
    for (const auto& c : j.at("per_class")) {
      r.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, fmt::format("malformed report: {}", e.what()));
  }
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    for (std::size_t p = 0; p < cm.classes(); ++p) out << (p ? "," : "") << cm(i, p);
    out << '\n';
  }
}

}  // namespace sigprune
