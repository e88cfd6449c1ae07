#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sigprune {

/// Dense (batch, channels, length) array, row-major.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t batch, std::size_t channels, std::size_t length, double fill = 0.0);

  std::size_t batch() const noexcept { return batch_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t length() const noexcept { return length_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t b, std::size_t c, std::size_t t) {
    return data_[(b * channels_ + c) * length_ + t];
  }
  double operator()(std::size_t b, std::size_t c, std::size_t t) const {
    return data_[(b * channels_ + c) * length_ + t];
  }

  std::span<double> row(std::size_t b, std::size_t c) {
    return {data_.data() + (b * channels_ + c) * length_, length_};
  }
  std::span<const double> row(std::size_t b, std::size_t c) const {
    return {data_.data() + (b * channels_ + c) * length_, length_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  bool same_shape(const Tensor3& other) const noexcept {
    return batch_ == other.batch_ && channels_ == other.channels_ && length_ == other.length_;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t batch_ = 0;
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<double> data_;
};

/// Row-major (rows, cols) matrix used for logits and probabilities.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace sigprune
