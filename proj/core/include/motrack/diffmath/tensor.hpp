// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <concepts>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "motrack/common.hpp"

namespace motrack::diffmath {

/// Dense row-major tensor of rank 1 or 2. Rank-1 tensors behave as a single
/// row wherever a matrix is expected. Values are immutable by convention once
/// an op has produced them.
template <std::floating_point S>
class Tensor {
 public:
  Tensor() = default;

  Tensor(int rows, int cols) : shape_{rows, cols}, data_(static_cast<std::size_t>(rows) * cols, S{0}) {
    if (rows < 0 || cols < 0) fail("Tensor: negative dimension");
  }

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (int d : shape_) {
      if (d < 0) fail("Tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, S{0});
  }

  static Tensor vec(int n) { return Tensor(std::vector<int>{n}); }

  static Tensor from_rows(std::initializer_list<std::initializer_list<S>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Tensor t(r, c);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c) fail("Tensor::from_rows: ragged rows");
      std::copy(row.begin(), row.end(), t.data_.begin() + static_cast<std::size_t>(i) * c);
      ++i;
    }
    return t;
  }

  static Tensor from_vec(std::vector<S> values) {
    Tensor t;
    t.shape_ = {static_cast<int>(values.size())};
    t.data_ = std::move(values);
    return t;
  }

  static Tensor full(int rows, int cols, S value) {
    Tensor t(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor randn(int rows, int cols, Rng& rng, double stddev = 1.0) {
    Tensor t(rows, cols);
    for (auto& v : t.data_) v = static_cast<S>(gaussian(rng, 0.0, stddev));
    return t;
  }

  static Tensor rand_uniform(int rows, int cols, Rng& rng, double lo, double hi) {
    Tensor t(rows, cols);
    for (auto& v : t.data_) v = static_cast<S>(uniform(rng, lo, hi));
    return t;
  }

  bool empty() const { return data_.empty(); }
  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }

  // Rank-1 tensors are treated as 1 x n.
  int rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? 1 : 0); }
  int cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 0); }

  S& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  S operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  S& operator[](std::size_t i) { return data_[i]; }
  S operator[](std::size_t i) const { return data_[i]; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& raw() { return data_; }
  const std::vector<S>& raw() const { return data_; }

  S item() const {
    if (numel() != 1) fail("Tensor::item: not a scalar");
    return data_[0];
  }

  bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }

  bool finite() const { return all_finite(data_.data(), data_.size()); }

  template <std::floating_point T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.set_shape(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
    return out;
  }

  void set_shape(std::vector<int> shape) {
    shape_ = std::move(shape);
    std::size_t n = 1;
    for (int d : shape_) n *= static_cast<std::size_t>(d);
    data_.resize(n, S{0});
  }

 private:
  std::vector<int> shape_;
  std::vector<S> data_;
};

}  // namespace motrack::diffmath
