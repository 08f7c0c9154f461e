// Copyright 2026 The arnn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "arnn/error.h"

namespace arnn {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double value);
  Vector column(size_t c) const;

  static Matrix identity(size_t n);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

// y = A x
void matvec(const Matrix& a, std::span<const double> x, std::span<double> y);
// y += A x
void matvec_add(const Matrix& a, std::span<const double> x, std::span<double> y);
// y += A^T x
void matvec_transpose_add(const Matrix& a, std::span<const double> x,
                          std::span<double> y);
// A += x y^T
void outer_add(Matrix& a, std::span<const double> x, std::span<const double> y);
// A(:, c) += x
void column_add(Matrix& a, size_t c, std::span<const double> x);
// y = A(:, c)
void column_copy(const Matrix& a, size_t c, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

bool all_finite(std::span<const double> values);

// Numerically stable softmax (max subtraction). Throws ShapeError on empty
// input and NumericalError on non-finite input.
Vector softmax(std::span<const double> scores);
void softmax_into(std::span<const double> scores, std::span<double> out);

// tanh(h_mat * h + p_mat * e)
Vector affine_tanh(const Matrix& h_mat, std::span<const double> h,
                   const Matrix& p_mat, std::span<const double> e);

// An ordered collection of named parameter arrays. Vectors are stored as
// n x 1 matrices.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  size_t add(std::string name, size_t rows, size_t cols);

  size_t count() const { return entries_.size(); }
  size_t total_size() const;

  Matrix& operator[](size_t i) { return entries_[i].value; }
  const Matrix& operator[](size_t i) const { return entries_[i].value; }
  const std::string& name(size_t i) const { return entries_[i].name; }

  const Matrix* find(const std::string& name) const;
  Matrix* find(const std::string& name);

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  ParamSet zeros_like() const;
  void fill_zero();
  bool same_shape(const ParamSet& other) const;

  // Flat coordinate access across all arrays, in entry order.
  double& at(size_t flat_index);
  double at(size_t flat_index) const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<Entry> entries_;
};

// Gradient buffers shadowing a ParamSet. One tape per training step owner.
class GradientTape {
 public:
  explicit GradientTape(const ParamSet& params) : grads_(params.zeros_like()) {}

  ParamSet& grads() { return grads_; }
  const ParamSet& grads() const { return grads_; }

  void zero() { grads_.fill_zero(); }
  double global_norm() const;
  // Rescales so the global norm is at most `threshold`; returns the norm
  // before clipping.
  double clip_global_norm(double threshold);
  bool finite() const;

 private:
  ParamSet grads_;
};

// Loss function for gradient checking: returns the scalar loss at `params`
// and, when `grads` is non-null, accumulates the analytic gradient into it.
using LossFn = std::function<double(const ParamSet& params, ParamSet* grads)>;

struct GradCheckOptions {
  double eps = 1e-5;
  // Number of coordinates to probe; 0 checks all of them.
  size_t samples = 0;
  uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  size_t worst_index = 0;
  size_t checked = 0;
};

// Central finite differences against the analytic gradient. The relative
// error per coordinate is |a - n| / max(1e-8, |a| + |n|).
GradCheckResult grad_check(const LossFn& loss, const ParamSet& params,
                           const GradCheckOptions& options = {});

}  // namespace arnn
