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

#include "arnn/numeric.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace arnn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Vector Matrix::column(size_t c) const {
  Vector out(rows_);
  for (size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::identity(size_t n) {
  Matrix m(n, n);
  for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void matvec(const Matrix& a, std::span<const double> x, std::span<double> y) {
  require(x.size() == a.cols() && y.size() == a.rows(), "matvec: shape mismatch");
  for (size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x);
}

void matvec_add(const Matrix& a, std::span<const double> x, std::span<double> y) {
  require(x.size() == a.cols() && y.size() == a.rows(),
          "matvec_add: shape mismatch");
  for (size_t r = 0; r < a.rows(); ++r) y[r] += dot(a.row(r), x);
}

void matvec_transpose_add(const Matrix& a, std::span<const double> x,
                          std::span<double> y) {
  require(x.size() == a.rows() && y.size() == a.cols(),
          "matvec_transpose_add: shape mismatch");
  for (size_t r = 0; r < a.rows(); ++r) {
    if (x[r] != 0.0) axpy(x[r], a.row(r), y);
  }
}

void outer_add(Matrix& a, std::span<const double> x, std::span<const double> y) {
  require(x.size() == a.rows() && y.size() == a.cols(), "outer_add: shape mismatch");
  for (size_t r = 0; r < a.rows(); ++r) {
    if (x[r] != 0.0) axpy(x[r], y, a.row(r));
  }
}

void column_add(Matrix& a, size_t c, std::span<const double> x) {
  require(x.size() == a.rows() && c < a.cols(), "column_add: shape mismatch");
  for (size_t r = 0; r < a.rows(); ++r) a(r, c) += x[r];
}

void column_copy(const Matrix& a, size_t c, std::span<double> y) {
  require(y.size() == a.rows() && c < a.cols(), "column_copy: shape mismatch");
  for (size_t r = 0; r < a.rows(); ++r) y[r] = a(r, c);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

void softmax_into(std::span<const double> scores, std::span<double> out) {
  if (scores.empty()) throw ShapeError("softmax: empty input");
  if (out.size() != scores.size()) throw ShapeError("softmax: output size mismatch");
  if (!all_finite(scores)) throw NumericalError("softmax: non-finite score");
  const double max = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - max);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

Vector softmax(std::span<const double> scores) {
  Vector out(scores.size());
  softmax_into(scores, out);
  return out;
}

Vector affine_tanh(const Matrix& h_mat, std::span<const double> h,
                   const Matrix& p_mat, std::span<const double> e) {
  require(h_mat.rows() == h_mat.cols() && h_mat.cols() == h.size() &&
              p_mat.rows() == h_mat.rows() && p_mat.cols() == e.size(),
          "affine_tanh: shape mismatch");
  Vector out(h_mat.rows());
  matvec(h_mat, h, out);
  matvec_add(p_mat, e, out);
  for (double& v : out) v = std::tanh(v);
  return out;
}

size_t ParamSet::add(std::string name, size_t rows, size_t cols) {
  entries_.push_back({std::move(name), Matrix(rows, cols)});
  return entries_.size() - 1;
}

size_t ParamSet::total_size() const {
  size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

const Matrix* ParamSet::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e.value;
  }
  return nullptr;
}

Matrix* ParamSet::find(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return &e.value;
  }
  return nullptr;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& e : entries_) out.add(e.name, e.value.rows(), e.value.cols());
  return out;
}

void ParamSet::fill_zero() {
  for (auto& e : entries_) e.value.fill(0.0);
}

bool ParamSet::same_shape(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].value.rows() != other.entries_[i].value.rows() ||
        entries_[i].value.cols() != other.entries_[i].value.cols()) {
      return false;
    }
  }
  return true;
}

double& ParamSet::at(size_t flat_index) {
  for (auto& e : entries_) {
    if (flat_index < e.value.size()) return e.value.data()[flat_index];
    flat_index -= e.value.size();
  }
  throw ShapeError("ParamSet::at: index out of range");
}

double ParamSet::at(size_t flat_index) const {
  return const_cast<ParamSet*>(this)->at(flat_index);
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].name != b.entries_[i].name ||
        !(a.entries_[i].value == b.entries_[i].value)) {
      return false;
    }
  }
  return true;
}

double GradientTape::global_norm() const {
  double sq = 0.0;
  for (const auto& e : grads_.entries()) {
    for (double v : e.value.data()) sq += v * v;
  }
  return std::sqrt(sq);
}

double GradientTape::clip_global_norm(double threshold) {
  const double norm = global_norm();
  if (threshold > 0.0 && norm > threshold) {
    const double scale = threshold / norm;
    for (auto& e : grads_.entries()) {
      for (double& v : e.value.data()) v *= scale;
    }
  }
  return norm;
}

bool GradientTape::finite() const {
  for (const auto& e : grads_.entries()) {
    if (!all_finite(e.value.data())) return false;
  }
  return true;
}

GradCheckResult grad_check(const LossFn& loss, const ParamSet& params,
                           const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw UsageError("grad_check: eps must be positive");
  ParamSet analytic = params.zeros_like();
  const double base = loss(params, &analytic);
  if (!std::isfinite(base)) throw NumericalError("grad_check: non-finite loss");

  const size_t total = params.total_size();
  std::vector<size_t> coords(total);
  std::iota(coords.begin(), coords.end(), size_t{0});
  if (options.samples > 0 && options.samples < total) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.samples);
    std::sort(coords.begin(), coords.end());
  }

  ParamSet probe = params;
  GradCheckResult result;
  for (size_t idx : coords) {
    const double original = probe.at(idx);
    probe.at(idx) = original + options.eps;
    const double plus = loss(probe, nullptr);
    probe.at(idx) = original - options.eps;
    const double minus = loss(probe, nullptr);
    probe.at(idx) = original;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericalError("grad_check: non-finite loss");
    }
    const double numeric = (plus - minus) / (2.0 * options.eps);
    const double a = analytic.at(idx);
    const double rel =
        std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = idx;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace arnn
