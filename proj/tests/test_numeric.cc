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

#include <cmath>
#include <random>

#include "arnn/numeric.h"
#include "doctest.h"
#include "test_util.h"

using namespace arnn;

TEST_CASE("softmax closed forms") {
  const Vector flat = softmax(Vector{0, 0, 0});
  for (double p : flat) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));

  // 1/(1+e), e/(1+e), evaluated independently.
  const Vector two = softmax(Vector{2.5, 3.5});
  CHECK(two[0] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(0.7310585786300049).epsilon(1e-12));

  const Vector big = softmax(Vector{1000, 0});
  CHECK(std::isfinite(big[0]));
  CHECK(std::isfinite(big[1]));
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] < 1e-300);
}

TEST_CASE("softmax rejects empty and non-finite input") {
  CHECK_THROWS_AS(softmax(Vector{}), ShapeError);
  CHECK_THROWS_AS(softmax(Vector{0.0, NAN}), NumericalError);
  CHECK_THROWS_AS(softmax(Vector{INFINITY, 0.0}), NumericalError);
}

TEST_CASE("softmax sums to one and is shift invariant") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> shift(-50, 50);
  std::uniform_int_distribution<size_t> len(1, 40);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector s = testing::random_vector(rng, len(rng), 20.0);
    const Vector p = softmax(s);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);

    Vector shifted = s;
    const double c = shift(rng);
    for (double& v : shifted) v += c;
    const Vector q = softmax(shifted);
    for (size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-9);
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() ==
          std::max_element(q.begin(), q.end()) - q.begin());
  }
}

TEST_CASE("affine_tanh") {
  const size_t d = 3, de = 2;
  CHECK(affine_tanh(Matrix(d, d), Vector(d, 0.0), Matrix(d, de), Vector(de, 0.0)) ==
        Vector(d, 0.0));

  const Vector out =
      affine_tanh(Matrix::identity(d), Vector(d, 0.5), Matrix(d, de), Vector(de, 1.0));
  for (double v : out) CHECK(v == doctest::Approx(0.46211715726000974).epsilon(1e-15));

  std::mt19937_64 rng(3);
  const Matrix h_mat = testing::random_matrix(rng, 4, 4);
  const Matrix p_mat = testing::random_matrix(rng, 4, 5);
  const Vector h = testing::random_vector(rng, 4);
  const Vector e = testing::random_vector(rng, 5);
  const Vector got = affine_tanh(h_mat, h, p_mat, e);
  for (size_t r = 0; r < 4; ++r) {
    double from_h = 0.0, from_e = 0.0;
    for (size_t c = 0; c < 4; ++c) from_h += h_mat(r, c) * h[c];
    for (size_t c = 0; c < 5; ++c) from_e += p_mat(r, c) * e[c];
    CHECK(got[r] == std::tanh(from_h + from_e));
    CHECK(std::abs(got[r]) < 1.0);
  }

  CHECK_THROWS_AS(affine_tanh(h_mat, Vector(3), p_mat, e), ShapeError);
  CHECK_THROWS_AS(affine_tanh(h_mat, h, p_mat, Vector(4)), ShapeError);
}

TEST_CASE("grad_check on a quadratic") {
  ParamSet params;
  params.add("a", 2, 3);
  params.add("b", 4, 1);
  std::mt19937_64 rng(11);
  for (size_t i = 0; i < params.total_size(); ++i) params.at(i) = rng() % 100 / 10.0 - 5.0;
  LossFn f = [](const ParamSet& p, ParamSet* g) {
    double s = 0.0;
    for (size_t i = 0; i < p.total_size(); ++i) {
      s += p.at(i) * p.at(i);
      if (g) g->at(i) += 2.0 * p.at(i);
    }
    return s;
  };
  const GradCheckResult r = grad_check(f, params);
  CHECK(r.checked == params.total_size());
  CHECK(r.max_rel_error < 1e-7);

  LossFn wrong = [&](const ParamSet& p, ParamSet* g) {
    const double v = f(p, g);
    if (g) g->at(3) += 1.0;
    return v;
  };
  CHECK(grad_check(wrong, params).worst_index == 3);

  LossFn bad = [](const ParamSet&, ParamSet*) { return NAN; };
  CHECK_THROWS_AS(grad_check(bad, params), NumericalError);
}

TEST_CASE("global-norm clipping keeps direction") {
  ParamSet params;
  params.add("w", 3, 2);
  GradientTape tape(params);
  std::mt19937_64 rng(5);
  for (size_t i = 0; i < 6; ++i) tape.grads().at(i) = testing::random_vector(rng, 1, 10)[0];
  const ParamSet before = tape.grads();
  const double norm = tape.clip_global_norm(1.0);
  CHECK(norm > 1.0);
  CHECK(tape.global_norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t i = 0; i < 6; ++i) {
    CHECK(tape.grads().at(i) == doctest::Approx(before.at(i) / norm).epsilon(1e-12));
  }
  tape.zero();
  CHECK(tape.global_norm() == 0.0);
}
