// Copyright (c) 2026 framekws contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>

#include "kws/adam.h"

using kws::nn::AdamOptimizer;
using Tensor = kws::nn::Tensor<double>;
using ParamMap = std::map<std::string, Tensor>;

TEST_SUITE_BEGIN("adam");

TEST_CASE("first step moves by about -lr * sign(g)") {
  const double lr = 1e-3;
  AdamOptimizer<double> opt(lr);
  ParamMap params;
  params["w"] = Tensor({3}, {1.0, -2.0, 0.5});
  ParamMap grads;
  grads["w"] = Tensor({3}, {10.0, -0.3, 4.0});
  opt.Step(&params, grads);
  CHECK(params["w"].data[0] == doctest::Approx(1.0 - lr).epsilon(1e-4));
  CHECK(params["w"].data[1] == doctest::Approx(-2.0 + lr).epsilon(1e-4));
  CHECK(params["w"].data[2] == doctest::Approx(0.5 - lr).epsilon(1e-4));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("zero gradients leave parameters unchanged") {
  AdamOptimizer<double> opt(0.1);
  ParamMap params;
  params["w"] = Tensor({2}, {3.0, -1.0});
  ParamMap grads;
  grads["w"] = Tensor({2});
  for (int i = 0; i < 50; ++i) opt.Step(&params, grads);
  CHECK(params["w"].data[0] == 3.0);
  CHECK(params["w"].data[1] == -1.0);
  CHECK(opt.step_count() == 50);
}

TEST_CASE("quadratic bowl converges from w0=1 within 500 steps at lr 1e-2") {
  AdamOptimizer<double> opt(1e-2);
  ParamMap params;
  params["w"] = Tensor({1}, {1.0});
  for (int i = 0; i < 500; ++i) {
    ParamMap grads;
    grads["w"] = Tensor({1}, {2.0 * params["w"].data[0]});  // d/dw w^2
    opt.Step(&params, grads);
  }
  CHECK(std::abs(params["w"].data[0]) < 1e-3);
}

TEST_CASE("non-finite gradients are rejected") {
  AdamOptimizer<double> opt(1e-3);
  ParamMap params;
  params["w"] = Tensor({1}, {1.0});
  ParamMap grads;
  grads["w"] = Tensor({1}, {std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(opt.Step(&params, grads), kws::KwsError);
}

TEST_SUITE_END();
