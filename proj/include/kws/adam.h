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

#ifndef KWS_ADAM_H_
#define KWS_ADAM_H_

#include <cmath>
#include <map>
#include <string>

#include "kws/tensor.h"

namespace kws {
namespace nn {

// Adam with bias correction. Moments live per parameter name; the
// learning rate is mutable so a schedule can adjust it between steps.
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  int64_t step_count() const { return step_; }
  void set_step_count(int64_t s) { step_ = s; }

  // One update over a set of named parameters. Every gradient must be
  // finite and shape-matched to its parameter.
  void Step(std::map<std::string, Tensor<T>>* params,
            const std::map<std::string, Tensor<T>>& grads) {
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (auto& [name, grad] : grads) {
      auto it = params->find(name);
      Require(it != params->end(),
              StrCat("adam_step: gradient for unknown parameter ", name));
      Tensor<T>& w = it->second;
      Require(w.SameShape(grad), StrCat("adam_step: shape mismatch for ", name));
      Require(grad.AllFinite(), StrCat("adam_step: non-finite gradient for ", name));
      Tensor<T>& m = MomentFor(&m_, name, w);
      Tensor<T>& v = MomentFor(&v_, name, w);
      for (size_t i = 0; i < w.data.size(); ++i) {
        const double g = static_cast<double>(grad.data[i]);
        const double mi =
            beta1_ * static_cast<double>(m.data[i]) + (1.0 - beta1_) * g;
        const double vi =
            beta2_ * static_cast<double>(v.data[i]) + (1.0 - beta2_) * g * g;
        m.data[i] = static_cast<T>(mi);
        v.data[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        w.data[i] =
            static_cast<T>(static_cast<double>(w.data[i]) -
                           lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  const std::map<std::string, Tensor<T>>& first_moments() const { return m_; }
  const std::map<std::string, Tensor<T>>& second_moments() const { return v_; }
  std::map<std::string, Tensor<T>>* mutable_first_moments() { return &m_; }
  std::map<std::string, Tensor<T>>* mutable_second_moments() { return &v_; }

 private:
  static Tensor<T>& MomentFor(std::map<std::string, Tensor<T>>* store,
                              const std::string& name, const Tensor<T>& like) {
    auto it = store->find(name);
    if (it == store->end()) {
      it = store->emplace(name, Tensor<T>::Zeros(like.shape)).first;
    }
    Require(it->second.SameShape(like),
            StrCat("adam_step: moment shape mismatch for ", name));
    return it->second;
  }

  double lr_;
  double beta1_, beta2_, eps_;
  int64_t step_ = 0;
  std::map<std::string, Tensor<T>> m_, v_;
};

}  // namespace nn
}  // namespace kws

#endif  // KWS_ADAM_H_
