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

#ifndef KWS_TAPE_H_
#define KWS_TAPE_H_

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kws/tensor.h"

namespace kws {
namespace nn {

// Reverse-mode tape. Kernels append their output value together with a
// backward closure; Backward() replays the closures in exact reverse
// execution order with the output gradient, and input gradients
// accumulate additively so fan-out (one value consumed by several
// kernels) just works. A tape is single-writer; distinct tapes are
// independent.
template <typename T>
class Tape {
 public:
  // Closure contract: given the gradient of the loss w.r.t. the kernel
  // output, accumulate into tape.Grad(input) for every differentiable
  // input the kernel consumed.
  using BackwardFn = std::function<void(Tape&, const Tensor<T>&)>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  // Leaf value. needs_grad leaves collect gradients (e.g. inputs under
  // a finite-difference check).
  int Leaf(Tensor<T> value, bool needs_grad = false) {
    values_.push_back(std::move(value));
    needs_grad_.push_back(needs_grad && recording_);
    return static_cast<int>(values_.size()) - 1;
  }

  // Named trainable leaf. Gradients for all registered parameters are
  // returned from Backward(); a parameter never consumed by any kernel
  // gets a zero gradient of matching shape.
  int Param(const std::string& name, Tensor<T> value) {
    const int id = Leaf(std::move(value), true);
    params_.emplace_back(name, id);
    return id;
  }

  int Push(Tensor<T> output, const std::vector<int>& inputs,
           BackwardFn backward) {
    values_.push_back(std::move(output));
    bool any = false;
    for (int in : inputs) any = any || needs_grad_[in];
    needs_grad_.push_back(any && recording_);
    const int id = static_cast<int>(values_.size()) - 1;
    if (needs_grad_.back()) steps_.push_back({id, std::move(backward)});
    return id;
  }

  const Tensor<T>& Value(int id) const { return values_[id]; }
  bool NeedsGrad(int id) const { return needs_grad_[id]; }
  bool recording() const { return recording_; }

  // Gradient buffer for a value, zero-initialized on first touch.
  // Valid only during/after Backward().
  Tensor<T>& Grad(int id) {
    if (!grad_set_[id]) {
      grads_[id] = Tensor<T>::Zeros(values_[id].shape);
      grad_set_[id] = true;
    }
    return grads_[id];
  }

  bool HasGrad(int id) const { return grad_set_[id]; }

  // Runs the backward pass from a scalar loss. Returns gradients for
  // every registered parameter, keyed by name.
  std::map<std::string, Tensor<T>> Backward(int loss_id) {
    Require(recording_, "backward: tape was not recording");
    const Tensor<T>& loss = values_[loss_id];
    Require(loss.numel() == 1, "backward: loss must be a scalar");
    Require(std::isfinite(static_cast<double>(loss.data[0])),
            "backward: loss is not finite");
    grads_.resize(values_.size());
    grad_set_.assign(values_.size(), false);
    Grad(loss_id).data[0] = T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
      // A kernel whose output never received a gradient cannot
      // influence the loss; skip it.
      if (grad_set_[it->output]) it->backward(*this, grads_[it->output]);
    }
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, id] : params_) {
      out[name] =
          grad_set_[id] ? grads_[id] : Tensor<T>::Zeros(values_[id].shape);
    }
    return out;
  }

 private:
  struct Step {
    int output;
    BackwardFn backward;
  };

  bool recording_;
  std::vector<Tensor<T>> values_;
  std::vector<bool> needs_grad_;
  std::vector<Tensor<T>> grads_;
  std::vector<bool> grad_set_;
  std::vector<Step> steps_;
  std::vector<std::pair<std::string, int>> params_;
};

enum class Mode { kTrain, kInfer };

}  // namespace nn
}  // namespace kws

#endif  // KWS_TAPE_H_
