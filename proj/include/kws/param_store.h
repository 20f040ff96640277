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

#ifndef KWS_PARAM_STORE_H_
#define KWS_PARAM_STORE_H_

#include <cstdint>
#include <map>
#include <string>

#include "kws/model_config.h"
#include "kws/tensor.h"

namespace kws {

template <typename T>
using NamedTensors = std::map<std::string, nn::Tensor<T>>;

inline NamedTensors<double> ToDouble(const NamedTensors<float>& src) {
  NamedTensors<double> out;
  for (const auto& [name, t] : src) {
    nn::Tensor<double> d(t.shape);
    for (size_t i = 0; i < t.data.size(); ++i) {
      d.data[i] = static_cast<double>(t.data[i]);
    }
    out[name] = std::move(d);
  }
  return out;
}


// Named model tensors plus the fingerprint of the config they were
// built for. std::map keeps names sorted, which fixes the on-disk
// tensor order.
struct ParameterStore {
  uint64_t fingerprint = 0;
  std::map<std::string, nn::Tensor<float>> tensors;

  const nn::Tensor<float>& Get(const std::string& name) const;
  nn::Tensor<float>* GetMutable(const std::string& name);

  // True for tensors updated by the optimizer; batch-norm running
  // statistics are state, not parameters.
  static bool IsTrainable(const std::string& name);
};

// Fresh parameters: uniform fan-in scaling (+-1/sqrt(fan_in)) for all
// weight matrices, zero biases except the LSTM forget gate (1),
// embedding rows from a zero-mean Gaussian with sigma 0.1, batch-norm
// scale 1 / shift 0 / running stats (0, 1).
ParameterStore InitModelParams(const ModelConfig& config, uint64_t seed);

// Binary persistence: magic, format version, config fingerprint, then
// name-length/name/shape/raw little-endian float32 data per tensor in
// sorted name order. load(save(p)) is bitwise identical; fingerprint
// or version mismatches and truncation are rejected without returning
// partial state.
void SaveParams(const ParameterStore& store, const std::string& path);
ParameterStore LoadParams(const std::string& path);
// Loads and additionally checks the fingerprint against a config.
ParameterStore LoadParamsFor(const ModelConfig& config,
                             const std::string& path);

}  // namespace kws

#endif  // KWS_PARAM_STORE_H_
