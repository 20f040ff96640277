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

#ifndef KWS_MODEL_CONFIG_H_
#define KWS_MODEL_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

namespace kws {

// Encoder architecture. Defaults follow the reference configuration:
// a 6x512 bidirectional LSTM document encoder with batch-norm before
// every layer, dropout 0.4 after, and factor-2 downsampling after
// layers 1 and 4; a 2x256 bidirectional GRU query encoder over
// 32-dimensional symbol embeddings; both projected to a joint
// dimension of 400.
struct ModelConfig {
  int64_t feature_dim = 80;
  int64_t symbol_count = 0;  // embedding rows; set from the corpus inventory
  int64_t embed_dim = 32;
  int64_t query_layers = 2;
  int64_t query_hidden = 256;
  int64_t doc_layers = 6;
  int64_t doc_hidden = 512;
  // downsample[i] is the stride applied to the output of document
  // layer i (1 = keep every frame).
  std::vector<int64_t> downsample = {2, 1, 1, 2, 1, 1};
  int64_t joint_dim = 400;
  double dropout = 0.4;

  void Validate() const;
  int64_t DownsampleProduct() const;
  // Effective output frame step: 10 ms times the downsample product.
  int64_t FrameStepMs() const { return 10 * DownsampleProduct(); }
  // Shortest encodable utterance in full-rate frames.
  int64_t MinFrames() const { return DownsampleProduct(); }

  // Canonical serialization; the fingerprint is the FNV-1a 64 hash of
  // it and guards parameter files and indexes against config drift.
  std::string Canonical() const;
  uint64_t Fingerprint() const;
};

uint64_t Fnv1a64(const std::string& bytes);

}  // namespace kws

#endif  // KWS_MODEL_CONFIG_H_
