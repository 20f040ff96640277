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

#include "kws/model_config.h"

#include <sstream>

#include "kws/common.h"

namespace kws {

void ModelConfig::Validate() const {
  Require(feature_dim > 0, "model config: feature_dim must be positive");
  Require(symbol_count > 0, "model config: symbol_count must be positive");
  Require(embed_dim > 0, "model config: embed_dim must be positive");
  Require(query_layers > 0 && query_hidden > 0,
          "model config: query encoder sizes must be positive");
  Require(doc_layers > 0 && doc_hidden > 0,
          "model config: document encoder sizes must be positive");
  Require(static_cast<int64_t>(downsample.size()) == doc_layers,
          "model config: downsample schedule must list one factor per "
          "document layer");
  for (int64_t s : downsample) {
    Require(s >= 1, "model config: downsample factors must be >= 1");
  }
  Require(joint_dim > 0, "model config: joint_dim must be positive");
  Require(dropout >= 0.0 && dropout < 1.0,
          "model config: dropout must be in [0, 1)");
}

int64_t ModelConfig::DownsampleProduct() const {
  int64_t p = 1;
  for (int64_t s : downsample) p *= s;
  return p;
}

std::string ModelConfig::Canonical() const {
  std::ostringstream os;
  os << "feature_dim=" << feature_dim << ";symbol_count=" << symbol_count
     << ";embed_dim=" << embed_dim << ";query_layers=" << query_layers
     << ";query_hidden=" << query_hidden << ";doc_layers=" << doc_layers
     << ";doc_hidden=" << doc_hidden << ";downsample=";
  for (size_t i = 0; i < downsample.size(); ++i) {
    if (i) os << ",";
    os << downsample[i];
  }
  os << ";joint_dim=" << joint_dim << ";dropout=" << dropout;
  return os.str();
}

uint64_t Fnv1a64(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t ModelConfig::Fingerprint() const { return Fnv1a64(Canonical()); }

}  // namespace kws
