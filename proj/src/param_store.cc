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

#include "kws/param_store.h"

#include <cmath>

#include "kws/formats.h"
#include "kws/rng.h"

namespace kws {

using nn::Tensor;

const Tensor<float>& ParameterStore::Get(const std::string& name) const {
  auto it = tensors.find(name);
  Require(it != tensors.end(), StrCat("parameter store: missing tensor ", name));
  return it->second;
}

Tensor<float>* ParameterStore::GetMutable(const std::string& name) {
  auto it = tensors.find(name);
  Require(it != tensors.end(), StrCat("parameter store: missing tensor ", name));
  return &it->second;
}

bool ParameterStore::IsTrainable(const std::string& name) {
  return name.find(".running_") == std::string::npos;
}

namespace {

Tensor<float> UniformFanIn(Rng* rng, int64_t rows, int64_t cols) {
  Tensor<float> t({rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  for (auto& v : t.data) {
    v = static_cast<float>(rng->Uniform(-bound, bound));
  }
  return t;
}

void AddBatchNorm(ParameterStore* ps, const std::string& prefix, int64_t dim) {
  ps->tensors[prefix + ".bn.gamma"] = Tensor<float>::Full({dim}, 1.0f);
  ps->tensors[prefix + ".bn.beta"] = Tensor<float>::Zeros({dim});
  ps->tensors[prefix + ".bn.running_mean"] = Tensor<float>::Zeros({dim});
  ps->tensors[prefix + ".bn.running_var"] = Tensor<float>::Full({dim}, 1.0f);
}

void AddRnnDirection(ParameterStore* ps, Rng* rng, const std::string& prefix,
                     int64_t gates, int64_t input, int64_t hidden,
                     bool lstm_forget_bias) {
  ps->tensors[prefix + ".wx"] = UniformFanIn(rng, gates * hidden, input);
  ps->tensors[prefix + ".wh"] = UniformFanIn(rng, gates * hidden, hidden);
  Tensor<float> b = Tensor<float>::Zeros({gates * hidden});
  if (lstm_forget_bias) {
    // Forget gate block is rows [hidden, 2*hidden).
    for (int64_t d = 0; d < hidden; ++d) b.data[hidden + d] = 1.0f;
  }
  ps->tensors[prefix + ".b"] = std::move(b);
}

}  // namespace

ParameterStore InitModelParams(const ModelConfig& config, uint64_t seed) {
  config.Validate();
  ParameterStore ps;
  ps.fingerprint = config.Fingerprint();
  Rng rng(Rng::Derive(seed, 0x706172616d73ULL));

  Tensor<float> embed({config.symbol_count, config.embed_dim});
  for (auto& v : embed.data) {
    v = static_cast<float>(0.1 * rng.Gaussian());
  }
  ps.tensors["query.embed"] = std::move(embed);

  int64_t in = config.embed_dim;
  for (int64_t l = 0; l < config.query_layers; ++l) {
    const std::string prefix = StrCat("query.l", l);
    AddBatchNorm(&ps, prefix, in);
    AddRnnDirection(&ps, &rng, prefix + ".fwd", 3, in, config.query_hidden,
                    false);
    AddRnnDirection(&ps, &rng, prefix + ".bwd", 3, in, config.query_hidden,
                    false);
    in = 2 * config.query_hidden;
  }
  ps.tensors["query.proj.w"] = UniformFanIn(&rng, config.joint_dim, in);
  ps.tensors["query.proj.b"] = Tensor<float>::Zeros({config.joint_dim});

  in = config.feature_dim;
  for (int64_t l = 0; l < config.doc_layers; ++l) {
    const std::string prefix = StrCat("doc.l", l);
    AddBatchNorm(&ps, prefix, in);
    AddRnnDirection(&ps, &rng, prefix + ".fwd", 4, in, config.doc_hidden, true);
    AddRnnDirection(&ps, &rng, prefix + ".bwd", 4, in, config.doc_hidden, true);
    in = 2 * config.doc_hidden;
  }
  ps.tensors["doc.proj.w"] = UniformFanIn(&rng, config.joint_dim, in);
  ps.tensors["doc.proj.b"] = Tensor<float>::Zeros({config.joint_dim});
  return ps;
}

void SaveParams(const ParameterStore& store, const std::string& path) {
  ByteWriter w;
  w.Magic("KWSP");
  w.U32(1);
  w.U64(store.fingerprint);
  w.U32(static_cast<uint32_t>(store.tensors.size()));
  for (const auto& [name, t] : store.tensors) {  // map: sorted name order
    w.Str(name);
    w.U32(static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) w.U32(static_cast<uint32_t>(d));
    w.Bytes(t.data.data(), t.data.size() * 4);
  }
  WriteFileAtomic(path, w.buffer());
}

ParameterStore LoadParams(const std::string& path) {
  ByteReader r(ReadFileBytes(path), path);
  r.ExpectMagic("KWSP");
  const uint32_t version = r.U32();
  Require(version == 1,
          StrCat(path, ": unsupported parameter format version ", version));
  ParameterStore ps;
  ps.fingerprint = r.U64();
  const uint32_t count = r.U32();
  std::string prev;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name;
    try {
      name = r.Str();
    } catch (const KwsError&) {
      Fail(StrCat(path, ": truncated before tensor ", i + 1, " of ", count,
                  prev.empty() ? "" : StrCat(" (last complete tensor: ", prev, ")")));
    }
    const uint32_t ndim = r.U32();
    std::vector<int64_t> shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = r.U32();
    Tensor<float> t(shape);
    try {
      r.F32Array(t.data.data(), t.data.size());
    } catch (const KwsError&) {
      Fail(StrCat(path, ": truncated while reading tensor '", name, "'"));
    }
    ps.tensors[name] = std::move(t);
    prev = name;
  }
  Require(r.AtEnd(), StrCat(path, ": trailing bytes after last tensor"));
  return ps;
}

ParameterStore LoadParamsFor(const ModelConfig& config,
                             const std::string& path) {
  ParameterStore ps = LoadParams(path);
  const uint64_t want = config.Fingerprint();
  Require(ps.fingerprint == want,
          StrCat(path, ": config fingerprint mismatch (file ", ps.fingerprint,
                 ", config ", want, ")"));
  return ps;
}

}  // namespace kws
