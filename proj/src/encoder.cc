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

#include "kws/encoder.h"

namespace kws {

using nn::Ragged;
using nn::Tape;
using nn::Tensor;

nn::Tensor<float> PackFeatureColumns(
    const std::vector<const FeatureMatrix*>& mats, Ragged* layout) {
  Require(!mats.empty(), "encode_document: empty batch");
  const int64_t dim = mats[0]->dim();
  std::vector<int64_t> lens(mats.size());
  for (size_t i = 0; i < mats.size(); ++i) {
    Require(mats[i]->dim() == dim,
            "encode_document: feature dimensions disagree within batch");
    lens[i] = mats[i]->num_frames();
  }
  *layout = Ragged::FromLengths(std::move(lens));
  Tensor<float> packed({dim, layout->total()});
  for (size_t i = 0; i < mats.size(); ++i) {
    const auto& frames = mats[i]->frames;
    const int64_t off = layout->offsets[i];
    for (int64_t t = 0; t < frames.shape[0]; ++t) {
      for (int64_t d = 0; d < dim; ++d) {
        packed.at(d, off + t) = frames.at(t, d);
      }
    }
  }
  return packed;
}

std::vector<QueryEmbedding> EncodeQueries(
    const ParameterStore& params, const ModelConfig& cfg,
    const std::vector<std::vector<int64_t>>& queries) {
  cfg.Validate();
  std::vector<int64_t> lens(queries.size());
  std::vector<int64_t> packed;
  for (size_t i = 0; i < queries.size(); ++i) {
    Require(!queries[i].empty(),
            StrCat("encode_query: query ", i, " is empty"));
    lens[i] = static_cast<int64_t>(queries[i].size());
    packed.insert(packed.end(), queries[i].begin(), queries[i].end());
  }
  const Ragged layout = Ragged::FromLengths(std::move(lens));

  Tape<float> tape(/*recording=*/false);
  NamedTensors<float> store = params.tensors;
  GraphBinder<float> pb(&tape, &store);
  const int e_id =
      BuildQueryEncoder(tape, pb, cfg, packed, layout, nn::Mode::kInfer);
  const Tensor<float>& e = tape.Value(e_id);

  std::vector<QueryEmbedding> out(queries.size());
  for (size_t q = 0; q < queries.size(); ++q) {
    out[q].values.resize(static_cast<size_t>(cfg.joint_dim));
    for (int64_t d = 0; d < cfg.joint_dim; ++d) {
      out[q].values[static_cast<size_t>(d)] = e.at(d, static_cast<int64_t>(q));
    }
  }
  return out;
}

QueryEmbedding EncodeQuery(const ParameterStore& params,
                           const ModelConfig& cfg,
                           const std::vector<int64_t>& symbols) {
  return EncodeQueries(params, cfg, {symbols})[0];
}

std::vector<DocumentEncoding> EncodeDocuments(
    const ParameterStore& params, const ModelConfig& cfg,
    const std::vector<const FeatureMatrix*>& features,
    const std::vector<std::string>& utt_ids) {
  cfg.Validate();
  Require(features.size() == utt_ids.size(),
          "encode_document: ids and features disagree");
  for (const FeatureMatrix* m : features) {
    Require(m->dim() == cfg.feature_dim,
            StrCat("encode_document: features have dim ", m->dim(),
                   ", model expects ", cfg.feature_dim));
  }
  Ragged layout;
  Tensor<float> packed = PackFeatureColumns(features, &layout);

  Tape<float> tape(/*recording=*/false);
  NamedTensors<float> store = params.tensors;
  GraphBinder<float> pb(&tape, &store);
  const int x_id = tape.Leaf(std::move(packed), false);
  Ragged out_layout;
  const int h_id = BuildDocumentEncoder(tape, pb, cfg, x_id, layout,
                                        nn::Mode::kInfer, nullptr, &out_layout);
  const Tensor<float>& h = tape.Value(h_id);

  std::vector<DocumentEncoding> out(features.size());
  for (size_t i = 0; i < features.size(); ++i) {
    DocumentEncoding& doc = out[i];
    doc.utt_id = utt_ids[i];
    doc.frame_step_ms = cfg.FrameStepMs();
    const int64_t n = out_layout.lengths[i];
    const int64_t off = out_layout.offsets[i];
    doc.matrix = Tensor<float>({n, cfg.joint_dim});
    for (int64_t t = 0; t < n; ++t) {
      for (int64_t d = 0; d < cfg.joint_dim; ++d) {
        doc.matrix.at(t, d) = h.at(d, off + t);
      }
    }
  }
  return out;
}

DocumentEncoding EncodeDocument(const ParameterStore& params,
                                const ModelConfig& cfg,
                                const FeatureMatrix& features,
                                const std::string& utt_id) {
  return EncodeDocuments(params, cfg, {&features}, {utt_id})[0];
}

std::vector<double> ScoreFrames(const DocumentEncoding& doc,
                                const QueryEmbedding& query) {
  Require(doc.matrix.ndim() == 2 &&
              doc.matrix.cols() == static_cast<int64_t>(query.values.size()),
          StrCat("score_frames: joint dimensions disagree: document ",
                 doc.matrix.cols(), ", query ", query.values.size()));
  const int64_t n = doc.matrix.rows();
  const int64_t d = doc.matrix.cols();
  std::vector<double> z(static_cast<size_t>(n));
  for (int64_t t = 0; t < n; ++t) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      s += static_cast<double>(doc.matrix.at(t, j)) *
           static_cast<double>(query.values[static_cast<size_t>(j)]);
    }
    z[static_cast<size_t>(t)] = 1.0 / (1.0 + std::exp(-s));
  }
  return z;
}

}  // namespace kws
