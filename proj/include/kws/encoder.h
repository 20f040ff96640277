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
//
// The query encoder (embedding -> batch-norm -> BiGRU stack -> sum
// over positions -> affine) and the document encoder (batch-norm ->
// BiLSTM -> dropout, stacked, with scheduled temporal downsampling,
// then an affine projection broadcast across time). Graph builders are
// templated on the scalar type so the same code runs in float for
// training/inference and in double under finite-difference checks.

#ifndef KWS_ENCODER_H_
#define KWS_ENCODER_H_

#include <map>
#include <string>
#include <vector>

#include "kws/cells.h"
#include "kws/formats.h"
#include "kws/kernels.h"
#include "kws/model_config.h"
#include "kws/param_store.h"
#include "kws/rng.h"
#include "kws/tape.h"

namespace kws {

// Lazily binds store tensors onto a tape. Trainable tensors become
// named tape parameters; batch-norm running statistics stay in the
// store and are mutated in place by train-mode batch norm.
template <typename T>
class GraphBinder {
 public:
  GraphBinder(nn::Tape<T>* tape, NamedTensors<T>* store)
      : tape_(tape), store_(store) {}

  int Bind(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    auto st = store_->find(name);
    Require(st != store_->end(), StrCat("model parameters: missing ", name));
    const int id = ParameterStore::IsTrainable(name)
                       ? tape_->Param(name, st->second)
                       : tape_->Leaf(st->second, false);
    bound_.emplace(name, id);
    return id;
  }

  nn::Tensor<T>* Mutable(const std::string& name) {
    auto st = store_->find(name);
    Require(st != store_->end(), StrCat("model parameters: missing ", name));
    return &st->second;
  }

 private:
  nn::Tape<T>* tape_;
  NamedTensors<T>* store_;
  std::map<std::string, int> bound_;
};

namespace detail {

template <typename T>
int BnLayer(nn::Tape<T>& tape, GraphBinder<T>& pb, const std::string& prefix,
            int x_id, nn::Mode mode) {
  return nn::BatchNorm(tape, x_id, pb.Bind(prefix + ".bn.gamma"),
                       pb.Bind(prefix + ".bn.beta"), mode,
                       pb.Mutable(prefix + ".bn.running_mean"),
                       pb.Mutable(prefix + ".bn.running_var"), T(0.1),
                       T(1e-5));
}

template <typename T>
nn::RnnParamIds<T> BindRnn(GraphBinder<T>& pb, const std::string& prefix) {
  nn::RnnParamIds<T> ids;
  ids.wx = pb.Bind(prefix + ".wx");
  ids.wh = pb.Bind(prefix + ".wh");
  ids.b = pb.Bind(prefix + ".b");
  return ids;
}

}  // namespace detail

// Query side: packed symbol ids for a batch of queries -> (D x Q).
template <typename T>
int BuildQueryEncoder(nn::Tape<T>& tape, GraphBinder<T>& pb,
                      const ModelConfig& cfg,
                      const std::vector<int64_t>& packed_symbols,
                      const nn::Ragged& queries, nn::Mode mode) {
  Require(queries.size() > 0, "encode_query: empty batch");
  for (int64_t i = 0; i < queries.size(); ++i) {
    Require(queries.lengths[i] >= 1, "encode_query: empty query");
  }
  int x = nn::EmbeddingLookup(tape, pb.Bind("query.embed"), packed_symbols);
  for (int64_t l = 0; l < cfg.query_layers; ++l) {
    const std::string prefix = StrCat("query.l", l);
    x = detail::BnLayer(tape, pb, prefix, x, mode);
    x = nn::RecurrentForward(tape, nn::CellKind::kGru,
                             nn::Direction::kBidirectional,
                             detail::BindRnn(pb, prefix + ".fwd"),
                             detail::BindRnn(pb, prefix + ".bwd"), x, queries);
  }
  x = nn::SumPositions(tape, x, queries);
  return nn::Affine(tape, pb.Bind("query.proj.w"), pb.Bind("query.proj.b"), x);
}

// Document side: packed feature columns -> packed (D x sum Nhat).
// out_layout receives the downsampled per-utterance layout.
template <typename T>
int BuildDocumentEncoder(nn::Tape<T>& tape, GraphBinder<T>& pb,
                         const ModelConfig& cfg, int features_id,
                         const nn::Ragged& utts, nn::Mode mode,
                         Rng* dropout_rng, nn::Ragged* out_layout) {
  Require(utts.size() > 0, "encode_document: empty batch");
  const int64_t min_frames = cfg.MinFrames();
  for (int64_t i = 0; i < utts.size(); ++i) {
    Require(utts.lengths[i] >= min_frames,
            StrCat("encode_document: utterance with ", utts.lengths[i],
                   " frames is too short; the downsample schedule requires "
                   "at least ",
                   min_frames));
  }
  int x = features_id;
  nn::Ragged layout = utts;
  for (int64_t l = 0; l < cfg.doc_layers; ++l) {
    const std::string prefix = StrCat("doc.l", l);
    x = detail::BnLayer(tape, pb, prefix, x, mode);
    x = nn::RecurrentForward(tape, nn::CellKind::kLstm,
                             nn::Direction::kBidirectional,
                             detail::BindRnn(pb, prefix + ".fwd"),
                             detail::BindRnn(pb, prefix + ".bwd"), x, layout);
    x = nn::Dropout(tape, x, cfg.dropout, mode, dropout_rng);
    if (cfg.downsample[l] > 1) {
      nn::Ragged down;
      x = nn::TemporalDownsample(tape, x, layout, cfg.downsample[l], &down);
      layout = down;
    }
  }
  *out_layout = layout;
  return nn::Affine(tape, pb.Bind("doc.proj.w"), pb.Bind("doc.proj.b"), x);
}

// ---- inference API ----------------------------------------------------

struct QueryEmbedding {
  std::vector<float> values;  // joint dimension D
};

struct DocumentEncoding {
  std::string utt_id;
  int64_t frame_step_ms = 0;
  nn::Tensor<float> matrix;  // (Nhat x D), row per downsampled frame
};

// Inference-mode encoders: dropout off, batch-norm running statistics,
// no recording. Pure given the store, so concurrent use is safe.
QueryEmbedding EncodeQuery(const ParameterStore& params,
                           const ModelConfig& cfg,
                           const std::vector<int64_t>& symbols);
std::vector<QueryEmbedding> EncodeQueries(
    const ParameterStore& params, const ModelConfig& cfg,
    const std::vector<std::vector<int64_t>>& queries);

DocumentEncoding EncodeDocument(const ParameterStore& params,
                                const ModelConfig& cfg,
                                const FeatureMatrix& features,
                                const std::string& utt_id);
std::vector<DocumentEncoding> EncodeDocuments(
    const ParameterStore& params, const ModelConfig& cfg,
    const std::vector<const FeatureMatrix*>& features,
    const std::vector<std::string>& utt_ids);

// z = sigmoid(H e): one occurrence probability per downsampled frame,
// every value in (0, 1).
std::vector<double> ScoreFrames(const DocumentEncoding& doc,
                                const QueryEmbedding& query);

// Packs (frames x dim) feature matrices into the (dim x sum N) column
// convention used by the kernels.
nn::Tensor<float> PackFeatureColumns(
    const std::vector<const FeatureMatrix*>& mats, nn::Ragged* layout);

}  // namespace kws

#endif  // KWS_ENCODER_H_
