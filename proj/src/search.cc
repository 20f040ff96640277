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

#include "kws/search.h"

#include <algorithm>
#include <cmath>

namespace kws {

using nn::Tensor;

void DecodeConfig::Validate() const {
  Require(threshold > 0.0 && threshold < 1.0,
          "decode config: threshold must be in (0, 1)");
  Require(min_ms_per_symbol >= 0,
          "decode config: min duration factor must be nonnegative");
}

double ClassifySegment(std::span<const double> z) {
  Require(!z.empty(), "classify_segment: empty probability sequence");
  double best = z[0];
  for (double v : z) best = std::max(best, v);
  return best;
}

namespace {

double Aggregate(std::vector<double> values, DecodeConfig::Aggregator agg) {
  switch (agg) {
    case DecodeConfig::Aggregator::kMean: {
      double s = 0;
      for (double v : values) s += v;
      return s / static_cast<double>(values.size());
    }
    case DecodeConfig::Aggregator::kMax: {
      double best = values[0];
      for (double v : values) best = std::max(best, v);
      return best;
    }
    case DecodeConfig::Aggregator::kMedian:
    default: {
      std::sort(values.begin(), values.end());
      const size_t n = values.size();
      // Even-length runs use the midpoint average of the two central
      // values.
      return n % 2 == 1 ? values[n / 2]
                        : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    }
  }
}

}  // namespace

std::vector<Hypothesis> DecodeHits(std::span<const double> z,
                                   const DecodeConfig& config,
                                   int64_t query_symbol_count,
                                   int64_t frame_step_ms,
                                   const std::string& query_id,
                                   const std::string& utt_id) {
  config.Validate();
  Require(!z.empty(), "decode_hits: empty probability sequence");
  Require(frame_step_ms > 0, "decode_hits: frame step must be positive");
  Require(query_symbol_count > 0, "decode_hits: query needs symbols");
  const int64_t min_duration_ms = config.min_ms_per_symbol * query_symbol_count;

  std::vector<Hypothesis> hits;
  const int64_t n = static_cast<int64_t>(z.size());
  int64_t a = -1;
  for (int64_t i = 0; i <= n; ++i) {
    const bool survives = i < n && z[static_cast<size_t>(i)] >= config.threshold;
    if (survives && a < 0) a = i;
    if (!survives && a >= 0) {
      const int64_t b = i - 1;  // maximal run [a, b]
      const int64_t duration = (b - a + 1) * frame_step_ms;
      if (duration >= min_duration_ms) {
        std::vector<double> vals(z.begin() + a, z.begin() + i);
        hits.push_back(Hypothesis{query_id, utt_id, a * frame_step_ms,
                                  (b + 1) * frame_step_ms,
                                  Aggregate(std::move(vals), config.aggregator)});
      }
      a = -1;
    }
  }
  return hits;
}

Hypothesis RescoreHypothesis(const Hypothesis& baseline,
                             std::span<const double> z,
                             int64_t frame_step_ms, int64_t utt_duration_ms,
                             double gamma) {
  Require(frame_step_ms > 0, "rescore: frame step must be positive");
  Require(baseline.start_ms >= 0 && baseline.end_ms > baseline.start_ms &&
              baseline.end_ms <= utt_duration_ms,
          StrCat("rescore: hypothesis for query ", baseline.query_id,
                 " lies outside utterance ", baseline.utt_id, " ([",
                 baseline.start_ms, ", ", baseline.end_ms, ") vs ",
                 utt_duration_ms, " ms)"));
  const int64_t n = static_cast<int64_t>(z.size());
  Require(n > 0, "rescore: empty probability sequence");
  int64_t a = baseline.start_ms / frame_step_ms;
  int64_t b = std::max(
      a, (baseline.end_ms + frame_step_ms - 1) / frame_step_ms - 1);
  a = std::min(a, n - 1);
  b = std::min(b, n - 1);
  double mean = 0.0;
  for (int64_t i = a; i <= b; ++i) mean += z[static_cast<size_t>(i)];
  mean /= static_cast<double>(b - a + 1);
  Hypothesis out = baseline;
  out.score = gamma * baseline.score + mean;
  return out;
}

const DocumentEncoding* DocumentIndex::Find(const std::string& utt_id) const {
  const auto it = std::lower_bound(
      docs.begin(), docs.end(), utt_id,
      [](const DocumentEncoding& d, const std::string& id) {
        return d.utt_id < id;
      });
  if (it == docs.end() || it->utt_id != utt_id) return nullptr;
  return &*it;
}

DocumentIndex BuildIndex(const Corpus& corpus, const ParameterStore& params,
                         const ModelConfig& config) {
  Require(params.fingerprint == config.Fingerprint(),
          "build_index: parameters and config disagree");
  DocumentIndex index;
  index.fingerprint = config.Fingerprint();
  index.frame_step_ms = config.FrameStepMs();
  // Fixed-size batches amortize the parameter binding; the corpus is
  // already sorted by id so rebuilds batch identically.
  const size_t kBatch = 32;
  for (size_t start = 0; start < corpus.utterances.size(); start += kBatch) {
    const size_t stop = std::min(start + kBatch, corpus.utterances.size());
    std::vector<const FeatureMatrix*> mats;
    std::vector<std::string> ids;
    for (size_t i = start; i < stop; ++i) {
      mats.push_back(&corpus.utterances[i].features);
      ids.push_back(corpus.utterances[i].id);
    }
    auto encoded = EncodeDocuments(params, config, mats, ids);
    for (auto& d : encoded) index.docs.push_back(std::move(d));
  }
  return index;
}

void SaveIndex(const DocumentIndex& index, const std::string& path) {
  ByteWriter w;
  w.Magic("KWSI");
  w.U32(1);
  w.U64(index.fingerprint);
  w.U32(static_cast<uint32_t>(index.frame_step_ms));
  w.U32(static_cast<uint32_t>(index.docs.size()));
  for (const auto& d : index.docs) {
    w.Str(d.utt_id);
    w.U32(static_cast<uint32_t>(d.matrix.rows()));
    w.U32(static_cast<uint32_t>(d.matrix.cols()));
    w.Bytes(d.matrix.data.data(), d.matrix.data.size() * 4);
  }
  WriteFileAtomic(path, w.buffer());
}

DocumentIndex LoadIndex(const std::string& path) {
  ByteReader r(ReadFileBytes(path), path);
  r.ExpectMagic("KWSI");
  const uint32_t version = r.U32();
  Require(version == 1, StrCat(path, ": unsupported index version ", version));
  DocumentIndex index;
  index.fingerprint = r.U64();
  index.frame_step_ms = r.U32();
  const uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    DocumentEncoding d;
    d.utt_id = r.Str();
    const uint32_t rows = r.U32();
    const uint32_t cols = r.U32();
    d.frame_step_ms = index.frame_step_ms;
    d.matrix = Tensor<float>({rows, cols});
    r.F32Array(d.matrix.data.data(), d.matrix.data.size());
    index.docs.push_back(std::move(d));
  }
  Require(r.AtEnd(), StrCat(path, ": trailing bytes after last record"));
  Require(std::is_sorted(index.docs.begin(), index.docs.end(),
                         [](const DocumentEncoding& a,
                            const DocumentEncoding& b) {
                           return a.utt_id < b.utt_id;
                         }),
          StrCat(path, ": records out of order"));
  return index;
}

std::vector<Hypothesis> SearchIndex(const DocumentIndex& index,
                                    const QueryEmbedding& query,
                                    const std::string& query_id,
                                    int64_t query_symbol_count,
                                    const DecodeConfig& config) {
  std::vector<Hypothesis> out;
  for (const auto& doc : index.docs) {
    const auto z = ScoreFrames(doc, query);
    auto hits = DecodeHits(z, config, query_symbol_count, index.frame_step_ms,
                           query_id, doc.utt_id);
    out.insert(out.end(), hits.begin(), hits.end());
  }
  return out;
}

std::vector<Hypothesis> SearchAll(const DocumentIndex& index,
                                  const ParameterStore& params,
                                  const ModelConfig& config,
                                  const SymbolTable& symbols,
                                  const std::vector<Query>& queries,
                                  const DecodeConfig& decode) {
  Require(index.fingerprint == params.fingerprint,
          "search: index fingerprint does not match the model parameters");
  std::vector<std::vector<int64_t>> encoded;
  encoded.reserve(queries.size());
  for (const auto& q : queries) encoded.push_back(symbols.Encode(q.text));
  const auto embeddings = EncodeQueries(params, config, encoded);
  std::vector<Hypothesis> out;
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    auto hits = SearchIndex(index, embeddings[qi], queries[qi].id,
                            queries[qi].symbol_count(), decode);
    out.insert(out.end(), hits.begin(), hits.end());
  }
  return out;
}

}  // namespace kws
