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
// Post-processing of frame probabilities into decisions: segment
// classification, island decoding, rescoring fusion and the amortized
// document index.

#ifndef KWS_SEARCH_H_
#define KWS_SEARCH_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kws/corpus.h"
#include "kws/encoder.h"

namespace kws {

struct DecodeConfig {
  enum class Aggregator { kMedian, kMean, kMax };

  double threshold = 0.5;          // zeroing threshold, tuned on dev
  int64_t min_ms_per_symbol = 20;  // islands shorter than this x letters die
  Aggregator aggregator = Aggregator::kMedian;

  void Validate() const;
};

// Segment classification score: the frame with the highest
// probability decides whether the query occurred anywhere in the
// segment. Rejects empty input.
double ClassifySegment(std::span<const double> z);

// Island decoding: frames below the threshold are zeroed; every
// maximal run of surviving frames becomes one hypothesis scored by the
// configured aggregator (median by convention, midpoint average for
// even runs). Runs shorter than min_ms_per_symbol x query letters are
// pruned. The island spanning downsampled frames [a, b] maps to
// [a*step, (b+1)*step) ms. Hypotheses come out time-sorted and
// pairwise disjoint.
std::vector<Hypothesis> DecodeHits(std::span<const double> z,
                                   const DecodeConfig& config,
                                   int64_t query_symbol_count,
                                   int64_t frame_step_ms,
                                   const std::string& query_id,
                                   const std::string& utt_id);

// Rescoring fusion: the hypothesis keeps its location and its score
// becomes gamma * old + mean(z over the mapped frame interval). The
// time interval [t1, t2) maps to downsampled frames floor(t1/step) ..
// max(floor(t1/step), ceil(t2/step)-1), clamped to the encoding, so no
// interval is empty. Hypotheses outside the utterance are rejected.
Hypothesis RescoreHypothesis(const Hypothesis& baseline,
                             std::span<const double> z,
                             int64_t frame_step_ms, int64_t utt_duration_ms,
                             double gamma);

// ---- document index ---------------------------------------------------

// Persisted per-utterance document encodings. Searching the index is
// equivalent to searching fresh encodings (scores within 1e-6, and
// bit-identical when both sides encode with the same batching).
struct DocumentIndex {
  uint64_t fingerprint = 0;
  int64_t frame_step_ms = 0;
  std::vector<DocumentEncoding> docs;  // sorted by utterance id

  const DocumentEncoding* Find(const std::string& utt_id) const;
};

DocumentIndex BuildIndex(const Corpus& corpus, const ParameterStore& params,
                         const ModelConfig& config);
void SaveIndex(const DocumentIndex& index, const std::string& path);
DocumentIndex LoadIndex(const std::string& path);

// Decodes every indexed utterance for one query.
std::vector<Hypothesis> SearchIndex(const DocumentIndex& index,
                                    const QueryEmbedding& query,
                                    const std::string& query_id,
                                    int64_t query_symbol_count,
                                    const DecodeConfig& config);

// All queries against the whole index, concatenated in query order.
std::vector<Hypothesis> SearchAll(const DocumentIndex& index,
                                  const ParameterStore& params,
                                  const ModelConfig& config,
                                  const SymbolTable& symbols,
                                  const std::vector<Query>& queries,
                                  const DecodeConfig& decode);

}  // namespace kws

#endif  // KWS_SEARCH_H_
