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

#include "kws/phrases.h"

#include <algorithm>
#include <map>

namespace kws {

std::string Phrase::Text() const {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

PhraseSet ExtractPhrases(const Corpus& corpus,
                         const std::vector<int64_t>& utt_subset,
                         int64_t max_order) {
  std::vector<int64_t> utts = utt_subset;
  if (utts.empty()) {
    utts.resize(corpus.utterances.size());
    for (size_t i = 0; i < utts.size(); ++i) utts[i] = static_cast<int64_t>(i);
  }
  std::map<std::vector<std::string>, std::vector<PhraseOccurrence>> found;
  for (int64_t ui : utts) {
    const auto& words = corpus.utterances[static_cast<size_t>(ui)].alignment.words;
    const int64_t n = static_cast<int64_t>(words.size());
    for (int64_t start = 0; start < n; ++start) {
      std::vector<std::string> key;
      for (int64_t order = 1; order <= max_order && start + order <= n;
           ++order) {
        key.push_back(words[static_cast<size_t>(start + order - 1)].word);
        found[key].push_back({ui, start, start + order - 1,
                              words[static_cast<size_t>(start)].start_ms,
                              words[static_cast<size_t>(start + order - 1)].end_ms});
      }
    }
  }
  PhraseSet set;
  set.phrases.reserve(found.size());
  for (auto& [words, occs] : found) {
    Phrase p;
    p.words = words;
    p.occurrences = std::move(occs);
    set.phrases.push_back(std::move(p));
  }
  for (size_t pi = 0; pi < set.phrases.size(); ++pi) {
    const auto& occs = set.phrases[pi].occurrences;
    for (size_t oi = 0; oi < occs.size(); ++oi) {
      set.token_index.emplace_back(static_cast<int64_t>(pi),
                                   static_cast<int64_t>(oi));
    }
    set.total_tokens += static_cast<int64_t>(occs.size());
  }
  return set;
}

std::vector<SampledGroup> SampleBatch(const PhraseSet& phrases,
                                      const std::vector<int64_t>& eligible_utts,
                                      const SamplerConfig& config, Rng* rng) {
  Require(config.batch_phrases >= 1 && config.utts_per_phrase >= 1,
          "sample_batch: |Q| and M must be >= 1");
  Require(phrases.total_tokens > 0, "sample_batch: no phrases to sample");
  Require(!eligible_utts.empty(), "sample_batch: empty corpus");
  std::vector<SampledGroup> batch(static_cast<size_t>(config.batch_phrases));
  for (auto& group : batch) {
    const auto [pi, oi] =
        phrases.token_index[static_cast<size_t>(rng->UniformInt(phrases.total_tokens))];
    group.phrase_index = pi;
    group.utt_indices.reserve(static_cast<size_t>(config.utts_per_phrase));
    group.utt_indices.push_back(
        phrases.phrases[static_cast<size_t>(pi)].occurrences[static_cast<size_t>(oi)].utt_index);
    for (int64_t m = 1; m < config.utts_per_phrase; ++m) {
      group.utt_indices.push_back(
          eligible_utts[static_cast<size_t>(rng->UniformInt(
              static_cast<int64_t>(eligible_utts.size())))]);
    }
  }
  return batch;
}

std::vector<std::pair<int64_t, int64_t>> FindOccurrenceSpans(
    const std::vector<std::string>& phrase_words,
    const WordAlignment& alignment) {
  std::vector<std::pair<int64_t, int64_t>> spans;
  const int64_t k = static_cast<int64_t>(phrase_words.size());
  const int64_t n = static_cast<int64_t>(alignment.words.size());
  for (int64_t start = 0; start + k <= n; ++start) {
    bool match = true;
    for (int64_t i = 0; i < k && match; ++i) {
      match = alignment.words[static_cast<size_t>(start + i)].word ==
              phrase_words[static_cast<size_t>(i)];
    }
    if (match) {
      spans.emplace_back(alignment.words[static_cast<size_t>(start)].start_ms,
                         alignment.words[static_cast<size_t>(start + k - 1)].end_ms);
    }
  }
  return spans;
}

std::vector<float> MakeLabels(const std::vector<std::string>& phrase_words,
                              const WordAlignment& alignment,
                              int64_t num_frames, int64_t downsample_product) {
  Require(num_frames >= downsample_product,
          "make_labels: utterance too short for the downsample product");
  Require(!phrase_words.empty(), "make_labels: empty phrase");
  const auto spans = FindOccurrenceSpans(phrase_words, alignment);
  const int64_t down_n = num_frames / downsample_product;
  std::vector<float> labels(static_cast<size_t>(down_n), 0.0f);
  for (const auto& [start_ms, end_ms] : spans) {
    // Full-rate frame n is inside the span when its midpoint is; the
    // downsampled frame covering it goes positive (any-pool).
    for (int64_t n = 0; n < num_frames; ++n) {
      const int64_t mid = 10 * n + 5;
      if (mid >= start_ms && mid < end_ms) {
        const int64_t k = n / downsample_product;
        if (k < down_n) labels[static_cast<size_t>(k)] = 1.0f;
      }
    }
  }
  return labels;
}

}  // namespace kws
