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

#ifndef KWS_PHRASES_H_
#define KWS_PHRASES_H_

#include <cstdint>
#include <string>
#include <vector>

#include "kws/corpus.h"
#include "kws/rng.h"

namespace kws {

struct PhraseOccurrence {
  int64_t utt_index = 0;   // into the corpus used for extraction
  int64_t first_word = 0;  // alignment positions [first_word, last_word]
  int64_t last_word = 0;
  int64_t start_ms = 0;    // start of first word
  int64_t end_ms = 0;      // end of last word
};

// A run of 1..3 consecutive word tokens with every occurrence span.
// Token multiplicity is the occurrence count, so sampling occurrences
// uniformly is frequency-proportional over phrase types.
struct Phrase {
  std::vector<std::string> words;
  std::vector<PhraseOccurrence> occurrences;

  std::string Text() const;  // words joined by single spaces
};

struct PhraseSet {
  std::vector<Phrase> phrases;  // sorted by word sequence
  int64_t total_tokens = 0;

  // Flat occurrence index: token t -> (phrase, occurrence).
  std::vector<std::pair<int64_t, int64_t>> token_index;
};

// All unigrams, bigrams and trigrams of consecutive words over the
// given utterances (all of them when utt_subset is empty).
PhraseSet ExtractPhrases(const Corpus& corpus,
                         const std::vector<int64_t>& utt_subset = {},
                         int64_t max_order = 3);

struct SamplerConfig {
  int64_t batch_phrases = 64;   // |Q|
  int64_t utts_per_phrase = 4;  // M
};

// One training group: a phrase plus M utterances, the first of which
// contains it.
struct SampledGroup {
  int64_t phrase_index = 0;
  std::vector<int64_t> utt_indices;
};

// Draws |Q| phrase tokens uniformly over the token multiset; the
// drawn occurrence's utterance is the guaranteed positive and the
// remaining M-1 utterances are i.i.d. uniform over eligible_utts (they
// may happen to contain the phrase; labels stay truthful). Fresh draws
// on every call.
std::vector<SampledGroup> SampleBatch(const PhraseSet& phrases,
                                      const std::vector<int64_t>& eligible_utts,
                                      const SamplerConfig& config, Rng* rng);

// Frame-level occurrence labels for one (phrase, utterance) pair at
// the downsampled rate: a full-rate frame is positive when its
// midpoint lies inside an occurrence span (start of first word to end
// of last word of a consecutive match in the alignment), and a
// downsampled frame is positive when any full-rate frame in its
// window is (any-pool). Absent phrase -> all zeros.
std::vector<float> MakeLabels(const std::vector<std::string>& phrase_words,
                              const WordAlignment& alignment,
                              int64_t num_frames, int64_t downsample_product);

// Occurrence spans of a word sequence within one alignment.
std::vector<std::pair<int64_t, int64_t>> FindOccurrenceSpans(
    const std::vector<std::string>& phrase_words,
    const WordAlignment& alignment);

}  // namespace kws

#endif  // KWS_PHRASES_H_
