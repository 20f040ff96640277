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
// Corpus records and their text formats. All text files are UTF-8,
// tab-separated, newline-terminated.
//
//   alignments.tsv   utt_id \t word \t start_ms \t end_ms
//   transcripts.tsv  utt_id \t space-joined words
//   queries          query_id \t query text
//   references       query_id \t utt_id \t start_ms \t end_ms
//   hypotheses       query_id \t utt_id \t start_ms \t end_ms \t score
//   duration.tsv     total_seconds \t value
//   symbols.txt      one symbol per line; line number = symbol id

#ifndef KWS_CORPUS_H_
#define KWS_CORPUS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kws/formats.h"

namespace kws {

struct AlignedWord {
  std::string word;
  int64_t start_ms = 0;
  int64_t end_ms = 0;
};

// Word tokens with start/end times, time-ordered, non-overlapping,
// within the utterance duration.
struct WordAlignment {
  std::vector<AlignedWord> words;
};

struct Utterance {
  std::string id;
  FeatureMatrix features;
  WordAlignment alignment;
  int64_t duration_ms() const { return features.num_frames() * 10; }
};

struct Corpus {
  std::vector<Utterance> utterances;  // sorted by id
  std::map<std::string, int64_t> by_id;

  const Utterance& Get(const std::string& id) const;
  int64_t total_frames() const;
  double total_seconds() const;
  void Validate() const;  // alignment invariants per utterance
};

// Loads a split directory: features/<utt>.kwsf plus alignments.tsv
// (optional; without it the corpus is unlabeled and lists whatever the
// features directory holds).
Corpus LoadCorpusDir(const std::string& dir);

// The query/grapheme inventory. Symbols are single characters; the
// separator joins words of a multi-word query and is part of the
// encoder inventory but is never rendered as audio.
struct SymbolTable {
  std::vector<char> symbols;  // index = id; separator is the last entry
  static constexpr char kSeparator = '_';

  static SymbolTable ForInventory(int64_t inventory);
  static SymbolTable Load(const std::string& path);
  void Save(const std::string& path) const;

  int64_t size() const { return static_cast<int64_t>(symbols.size()); }
  int64_t separator_id() const { return size() - 1; }
  // Query text -> symbol ids; a space maps to the separator. Unknown
  // characters are rejected with their position.
  std::vector<int64_t> Encode(const std::string& text) const;
};

struct Query {
  std::string id;
  std::string text;  // words joined by single spaces
  int64_t symbol_count() const;  // letters incl. separators
};

std::vector<Query> LoadQueries(const std::string& path);
void SaveQueries(const std::vector<Query>& queries, const std::string& path);

struct Reference {
  std::string query_id;
  std::string utt_id;
  int64_t start_ms = 0;
  int64_t end_ms = 0;
};

std::vector<Reference> LoadReferences(const std::string& path);
void SaveReferences(const std::vector<Reference>& refs,
                    const std::string& path);

// The universal search/rescoring/eval record.
struct Hypothesis {
  std::string query_id;
  std::string utt_id;
  int64_t start_ms = 0;
  int64_t end_ms = 0;
  double score = 0.0;
};

std::vector<Hypothesis> LoadHypotheses(const std::string& path);
void SaveHypotheses(const std::vector<Hypothesis>& hyps,
                    const std::string& path);

double LoadDurationSeconds(const std::string& path);
void SaveDurationSeconds(double seconds, const std::string& path);

void SaveTranscripts(const Corpus& corpus, const std::string& path);

}  // namespace kws

#endif  // KWS_CORPUS_H_
