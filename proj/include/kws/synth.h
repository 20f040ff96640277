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
// Deterministic synthetic speech-like corpus: every symbol owns a
// Gaussian prototype vector in feature space; words render symbol by
// symbol with sampled durations plus i.i.d. Gaussian noise, separated
// by a silence prototype. Word identity is its spelling, so the
// grapheme inventory covers every query, seen or unseen.

#ifndef KWS_SYNTH_H_
#define KWS_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "kws/corpus.h"
#include "kws/rng.h"

namespace kws {

struct SynthConfig {
  int64_t inventory = 20;  // distinct symbols (separator excluded)
  int64_t feature_dim = 16;
  int64_t symbol_frames_min = 4;
  int64_t symbol_frames_max = 9;
  double noise_sigma = 0.3;
  int64_t word_len_min = 2;
  int64_t word_len_max = 5;
  int64_t words_per_utt_min = 3;
  int64_t words_per_utt_max = 6;
  int64_t vocab_size = 50;
  double oov_fraction = 0.15;  // vocabulary held out of training
  int64_t train_utts = 100;
  int64_t dev_utts = 20;
  int64_t eval_utts = 20;
  int64_t silence_frames_min = 2;
  int64_t silence_frames_max = 6;
  int64_t min_utt_frames = 110;  // pad with trailing silence up to this
  int64_t iv_queries = 20;
  int64_t oov_queries = 10;
  uint64_t seed = 1234;

  void Validate() const;
};

struct SynthSplit {
  std::string name;
  Corpus corpus;
};

struct SynthCorpus {
  SymbolTable symbols;
  std::vector<std::string> iv_vocab;   // words available to training
  std::vector<std::string> oov_vocab;  // words only in dev/eval
  SynthSplit train, dev, eval;
  std::vector<Query> iv_queries;
  std::vector<Query> oov_queries;
};

// Fully determined by the config (and its seed).
SynthCorpus GenerateSynthCorpus(const SynthConfig& config);

// IV queries are training words that also occur in dev and eval; OOV
// queries are freshly spelled words over the same symbols, verified
// absent from every training transcript.
void SplitQueries(SynthCorpus* corpus, int64_t iv_count, int64_t oov_count,
                  Rng* rng);

// Occurrence spans of every query over a split's alignments.
std::vector<Reference> BuildReferences(const Corpus& corpus,
                                       const std::vector<Query>& queries);

// Writes the corpus tree: symbols.txt, queries_{iv,oov}.tsv and per
// split features/, alignments.tsv, transcripts.tsv, references.tsv,
// duration.tsv.
void WriteSynthCorpus(const SynthCorpus& corpus, const std::string& out_dir);

}  // namespace kws

#endif  // KWS_SYNTH_H_
