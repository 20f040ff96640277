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

#include <doctest.h>

#include <cmath>
#include <set>

#include "kws/synth.h"

using kws::SynthConfig;
using kws::SynthCorpus;

namespace {

SynthConfig SmallConfig() {
  SynthConfig cfg;
  cfg.inventory = 8;
  cfg.feature_dim = 5;
  cfg.vocab_size = 12;
  cfg.oov_fraction = 0.25;
  cfg.train_utts = 10;
  cfg.dev_utts = 5;
  cfg.eval_utts = 5;
  cfg.words_per_utt_min = 2;
  cfg.words_per_utt_max = 4;
  cfg.min_utt_frames = 30;
  cfg.iv_queries = 4;
  cfg.oov_queries = 2;
  cfg.seed = 4242;
  return cfg;
}

std::set<std::string> TrainWords(const SynthCorpus& c) {
  std::set<std::string> words;
  for (const auto& u : c.train.corpus.utterances) {
    for (const auto& w : u.alignment.words) words.insert(w.word);
  }
  return words;
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("the corpus is fully determined by the seed") {
  const SynthCorpus a = kws::GenerateSynthCorpus(SmallConfig());
  const SynthCorpus b = kws::GenerateSynthCorpus(SmallConfig());
  REQUIRE(a.train.corpus.utterances.size() ==
          b.train.corpus.utterances.size());
  for (size_t i = 0; i < a.train.corpus.utterances.size(); ++i) {
    const auto& ua = a.train.corpus.utterances[i];
    const auto& ub = b.train.corpus.utterances[i];
    CHECK(ua.id == ub.id);
    CHECK(ua.features.frames.data == ub.features.frames.data);  // bitwise
    REQUIRE(ua.alignment.words.size() == ub.alignment.words.size());
  }
  REQUIRE(a.iv_queries.size() == b.iv_queries.size());
  for (size_t i = 0; i < a.iv_queries.size(); ++i) {
    CHECK(a.iv_queries[i].text == b.iv_queries[i].text);
  }
}

TEST_CASE("zero noise renders prototypes exactly and decodes back") {
  SynthConfig cfg = SmallConfig();
  cfg.noise_sigma = 0.0;
  const SynthCorpus c = kws::GenerateSynthCorpus(cfg);
  // Collect the distinct frame vectors used inside word spans; they
  // must form at most `inventory` prototypes, and nearest-prototype
  // decoding of each frame must be exact (zero distance).
  std::set<std::vector<float>> in_word, in_silence;
  for (const auto& u : c.train.corpus.utterances) {
    for (int64_t t = 0; t < u.features.num_frames(); ++t) {
      std::vector<float> frame(static_cast<size_t>(u.features.dim()));
      for (int64_t d = 0; d < u.features.dim(); ++d) {
        frame[static_cast<size_t>(d)] = u.features.frames.at(t, d);
      }
      const int64_t ms = t * 10 + 5;
      bool inside = false;
      for (const auto& w : u.alignment.words) {
        if (ms >= w.start_ms && ms < w.end_ms) inside = true;
      }
      (inside ? in_word : in_silence).insert(std::move(frame));
    }
  }
  CHECK(static_cast<int64_t>(in_word.size()) <= cfg.inventory);
  CHECK(in_silence.size() == 1);  // the silence prototype
  // Word prototypes and silence never collide.
  for (const auto& f : in_word) CHECK(in_silence.count(f) == 0);

  // Nearest-prototype decoding of the noiseless frames recovers the
  // symbol sequence up to run collapse (adjacent repeated symbols
  // render as one prototype run): per word, the run sequence of frame
  // prototypes must equal the run-collapsed spelling under one global
  // prototype-symbol bijection.
  std::map<std::vector<float>, char> proto_to_symbol;
  std::map<char, std::vector<float>> symbol_to_proto;
  for (const auto& u : c.train.corpus.utterances) {
    for (const auto& w : u.alignment.words) {
      std::string collapsed;
      for (char ch : w.word) {
        if (collapsed.empty() || collapsed.back() != ch) collapsed.push_back(ch);
      }
      std::vector<std::vector<float>> runs;
      for (int64_t t = w.start_ms / 10; t < w.end_ms / 10; ++t) {
        std::vector<float> frame(static_cast<size_t>(u.features.dim()));
        for (int64_t d = 0; d < u.features.dim(); ++d) {
          frame[static_cast<size_t>(d)] = u.features.frames.at(t, d);
        }
        if (runs.empty() || runs.back() != frame) runs.push_back(frame);
      }
      REQUIRE(runs.size() == collapsed.size());
      for (size_t i = 0; i < runs.size(); ++i) {
        const char sym = collapsed[i];
        auto p = proto_to_symbol.emplace(runs[i], sym);
        CHECK(p.first->second == sym);  // consistent in one direction
        auto q = symbol_to_proto.emplace(sym, runs[i]);
        CHECK(q.first->second == runs[i]);  // and bijective
      }
    }
  }
}

TEST_CASE("alignments are ordered, in bounds and cover word spans") {
  const SynthCorpus c = kws::GenerateSynthCorpus(SmallConfig());
  for (const auto* split : {&c.train.corpus, &c.dev.corpus, &c.eval.corpus}) {
    for (const auto& u : split->utterances) {
      CHECK(u.features.num_frames() >= 30);  // min_utt_frames padding
      int64_t prev = 0;
      for (const auto& w : u.alignment.words) {
        CHECK(w.start_ms >= prev);
        CHECK(w.start_ms < w.end_ms);
        CHECK(w.end_ms <= u.duration_ms());
        CHECK(w.start_ms % 10 == 0);
        CHECK(w.end_ms % 10 == 0);
        prev = w.end_ms;
      }
    }
  }
}

TEST_CASE("OOV queries never appear in training transcripts") {
  const SynthCorpus c = kws::GenerateSynthCorpus(SmallConfig());
  const auto train_words = TrainWords(c);
  REQUIRE(!c.oov_queries.empty());
  for (const auto& q : c.oov_queries) {
    CHECK(train_words.count(q.text) == 0);
  }
  for (const auto& w : c.oov_vocab) CHECK(train_words.count(w) == 0);
}

TEST_CASE("IV queries occur in training, dev and eval") {
  const SynthCorpus c = kws::GenerateSynthCorpus(SmallConfig());
  const auto train_words = TrainWords(c);
  REQUIRE(!c.iv_queries.empty());
  for (const auto& q : c.iv_queries) {
    CHECK(train_words.count(q.text) == 1);
    CHECK(!kws::BuildReferences(c.dev.corpus, {q}).empty());
    CHECK(!kws::BuildReferences(c.eval.corpus, {q}).empty());
  }
}

TEST_CASE("an empty OOV request yields an empty list") {
  SynthConfig cfg = SmallConfig();
  cfg.oov_queries = 0;
  const SynthCorpus c = kws::GenerateSynthCorpus(cfg);
  CHECK(c.oov_queries.empty());
}

TEST_CASE("too-small inventories are rejected") {
  SynthConfig cfg = SmallConfig();
  cfg.inventory = 2;
  cfg.word_len_min = 1;
  cfg.word_len_max = 2;
  cfg.vocab_size = 40;  // 2 + 4 possible spellings << 40
  CHECK_THROWS_WITH_AS(kws::GenerateSynthCorpus(cfg),
                       doctest::Contains("too small"), kws::KwsError);
}

TEST_CASE("references list exactly the aligned occurrence spans") {
  const SynthCorpus c = kws::GenerateSynthCorpus(SmallConfig());
  const auto refs = kws::BuildReferences(c.eval.corpus, c.iv_queries);
  for (const auto& r : refs) {
    const auto& u = c.eval.corpus.Get(r.utt_id);
    bool found = false;
    for (const auto& w : u.alignment.words) {
      if (w.start_ms == r.start_ms && w.end_ms == r.end_ms) {
        // Single-word queries: the span is one aligned word equal to
        // the query text.
        for (const auto& q : c.iv_queries) {
          if (q.id == r.query_id) CHECK(w.word == q.text);
        }
        found = true;
      }
    }
    CHECK(found);
  }
}

TEST_SUITE_END();
