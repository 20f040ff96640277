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

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "kws/rng.h"
#include "kws/search.h"
#include "kws/synth.h"

using kws::DecodeConfig;
using kws::Hypothesis;
using kws::KwsError;
using kws::Rng;

namespace {

// Brute-force island scanner used as the decoding oracle: enumerate
// maximal runs by linear scan, aggregate by sorting, prune by
// duration.
std::vector<Hypothesis> OracleDecode(const std::vector<double>& z,
                                     double threshold, int64_t letters,
                                     int64_t step_ms, int64_t min_per_letter) {
  std::vector<Hypothesis> out;
  size_t i = 0;
  while (i < z.size()) {
    if (z[i] < threshold) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < z.size() && z[j] >= threshold) ++j;
    const int64_t frames = static_cast<int64_t>(j - i);
    if (frames * step_ms >= min_per_letter * letters) {
      std::vector<double> vals(z.begin() + static_cast<int64_t>(i),
                               z.begin() + static_cast<int64_t>(j));
      std::sort(vals.begin(), vals.end());
      const double median =
          vals.size() % 2 ? vals[vals.size() / 2]
                          : 0.5 * (vals[vals.size() / 2 - 1] +
                                   vals[vals.size() / 2]);
      out.push_back({"q", "u", static_cast<int64_t>(i) * step_ms,
                     static_cast<int64_t>(j) * step_ms, median});
    }
    i = j;
  }
  return out;
}

kws::SynthConfig SmallSynth(int64_t utts) {
  kws::SynthConfig cfg;
  cfg.inventory = 8;
  cfg.feature_dim = 4;
  cfg.vocab_size = 10;
  cfg.oov_fraction = 0.2;
  cfg.train_utts = std::max<int64_t>(2, utts);
  cfg.dev_utts = 4;
  cfg.eval_utts = 4;
  cfg.words_per_utt_min = 2;
  cfg.words_per_utt_max = 3;
  cfg.min_utt_frames = 16;
  cfg.iv_queries = 3;
  cfg.oov_queries = 2;
  cfg.seed = 900;
  return cfg;
}

kws::ModelConfig SmallModel() {
  kws::ModelConfig cfg;
  cfg.feature_dim = 4;
  cfg.symbol_count = 9;
  cfg.embed_dim = 4;
  cfg.query_layers = 1;
  cfg.query_hidden = 3;
  cfg.doc_layers = 1;
  cfg.doc_hidden = 4;
  cfg.downsample = {2};
  cfg.joint_dim = 5;
  cfg.dropout = 0.2;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("search");

TEST_CASE("classify_segment is the max frame probability") {
  CHECK(kws::ClassifySegment(std::vector<double>{0.1, 0.9, 0.3}) == 0.9);
  CHECK(kws::ClassifySegment(std::vector<double>{0.4, 0.4, 0.4}) == 0.4);
  // Permutation invariance.
  CHECK(kws::ClassifySegment(std::vector<double>{0.3, 0.1, 0.9}) == 0.9);
  CHECK_THROWS_AS(kws::ClassifySegment(std::vector<double>{}), KwsError);
}

TEST_CASE("decode_hits hand trace") {
  const std::vector<double> z = {0.1, 0.6, 0.7, 0.2, 0.9};
  DecodeConfig cfg;
  cfg.threshold = 0.5;
  cfg.min_ms_per_symbol = 0;  // no pruning
  const auto hits = kws::DecodeHits(z, cfg, 3, 40, "q", "u");
  REQUIRE(hits.size() == 2);
  // Island frames 1..2: even length, midpoint average of (0.6, 0.7).
  CHECK(hits[0].start_ms == 40);
  CHECK(hits[0].end_ms == 120);
  CHECK(hits[0].score == doctest::Approx(0.65));
  // Island frame 4.
  CHECK(hits[1].start_ms == 160);
  CHECK(hits[1].end_ms == 200);
  CHECK(hits[1].score == doctest::Approx(0.9));
}

TEST_CASE("decode_hits with everything below threshold is empty") {
  DecodeConfig cfg;
  cfg.threshold = 0.8;
  CHECK(kws::DecodeHits(std::vector<double>{0.1, 0.5, 0.7}, cfg, 2, 40, "q",
                        "u")
            .empty());
}

TEST_CASE("short islands are pruned by the per-letter duration rule") {
  // 5-letter query at a 40 ms step: islands under 100 ms die, so a
  // 2-frame island (80 ms) is pruned.
  DecodeConfig cfg;
  cfg.threshold = 0.5;
  const std::vector<double> z = {0.9, 0.9, 0.1, 0.9, 0.9, 0.9};
  const auto hits = kws::DecodeHits(z, cfg, 5, 40, "q", "u");
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].start_ms == 120);  // only the 3-frame island survives
}

TEST_CASE("decode_hits matches the brute-force scanner on 1000 vectors") {
  Rng rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t n = 1 + rng.UniformInt(40);
    std::vector<double> z(static_cast<size_t>(n));
    for (auto& v : z) v = rng.Uniform();
    const double threshold = rng.Uniform(0.05, 0.95);
    const int64_t letters = 1 + rng.UniformInt(6);
    const int64_t step = 10 * (1 + rng.UniformInt(4));
    DecodeConfig cfg;
    cfg.threshold = threshold;
    const auto got = kws::DecodeHits(z, cfg, letters, step, "q", "u");
    const auto want = OracleDecode(z, threshold, letters, step, 20);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].start_ms == want[i].start_ms);
      CHECK(got[i].end_ms == want[i].end_ms);
      CHECK(got[i].score == want[i].score);  // exact
    }
  }
}

TEST_CASE("decoded islands are maximal, disjoint and sorted") {
  Rng rng(2027);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t n = 1 + rng.UniformInt(60);
    std::vector<double> z(static_cast<size_t>(n));
    for (auto& v : z) v = rng.Uniform();
    DecodeConfig cfg;
    cfg.threshold = rng.Uniform(0.1, 0.9);
    cfg.min_ms_per_symbol = 0;
    const auto hits = kws::DecodeHits(z, cfg, 1, 10, "q", "u");
    int64_t prev_end = -1;
    for (const auto& h : hits) {
      CHECK(h.start_ms > prev_end);  // disjoint and sorted
      prev_end = h.end_ms;
      const int64_t a = h.start_ms / 10, b = h.end_ms / 10 - 1;
      for (int64_t i = a; i <= b; ++i) {
        CHECK(z[static_cast<size_t>(i)] >= cfg.threshold);
      }
      // Extending one frame either way hits a sub-threshold frame.
      if (a > 0) CHECK(z[static_cast<size_t>(a - 1)] < cfg.threshold);
      if (b + 1 < n) CHECK(z[static_cast<size_t>(b + 1)] < cfg.threshold);
    }
  }
}

TEST_CASE("raising the threshold never increases surviving frames") {
  Rng rng(2028);
  std::vector<double> z(80);
  for (auto& v : z) v = rng.Uniform();
  DecodeConfig cfg;
  cfg.min_ms_per_symbol = 0;
  int64_t prev_frames = std::numeric_limits<int64_t>::max();
  for (double thr = 0.1; thr < 1.0; thr += 0.1) {
    cfg.threshold = thr;
    int64_t frames = 0;
    for (const auto& h : kws::DecodeHits(z, cfg, 1, 10, "q", "u")) {
      frames += (h.end_ms - h.start_ms) / 10;
    }
    CHECK(frames <= prev_frames);
    prev_frames = frames;
  }
}

TEST_CASE("rescoring examples") {
  const std::vector<double> z = {0.2, 0.4, 0.6, 0.5};
  Hypothesis base{"q", "u", 0, 120, 0.7};
  // gamma = 1, interval frames (0.2, 0.4, 0.6): new score p + 0.4.
  const auto fused = kws::RescoreHypothesis(base, z, 40, 160, 1.0);
  CHECK(fused.score == doctest::Approx(0.7 + 0.4));
  CHECK(fused.start_ms == base.start_ms);
  CHECK(fused.end_ms == base.end_ms);
  // gamma = 0 ignores the baseline score entirely.
  const auto net_only = kws::RescoreHypothesis(base, z, 40, 160, 0.0);
  CHECK(net_only.score == doctest::Approx(0.4));
  // Constant z = 0.5: new score gamma*p + 0.5 for any interval.
  const std::vector<double> half = {0.5, 0.5, 0.5, 0.5};
  const auto c = kws::RescoreHypothesis(Hypothesis{"q", "u", 40, 140, 0.3},
                                        half, 40, 160, 0.8);
  CHECK(c.score == doctest::Approx(0.8 * 0.3 + 0.5));
}

TEST_CASE("rescoring is monotone in the baseline score for gamma > 0") {
  const std::vector<double> z = {0.3, 0.6, 0.2};
  double prev = -1.0;
  for (double p = 0.1; p < 1.0; p += 0.2) {
    const auto h = kws::RescoreHypothesis(Hypothesis{"q", "u", 0, 120, p}, z,
                                          40, 120, 0.5);
    CHECK(h.score > prev);
    prev = h.score;
  }
}

TEST_CASE("hypotheses outside the utterance are rejected with the id") {
  const std::vector<double> z = {0.3, 0.6};
  CHECK_THROWS_WITH_AS(
      kws::RescoreHypothesis(Hypothesis{"q", "u7", 40, 900, 0.5}, z, 40, 80,
                             0.5),
      doctest::Contains("u7"), KwsError);
}

TEST_CASE("index search equals fresh-encoding search on 20 utterances") {
  const auto synth = kws::GenerateSynthCorpus(SmallSynth(20));
  const auto cfg = SmallModel();
  const auto params = kws::InitModelParams(cfg, 321);
  const auto& corpus = synth.train.corpus;

  const kws::DocumentIndex index = kws::BuildIndex(corpus, params, cfg);
  DecodeConfig decode;
  decode.threshold = 0.45;

  std::vector<kws::Query> queries = synth.iv_queries;
  for (const auto& q : synth.oov_queries) queries.push_back(q);
  const auto via_index =
      kws::SearchAll(index, params, cfg, synth.symbols, queries, decode);

  // Fresh per-utterance encodings, decoded identically.
  std::vector<Hypothesis> fresh;
  for (const auto& q : queries) {
    const auto emb =
        kws::EncodeQuery(params, cfg, synth.symbols.Encode(q.text));
    for (const auto& u : corpus.utterances) {
      const auto enc = kws::EncodeDocument(params, cfg, u.features, u.id);
      const auto z = kws::ScoreFrames(enc, emb);
      auto hits = kws::DecodeHits(z, decode, q.symbol_count(),
                                  enc.frame_step_ms, q.id, u.id);
      fresh.insert(fresh.end(), hits.begin(), hits.end());
    }
  }
  REQUIRE(via_index.size() == fresh.size());
  for (size_t i = 0; i < fresh.size(); ++i) {
    CHECK(via_index[i].query_id == fresh[i].query_id);
    CHECK(via_index[i].utt_id == fresh[i].utt_id);
    CHECK(via_index[i].start_ms == fresh[i].start_ms);
    CHECK(via_index[i].end_ms == fresh[i].end_ms);
    CHECK(std::abs(via_index[i].score - fresh[i].score) < 1e-6);
  }
}

TEST_CASE("index round-trips and rebuilds byte-identically") {
  const auto synth = kws::GenerateSynthCorpus(SmallSynth(6));
  const auto cfg = SmallModel();
  const auto params = kws::InitModelParams(cfg, 322);
  const auto index = kws::BuildIndex(synth.train.corpus, params, cfg);

  namespace fs = std::filesystem;
  const std::string p1 = (fs::temp_directory_path() / "kws_idx1.kwsi").string();
  const std::string p2 = (fs::temp_directory_path() / "kws_idx2.kwsi").string();
  kws::SaveIndex(index, p1);
  kws::SaveIndex(kws::BuildIndex(synth.train.corpus, params, cfg), p2);
  CHECK(kws::ReadFileBytes(p1) == kws::ReadFileBytes(p2));

  const auto loaded = kws::LoadIndex(p1);
  CHECK(loaded.fingerprint == index.fingerprint);
  CHECK(loaded.frame_step_ms == index.frame_step_ms);
  REQUIRE(loaded.docs.size() == index.docs.size());
  for (size_t i = 0; i < index.docs.size(); ++i) {
    CHECK(loaded.docs[i].utt_id == index.docs[i].utt_id);
    CHECK(loaded.docs[i].matrix.data == index.docs[i].matrix.data);
  }
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("fingerprint mismatches are rejected at search time") {
  const auto synth = kws::GenerateSynthCorpus(SmallSynth(4));
  const auto cfg = SmallModel();
  const auto params = kws::InitModelParams(cfg, 323);
  kws::DocumentIndex index = kws::BuildIndex(synth.train.corpus, params, cfg);
  index.fingerprint ^= 0xdead;
  CHECK_THROWS_WITH_AS(
      kws::SearchAll(index, params, cfg, synth.symbols, synth.iv_queries,
                     DecodeConfig{}),
      doctest::Contains("fingerprint"), KwsError);
}

TEST_CASE("empty corpora produce empty indexes and empty searches") {
  kws::Corpus empty;
  const auto cfg = SmallModel();
  const auto params = kws::InitModelParams(cfg, 324);
  const auto index = kws::BuildIndex(empty, params, cfg);
  CHECK(index.docs.empty());
  const auto symbols = kws::SymbolTable::ForInventory(8);
  const auto hits = kws::SearchAll(index, params, cfg, symbols,
                                   {{"q0", "ab"}}, DecodeConfig{});
  CHECK(hits.empty());
}

TEST_SUITE_END();
