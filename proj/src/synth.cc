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

#include "kws/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "kws/formats.h"
#include "kws/phrases.h"

namespace kws {

void SynthConfig::Validate() const {
  Require(inventory >= 2 && inventory <= 26,
          "synth config: inventory must be in [2, 26]");
  Require(feature_dim > 0, "synth config: feature_dim must be positive");
  Require(symbol_frames_min >= 1 && symbol_frames_max >= symbol_frames_min,
          "synth config: bad symbol duration range");
  Require(noise_sigma >= 0, "synth config: noise sigma must be nonnegative");
  Require(word_len_min >= 1 && word_len_max >= word_len_min,
          "synth config: bad word length range");
  Require(words_per_utt_min >= 1 && words_per_utt_max >= words_per_utt_min,
          "synth config: bad words-per-utterance range");
  Require(vocab_size >= 2, "synth config: vocabulary needs at least 2 words");
  Require(oov_fraction >= 0 && oov_fraction < 1,
          "synth config: oov_fraction must be in [0, 1)");
  Require(train_utts >= 2 && dev_utts >= 1 && eval_utts >= 1,
          "synth config: need train/dev/eval utterances");
  Require(silence_frames_min >= 0 &&
              silence_frames_max >= silence_frames_min,
          "synth config: bad silence range");
  // Enough distinct spellings must exist; with replacement sampling a
  // 4x margin keeps collisions rare.
  double capacity = 0;
  for (int64_t l = word_len_min; l <= word_len_max; ++l) {
    capacity += std::pow(static_cast<double>(inventory), static_cast<double>(l));
  }
  Require(capacity >= 4.0 * static_cast<double>(vocab_size),
          StrCat("synth config: inventory of ", inventory,
                 " symbols is too small for ", vocab_size, " words"));
}

namespace {

using Prototypes = std::vector<std::vector<float>>;  // symbol -> vector

std::string RandomWord(const SynthConfig& cfg, Rng* rng) {
  const int64_t len = rng->UniformInt(cfg.word_len_min, cfg.word_len_max);
  std::string w;
  for (int64_t i = 0; i < len; ++i) {
    w.push_back(static_cast<char>('a' + rng->UniformInt(cfg.inventory)));
  }
  return w;
}

// Renders one utterance: silence, then word/silence alternation, then
// trailing silence padding. Word spans land exactly on frame bounds at
// 10 ms per frame.
Utterance RenderUtterance(const SynthConfig& cfg, const Prototypes& protos,
                          const std::vector<float>& silence,
                          const std::vector<std::string>& words,
                          const std::string& id, uint64_t utt_seed) {
  Rng rng(utt_seed);
  std::vector<std::pair<int64_t, std::string>> word_starts;
  std::vector<std::vector<float>> frames;  // frame -> prototype copy

  const auto emit = [&](const std::vector<float>& proto, int64_t n) {
    for (int64_t i = 0; i < n; ++i) frames.push_back(proto);
  };

  emit(silence, rng.UniformInt(cfg.silence_frames_min, cfg.silence_frames_max));
  std::vector<AlignedWord> aligned;
  for (const auto& w : words) {
    const int64_t start = static_cast<int64_t>(frames.size());
    for (char c : w) {
      emit(protos[static_cast<size_t>(c - 'a')],
           rng.UniformInt(cfg.symbol_frames_min, cfg.symbol_frames_max));
    }
    aligned.push_back(
        {w, start * 10, static_cast<int64_t>(frames.size()) * 10});
    emit(silence,
         rng.UniformInt(cfg.silence_frames_min, cfg.silence_frames_max));
  }
  while (static_cast<int64_t>(frames.size()) < cfg.min_utt_frames) {
    frames.push_back(silence);
  }

  Utterance u;
  u.id = id;
  u.alignment.words = std::move(aligned);
  u.features.frames =
      nn::Tensor<float>({static_cast<int64_t>(frames.size()), cfg.feature_dim});
  for (size_t t = 0; t < frames.size(); ++t) {
    for (int64_t d = 0; d < cfg.feature_dim; ++d) {
      u.features.frames.at(static_cast<int64_t>(t), d) =
          frames[t][static_cast<size_t>(d)] +
          static_cast<float>(cfg.noise_sigma * rng.Gaussian());
    }
  }
  return u;
}

// Word lists for a split, with every `required` word forced to occur
// at least once so query pools never come up empty at desk scale.
std::vector<std::vector<std::string>> DrawWordLists(
    const SynthConfig& cfg, const std::vector<std::string>& vocab,
    const std::vector<std::string>& required, int64_t count,
    uint64_t seed_base) {
  std::vector<std::vector<std::string>> lists(static_cast<size_t>(count));
  Rng pick(Rng::Derive(seed_base, 0xd7a3));
  int64_t slots = 0;
  for (auto& words : lists) {
    const int64_t num_words =
        pick.UniformInt(cfg.words_per_utt_min, cfg.words_per_utt_max);
    for (int64_t w = 0; w < num_words; ++w) {
      words.push_back(vocab[static_cast<size_t>(
          pick.UniformInt(static_cast<int64_t>(vocab.size())))]);
    }
    slots += num_words;
  }
  std::map<std::string, int64_t> occurrences;
  for (const auto& words : lists) {
    for (const auto& w : words) occurrences[w]++;
  }
  const std::set<std::string> protect(required.begin(), required.end());
  std::vector<std::string> missing;
  for (const auto& w : required) {
    if (!occurrences.count(w)) missing.push_back(w);
  }
  Require(static_cast<int64_t>(missing.size()) <= slots,
          "synth: split too small to cover the required vocabulary");
  std::set<std::pair<int64_t, int64_t>> taken;
  for (const auto& w : missing) {
    int64_t guard = 0;
    while (true) {
      Require(++guard < 100000,
              "synth: split too small to cover the required vocabulary");
      const int64_t ui = pick.UniformInt(count);
      auto& words = lists[static_cast<size_t>(ui)];
      const int64_t slot =
          pick.UniformInt(static_cast<int64_t>(words.size()));
      const std::string& victim = words[static_cast<size_t>(slot)];
      // Never displace the last occurrence of another required word.
      if (protect.count(victim) && occurrences[victim] <= 1) continue;
      if (!taken.emplace(ui, slot).second) continue;
      occurrences[victim]--;
      occurrences[w]++;
      words[static_cast<size_t>(slot)] = w;
      break;
    }
  }
  return lists;
}

Corpus MakeSplit(const SynthConfig& cfg, const Prototypes& protos,
                 const std::vector<float>& silence,
                 const std::vector<std::string>& vocab,
                 const std::vector<std::string>& required,
                 const std::string& split_name, int64_t count,
                 uint64_t seed_base) {
  const auto lists =
      DrawWordLists(cfg, vocab, required, count, seed_base);
  Corpus corpus;
  for (int64_t i = 0; i < count; ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%05d", split_name.c_str(),
                  static_cast<int>(i));
    corpus.utterances.push_back(RenderUtterance(
        cfg, protos, silence, lists[static_cast<size_t>(i)], id,
        Rng::Derive(seed_base, 0x100000 + static_cast<uint64_t>(i))));
  }
  std::sort(corpus.utterances.begin(), corpus.utterances.end(),
            [](const Utterance& a, const Utterance& b) { return a.id < b.id; });
  for (size_t i = 0; i < corpus.utterances.size(); ++i) {
    corpus.by_id[corpus.utterances[i].id] = static_cast<int64_t>(i);
  }
  corpus.Validate();
  return corpus;
}

std::set<std::string> WordsIn(const Corpus& corpus) {
  std::set<std::string> words;
  for (const auto& u : corpus.utterances) {
    for (const auto& w : u.alignment.words) words.insert(w.word);
  }
  return words;
}

}  // namespace

SynthCorpus GenerateSynthCorpus(const SynthConfig& config) {
  config.Validate();
  SynthCorpus out;
  out.symbols = SymbolTable::ForInventory(config.inventory);

  Rng rng(Rng::Derive(config.seed, 1));
  Prototypes protos(static_cast<size_t>(config.inventory));
  for (auto& p : protos) {
    p.resize(static_cast<size_t>(config.feature_dim));
    for (auto& v : p) v = static_cast<float>(rng.Gaussian());
  }
  std::vector<float> silence(static_cast<size_t>(config.feature_dim));
  for (auto& v : silence) v = static_cast<float>(rng.Gaussian());

  // Distinct spellings; the capacity check bounds the retry loop.
  std::set<std::string> seen;
  std::vector<std::string> vocab;
  int64_t attempts = 0;
  while (static_cast<int64_t>(vocab.size()) < config.vocab_size) {
    Require(++attempts < 1000 * config.vocab_size,
            "synth: could not draw enough distinct words");
    std::string w = RandomWord(config, &rng);
    if (seen.insert(w).second) vocab.push_back(w);
  }
  const int64_t oov_count = std::llround(
      config.oov_fraction * static_cast<double>(config.vocab_size));
  out.oov_vocab.assign(vocab.end() - oov_count, vocab.end());
  out.iv_vocab.assign(vocab.begin(), vocab.end() - oov_count);
  Require(!out.iv_vocab.empty(), "synth: no IV vocabulary left");

  // dev/eval must contain every OOV word plus enough IV words for the
  // requested query list; training must see its whole vocabulary.
  std::vector<std::string> dev_eval_required = out.oov_vocab;
  const int64_t iv_needed =
      std::min<int64_t>(config.iv_queries,
                        static_cast<int64_t>(out.iv_vocab.size()));
  dev_eval_required.insert(dev_eval_required.end(), out.iv_vocab.begin(),
                           out.iv_vocab.begin() + iv_needed);

  out.train = {"train", MakeSplit(config, protos, silence, out.iv_vocab,
                                  out.iv_vocab, "train", config.train_utts,
                                  Rng::Derive(config.seed, 10))};
  out.dev = {"dev",
             MakeSplit(config, protos, silence, vocab, dev_eval_required,
                       "dev", config.dev_utts, Rng::Derive(config.seed, 11))};
  out.eval = {"eval", MakeSplit(config, protos, silence, vocab,
                                dev_eval_required, "eval", config.eval_utts,
                                Rng::Derive(config.seed, 12))};

  Rng query_rng(Rng::Derive(config.seed, 13));
  SplitQueries(&out, config.iv_queries, config.oov_queries, &query_rng);
  return out;
}

void SplitQueries(SynthCorpus* corpus, int64_t iv_count, int64_t oov_count,
                  Rng* rng) {
  Require(corpus->iv_vocab.size() + corpus->oov_vocab.size() >= 2,
          "split_queries: vocabulary needs at least 2 words");
  const auto train_words = WordsIn(corpus->train.corpus);
  const auto dev_words = WordsIn(corpus->dev.corpus);
  const auto eval_words = WordsIn(corpus->eval.corpus);

  // IV candidates: seen in training and occurring in both dev and
  // eval so every query can be scored on both splits.
  std::vector<std::string> iv_pool;
  for (const auto& w : corpus->iv_vocab) {
    if (train_words.count(w) && dev_words.count(w) && eval_words.count(w)) {
      iv_pool.push_back(w);
    }
  }
  std::vector<std::string> oov_pool;
  for (const auto& w : corpus->oov_vocab) {
    Require(!train_words.count(w),
            StrCat("split_queries: OOV word ", w, " leaked into training"));
    if (dev_words.count(w) && eval_words.count(w)) oov_pool.push_back(w);
  }

  const auto draw = [rng](std::vector<std::string>* pool, int64_t count) {
    std::vector<std::string> picked;
    while (count-- > 0 && !pool->empty()) {
      const int64_t i = rng->UniformInt(static_cast<int64_t>(pool->size()));
      picked.push_back((*pool)[static_cast<size_t>(i)]);
      pool->erase(pool->begin() + i);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
  };
  corpus->iv_queries.clear();
  corpus->oov_queries.clear();
  int64_t n = 0;
  for (const auto& w : draw(&iv_pool, iv_count)) {
    std::ostringstream id;
    id << "iv" << n++;
    corpus->iv_queries.push_back({id.str(), w});
  }
  n = 0;
  for (const auto& w : draw(&oov_pool, oov_count)) {
    std::ostringstream id;
    id << "oov" << n++;
    corpus->oov_queries.push_back({id.str(), w});
  }
}

std::vector<Reference> BuildReferences(const Corpus& corpus,
                                       const std::vector<Query>& queries) {
  std::vector<Reference> refs;
  for (const auto& q : queries) {
    std::vector<std::string> words;
    std::istringstream is(q.text);
    for (std::string w; is >> w;) words.push_back(w);
    Require(!words.empty(), StrCat("references: empty query text for ", q.id));
    for (const auto& u : corpus.utterances) {
      for (const auto& [start, end] : FindOccurrenceSpans(words, u.alignment)) {
        refs.push_back({q.id, u.id, start, end});
      }
    }
  }
  return refs;
}

namespace {

void WriteSplit(const SynthSplit& split, const std::vector<Query>& queries,
                const std::string& dir) {
  EnsureDir(dir + "/features");
  std::ostringstream align;
  for (const auto& u : split.corpus.utterances) {
    SaveFeatures(u.features, StrCat(dir, "/features/", u.id, ".kwsf"));
    for (const auto& w : u.alignment.words) {
      align << u.id << '\t' << w.word << '\t' << w.start_ms << '\t' << w.end_ms
            << '\n';
    }
  }
  WriteFileAtomic(dir + "/alignments.tsv", align.str());
  SaveTranscripts(split.corpus, dir + "/transcripts.tsv");
  SaveDurationSeconds(split.corpus.total_seconds(), dir + "/duration.tsv");
  SaveReferences(BuildReferences(split.corpus, queries),
                 dir + "/references.tsv");
}

}  // namespace

void WriteSynthCorpus(const SynthCorpus& corpus, const std::string& out_dir) {
  EnsureDir(out_dir);
  corpus.symbols.Save(out_dir + "/symbols.txt");
  SaveQueries(corpus.iv_queries, out_dir + "/queries_iv.tsv");
  SaveQueries(corpus.oov_queries, out_dir + "/queries_oov.tsv");
  std::vector<Query> all = corpus.iv_queries;
  all.insert(all.end(), corpus.oov_queries.begin(), corpus.oov_queries.end());
  WriteSplit(corpus.train, all, out_dir + "/train");
  WriteSplit(corpus.dev, all, out_dir + "/dev");
  WriteSplit(corpus.eval, all, out_dir + "/eval");
}

}  // namespace kws
