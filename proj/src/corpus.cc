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

#include "kws/corpus.h"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "kws/common.h"

namespace kws {

namespace fs = std::filesystem;

const Utterance& Corpus::Get(const std::string& id) const {
  auto it = by_id.find(id);
  Require(it != by_id.end(), StrCat("corpus: unknown utterance ", id));
  return utterances[static_cast<size_t>(it->second)];
}

int64_t Corpus::total_frames() const {
  int64_t n = 0;
  for (const auto& u : utterances) n += u.features.num_frames();
  return n;
}

double Corpus::total_seconds() const {
  return static_cast<double>(total_frames()) / 100.0;
}

void Corpus::Validate() const {
  for (const auto& u : utterances) {
    const int64_t dur = u.duration_ms();
    int64_t prev_end = 0;
    for (const auto& w : u.alignment.words) {
      Require(w.start_ms >= prev_end,
              StrCat("corpus: overlapping or unordered alignment in ", u.id,
                     " at word '", w.word, "'"));
      Require(w.start_ms < w.end_ms && w.end_ms <= dur,
              StrCat("corpus: span outside utterance ", u.id, " for word '",
                     w.word, "'"));
      prev_end = w.end_ms;
    }
  }
}

Corpus LoadCorpusDir(const std::string& dir) {
  const std::string feat_dir = dir + "/features";
  Require(fs::is_directory(feat_dir),
          StrCat("corpus: missing features directory ", feat_dir));

  Corpus corpus;
  const std::string align_path = dir + "/alignments.tsv";
  if (fs::exists(align_path)) {
    std::map<std::string, WordAlignment> alignments;
    std::vector<std::string> order;
    for (const auto& row : ReadTsv(align_path, 4)) {
      auto [it, fresh] = alignments.try_emplace(row[0]);
      if (fresh) order.push_back(row[0]);
      it->second.words.push_back(
          {row[1], ParseInt(row[2], align_path), ParseInt(row[3], align_path)});
    }
    for (const auto& id : order) {
      Utterance u;
      u.id = id;
      u.features = LoadFeatures(StrCat(feat_dir, "/", id, ".kwsf"));
      u.alignment = std::move(alignments[id]);
      corpus.utterances.push_back(std::move(u));
    }
  } else {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(feat_dir)) {
      if (entry.path().extension() == ".kwsf") {
        ids.push_back(entry.path().stem().string());
      }
    }
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
      Utterance u;
      u.id = id;
      u.features = LoadFeatures(StrCat(feat_dir, "/", id, ".kwsf"));
      corpus.utterances.push_back(std::move(u));
    }
  }
  std::sort(corpus.utterances.begin(), corpus.utterances.end(),
            [](const Utterance& a, const Utterance& b) { return a.id < b.id; });
  for (size_t i = 0; i < corpus.utterances.size(); ++i) {
    corpus.by_id[corpus.utterances[i].id] = static_cast<int64_t>(i);
  }
  corpus.Validate();
  return corpus;
}

SymbolTable SymbolTable::ForInventory(int64_t inventory) {
  Require(inventory >= 1 && inventory <= 26,
          "symbol table: inventory must be in [1, 26]");
  SymbolTable t;
  for (int64_t i = 0; i < inventory; ++i) {
    t.symbols.push_back(static_cast<char>('a' + i));
  }
  t.symbols.push_back(kSeparator);
  return t;
}

SymbolTable SymbolTable::Load(const std::string& path) {
  SymbolTable t;
  for (const auto& row : ReadTsv(path, 1)) {
    Require(row[0].size() == 1,
            StrCat(path, ": symbols must be single characters, got '", row[0],
                   "'"));
    t.symbols.push_back(row[0][0]);
  }
  Require(!t.symbols.empty() && t.symbols.back() == kSeparator,
          StrCat(path, ": last symbol must be the separator '_'"));
  return t;
}

void SymbolTable::Save(const std::string& path) const {
  std::string out;
  for (char c : symbols) {
    out.push_back(c);
    out.push_back('\n');
  }
  WriteFileAtomic(path, out);
}

std::vector<int64_t> SymbolTable::Encode(const std::string& text) const {
  Require(!text.empty(), "encode_query: empty query text");
  std::vector<int64_t> ids;
  ids.reserve(text.size());
  for (size_t pos = 0; pos < text.size(); ++pos) {
    const char c = text[pos] == ' ' ? kSeparator : text[pos];
    const auto it = std::find(symbols.begin(), symbols.end(), c);
    Require(it != symbols.end(),
            StrCat("encode_query: unknown symbol '", std::string(1, text[pos]),
                   "' at position ", pos, " of '", text, "'"));
    ids.push_back(it - symbols.begin());
  }
  return ids;
}

int64_t Query::symbol_count() const {
  return static_cast<int64_t>(text.size());
}

std::vector<Query> LoadQueries(const std::string& path) {
  std::vector<Query> out;
  std::map<std::string, int> seen;
  for (const auto& row : ReadTsv(path, 2)) {
    Require(seen.emplace(row[0], 1).second,
            StrCat(path, ": duplicate query id ", row[0]));
    out.push_back({row[0], row[1]});
  }
  return out;
}

void SaveQueries(const std::vector<Query>& queries, const std::string& path) {
  std::ostringstream os;
  for (const auto& q : queries) os << q.id << '\t' << q.text << '\n';
  WriteFileAtomic(path, os.str());
}

std::vector<Reference> LoadReferences(const std::string& path) {
  std::vector<Reference> out;
  for (const auto& row : ReadTsv(path, 4)) {
    Reference r{row[0], row[1], ParseInt(row[2], path), ParseInt(row[3], path)};
    Require(r.start_ms < r.end_ms,
            StrCat(path, ": empty reference span for ", r.query_id));
    out.push_back(std::move(r));
  }
  return out;
}

void SaveReferences(const std::vector<Reference>& refs,
                    const std::string& path) {
  std::ostringstream os;
  for (const auto& r : refs) {
    os << r.query_id << '\t' << r.utt_id << '\t' << r.start_ms << '\t'
       << r.end_ms << '\n';
  }
  WriteFileAtomic(path, os.str());
}

std::vector<Hypothesis> LoadHypotheses(const std::string& path) {
  std::vector<Hypothesis> out;
  for (const auto& row : ReadTsv(path, 5)) {
    Hypothesis h{row[0], row[1], ParseInt(row[2], path),
                 ParseInt(row[3], path), ParseDouble(row[4], path)};
    Require(h.start_ms < h.end_ms,
            StrCat(path, ": hypothesis with start >= end for ", h.query_id));
    Require(std::isfinite(h.score),
            StrCat(path, ": non-finite score for ", h.query_id));
    out.push_back(std::move(h));
  }
  return out;
}

void SaveHypotheses(const std::vector<Hypothesis>& hyps,
                    const std::string& path) {
  std::ostringstream os;
  for (const auto& h : hyps) {
    os << h.query_id << '\t' << h.utt_id << '\t' << h.start_ms << '\t'
       << h.end_ms << '\t' << FloatString(h.score) << '\n';
  }
  WriteFileAtomic(path, os.str());
}

double LoadDurationSeconds(const std::string& path) {
  const auto rows = ReadTsv(path, 2);
  for (const auto& row : rows) {
    if (row[0] == "total_seconds") return ParseDouble(row[1], path);
  }
  Fail(StrCat(path, ": missing total_seconds entry"));
}

void SaveDurationSeconds(double seconds, const std::string& path) {
  WriteFileAtomic(path,
                  StrCat("total_seconds\t", FloatString(seconds), "\n"));
}

void SaveTranscripts(const Corpus& corpus, const std::string& path) {
  std::ostringstream os;
  for (const auto& u : corpus.utterances) {
    os << u.id << '\t';
    for (size_t i = 0; i < u.alignment.words.size(); ++i) {
      if (i) os << ' ';
      os << u.alignment.words[i].word;
    }
    os << '\n';
  }
  WriteFileAtomic(path, os.str());
}

}  // namespace kws
