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
// File-level tests driving the kws binary (path in $KWS_BIN).

#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "kws/corpus.h"
#include "kws/eval.h"
#include "kws/formats.h"
#include "kws/model_config.h"
#include "kws/phrases.h"
#include "kws/search.h"
#include "kws/trainer.h"

namespace fs = std::filesystem;

namespace {

std::string BinPath() {
  const char* bin = std::getenv("KWS_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "KWS_BIN must point at the kws binary");
  return bin;
}

int Run(const std::string& args) {
  const std::string cmd = BinPath() + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& p) const {
    return (path / p).string();
  }
};

void WriteSmokeConfig(const std::string& path) {
  std::ofstream out(path);
  out << R"({
  "seed": 11,
  "synth": {"inventory": 8, "feature_dim": 5, "vocab_size": 10,
            "oov_fraction": 0.2, "train_utts": 10, "dev_utts": 6,
            "eval_utts": 6, "words_per_utt_min": 2, "words_per_utt_max": 4,
            "min_utt_frames": 110, "iv_queries": 4, "oov_queries": 2},
  "model": {"feature_dim": 5, "embed_dim": 4, "query_layers": 1,
            "query_hidden": 6, "doc_layers": 2, "doc_hidden": 8,
            "downsample": [2, 1], "joint_dim": 6, "dropout": 0.1},
  "sampler": {"batch_phrases": 8, "utts_per_phrase": 2},
  "schedule": {"learning_rate": 0.01, "max_epochs": 2, "epoch_steps": 8,
               "val_pairs": 8}
})";
}

// Recursive byte comparison of two directory trees.
void CheckTreesEqual(const fs::path& a, const fs::path& b) {
  std::map<std::string, fs::path> files_a, files_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) {
      files_a[fs::relative(e.path(), a).string()] = e.path();
    }
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) {
      files_b[fs::relative(e.path(), b).string()] = e.path();
    }
  }
  REQUIRE(files_a.size() == files_b.size());
  for (const auto& [rel, pa] : files_a) {
    REQUIRE_MESSAGE(files_b.count(rel) == 1, rel);
    CHECK_MESSAGE(kws::ReadFileBytes(pa.string()) ==
                      kws::ReadFileBytes(files_b.at(rel).string()),
                  "differs: ", rel);
  }
}

std::string Contents(const std::string& path) {
  return kws::ReadFileBytes(path);
}

}  // namespace

TEST_CASE("defaults follow the reference configuration") {
  const kws::ModelConfig m;
  CHECK(m.doc_layers == 6);
  CHECK(m.doc_hidden == 512);
  CHECK(m.query_layers == 2);
  CHECK(m.query_hidden == 256);
  CHECK(m.embed_dim == 32);
  CHECK(m.joint_dim == 400);
  CHECK(m.dropout == 0.4);
  CHECK(m.downsample == std::vector<int64_t>{2, 1, 1, 2, 1, 1});
  CHECK(m.FrameStepMs() == 40);
  const kws::LossConfig l;
  CHECK(l.lambda == 5.0);
  CHECK(l.phi == 0.7);
  const kws::SamplerConfig s;
  CHECK(s.batch_phrases == 64);
  CHECK(s.utts_per_phrase == 4);
  const kws::TrainSchedule t;
  CHECK(t.learning_rate == 2e-4);
  CHECK(t.val_fraction == 0.1);
  CHECK(t.halve_after == 4);
  CHECK(t.stop_after == 10);
  const kws::TwvConfig e;
  CHECK(e.beta == 999.9);
  CHECK(e.tolerance_ms == 500);
  const kws::DecodeConfig d;
  CHECK(d.min_ms_per_symbol == 20);
  CHECK(d.aggregator == kws::DecodeConfig::Aggregator::kMedian);
}

TEST_CASE("synth is a pure function of config and seed") {
  TempDir dir("kws_cli_synth");
  WriteSmokeConfig(dir / "cfg.json");
  // Output directories are created as needed, nested included.
  REQUIRE(Run("synth --config " + (dir / "cfg.json") + " --out " +
              (dir / "a/deep")) == 0);
  REQUIRE(Run("synth --config " + (dir / "cfg.json") + " --out " +
              (dir / "b")) == 0);
  CheckTreesEqual(fs::path(dir / "a/deep"), fs::path(dir / "b"));
}

TEST_CASE("feature archive headers match alignment totals") {
  TempDir dir("kws_cli_headers");
  WriteSmokeConfig(dir / "cfg.json");
  REQUIRE(Run("synth --config " + (dir / "cfg.json") + " --out " +
              (dir / "c")) == 0);
  const kws::Corpus corpus = kws::LoadCorpusDir(dir / "c/train");
  CHECK(corpus.utterances.size() == 10);
  for (const auto& u : corpus.utterances) {
    REQUIRE(!u.alignment.words.empty());
    // Every aligned span fits inside the archive's declared frames.
    CHECK(u.alignment.words.back().end_ms <= u.duration_ms());
  }
  // Declared duration equals the sum of frames / 100.
  const double total = kws::LoadDurationSeconds(dir / "c/train/duration.tsv");
  CHECK(total == doctest::Approx(corpus.total_seconds()));
}

TEST_CASE("train smoke run finishes quickly and is reproducible") {
  TempDir dir("kws_cli_train");
  WriteSmokeConfig(dir / "cfg.json");
  REQUIRE(Run("synth --config " + (dir / "cfg.json") + " --out " +
              (dir / "c")) == 0);
  const auto t0 = std::chrono::steady_clock::now();
  REQUIRE(Run("train --config " + (dir / "cfg.json") + " --corpus " +
              (dir / "c") + " --out " + (dir / "m1.kwsp")) == 0);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  CHECK(seconds < 60.0);
  REQUIRE(Run("train --config " + (dir / "cfg.json") + " --corpus " +
              (dir / "c") + " --out " + (dir / "m2.kwsp")) == 0);
  CHECK(Contents(dir / "m1.kwsp") == Contents(dir / "m2.kwsp"));
  CHECK(Contents(dir / "m1.kwsp.log") == Contents(dir / "m2.kwsp.log"));
  // The echoed config records the derived model fields.
  CHECK(Contents(dir / "m1.kwsp.config.json")
            .find("\"symbol_count\": 9") != std::string::npos);
}

TEST_CASE("resumed runs continue with a monotone step counter") {
  TempDir dir("kws_cli_resume");
  WriteSmokeConfig(dir / "cfg.json");
  REQUIRE(Run("synth --config " + (dir / "cfg.json") + " --out " +
              (dir / "c")) == 0);
  REQUIRE(Run("train --config " + (dir / "cfg.json") + " --corpus " +
              (dir / "c") + " --out " + (dir / "m.kwsp")) == 0);
  kws::ModelConfig model;
  {
    // Read back the resume state to check the counter.
    const kws::Corpus corpus = kws::LoadCorpusDir(dir / "c/train");
    model.feature_dim = 5;
    model.symbol_count = 9;
    model.embed_dim = 4;
    model.query_layers = 1;
    model.query_hidden = 6;
    model.doc_layers = 2;
    model.doc_hidden = 8;
    model.downsample = {2, 1};
    model.joint_dim = 6;
    model.dropout = 0.1;
  }
  const auto before =
      kws::LoadResumeState(model, dir / "m.kwsp", dir / "m.kwsp.opt");
  CHECK(before.step == 16);  // 2 epochs x 8 steps
  REQUIRE(Run("train --config " + (dir / "cfg.json") + " --corpus " +
              (dir / "c") + " --out " + (dir / "m.kwsp") + " --resume") == 0);
  const auto after =
      kws::LoadResumeState(model, dir / "m.kwsp", dir / "m.kwsp.opt");
  CHECK(after.step == 32);
  CHECK(after.step > before.step);
}

TEST_CASE("search equals index plus search, byte for byte") {
  TempDir dir("kws_cli_amortize");
  WriteSmokeConfig(dir / "cfg.json");
  REQUIRE(Run("synth --config " + (dir / "cfg.json") + " --out " +
              (dir / "c")) == 0);
  REQUIRE(Run("train --config " + (dir / "cfg.json") + " --corpus " +
              (dir / "c") + " --out " + (dir / "m.kwsp")) == 0);
  const std::string common = " --config " + (dir / "cfg.json") +
                             " --symbols " + (dir / "c/symbols.txt") +
                             " --model " + (dir / "m.kwsp") + " --queries " +
                             (dir / "c/queries_iv.tsv") + " --queries " +
                             (dir / "c/queries_oov.tsv");
  REQUIRE(Run("search" + common + " --corpus-dir " + (dir / "c/dev") +
              " --out " + (dir / "direct.tsv") + " --threshold 0.45") == 0);
  REQUIRE(Run("index --config " + (dir / "cfg.json") + " --corpus-dir " +
              (dir / "c/dev") + " --symbols " + (dir / "c/symbols.txt") +
              " --model " + (dir / "m.kwsp") + " --out " +
              (dir / "dev.kwsi")) == 0);
  REQUIRE(Run("search" + common + " --index " + (dir / "dev.kwsi") +
              " --out " + (dir / "amortized.tsv") + " --threshold 0.45") == 0);
  CHECK(Contents(dir / "direct.tsv") == Contents(dir / "amortized.tsv"));
}

TEST_CASE("rescore with gamma 0 keeps locations and drops baseline scores") {
  TempDir dir("kws_cli_rescore");
  WriteSmokeConfig(dir / "cfg.json");
  REQUIRE(Run("synth --config " + (dir / "cfg.json") + " --out " +
              (dir / "c")) == 0);
  REQUIRE(Run("train --config " + (dir / "cfg.json") + " --corpus " +
              (dir / "c") + " --out " + (dir / "m.kwsp")) == 0);
  // Baseline = references with a constant score.
  const auto refs = kws::LoadReferences(dir / "c/dev/references.tsv");
  std::vector<kws::Hypothesis> base;
  for (const auto& r : refs) {
    base.push_back({r.query_id, r.utt_id, r.start_ms, r.end_ms, 0.5});
  }
  kws::SaveHypotheses(base, dir / "base.tsv");
  const std::string common = " --config " + (dir / "cfg.json") +
                             " --symbols " + (dir / "c/symbols.txt") +
                             " --model " + (dir / "m.kwsp") + " --queries " +
                             (dir / "c/queries_iv.tsv") + " --queries " +
                             (dir / "c/queries_oov.tsv") + " --corpus-dir " +
                             (dir / "c/dev") + " --baseline " +
                             (dir / "base.tsv");
  REQUIRE(Run("rescore" + common + " --gamma 0 --out " + (dir / "g0.tsv")) ==
          0);
  REQUIRE(Run("rescore" + common + " --gamma 0 --out " + (dir / "g0b.tsv")) ==
          0);
  CHECK(Contents(dir / "g0.tsv") == Contents(dir / "g0b.tsv"));
  const auto fused = kws::LoadHypotheses(dir / "g0.tsv");
  REQUIRE(fused.size() == base.size());
  for (size_t i = 0; i < base.size(); ++i) {
    CHECK(fused[i].query_id == base[i].query_id);
    CHECK(fused[i].start_ms == base[i].start_ms);
    CHECK(fused[i].end_ms == base[i].end_ms);
    CHECK(fused[i].score > 0.0);
    CHECK(fused[i].score < 1.0);  // gamma 0: pure network mean
  }
  // With two different baseline score sets and gamma 0, outputs match.
  for (auto& h : base) h.score = 0.9;
  kws::SaveHypotheses(base, dir / "base.tsv");
  REQUIRE(Run("rescore" + common + " --gamma 0 --out " + (dir / "g0c.tsv")) ==
          0);
  CHECK(Contents(dir / "g0.tsv") == Contents(dir / "g0c.tsv"));
}

TEST_CASE("score reproduces the worked TWV example through files") {
  TempDir dir("kws_cli_score");
  {
    std::ofstream refs(dir / "refs.tsv");
    refs << "q\tu\t1000\t1400\n";
    std::ofstream hyps(dir / "hyps.tsv");
    hyps << "q\tu\t1000\t1400\t0.9\n";
    hyps << "q\tu\t9000\t9300\t0.8\n";
  }
  REQUIRE(Run("score --mode twv --hyps " + (dir / "hyps.tsv") +
              " --references " + (dir / "refs.tsv") +
              " --duration-seconds 3600 --threshold 0.5 --out " +
              (dir / "report.txt")) == 0);
  const std::string report = Contents(dir / "report.txt");
  const auto pos = report.find("twv\t");
  REQUIRE(pos != std::string::npos);
  const double twv = std::stod(report.substr(pos + 4));
  CHECK(std::abs(twv - (1.0 - 999.9 / 3599.0)) < 1e-5);
  CHECK(std::abs(twv - 0.72217) < 1e-4);
}

TEST_CASE("perfect and empty hypothesis files") {
  TempDir dir("kws_cli_edge");
  {
    std::ofstream refs(dir / "refs.tsv");
    refs << "q1\tu\t1000\t1400\nq2\tu\t2000\t2500\n";
    std::ofstream hyps(dir / "hyps.tsv");
    hyps << "q1\tu\t1000\t1400\t0.9\nq2\tu\t2000\t2500\t0.7\n";
    std::ofstream empty(dir / "empty.tsv");
  }
  REQUIRE(Run("score --mode twv --hyps " + (dir / "hyps.tsv") +
              " --references " + (dir / "refs.tsv") +
              " --duration-seconds 600 --out " + (dir / "perfect.txt")) == 0);
  CHECK(Contents(dir / "perfect.txt").find("twv\t1\n") != std::string::npos);
  REQUIRE(Run("score --mode twv --hyps " + (dir / "empty.tsv") +
              " --references " + (dir / "refs.tsv") +
              " --duration-seconds 600 --out " + (dir / "empty.txt")) == 0);
  CHECK(Contents(dir / "empty.txt").find("twv\t0\n") != std::string::npos);
}

TEST_CASE("unknown query ids exit nonzero") {
  TempDir dir("kws_cli_unknown");
  {
    std::ofstream refs(dir / "refs.tsv");
    refs << "q1\tu\t1000\t1400\n";
    std::ofstream hyps(dir / "hyps.tsv");
    hyps << "ghost\tu\t1000\t1400\t0.9\n";
  }
  CHECK(Run("score --mode twv --hyps " + (dir / "hyps.tsv") +
            " --references " + (dir / "refs.tsv") +
            " --duration-seconds 600 --out " + (dir / "r.txt")) != 0);
}

TEST_CASE("decode threshold sweeps match the in-process MTWV suite") {
  TempDir dir("kws_cli_sweep");
  WriteSmokeConfig(dir / "cfg.json");
  REQUIRE(Run("synth --config " + (dir / "cfg.json") + " --out " +
              (dir / "c")) == 0);
  REQUIRE(Run("train --config " + (dir / "cfg.json") + " --corpus " +
              (dir / "c") + " --out " + (dir / "m.kwsp")) == 0);
  const std::string common = " --config " + (dir / "cfg.json") +
                             " --symbols " + (dir / "c/symbols.txt") +
                             " --model " + (dir / "m.kwsp") + " --queries " +
                             (dir / "c/queries_iv.tsv") + " --corpus-dir " +
                             (dir / "c/dev");
  const auto refs = kws::LoadReferences(dir / "c/dev/references.tsv");
  const double seconds = kws::LoadDurationSeconds(dir / "c/dev/duration.tsv");
  for (const char* thr : {"0.4", "0.5", "0.6"}) {
    REQUIRE(Run("search" + common + " --threshold " + thr + " --out " +
                (dir / "h.tsv")) == 0);
    REQUIRE(Run("score --mode twv --hyps " + (dir / "h.tsv") +
                " --references " + (dir / "c/dev/references.tsv") +
                " --duration-file " + (dir / "c/dev/duration.tsv") +
                " --queries " + (dir / "c/queries_iv.tsv") + " --out " +
                (dir / "r.txt")) == 0);
    const std::string report = Contents(dir / "r.txt");
    const auto pos = report.find("twv\t");
    REQUIRE(pos != std::string::npos);
    const double cli_mtwv = std::stod(report.substr(pos + 4));
    // In-process: same hypotheses, same references.
    auto hyps = kws::LoadHypotheses(dir / "h.tsv");
    std::vector<kws::Hypothesis> iv_only;
    std::vector<std::string> iv_ids;
    {
      const auto iv = kws::LoadQueries(dir / "c/queries_iv.tsv");
      std::set<std::string> keep;
      for (const auto& q : iv) {
        keep.insert(q.id);
        iv_ids.push_back(q.id);
      }
      for (auto& h : hyps) {
        if (keep.count(h.query_id)) iv_only.push_back(h);
      }
    }
    const auto aligned = kws::AlignHits(iv_only, refs, 500);
    const auto sweep =
        kws::MtwvSweep(aligned, seconds, kws::TwvConfig{}, iv_ids);
    CHECK(cli_mtwv == doctest::Approx(sweep.mtwv).epsilon(1e-12));
  }
}
