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
#include <cstdio>
#include <filesystem>

#include "kws/encoder.h"
#include "kws/param_store.h"
#include "kws/rng.h"

using kws::DocumentEncoding;
using kws::FeatureMatrix;
using kws::KwsError;
using kws::ModelConfig;
using kws::ParameterStore;
using kws::QueryEmbedding;
using kws::Rng;
using FTensor = kws::nn::Tensor<float>;

namespace {

ModelConfig TinyConfig() {
  ModelConfig cfg;
  cfg.feature_dim = 3;
  cfg.symbol_count = 5;
  cfg.embed_dim = 4;
  cfg.query_layers = 1;
  cfg.query_hidden = 3;
  cfg.doc_layers = 2;
  cfg.doc_hidden = 4;
  cfg.downsample = {2, 2};
  cfg.joint_dim = 6;
  cfg.dropout = 0.4;
  return cfg;
}

FeatureMatrix RandomFeatures(Rng* rng, int64_t frames, int64_t dim) {
  FeatureMatrix m;
  m.frames = FTensor({frames, dim});
  for (auto& v : m.frames.data) v = static_cast<float>(rng->Gaussian());
  return m;
}

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE_BEGIN("encoders");

TEST_CASE("default configuration produces 400-dimensional query vectors") {
  ModelConfig cfg;  // reference defaults
  cfg.symbol_count = 10;
  const ParameterStore ps = kws::InitModelParams(cfg, 5);
  const QueryEmbedding e = kws::EncodeQuery(ps, cfg, {0, 3, 7});
  CHECK(e.values.size() == 400);
  for (float v : e.values) CHECK(std::isfinite(v));
}

TEST_CASE("zero parameters with constant projection bias give e_q = c*1") {
  ModelConfig cfg = TinyConfig();
  ParameterStore ps = kws::InitModelParams(cfg, 5);
  for (auto& [name, t] : ps.tensors) {
    if (name.rfind("query.", 0) == 0 && ParameterStore::IsTrainable(name)) {
      std::fill(t.data.begin(), t.data.end(), 0.0f);
    }
  }
  const float c = 2.5f;
  std::fill(ps.tensors["query.proj.b"].data.begin(),
            ps.tensors["query.proj.b"].data.end(), c);
  for (const auto& q :
       std::vector<std::vector<int64_t>>{{0}, {1, 2}, {4, 3, 2, 1}}) {
    const QueryEmbedding e = kws::EncodeQuery(ps, cfg, q);
    for (float v : e.values) CHECK(v == doctest::Approx(c));
  }
}

TEST_CASE("single-symbol queries run through the full pipeline") {
  ModelConfig cfg = TinyConfig();
  const ParameterStore ps = kws::InitModelParams(cfg, 6);
  const QueryEmbedding one = kws::EncodeQuery(ps, cfg, {2});
  CHECK(one.values.size() == 6);
  // Batched and single-query paths agree.
  const auto batch = kws::EncodeQueries(ps, cfg, {{2}, {1, 3}});
  for (size_t d = 0; d < one.values.size(); ++d) {
    CHECK(one.values[d] == doctest::Approx(batch[0].values[d]).epsilon(1e-6));
  }
}

TEST_CASE("empty queries and unknown symbols are rejected") {
  ModelConfig cfg = TinyConfig();
  const ParameterStore ps = kws::InitModelParams(cfg, 6);
  CHECK_THROWS_AS(kws::EncodeQuery(ps, cfg, {}), KwsError);
  CHECK_THROWS_WITH_AS(kws::EncodeQuery(ps, cfg, {0, 9}),
                       doctest::Contains("position 1"), KwsError);
}

TEST_CASE("document encoding length law and effective frame step") {
  ModelConfig cfg = TinyConfig();  // factors (2, 2)
  const ParameterStore ps = kws::InitModelParams(cfg, 7);
  Rng rng(8);
  const FeatureMatrix m = RandomFeatures(&rng, 100, cfg.feature_dim);
  const DocumentEncoding d = kws::EncodeDocument(ps, cfg, m, "u1");
  CHECK(d.matrix.rows() == 25);
  CHECK(d.matrix.cols() == 6);
  CHECK(d.frame_step_ms == 40);

  ModelConfig cfg4 = TinyConfig();
  cfg4.doc_layers = 1;
  cfg4.downsample = {4};
  const ParameterStore ps4 = kws::InitModelParams(cfg4, 7);
  const FeatureMatrix m17 = RandomFeatures(&rng, 17, cfg4.feature_dim);
  CHECK(kws::EncodeDocument(ps4, cfg4, m17, "u2").matrix.rows() == 4);
}

TEST_CASE("length law floor(N/4) holds across N for the default schedule") {
  // Floor composition: two stride-2 stages equal one stride-4 stage.
  for (int64_t n = 4; n <= 2000; ++n) {
    CHECK(static_cast<int64_t>(
              kws::nn::DownsampleIndices(
                  static_cast<int64_t>(
                      kws::nn::DownsampleIndices(n, 2).size()),
                  2)
                  .size()) == n / 4);
  }
  // Spot-check through a 6-layer encoder carrying the default
  // downsample schedule (2 after layers 1 and 4).
  ModelConfig cfg = TinyConfig();
  cfg.doc_layers = 6;
  cfg.doc_hidden = 2;
  cfg.downsample = {2, 1, 1, 2, 1, 1};
  const ParameterStore ps = kws::InitModelParams(cfg, 9);
  Rng rng(10);
  for (int64_t n : {4, 5, 7, 100, 101, 999, 2000}) {
    const FeatureMatrix m = RandomFeatures(&rng, n, cfg.feature_dim);
    CHECK(kws::EncodeDocument(ps, cfg, m, "u").matrix.rows() == n / 4);
  }
}

TEST_CASE("too-short utterances are rejected with the required minimum") {
  ModelConfig cfg = TinyConfig();
  const ParameterStore ps = kws::InitModelParams(cfg, 7);
  Rng rng(11);
  const FeatureMatrix m = RandomFeatures(&rng, 3, cfg.feature_dim);
  CHECK_THROWS_WITH_AS(kws::EncodeDocument(ps, cfg, m, "u"),
                       doctest::Contains("at least 4"), KwsError);
}

TEST_CASE("document encoding is stateless across encode order") {
  ModelConfig cfg = TinyConfig();
  const ParameterStore ps = kws::InitModelParams(cfg, 12);
  Rng rng(13);
  const FeatureMatrix a = RandomFeatures(&rng, 40, cfg.feature_dim);
  const FeatureMatrix b = RandomFeatures(&rng, 25, cfg.feature_dim);
  const auto a_then_b_a = kws::EncodeDocument(ps, cfg, a, "a");
  const auto a_then_b_b = kws::EncodeDocument(ps, cfg, b, "b");
  const auto b_then_a_b = kws::EncodeDocument(ps, cfg, b, "b");
  const auto b_then_a_a = kws::EncodeDocument(ps, cfg, a, "a");
  CHECK(a_then_b_a.matrix.data == b_then_a_a.matrix.data);  // bitwise
  CHECK(a_then_b_b.matrix.data == b_then_a_b.matrix.data);
}

TEST_CASE("score_frames examples and oracle") {
  // Zero document matrix: sigmoid(0) = 0.5 everywhere.
  DocumentEncoding d;
  d.frame_step_ms = 40;
  d.matrix = FTensor({4, 3});
  QueryEmbedding q;
  q.values = {0.3f, -0.7f, 1.1f};
  auto z = kws::ScoreFrames(d, q);
  for (double v : z) CHECK(v == doctest::Approx(0.5));

  // Duplicate rows score identically.
  Rng rng(14);
  for (auto& v : d.matrix.data) v = static_cast<float>(rng.Gaussian());
  for (int64_t j = 0; j < 3; ++j) d.matrix.at(2, j) = d.matrix.at(0, j);
  z = kws::ScoreFrames(d, q);
  CHECK(z[0] == z[2]);

  // Independent dot-product + logistic oracle on a random 6x3 case.
  DocumentEncoding d6;
  d6.matrix = FTensor({6, 3});
  for (auto& v : d6.matrix.data) v = static_cast<float>(rng.Gaussian());
  const auto z6 = kws::ScoreFrames(d6, q);
  for (int64_t t = 0; t < 6; ++t) {
    double s = 0;
    for (int64_t j = 0; j < 3; ++j) {
      s += static_cast<double>(d6.matrix.at(t, j)) *
           static_cast<double>(q.values[static_cast<size_t>(j)]);
    }
    const double oracle = 1.0 / (1.0 + std::exp(-s));
    CHECK(std::abs(z6[static_cast<size_t>(t)] - oracle) < 1e-6);
    CHECK(z6[static_cast<size_t>(t)] > 0.0);
    CHECK(z6[static_cast<size_t>(t)] < 1.0);
  }

  // Dimension mismatches are rejected.
  QueryEmbedding bad;
  bad.values = {1.0f, 2.0f};
  CHECK_THROWS_AS(kws::ScoreFrames(d6, bad), KwsError);
}

TEST_CASE("query-set/document-set factorization") {
  ModelConfig cfg = TinyConfig();
  const ParameterStore ps = kws::InitModelParams(cfg, 15);
  Rng rng(16);
  std::vector<FeatureMatrix> docs;
  for (int i = 0; i < 3; ++i) {
    docs.push_back(RandomFeatures(&rng, 20 + 7 * i, cfg.feature_dim));
  }
  const std::vector<std::vector<int64_t>> queries = {{0, 1}, {3}, {2, 4, 1}};
  // All pairwise products via batch encodes.
  const auto embs = kws::EncodeQueries(ps, cfg, queries);
  std::vector<const FeatureMatrix*> mats;
  std::vector<std::string> ids;
  for (size_t i = 0; i < docs.size(); ++i) {
    mats.push_back(&docs[i]);
    ids.push_back(std::to_string(i));
  }
  const auto encs = kws::EncodeDocuments(ps, cfg, mats, ids);
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    for (size_t di = 0; di < docs.size(); ++di) {
      const auto joint = kws::ScoreFrames(encs[di], embs[qi]);
      // One pair at a time.
      const auto solo = kws::ScoreFrames(
          kws::EncodeDocument(ps, cfg, docs[di], ids[di]),
          kws::EncodeQuery(ps, cfg, queries[qi]));
      REQUIRE(joint.size() == solo.size());
      for (size_t t = 0; t < joint.size(); ++t) {
        CHECK(std::abs(joint[t] - solo[t]) < 1e-6);
      }
    }
  }
}

TEST_CASE("parameter persistence round-trips bitwise") {
  ModelConfig cfg = TinyConfig();
  const ParameterStore ps = kws::InitModelParams(cfg, 17);
  const std::string path = TempPath("kws_params_test.kwsp");
  kws::SaveParams(ps, path);
  const ParameterStore loaded = kws::LoadParamsFor(cfg, path);
  CHECK(loaded.fingerprint == ps.fingerprint);
  REQUIRE(loaded.tensors.size() == ps.tensors.size());
  for (const auto& [name, t] : ps.tensors) {
    REQUIRE(loaded.tensors.count(name) == 1);
    CHECK(loaded.tensors.at(name).shape == t.shape);
    CHECK(loaded.tensors.at(name).data == t.data);  // bitwise
  }
  std::filesystem::remove(path);
}

TEST_CASE("fingerprint mismatches are rejected without partial state") {
  ModelConfig cfg = TinyConfig();
  const ParameterStore ps = kws::InitModelParams(cfg, 18);
  const std::string path = TempPath("kws_params_fp.kwsp");
  kws::SaveParams(ps, path);
  ModelConfig other = cfg;
  other.joint_dim = 7;
  CHECK_THROWS_WITH_AS(kws::LoadParamsFor(other, path),
                       doctest::Contains("fingerprint mismatch"), KwsError);
  std::filesystem::remove(path);
}

TEST_CASE("truncated parameter files name the missing tensor") {
  ModelConfig cfg = TinyConfig();
  const ParameterStore ps = kws::InitModelParams(cfg, 19);
  const std::string path = TempPath("kws_params_trunc.kwsp");
  kws::SaveParams(ps, path);
  std::string bytes = kws::ReadFileBytes(path);
  bytes.resize(bytes.size() - 10);  // cut into the last tensor
  kws::WriteFileAtomic(path, bytes);
  const std::string last = ps.tensors.rbegin()->first;
  CHECK_THROWS_WITH_AS(kws::LoadParams(path),
                       doctest::Contains(last.c_str()), KwsError);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt headers are rejected distinctly") {
  const std::string path = TempPath("kws_params_bad.kwsp");
  kws::WriteFileAtomic(path, "NOPEjunkjunkjunk");
  CHECK_THROWS_WITH_AS(kws::LoadParams(path),
                       doctest::Contains("corrupt header"), KwsError);
  std::filesystem::remove(path);
}

TEST_CASE("inference is bit-reproducible for identical inputs") {
  ModelConfig cfg = TinyConfig();
  const ParameterStore ps = kws::InitModelParams(cfg, 20);
  Rng rng(21);
  const FeatureMatrix m = RandomFeatures(&rng, 33, cfg.feature_dim);
  const auto a = kws::EncodeDocument(ps, cfg, m, "u");
  const auto b = kws::EncodeDocument(ps, cfg, m, "u");
  CHECK(a.matrix.data == b.matrix.data);
  const auto qa = kws::EncodeQuery(ps, cfg, {1, 2, 3});
  const auto qb = kws::EncodeQuery(ps, cfg, {1, 2, 3});
  CHECK(qa.values == qb.values);
}

TEST_SUITE_END();
