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
// Command-line surface. Every command is a pure function of its input
// files, flags and seed; configuration is layered defaults <- --config
// file <- --set overrides, and the resolved configuration is echoed
// next to each command's outputs.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>

#include "kws/corpus.h"
#include "kws/encoder.h"
#include "kws/eval.h"
#include "kws/gradcheck.h"
#include "kws/search.h"
#include "kws/synth.h"
#include "kws/trainer.h"

namespace {

using json = nlohmann::json;
using kws::KwsError;

struct ToolConfig {
  uint64_t seed = 1234;
  kws::SynthConfig synth;
  kws::ModelConfig model;
  kws::LossConfig loss;
  kws::SamplerConfig sampler;
  kws::TrainSchedule schedule;
  kws::DecodeConfig decode;
  kws::TwvConfig eval;
};

template <typename T>
void Pick(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

void ApplySection(const json& j, const char* name, kws::SynthConfig* c) {
  if (!j.contains(name)) return;
  const json& s = j.at(name);
  Pick(s, "inventory", &c->inventory);
  Pick(s, "feature_dim", &c->feature_dim);
  Pick(s, "symbol_frames_min", &c->symbol_frames_min);
  Pick(s, "symbol_frames_max", &c->symbol_frames_max);
  Pick(s, "noise_sigma", &c->noise_sigma);
  Pick(s, "word_len_min", &c->word_len_min);
  Pick(s, "word_len_max", &c->word_len_max);
  Pick(s, "words_per_utt_min", &c->words_per_utt_min);
  Pick(s, "words_per_utt_max", &c->words_per_utt_max);
  Pick(s, "vocab_size", &c->vocab_size);
  Pick(s, "oov_fraction", &c->oov_fraction);
  Pick(s, "train_utts", &c->train_utts);
  Pick(s, "dev_utts", &c->dev_utts);
  Pick(s, "eval_utts", &c->eval_utts);
  Pick(s, "silence_frames_min", &c->silence_frames_min);
  Pick(s, "silence_frames_max", &c->silence_frames_max);
  Pick(s, "min_utt_frames", &c->min_utt_frames);
  Pick(s, "iv_queries", &c->iv_queries);
  Pick(s, "oov_queries", &c->oov_queries);
}

void ApplySection(const json& j, const char* name, kws::ModelConfig* c) {
  if (!j.contains(name)) return;
  const json& s = j.at(name);
  Pick(s, "feature_dim", &c->feature_dim);
  Pick(s, "symbol_count", &c->symbol_count);
  Pick(s, "embed_dim", &c->embed_dim);
  Pick(s, "query_layers", &c->query_layers);
  Pick(s, "query_hidden", &c->query_hidden);
  Pick(s, "doc_layers", &c->doc_layers);
  Pick(s, "doc_hidden", &c->doc_hidden);
  Pick(s, "downsample", &c->downsample);
  Pick(s, "joint_dim", &c->joint_dim);
  Pick(s, "dropout", &c->dropout);
}

void ApplyAll(const json& j, ToolConfig* cfg) {
  Pick(j, "seed", &cfg->seed);
  ApplySection(j, "synth", &cfg->synth);
  ApplySection(j, "model", &cfg->model);
  if (j.contains("loss")) {
    Pick(j.at("loss"), "lambda", &cfg->loss.lambda);
    Pick(j.at("loss"), "phi", &cfg->loss.phi);
  }
  if (j.contains("sampler")) {
    Pick(j.at("sampler"), "batch_phrases", &cfg->sampler.batch_phrases);
    Pick(j.at("sampler"), "utts_per_phrase", &cfg->sampler.utts_per_phrase);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    Pick(s, "learning_rate", &cfg->schedule.learning_rate);
    Pick(s, "max_epochs", &cfg->schedule.max_epochs);
    Pick(s, "epoch_steps", &cfg->schedule.epoch_steps);
    Pick(s, "val_fraction", &cfg->schedule.val_fraction);
    Pick(s, "stagnation_eps", &cfg->schedule.stagnation_eps);
    Pick(s, "halve_after", &cfg->schedule.halve_after);
    Pick(s, "stop_after", &cfg->schedule.stop_after);
    Pick(s, "val_pairs", &cfg->schedule.val_pairs);
  }
  if (j.contains("decode")) {
    const json& s = j.at("decode");
    Pick(s, "threshold", &cfg->decode.threshold);
    Pick(s, "min_ms_per_symbol", &cfg->decode.min_ms_per_symbol);
    if (s.contains("aggregator")) {
      const std::string a = s.at("aggregator").get<std::string>();
      if (a == "median") {
        cfg->decode.aggregator = kws::DecodeConfig::Aggregator::kMedian;
      } else if (a == "mean") {
        cfg->decode.aggregator = kws::DecodeConfig::Aggregator::kMean;
      } else if (a == "max") {
        cfg->decode.aggregator = kws::DecodeConfig::Aggregator::kMax;
      } else {
        kws::Fail("config: decode.aggregator must be median, mean or max");
      }
    }
  }
  if (j.contains("eval")) {
    Pick(j.at("eval"), "beta", &cfg->eval.beta);
    Pick(j.at("eval"), "tolerance_ms", &cfg->eval.tolerance_ms);
  }
}

json ToJson(const ToolConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["synth"] = {{"inventory", cfg.synth.inventory},
                {"feature_dim", cfg.synth.feature_dim},
                {"symbol_frames_min", cfg.synth.symbol_frames_min},
                {"symbol_frames_max", cfg.synth.symbol_frames_max},
                {"noise_sigma", cfg.synth.noise_sigma},
                {"word_len_min", cfg.synth.word_len_min},
                {"word_len_max", cfg.synth.word_len_max},
                {"words_per_utt_min", cfg.synth.words_per_utt_min},
                {"words_per_utt_max", cfg.synth.words_per_utt_max},
                {"vocab_size", cfg.synth.vocab_size},
                {"oov_fraction", cfg.synth.oov_fraction},
                {"train_utts", cfg.synth.train_utts},
                {"dev_utts", cfg.synth.dev_utts},
                {"eval_utts", cfg.synth.eval_utts},
                {"silence_frames_min", cfg.synth.silence_frames_min},
                {"silence_frames_max", cfg.synth.silence_frames_max},
                {"min_utt_frames", cfg.synth.min_utt_frames},
                {"iv_queries", cfg.synth.iv_queries},
                {"oov_queries", cfg.synth.oov_queries}};
  j["model"] = {{"feature_dim", cfg.model.feature_dim},
                {"symbol_count", cfg.model.symbol_count},
                {"embed_dim", cfg.model.embed_dim},
                {"query_layers", cfg.model.query_layers},
                {"query_hidden", cfg.model.query_hidden},
                {"doc_layers", cfg.model.doc_layers},
                {"doc_hidden", cfg.model.doc_hidden},
                {"downsample", cfg.model.downsample},
                {"joint_dim", cfg.model.joint_dim},
                {"dropout", cfg.model.dropout}};
  j["loss"] = {{"lambda", cfg.loss.lambda}, {"phi", cfg.loss.phi}};
  j["sampler"] = {{"batch_phrases", cfg.sampler.batch_phrases},
                  {"utts_per_phrase", cfg.sampler.utts_per_phrase}};
  j["schedule"] = {{"learning_rate", cfg.schedule.learning_rate},
                   {"max_epochs", cfg.schedule.max_epochs},
                   {"epoch_steps", cfg.schedule.epoch_steps},
                   {"val_fraction", cfg.schedule.val_fraction},
                   {"stagnation_eps", cfg.schedule.stagnation_eps},
                   {"halve_after", cfg.schedule.halve_after},
                   {"stop_after", cfg.schedule.stop_after},
                   {"val_pairs", cfg.schedule.val_pairs}};
  const char* agg = "median";
  if (cfg.decode.aggregator == kws::DecodeConfig::Aggregator::kMean) {
    agg = "mean";
  } else if (cfg.decode.aggregator == kws::DecodeConfig::Aggregator::kMax) {
    agg = "max";
  }
  j["decode"] = {{"threshold", cfg.decode.threshold},
                 {"min_ms_per_symbol", cfg.decode.min_ms_per_symbol},
                 {"aggregator", agg}};
  j["eval"] = {{"beta", cfg.eval.beta},
               {"tolerance_ms", cfg.eval.tolerance_ms}};
  return j;
}

// Layered resolution: defaults <- file <- --set key=value overrides.
ToolConfig ResolveConfig(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
  json merged = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    kws::Require(in.good(), "cannot open config file " + config_path);
    try {
      merged = json::parse(in);
    } catch (const json::exception& e) {
      kws::Fail(config_path + ": " + e.what());
    }
  }
  for (const std::string& kv : overrides) {
    const size_t eq = kv.find('=');
    kws::Require(eq != std::string::npos && eq > 0,
                 "--set expects section.key=value, got " + kv);
    const std::string path = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // plain string
    }
    json* node = &merged;
    size_t start = 0;
    while (true) {
      const size_t dot = path.find('.', start);
      const std::string key = path.substr(
          start, dot == std::string::npos ? std::string::npos : dot - start);
      kws::Require(!key.empty(), "--set: empty key in " + path);
      if (dot == std::string::npos) {
        (*node)[key] = parsed;
        break;
      }
      node = &(*node)[key];
      start = dot + 1;
    }
  }
  ToolConfig cfg;
  ApplyAll(merged, &cfg);
  return cfg;
}

void EchoConfig(const ToolConfig& cfg, const std::string& path) {
  kws::WriteFileAtomic(path, ToJson(cfg).dump(2) + "\n");
}

// Completes data-derived model fields and checks consistency.
void FinishModelConfig(ToolConfig* cfg, const kws::SymbolTable& symbols,
                       int64_t data_feature_dim) {
  if (cfg->model.symbol_count == 0) {
    cfg->model.symbol_count = symbols.size();
  }
  kws::Require(cfg->model.symbol_count == symbols.size(),
               kws::StrCat("model.symbol_count ", cfg->model.symbol_count,
                           " does not match the symbol table (",
                           symbols.size(), ")"));
  if (data_feature_dim > 0) {
    kws::Require(cfg->model.feature_dim == data_feature_dim,
                 kws::StrCat("model.feature_dim ", cfg->model.feature_dim,
                             " does not match the data (", data_feature_dim,
                             ")"));
  }
  cfg->model.Validate();
}

std::vector<kws::Query> LoadQueryFiles(const std::vector<std::string>& paths) {
  std::vector<kws::Query> all;
  std::set<std::string> seen;
  for (const auto& p : paths) {
    for (auto& q : kws::LoadQueries(p)) {
      kws::Require(seen.insert(q.id).second,
                   "duplicate query id across files: " + q.id);
      all.push_back(std::move(q));
    }
  }
  return all;
}

// ---- commands ---------------------------------------------------------

int CmdSynth(const ToolConfig& cfg, const std::string& out_dir) {
  kws::SynthConfig synth = cfg.synth;
  synth.seed = cfg.seed;
  const kws::SynthCorpus corpus = kws::GenerateSynthCorpus(synth);
  kws::WriteSynthCorpus(corpus, out_dir);
  EchoConfig(cfg, out_dir + "/resolved_config.json");
  std::cout << "synth: wrote " << corpus.train.corpus.utterances.size()
            << " train / " << corpus.dev.corpus.utterances.size() << " dev / "
            << corpus.eval.corpus.utterances.size() << " eval utterances, "
            << corpus.iv_queries.size() << " IV and "
            << corpus.oov_queries.size() << " OOV queries to " << out_dir
            << std::endl;
  return 0;
}

int CmdTrain(ToolConfig cfg, const std::string& corpus_root,
             const std::string& out_path, bool resume) {
  const kws::SymbolTable symbols =
      kws::SymbolTable::Load(corpus_root + "/symbols.txt");
  const kws::Corpus corpus = kws::LoadCorpusDir(corpus_root + "/train");
  kws::Require(!corpus.utterances.empty(), "train: empty corpus");
  FinishModelConfig(&cfg, symbols, corpus.utterances[0].features.dim());

  kws::ResumeState resume_state;
  const kws::ResumeState* resume_ptr = nullptr;
  if (resume) {
    resume_state =
        kws::LoadResumeState(cfg.model, out_path, out_path + ".opt");
    resume_ptr = &resume_state;
    std::cout << "train: resuming from step " << resume_state.step
              << std::endl;
  }
  const kws::TrainResult result =
      kws::Train(corpus, cfg.model, cfg.loss, cfg.sampler, cfg.schedule,
                 cfg.seed, &std::cout, resume_ptr);
  kws::SaveParams(result.params, out_path);
  kws::SaveOptimizerState(result, result.params.fingerprint,
                          out_path + ".opt");
  kws::WriteFileAtomic(out_path + ".log", kws::FormatTrainingLog(result.log));
  EchoConfig(cfg, out_path + ".config.json");
  std::cout << "train: best validation loss "
            << kws::FloatString(result.best_val_loss) << " at epoch "
            << result.best_epoch << ", " << result.final_step
            << " optimizer steps; saved " << out_path << std::endl;
  return 0;
}

int CmdIndex(ToolConfig cfg, const std::string& split_dir,
             const std::string& symbols_path, const std::string& model_path,
             const std::string& out_path) {
  const kws::SymbolTable symbols = kws::SymbolTable::Load(symbols_path);
  const kws::Corpus corpus = kws::LoadCorpusDir(split_dir);
  FinishModelConfig(&cfg, symbols,
                    corpus.utterances.empty()
                        ? 0
                        : corpus.utterances[0].features.dim());
  const kws::ParameterStore params =
      kws::LoadParamsFor(cfg.model, model_path);
  const kws::DocumentIndex index = kws::BuildIndex(corpus, params, cfg.model);
  kws::SaveIndex(index, out_path);
  EchoConfig(cfg, out_path + ".config.json");
  std::cout << "index: " << index.docs.size() << " utterances -> " << out_path
            << std::endl;
  return 0;
}

int CmdSearch(ToolConfig cfg, const std::string& split_dir,
              const std::string& index_path, const std::string& symbols_path,
              const std::string& model_path,
              const std::vector<std::string>& query_paths,
              const std::string& out_path, double threshold_override) {
  const kws::SymbolTable symbols = kws::SymbolTable::Load(symbols_path);
  kws::DecodeConfig decode = cfg.decode;
  if (threshold_override > 0) decode.threshold = threshold_override;

  kws::DocumentIndex index;
  int64_t feature_dim = 0;
  if (!index_path.empty()) {
    index = kws::LoadIndex(index_path);
  } else {
    kws::Require(!split_dir.empty(),
                 "search: need either --index or --corpus-dir");
    const kws::Corpus corpus = kws::LoadCorpusDir(split_dir);
    if (!corpus.utterances.empty()) {
      feature_dim = corpus.utterances[0].features.dim();
    }
    FinishModelConfig(&cfg, symbols, feature_dim);
    const kws::ParameterStore params =
        kws::LoadParamsFor(cfg.model, model_path);
    index = kws::BuildIndex(corpus, params, cfg.model);
  }
  FinishModelConfig(&cfg, symbols, feature_dim);
  const kws::ParameterStore params = kws::LoadParamsFor(cfg.model, model_path);
  const auto queries = LoadQueryFiles(query_paths);
  const auto hits =
      kws::SearchAll(index, params, cfg.model, symbols, queries, decode);
  kws::SaveHypotheses(hits, out_path);
  EchoConfig(cfg, out_path + ".config.json");
  std::cout << "search: " << hits.size() << " hypotheses for "
            << queries.size() << " queries -> " << out_path << std::endl;
  return 0;
}

int CmdClassify(ToolConfig cfg, const std::string& split_dir,
                const std::string& symbols_path,
                const std::string& model_path,
                const std::vector<std::string>& query_paths,
                const std::string& refs_path, const std::string& out_path) {
  const kws::SymbolTable symbols = kws::SymbolTable::Load(symbols_path);
  const kws::Corpus corpus = kws::LoadCorpusDir(split_dir);
  kws::Require(!corpus.utterances.empty(), "classify: empty corpus");
  FinishModelConfig(&cfg, symbols, corpus.utterances[0].features.dim());
  const kws::ParameterStore params =
      kws::LoadParamsFor(cfg.model, model_path);
  const auto queries = LoadQueryFiles(query_paths);
  const auto references = kws::LoadReferences(refs_path);

  std::map<std::string, int64_t> durations;
  for (const auto& u : corpus.utterances) durations[u.id] = u.duration_ms();
  std::vector<std::string> qids;
  for (const auto& q : queries) qids.push_back(q.id);
  kws::Rng rng(kws::Rng::Derive(cfg.seed, 0x7214));
  const auto trials =
      kws::MakeClassificationTrials(durations, references, qids, &rng);

  const kws::DocumentIndex index = kws::BuildIndex(corpus, params, cfg.model);
  std::vector<std::vector<int64_t>> encoded;
  for (const auto& q : queries) encoded.push_back(symbols.Encode(q.text));
  const auto embeddings = kws::EncodeQueries(params, cfg.model, encoded);
  std::map<std::string, size_t> query_pos;
  for (size_t i = 0; i < queries.size(); ++i) query_pos[queries[i].id] = i;

  // Scores per (query, utterance) are reused across that pair's trials.
  std::map<std::pair<std::string, std::string>, std::vector<double>> z_cache;
  std::ostringstream os;
  for (const auto& t : trials) {
    const auto key = std::make_pair(t.query_id, t.utt_id);
    auto it = z_cache.find(key);
    if (it == z_cache.end()) {
      const kws::DocumentEncoding* doc = index.Find(t.utt_id);
      kws::Require(doc != nullptr, "classify: unknown utterance " + t.utt_id);
      it = z_cache
               .emplace(key, kws::ScoreFrames(
                                 *doc, embeddings[query_pos[t.query_id]]))
               .first;
    }
    const auto& z = it->second;
    // Downsampled frames overlapping the 1 s segment.
    const int64_t step = index.frame_step_ms;
    const int64_t lo = std::min<int64_t>(t.start_ms / step,
                                         static_cast<int64_t>(z.size()) - 1);
    const int64_t hi = std::min<int64_t>((t.end_ms + step - 1) / step - 1,
                                         static_cast<int64_t>(z.size()) - 1);
    const double score = kws::ClassifySegment(
        std::span<const double>(z.data() + lo, static_cast<size_t>(hi - lo + 1)));
    os << t.query_id << '\t' << t.utt_id << '\t' << t.start_ms << '\t'
       << t.end_ms << '\t' << (t.positive ? "pos" : "neg") << '\t'
       << kws::FloatString(score) << '\n';
  }
  kws::WriteFileAtomic(out_path, os.str());
  EchoConfig(cfg, out_path + ".config.json");
  std::cout << "classify: " << trials.size() << " trials -> " << out_path
            << std::endl;
  return 0;
}

int CmdRescore(ToolConfig cfg, const std::string& split_dir,
               const std::string& symbols_path, const std::string& model_path,
               const std::vector<std::string>& query_paths,
               const std::string& baseline_path, double gamma,
               const std::string& out_path) {
  const kws::SymbolTable symbols = kws::SymbolTable::Load(symbols_path);
  const kws::Corpus corpus = kws::LoadCorpusDir(split_dir);
  kws::Require(!corpus.utterances.empty(), "rescore: empty corpus");
  FinishModelConfig(&cfg, symbols, corpus.utterances[0].features.dim());
  const kws::ParameterStore params =
      kws::LoadParamsFor(cfg.model, model_path);
  const auto queries = LoadQueryFiles(query_paths);
  const auto baseline = kws::LoadHypotheses(baseline_path);

  std::map<std::string, size_t> query_pos;
  for (size_t i = 0; i < queries.size(); ++i) query_pos[queries[i].id] = i;
  std::vector<std::string> unknown;
  for (const auto& h : baseline) {
    if (!query_pos.count(h.query_id)) unknown.push_back(h.query_id);
  }
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
    std::string list;
    for (const auto& q : unknown) list += " " + q;
    kws::Fail("rescore: baseline references unknown query ids:" + list);
  }

  const kws::DocumentIndex index = kws::BuildIndex(corpus, params, cfg.model);
  std::vector<std::vector<int64_t>> encoded;
  for (const auto& q : queries) encoded.push_back(symbols.Encode(q.text));
  const auto embeddings = kws::EncodeQueries(params, cfg.model, encoded);

  std::map<std::pair<std::string, std::string>, std::vector<double>> z_cache;
  std::vector<kws::Hypothesis> out;
  out.reserve(baseline.size());
  for (const auto& h : baseline) {
    const auto key = std::make_pair(h.query_id, h.utt_id);
    auto it = z_cache.find(key);
    if (it == z_cache.end()) {
      const kws::DocumentEncoding* doc = index.Find(h.utt_id);
      kws::Require(doc != nullptr, "rescore: unknown utterance " + h.utt_id);
      it = z_cache
               .emplace(key, kws::ScoreFrames(
                                 *doc, embeddings[query_pos[h.query_id]]))
               .first;
    }
    out.push_back(kws::RescoreHypothesis(
        h, it->second, index.frame_step_ms,
        corpus.Get(h.utt_id).duration_ms(), gamma));
  }
  kws::SaveHypotheses(out, out_path);
  EchoConfig(cfg, out_path + ".config.json");
  std::cout << "rescore: " << out.size() << " hypotheses (gamma "
            << kws::FloatString(gamma) << ") -> " << out_path << std::endl;
  return 0;
}

int CmdScore(const ToolConfig& cfg, const std::string& mode,
             const std::string& hyps_path, const std::string& refs_path,
             double duration_seconds, const std::string& duration_file,
             double threshold, bool has_threshold, bool kst,
             const std::vector<std::string>& query_paths,
             const std::string& out_path) {
  double total_seconds = duration_seconds;
  if (!duration_file.empty()) {
    total_seconds = kws::LoadDurationSeconds(duration_file);
  }

  if (mode == "classification") {
    // Scored trial rows: query, utt, start, end, pos|neg, score.
    const auto rows = kws::ReadTsv(hyps_path, 6);
    kws::Require(!rows.empty(), "score: empty trial file");
    std::set<std::string> filter;
    for (const auto& q : LoadQueryFiles(query_paths)) filter.insert(q.id);
    std::vector<bool> labels;
    std::vector<double> scores;
    for (const auto& row : rows) {
      if (!filter.empty() && !filter.count(row[0])) continue;
      kws::Require(row[4] == "pos" || row[4] == "neg",
                   "score: label must be pos or neg, got " + row[4]);
      labels.push_back(row[4] == "pos");
      scores.push_back(kws::ParseDouble(row[5], hyps_path));
    }
    kws::Require(!labels.empty(), "score: no trials left after filtering");
    const double thr = has_threshold
                           ? threshold
                           : kws::BestAccuracyThreshold(labels, scores);
    const auto result = kws::ComputeAccuracyAuc(labels, scores, thr);
    std::ostringstream os;
    os << "accuracy\t" << kws::FloatString(result.accuracy) << "\n"
       << "auc\t" << kws::FloatString(result.auc) << "\n"
       << "threshold\t" << kws::FloatString(thr) << "\n"
       << "trials\t" << labels.size() << "\n";
    kws::WriteFileAtomic(out_path, os.str());
    std::cout << os.str();
    return 0;
  }

  kws::Require(mode == "twv", "score: mode must be twv or classification");
  kws::Require(total_seconds > 0,
               "score: twv mode needs --duration-seconds or --duration-file");
  auto hyps = kws::LoadHypotheses(hyps_path);
  const auto refs = kws::LoadReferences(refs_path);

  std::set<std::string> known;
  for (const auto& r : refs) known.insert(r.query_id);
  std::vector<std::string> query_filter;
  if (!query_paths.empty()) {
    for (const auto& q : LoadQueryFiles(query_paths)) {
      query_filter.push_back(q.id);
      known.insert(q.id);
    }
  }
  std::set<std::string> unknown;
  for (const auto& h : hyps) {
    if (!known.count(h.query_id)) unknown.insert(h.query_id);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& q : unknown) list += " " + q;
    kws::Fail("score: hypotheses reference unknown query ids:" + list);
  }
  if (!query_filter.empty()) {
    std::set<std::string> keep(query_filter.begin(), query_filter.end());
    std::vector<kws::Hypothesis> filtered;
    for (auto& h : hyps) {
      if (keep.count(h.query_id)) filtered.push_back(std::move(h));
    }
    hyps = std::move(filtered);
  }

  if (kst) hyps = kws::KstNormalize(hyps, total_seconds, cfg.eval.beta);
  const auto aligned = kws::AlignHits(hyps, refs, cfg.eval.tolerance_ms);

  std::ostringstream os;
  if (has_threshold) {
    const auto r = kws::ComputeTwv(aligned, total_seconds, cfg.eval, threshold,
                                   query_filter);
    os << kws::FormatTwvReport(r, threshold, {});
    std::cout << "atwv\t" << kws::FloatString(r.twv) << "\ttheta\t"
              << kws::FloatString(threshold) << std::endl;
  } else {
    const auto sweep = kws::MtwvSweep(aligned, total_seconds, cfg.eval,
                                      query_filter);
    const auto at_best = kws::ComputeTwv(aligned, total_seconds, cfg.eval,
                                         sweep.theta, query_filter);
    os << kws::FormatTwvReport(at_best, sweep.theta, sweep.det);
    std::cout << "mtwv\t" << kws::FloatString(sweep.mtwv) << "\ttheta\t"
              << kws::FloatString(sweep.theta) << std::endl;
  }
  kws::WriteFileAtomic(out_path, os.str());
  return 0;
}

int CmdGradcheck(uint64_t seed) {
  const auto reports = kws::RunGradcheckSuite(seed);
  bool all_pass = true;
  for (const auto& r : reports) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "\t" << r.name
              << "\tmax_rel_err\t" << kws::FloatString(r.max_rel_err)
              << std::endl;
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frame-level keyword search"};
  app.require_subcommand(1);

  std::string config_path, out_path, corpus_dir, split_dir, symbols_path;
  std::string model_path, index_path, refs_path, baseline_path, hyps_path;
  std::string mode = "twv", duration_file;
  std::vector<std::string> overrides, query_paths;
  uint64_t seed = 0;
  bool has_seed = false, resume = false, kst = false;
  int threads = 2;
  double gamma = 1.0, threshold = -1.0, duration_seconds = 0.0;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--set", overrides,
                    "config override, section.key=value (repeatable)");
    cmd->add_option("--seed", seed, "RNG seed")->each([&](std::string) {
      has_seed = true;
    });
    cmd->add_option("--threads", threads, "worker threads");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth);
  synth->add_option("--out", out_path, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the encoders");
  add_common(train);
  train->add_option("--corpus", corpus_dir, "corpus root directory")
      ->required();
  train->add_option("--out", out_path, "output parameter file")->required();
  train->add_flag("--resume", resume, "continue from saved parameters");

  auto* index = app.add_subcommand("index", "precompute document encodings");
  add_common(index);
  index->add_option("--corpus-dir", split_dir, "split directory")->required();
  index->add_option("--symbols", symbols_path, "symbols.txt")->required();
  index->add_option("--model", model_path, "parameter file")->required();
  index->add_option("--out", out_path, "output index file")->required();

  auto* search = app.add_subcommand("search", "search queries");
  add_common(search);
  search->add_option("--corpus-dir", split_dir, "split directory");
  search->add_option("--index", index_path, "prebuilt index file");
  search->add_option("--symbols", symbols_path, "symbols.txt")->required();
  search->add_option("--model", model_path, "parameter file")->required();
  search->add_option("--queries", query_paths, "query list file(s)")
      ->required();
  search->add_option("--out", out_path, "output hypothesis file")->required();
  search->add_option("--threshold", threshold, "decode zeroing threshold");

  auto* classify = app.add_subcommand("classify", "score 1 s segments");
  add_common(classify);
  classify->add_option("--corpus-dir", split_dir, "split directory")
      ->required();
  classify->add_option("--symbols", symbols_path, "symbols.txt")->required();
  classify->add_option("--model", model_path, "parameter file")->required();
  classify->add_option("--queries", query_paths, "query list file(s)")
      ->required();
  classify->add_option("--references", refs_path, "reference occurrences")
      ->required();
  classify->add_option("--out", out_path, "output scored trials")->required();

  auto* rescore = app.add_subcommand("rescore", "fuse baseline hypotheses");
  add_common(rescore);
  rescore->add_option("--corpus-dir", split_dir, "split directory")
      ->required();
  rescore->add_option("--symbols", symbols_path, "symbols.txt")->required();
  rescore->add_option("--model", model_path, "parameter file")->required();
  rescore->add_option("--queries", query_paths, "query list file(s)")
      ->required();
  rescore->add_option("--baseline", baseline_path, "baseline hypotheses")
      ->required();
  rescore->add_option("--gamma", gamma, "baseline score weight")->required();
  rescore->add_option("--out", out_path, "output hypothesis file")
      ->required();

  auto* score = app.add_subcommand("score", "evaluate hypotheses or trials");
  add_common(score);
  score->add_option("--mode", mode, "twv or classification");
  score->add_option("--hyps", hyps_path, "hypothesis or scored-trial file")
      ->required();
  score->add_option("--references", refs_path, "reference occurrences");
  score->add_option("--duration-seconds", duration_seconds,
                    "total audio seconds");
  score->add_option("--duration-file", duration_file, "duration.tsv");
  auto* thr_opt =
      score->add_option("--threshold", threshold, "decision threshold");
  score->add_flag("--kst", kst, "apply keyword-specific thresholding first");
  score->add_option("--queries", query_paths,
                    "restrict scoring to these query list file(s)");
  score->add_option("--out", out_path, "metric report path")->required();

  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference self-test");
  add_common(gradcheck);

  CLI11_PARSE(app, argc, argv);

  try {
    kws::nn::SetNumThreads(threads);
    ToolConfig cfg = ResolveConfig(config_path, overrides);
    if (has_seed) cfg.seed = seed;

    if (synth->parsed()) return CmdSynth(cfg, out_path);
    if (train->parsed()) return CmdTrain(cfg, corpus_dir, out_path, resume);
    if (index->parsed()) {
      return CmdIndex(cfg, split_dir, symbols_path, model_path, out_path);
    }
    if (search->parsed()) {
      return CmdSearch(cfg, split_dir, index_path, symbols_path, model_path,
                       query_paths, out_path, threshold);
    }
    if (classify->parsed()) {
      return CmdClassify(cfg, split_dir, symbols_path, model_path,
                         query_paths, refs_path, out_path);
    }
    if (rescore->parsed()) {
      return CmdRescore(cfg, split_dir, symbols_path, model_path, query_paths,
                        baseline_path, gamma, out_path);
    }
    if (score->parsed()) {
      return CmdScore(cfg, mode, hyps_path, refs_path, duration_seconds,
                      duration_file, threshold, thr_opt->count() > 0, kst,
                      query_paths, out_path);
    }
    if (gradcheck->parsed()) return CmdGradcheck(cfg.seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
