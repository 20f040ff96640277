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

#include "kws/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>
#include <sstream>

#include "kws/encoder.h"
#include "kws/formats.h"

namespace kws {

using nn::Mode;
using nn::Ragged;
using nn::Tape;
using nn::Tensor;

void LossConfig::Validate() const {
  Require(lambda > 0.0, "loss config: lambda must be positive");
  Require(phi > 0.5 && phi <= 1.0, "loss config: phi must be in (0.5, 1]");
}

namespace {

// One forward-ready batch: packed features over the unique utterances,
// packed query symbols, the (query, utterance) pair list and its
// frame labels.
struct AssembledBatch {
  Tensor<float> features;  // (F x sum N)
  Ragged utt_layout;
  std::vector<int64_t> symbols;  // packed query symbol ids
  Ragged query_layout;
  std::vector<std::pair<int64_t, int64_t>> pairs;
  std::vector<float> labels;
  int64_t label_frames = 0;
  std::string description;  // for error reports
};

AssembledBatch Assemble(const Corpus& corpus, const SymbolTable& symtab,
                        const ModelConfig& cfg, const PhraseSet& phrases,
                        const std::vector<SampledGroup>& groups) {
  AssembledBatch batch;
  // Unique utterances in first-use order.
  std::map<int64_t, int64_t> slot_of;
  std::vector<int64_t> utts;
  for (const auto& g : groups) {
    for (int64_t ui : g.utt_indices) {
      if (slot_of.emplace(ui, static_cast<int64_t>(utts.size())).second) {
        utts.push_back(ui);
      }
    }
  }
  std::vector<const FeatureMatrix*> mats(utts.size());
  for (size_t i = 0; i < utts.size(); ++i) {
    mats[i] = &corpus.utterances[static_cast<size_t>(utts[i])].features;
  }
  batch.features = PackFeatureColumns(mats, &batch.utt_layout);

  const int64_t down = cfg.DownsampleProduct();
  std::vector<int64_t> qlens;
  std::ostringstream desc;
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const Phrase& phrase =
        phrases.phrases[static_cast<size_t>(groups[gi].phrase_index)];
    const auto ids = symtab.Encode(phrase.Text());
    batch.symbols.insert(batch.symbols.end(), ids.begin(), ids.end());
    qlens.push_back(static_cast<int64_t>(ids.size()));
    desc << (gi ? " " : "") << "'" << phrase.Text() << "'";
    for (int64_t ui : groups[gi].utt_indices) {
      const Utterance& utt = corpus.utterances[static_cast<size_t>(ui)];
      batch.pairs.emplace_back(static_cast<int64_t>(gi), slot_of[ui]);
      const auto labels = MakeLabels(phrase.words, utt.alignment,
                                     utt.features.num_frames(), down);
      batch.labels.insert(batch.labels.end(), labels.begin(), labels.end());
    }
  }
  batch.query_layout = Ragged::FromLengths(std::move(qlens));
  batch.label_frames = static_cast<int64_t>(batch.labels.size());
  batch.description = desc.str();
  return batch;
}

// Builds the batch graph and returns the loss id.
int BuildBatchGraph(Tape<float>& tape, NamedTensors<float>* tensors,
                    const ModelConfig& cfg, const LossConfig& loss,
                    const AssembledBatch& batch, Mode mode, Rng* dropout_rng) {
  GraphBinder<float> pb(&tape, tensors);
  const int e = BuildQueryEncoder(tape, pb, cfg, batch.symbols,
                                  batch.query_layout, mode);
  const int x = tape.Leaf(batch.features, false);
  Ragged enc_layout;
  const int h = BuildDocumentEncoder(tape, pb, cfg, x, batch.utt_layout, mode,
                                     dropout_rng, &enc_layout);
  return nn::PairMarginLoss(tape, h, enc_layout, e, batch.pairs, batch.labels,
                            static_cast<float>(loss.lambda),
                            static_cast<float>(loss.phi));
}

}  // namespace

std::string FormatTrainingLog(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  for (const auto& e : log) {
    os << e.epoch << '\t' << FloatString(e.train_loss) << '\t'
       << FloatString(e.val_loss) << '\t' << FloatString(e.learning_rate)
       << '\n';
  }
  return os.str();
}

TrainResult Train(const Corpus& corpus, const ModelConfig& model_config,
                  const LossConfig& loss_config, const SamplerConfig& sampler,
                  const TrainSchedule& schedule, uint64_t seed,
                  std::ostream* progress, const ResumeState* resume) {
  model_config.Validate();
  loss_config.Validate();
  const int64_t num_utts = static_cast<int64_t>(corpus.utterances.size());
  Require(num_utts >= 2, "train: corpus needs at least 2 utterances");
  for (const auto& u : corpus.utterances) {
    Require(u.features.num_frames() >= model_config.MinFrames(),
            StrCat("train: utterance ", u.id, " is shorter than the ",
                   model_config.MinFrames(), "-frame minimum"));
    Require(u.features.dim() == model_config.feature_dim,
            StrCat("train: utterance ", u.id, " feature dim mismatch"));
  }
  const SymbolTable symtab =
      SymbolTable::ForInventory(model_config.symbol_count - 1);

  // Seeded validation split by utterance, fixed for the run.
  std::vector<int64_t> order(static_cast<size_t>(num_utts));
  for (int64_t i = 0; i < num_utts; ++i) order[static_cast<size_t>(i)] = i;
  Rng split_rng(Rng::Derive(seed, 3));
  for (int64_t i = num_utts - 1; i > 0; --i) {
    std::swap(order[static_cast<size_t>(i)],
              order[static_cast<size_t>(split_rng.UniformInt(i + 1))]);
  }
  const int64_t val_count = std::max<int64_t>(
      1, std::llround(schedule.val_fraction * static_cast<double>(num_utts)));
  Require(val_count < num_utts, "train: validation split leaves no data");
  std::vector<int64_t> val_utts(order.begin(), order.begin() + val_count);
  std::vector<int64_t> train_utts(order.begin() + val_count, order.end());
  std::sort(val_utts.begin(), val_utts.end());
  std::sort(train_utts.begin(), train_utts.end());

  const PhraseSet train_phrases = ExtractPhrases(corpus, train_utts);
  Require(train_phrases.total_tokens > 0, "train: no phrases in training data");
  const PhraseSet val_phrases = ExtractPhrases(corpus, val_utts);
  Require(val_phrases.total_tokens > 0, "train: no phrases in validation data");

  const int64_t steps_per_epoch =
      schedule.epoch_steps > 0
          ? schedule.epoch_steps
          : (train_phrases.total_tokens + sampler.batch_phrases - 1) /
                sampler.batch_phrases;

  // Fixed validation pairs, drawn once.
  Rng val_rng(Rng::Derive(seed, 4));
  const int64_t val_groups_wanted = std::max<int64_t>(
      1, schedule.val_pairs / std::max<int64_t>(1, sampler.utts_per_phrase));
  std::vector<SampledGroup> val_groups = SampleBatch(
      val_phrases, val_utts,
      SamplerConfig{val_groups_wanted, sampler.utts_per_phrase}, &val_rng);

  TrainResult result;
  result.params =
      resume ? resume->params : InitModelParams(model_config, seed);
  Require(result.params.fingerprint == model_config.Fingerprint(),
          "train: resume parameters built for a different config");

  nn::AdamOptimizer<float> opt(schedule.learning_rate);
  if (resume) {
    opt.set_step_count(resume->step);
    opt.set_learning_rate(resume->learning_rate);
    *opt.mutable_first_moments() = resume->first_moments;
    *opt.mutable_second_moments() = resume->second_moments;
  }

  double best_val = std::numeric_limits<double>::infinity();
  int64_t best_epoch = 0;
  NamedTensors<float> best_tensors = result.params.tensors;

  const auto eval_validation = [&]() {
    double total = 0.0;
    int64_t frames = 0;
    // Chunks keep peak activation memory bounded.
    const size_t chunk = 16;
    for (size_t start = 0; start < val_groups.size(); start += chunk) {
      std::vector<SampledGroup> part(
          val_groups.begin() + static_cast<int64_t>(start),
          val_groups.begin() +
              static_cast<int64_t>(std::min(start + chunk, val_groups.size())));
      const AssembledBatch batch =
          Assemble(corpus, symtab, model_config, val_phrases, part);
      Tape<float> tape(/*recording=*/false);
      const int loss =
          BuildBatchGraph(tape, &result.params.tensors, model_config,
                          loss_config, batch, Mode::kInfer, nullptr);
      total += static_cast<double>(tape.Value(loss).data[0]);
      frames += batch.label_frames;
    }
    return total / static_cast<double>(std::max<int64_t>(1, frames));
  };

  int64_t global_step = 0;
  for (int64_t epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    int64_t epoch_frames = 0;
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      ++global_step;
      Rng sample_rng(Rng::Derive(seed, 1000000 + global_step));
      Rng dropout_rng(Rng::Derive(seed, 2000000 + global_step));
      const auto groups =
          SampleBatch(train_phrases, train_utts, sampler, &sample_rng);
      const AssembledBatch batch =
          Assemble(corpus, symtab, model_config, train_phrases, groups);
      Tape<float> tape;
      const int loss =
          BuildBatchGraph(tape, &result.params.tensors, model_config,
                          loss_config, batch, Mode::kTrain, &dropout_rng);
      const double loss_value =
          static_cast<double>(tape.Value(loss).data[0]);
      if (!std::isfinite(loss_value)) {
        Fail(StrCat("train: non-finite loss at step ", global_step,
                    "; batch phrases: ", batch.description));
      }
      auto grads = tape.Backward(loss);
      opt.Step(&result.params.tensors, grads);
      epoch_loss += loss_value;
      epoch_frames += batch.label_frames;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = epoch_loss / static_cast<double>(epoch_frames);
    entry.val_loss = eval_validation();
    entry.learning_rate = opt.learning_rate();
    result.log.push_back(entry);
    if (progress) {
      (*progress) << entry.epoch << '\t' << FloatString(entry.train_loss)
                  << '\t' << FloatString(entry.val_loss) << '\t'
                  << FloatString(entry.learning_rate) << std::endl;
    }
    if (entry.val_loss < best_val - schedule.stagnation_eps) {
      best_val = entry.val_loss;
      best_epoch = epoch;
      best_tensors = result.params.tensors;
    } else {
      const int64_t stagnant = epoch - best_epoch;
      if (stagnant >= schedule.stop_after) break;
      if (stagnant > 0 && stagnant % schedule.halve_after == 0) {
        opt.set_learning_rate(opt.learning_rate() / 2.0);
      }
    }
  }

  result.params.tensors = std::move(best_tensors);
  result.best_val_loss = best_val;
  result.best_epoch = best_epoch;
  result.final_step = opt.step_count();
  result.optimizer = std::move(opt);
  return result;
}

void SaveOptimizerState(const TrainResult& result, uint64_t fingerprint,
                        const std::string& path) {
  ByteWriter w;
  w.Magic("KWSO");
  w.U32(1);
  w.U64(fingerprint);
  w.U64(static_cast<uint64_t>(result.final_step));
  const double lr = result.optimizer.learning_rate();
  w.Bytes(&lr, 8);
  const auto write_map = [&w](const NamedTensors<float>& m) {
    w.U32(static_cast<uint32_t>(m.size()));
    for (const auto& [name, t] : m) {
      w.Str(name);
      w.U32(static_cast<uint32_t>(t.shape.size()));
      for (int64_t d : t.shape) w.U32(static_cast<uint32_t>(d));
      w.Bytes(t.data.data(), t.data.size() * 4);
    }
  };
  write_map(result.optimizer.first_moments());
  write_map(result.optimizer.second_moments());
  WriteFileAtomic(path, w.buffer());
}

ResumeState LoadResumeState(const ModelConfig& config,
                            const std::string& params_path,
                            const std::string& opt_path) {
  ResumeState state;
  state.params = LoadParamsFor(config, params_path);
  ByteReader r(ReadFileBytes(opt_path), opt_path);
  r.ExpectMagic("KWSO");
  const uint32_t version = r.U32();
  Require(version == 1,
          StrCat(opt_path, ": unsupported optimizer state version ", version));
  const uint64_t fp = r.U64();
  Require(fp == config.Fingerprint(),
          StrCat(opt_path, ": config fingerprint mismatch"));
  state.step = static_cast<int64_t>(r.U64());
  uint64_t lr_bits = r.U64();
  std::memcpy(&state.learning_rate, &lr_bits, 8);
  const auto read_map = [&r, &opt_path]() {
    NamedTensors<float> m;
    const uint32_t count = r.U32();
    for (uint32_t i = 0; i < count; ++i) {
      const std::string name = r.Str();
      const uint32_t ndim = r.U32();
      std::vector<int64_t> shape(ndim);
      for (uint32_t d = 0; d < ndim; ++d) shape[d] = r.U32();
      Tensor<float> t(shape);
      r.F32Array(t.data.data(), t.data.size());
      m[name] = std::move(t);
    }
    (void)opt_path;
    return m;
  };
  state.first_moments = read_map();
  state.second_moments = read_map();
  return state;
}

}  // namespace kws
