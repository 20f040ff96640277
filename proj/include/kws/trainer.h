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

#ifndef KWS_TRAINER_H_
#define KWS_TRAINER_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kws/adam.h"
#include "kws/corpus.h"
#include "kws/model_config.h"
#include "kws/param_store.h"
#include "kws/phrases.h"

namespace kws {

struct LossConfig {
  double lambda = 5.0;  // positive-class weight
  double phi = 0.7;     // margin in (0.5, 1]

  void Validate() const;
};

struct TrainSchedule {
  double learning_rate = 2e-4;
  int64_t max_epochs = 200;
  // Steps per epoch; 0 uses ceil(total phrase tokens / |Q|), one
  // sampled pass over the token multiset.
  int64_t epoch_steps = 0;
  double val_fraction = 0.1;
  // "Stagnation" is an epoch without a new best validation loss
  // (absolute improvement below stagnation_eps). The learning rate is
  // halved whenever the count reaches a multiple of halve_after;
  // training stops at stop_after.
  double stagnation_eps = 1e-5;
  int64_t halve_after = 4;
  int64_t stop_after = 10;
  int64_t val_pairs = 512;  // fixed validation pairs drawn once per run
};

struct EpochLog {
  int64_t epoch = 0;
  double train_loss = 0.0;  // mean per scored frame over the epoch
  double val_loss = 0.0;    // mean per scored frame, inference mode
  double learning_rate = 0.0;
};

struct TrainResult {
  ParameterStore params;  // parameters at the best validation loss
  std::vector<EpochLog> log;
  double best_val_loss = 0.0;
  int64_t best_epoch = 0;
  int64_t final_step = 0;
  // Final optimizer state so a run can resume with a monotone step
  // counter.
  nn::AdamOptimizer<float> optimizer{0.0};
};

// Resume state: parameters plus optimizer step/learning rate/moments.
struct ResumeState {
  ParameterStore params;
  int64_t step = 0;
  double learning_rate = 0.0;
  NamedTensors<float> first_moments;
  NamedTensors<float> second_moments;
};

std::string FormatTrainingLog(const std::vector<EpochLog>& log);

// Trains both encoders on sampled (phrase, utterance-group) batches
// with the margin-masked weighted loss. Deterministic given the seed.
// progress, when given, receives one line per epoch.
TrainResult Train(const Corpus& corpus, const ModelConfig& model_config,
                  const LossConfig& loss_config, const SamplerConfig& sampler,
                  const TrainSchedule& schedule, uint64_t seed,
                  std::ostream* progress = nullptr,
                  const ResumeState* resume = nullptr);

void SaveOptimizerState(const TrainResult& result, uint64_t fingerprint,
                        const std::string& path);
ResumeState LoadResumeState(const ModelConfig& config,
                            const std::string& params_path,
                            const std::string& opt_path);

}  // namespace kws

#endif  // KWS_TRAINER_H_
