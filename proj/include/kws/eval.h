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
// Metrics: balanced segment-classification trials with accuracy/AUC,
// hit/reference alignment, the term-weighted value suite (TWV, MTWV,
// ATWV with DET points) and keyword-specific-threshold score
// normalization.

#ifndef KWS_EVAL_H_
#define KWS_EVAL_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kws/corpus.h"
#include "kws/rng.h"

namespace kws {

// ---- segment classification -------------------------------------------

struct Trial {
  std::string query_id;
  std::string utt_id;
  int64_t start_ms = 0;  // always 1000 ms long
  int64_t end_ms = 0;
  bool positive = false;
};

// One-second segments with 50% overlap; every segment touching any
// occurrence of a query is one positive trial, each matched by one
// random segment that does not contain the query, so the set is
// balanced by construction. Queries without occurrences contribute no
// trials. Utterances shorter than one second carry no segments.
std::vector<Trial> MakeClassificationTrials(
    const std::map<std::string, int64_t>& utt_duration_ms,
    const std::vector<Reference>& references,
    const std::vector<std::string>& query_ids, Rng* rng);

struct AccuracyAuc {
  double accuracy = 0.0;
  double auc = 0.0;
};

// Accuracy at the given threshold (score >= threshold predicts
// positive) and AUC via the rank statistic with ties counted half.
AccuracyAuc ComputeAccuracyAuc(const std::vector<bool>& labels,
                               const std::vector<double>& scores,
                               double threshold);

// Threshold maximizing accuracy (used to pick the dev threshold).
double BestAccuracyThreshold(const std::vector<bool>& labels,
                             const std::vector<double>& scores);

// ---- TWV suite ----------------------------------------------------------

struct LabeledHit {
  Hypothesis hyp;
  bool correct = false;
};

struct AlignResult {
  std::vector<LabeledHit> hits;  // sorted by score desc (stable keys)
  std::map<std::string, int64_t> ntrue;  // per query, from references
};

// Greedy one-to-one matching in descending score order: a hypothesis
// is correct when its temporal midpoint lies within [ref start -
// tolerance, ref end + tolerance] of an unmatched same-query,
// same-utterance reference. Unmatched references are misses.
AlignResult AlignHits(const std::vector<Hypothesis>& hypotheses,
                      const std::vector<Reference>& references,
                      int64_t tolerance_ms);

struct TwvConfig {
  double beta = 999.9;
  int64_t tolerance_ms = 500;
};

struct PerQueryTwv {
  int64_t ntrue = 0;
  int64_t correct = 0;
  int64_t false_alarms = 0;
  double pmiss = 0.0;
  double pfa = 0.0;
};

struct TwvResult {
  double twv = 0.0;
  double beta = 999.9;
  double mean_pmiss = 0.0;
  double mean_pfa = 0.0;
  std::map<std::string, PerQueryTwv> per_query;
  std::vector<std::string> zero_ntrue;  // excluded from the average
};

// TWV at threshold theta: hypotheses scoring below theta are
// discarded; per query Pmiss = 1 - Ncorrect/Ntrue and PFA =
// NFA/(floor(T) - Ntrue) with one trial per second. Queries are the
// reference queries unless query_ids is nonempty; members without
// occurrences are excluded from the average and reported.
TwvResult ComputeTwv(const AlignResult& aligned, double total_seconds,
                     const TwvConfig& config, double theta,
                     const std::vector<std::string>& query_ids = {});

struct DetPoint {
  double theta = 0.0;
  double pmiss = 0.0;
  double pfa = 0.0;
  double twv = 0.0;
};

struct MtwvResult {
  double mtwv = 0.0;
  double theta = 0.0;  // lowest threshold achieving the maximum
  std::vector<DetPoint> det;
};

// Exact sweep over the finite set of distinct hypothesis scores plus
// {0, 1}; TWV is piecewise constant between consecutive scores.
MtwvResult MtwvSweep(const AlignResult& aligned, double total_seconds,
                     const TwvConfig& config,
                     const std::vector<std::string>& query_ids = {});

// Keyword-specific thresholding: per query, Ntrue is estimated as the
// sum of its hypothesis scores, thr(q) = beta*Ntrue/(T +
// (beta-1)*Ntrue), and each score s maps to the odds-style remap
// s(1-thr) / (s(1-thr) + (1-s)thr), which sends thr to 0.5 and is
// strictly increasing, so within-query ranking is preserved. Scores
// are clamped into (0, 1) first (rescoring fusion can push them past
// 1).
std::vector<Hypothesis> KstNormalize(const std::vector<Hypothesis>& hyps,
                                     double total_seconds, double beta);

// Plain-text metric report with per-query and aggregate numbers plus
// DET points.
std::string FormatTwvReport(const TwvResult& result, double theta,
                            const std::vector<DetPoint>& det);

}  // namespace kws

#endif  // KWS_EVAL_H_
