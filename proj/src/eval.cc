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

#include "kws/eval.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "kws/formats.h"

namespace kws {

namespace {

// Segment starts for a duration: 0, 500, 1000, ... while a full
// 1000 ms segment fits.
std::vector<int64_t> SegmentStarts(int64_t duration_ms) {
  std::vector<int64_t> starts;
  for (int64_t s = 0; s + 1000 <= duration_ms; s += 500) starts.push_back(s);
  return starts;
}

bool Overlaps(int64_t a0, int64_t a1, int64_t b0, int64_t b1) {
  return a0 < b1 && b0 < a1;
}

}  // namespace

std::vector<Trial> MakeClassificationTrials(
    const std::map<std::string, int64_t>& utt_duration_ms,
    const std::vector<Reference>& references,
    const std::vector<std::string>& query_ids, Rng* rng) {
  // All candidate segments, in fixed utterance order.
  struct Segment {
    std::string utt_id;
    int64_t start;
  };
  std::vector<Segment> segments;
  for (const auto& [utt, dur] : utt_duration_ms) {
    for (int64_t s : SegmentStarts(dur)) segments.push_back({utt, s});
  }

  std::map<std::string, std::vector<Reference>> refs_by_query;
  for (const auto& r : references) refs_by_query[r.query_id].push_back(r);

  std::vector<Trial> trials;
  for (const auto& qid : query_ids) {
    const auto it = refs_by_query.find(qid);
    if (it == refs_by_query.end()) continue;  // no occurrences, no trials
    // A segment is positive when it contains even a portion of an
    // occurrence.
    std::vector<size_t> positives, negatives;
    for (size_t si = 0; si < segments.size(); ++si) {
      const auto& seg = segments[si];
      bool pos = false;
      for (const auto& r : it->second) {
        if (r.utt_id == seg.utt_id &&
            Overlaps(seg.start, seg.start + 1000, r.start_ms, r.end_ms)) {
          pos = true;
          break;
        }
      }
      (pos ? positives : negatives).push_back(si);
    }
    Require(!negatives.empty() || positives.empty(),
            StrCat("make_classification_trials: no negative segments left "
                   "for query ",
                   qid));
    for (size_t pi : positives) {
      const auto& pseg = segments[pi];
      trials.push_back(
          {qid, pseg.utt_id, pseg.start, pseg.start + 1000, true});
      const auto& nseg = negatives[static_cast<size_t>(
          rng->UniformInt(static_cast<int64_t>(negatives.size())))];
      const auto& seg = segments[nseg];
      trials.push_back({qid, seg.utt_id, seg.start, seg.start + 1000, false});
    }
  }
  return trials;
}

AccuracyAuc ComputeAccuracyAuc(const std::vector<bool>& labels,
                               const std::vector<double>& scores,
                               double threshold) {
  Require(!labels.empty(), "accuracy_auc: empty trial set");
  Require(labels.size() == scores.size(),
          "accuracy_auc: one score per trial required");
  AccuracyAuc out;
  int64_t correct = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted == labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());

  // Rank statistic with midranks for ties.
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] < scores[b];
  });
  int64_t num_pos = 0, num_neg = 0;
  for (bool l : labels) (l ? num_pos : num_neg)++;
  Require(num_pos > 0 && num_neg > 0,
          "accuracy_auc: need both positive and negative trials for AUC");
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]]) rank_sum_pos += midrank;
    }
    i = j;
  }
  out.auc = (rank_sum_pos -
             0.5 * static_cast<double>(num_pos) *
                 static_cast<double>(num_pos + 1)) /
            (static_cast<double>(num_pos) * static_cast<double>(num_neg));
  return out;
}

double BestAccuracyThreshold(const std::vector<bool>& labels,
                             const std::vector<double>& scores) {
  Require(!labels.empty() && labels.size() == scores.size(),
          "accuracy threshold: bad inputs");
  std::vector<double> candidates = scores;
  candidates.push_back(0.0);
  candidates.push_back(1.0);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  double best_acc = -1.0, best_thr = 0.5;
  for (double thr : candidates) {
    const double acc = ComputeAccuracyAuc(labels, scores, thr).accuracy;
    if (acc > best_acc) {
      best_acc = acc;
      best_thr = thr;
    }
  }
  return best_thr;
}

namespace {

// Deterministic processing order: score desc, then stable keys.
bool HitOrder(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.query_id != b.query_id) return a.query_id < b.query_id;
  if (a.utt_id != b.utt_id) return a.utt_id < b.utt_id;
  if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
  return a.end_ms < b.end_ms;
}

}  // namespace

AlignResult AlignHits(const std::vector<Hypothesis>& hypotheses,
                      const std::vector<Reference>& references,
                      int64_t tolerance_ms) {
  AlignResult out;
  std::map<std::pair<std::string, std::string>, std::vector<size_t>> refs_at;
  for (size_t ri = 0; ri < references.size(); ++ri) {
    const auto& r = references[ri];
    out.ntrue[r.query_id]++;
    refs_at[{r.query_id, r.utt_id}].push_back(ri);
  }
  std::vector<Hypothesis> sorted = hypotheses;
  std::sort(sorted.begin(), sorted.end(), HitOrder);

  std::vector<bool> claimed(references.size(), false);
  out.hits.reserve(sorted.size());
  for (const auto& h : sorted) {
    const int64_t mid = (h.start_ms + h.end_ms) / 2;
    const auto it = refs_at.find({h.query_id, h.utt_id});
    int64_t best_ref = -1;
    int64_t best_dist = 0;
    if (it != refs_at.end()) {
      for (size_t ri : it->second) {
        if (claimed[ri]) continue;
        const auto& r = references[ri];
        if (mid < r.start_ms - tolerance_ms || mid > r.end_ms + tolerance_ms) {
          continue;
        }
        const int64_t ref_mid = (r.start_ms + r.end_ms) / 2;
        const int64_t dist = std::abs(mid - ref_mid);
        if (best_ref < 0 || dist < best_dist ||
            (dist == best_dist && r.start_ms < references[static_cast<size_t>(
                                                  best_ref)].start_ms)) {
          best_ref = static_cast<int64_t>(ri);
          best_dist = dist;
        }
      }
    }
    LabeledHit lh;
    lh.hyp = h;
    lh.correct = best_ref >= 0;
    if (best_ref >= 0) claimed[static_cast<size_t>(best_ref)] = true;
    out.hits.push_back(std::move(lh));
  }
  return out;
}

TwvResult ComputeTwv(const AlignResult& aligned, double total_seconds,
                     const TwvConfig& config, double theta,
                     const std::vector<std::string>& query_ids) {
  Require(total_seconds > 0, "twv: total duration must be positive");
  Require(config.beta > 0, "twv: beta must be positive");
  std::vector<std::string> universe = query_ids;
  if (universe.empty()) {
    for (const auto& [q, n] : aligned.ntrue) universe.push_back(q);
  }
  std::sort(universe.begin(), universe.end());
  universe.erase(std::unique(universe.begin(), universe.end()),
                 universe.end());

  std::map<std::string, std::pair<int64_t, int64_t>> counts;  // correct, fa
  for (const auto& lh : aligned.hits) {
    if (lh.hyp.score < theta) continue;  // discarded first
    auto& c = counts[lh.hyp.query_id];
    (lh.correct ? c.first : c.second)++;
  }

  TwvResult out;
  out.beta = config.beta;
  const int64_t trials_base = static_cast<int64_t>(std::floor(total_seconds));
  int64_t averaged = 0;
  double sum_pmiss = 0.0, sum_pfa = 0.0, sum_cost = 0.0;
  for (const auto& q : universe) {
    const auto nt_it = aligned.ntrue.find(q);
    const int64_t ntrue = nt_it == aligned.ntrue.end() ? 0 : nt_it->second;
    if (ntrue == 0) {
      out.zero_ntrue.push_back(q);
      continue;
    }
    PerQueryTwv pq;
    pq.ntrue = ntrue;
    const auto c_it = counts.find(q);
    if (c_it != counts.end()) {
      pq.correct = c_it->second.first;
      pq.false_alarms = c_it->second.second;
    }
    const int64_t num_trials = trials_base - ntrue;
    Require(num_trials > 0,
            StrCat("twv: fewer than one trial for query ", q,
                   " (duration too short)"));
    pq.pmiss = 1.0 - static_cast<double>(pq.correct) /
                         static_cast<double>(ntrue);
    pq.pfa = static_cast<double>(pq.false_alarms) /
             static_cast<double>(num_trials);
    sum_pmiss += pq.pmiss;
    sum_pfa += pq.pfa;
    sum_cost += pq.pmiss + config.beta * pq.pfa;
    out.per_query[q] = pq;
    ++averaged;
  }
  Require(averaged > 0, "twv: no query with Ntrue > 0 to average");
  out.twv = 1.0 - sum_cost / static_cast<double>(averaged);
  out.mean_pmiss = sum_pmiss / static_cast<double>(averaged);
  out.mean_pfa = sum_pfa / static_cast<double>(averaged);
  return out;
}

MtwvResult MtwvSweep(const AlignResult& aligned, double total_seconds,
                     const TwvConfig& config,
                     const std::vector<std::string>& query_ids) {
  std::set<double> thresholds = {0.0, 1.0};
  for (const auto& lh : aligned.hits) thresholds.insert(lh.hyp.score);
  MtwvResult out;
  out.mtwv = -std::numeric_limits<double>::infinity();
  for (double theta : thresholds) {
    const TwvResult r =
        ComputeTwv(aligned, total_seconds, config, theta, query_ids);
    out.det.push_back({theta, r.mean_pmiss, r.mean_pfa, r.twv});
    // Strictly-greater keeps the lowest threshold among ties.
    if (r.twv > out.mtwv) {
      out.mtwv = r.twv;
      out.theta = theta;
    }
  }
  return out;
}

std::vector<Hypothesis> KstNormalize(const std::vector<Hypothesis>& hyps,
                                     double total_seconds, double beta) {
  Require(total_seconds > 0, "kst: total duration must be positive");
  Require(beta > 0, "kst: beta must be positive");
  constexpr double kEps = 1e-9;
  std::map<std::string, double> ntrue_est;
  for (const auto& h : hyps) {
    ntrue_est[h.query_id] += std::clamp(h.score, kEps, 1.0 - kEps);
  }
  std::vector<Hypothesis> out = hyps;
  for (auto& h : out) {
    const double nt = ntrue_est[h.query_id];
    const double thr = beta * nt / (total_seconds + (beta - 1.0) * nt);
    const double s = std::clamp(h.score, kEps, 1.0 - kEps);
    h.score = s * (1.0 - thr) / (s * (1.0 - thr) + (1.0 - s) * thr);
  }
  return out;
}

std::string FormatTwvReport(const TwvResult& result, double theta,
                            const std::vector<DetPoint>& det) {
  std::ostringstream os;
  os << "# aggregate\n";
  os << "twv\t" << FloatString(result.twv) << "\n";
  os << "theta\t" << FloatString(theta) << "\n";
  os << "mean_pmiss\t" << FloatString(result.mean_pmiss) << "\n";
  os << "mean_pfa\t" << FloatString(result.mean_pfa) << "\n";
  os << "queries_averaged\t" << result.per_query.size() << "\n";
  if (!result.zero_ntrue.empty()) {
    os << "# excluded (Ntrue = 0)\n";
    for (const auto& q : result.zero_ntrue) os << q << "\n";
  }
  os << "# per-query\tquery\tntrue\tcorrect\tfalse_alarms\tpmiss\tpfa\ttwv\n";
  for (const auto& [q, pq] : result.per_query) {
    os << "query\t" << q << '\t' << pq.ntrue << '\t' << pq.correct << '\t'
       << pq.false_alarms << '\t' << FloatString(pq.pmiss) << '\t'
       << FloatString(pq.pfa) << '\t'
       << FloatString(1.0 - pq.pmiss - result.beta * pq.pfa) << "\n";
  }
  if (!det.empty()) {
    os << "# det\ttheta\tpmiss\tpfa\ttwv\n";
    for (const auto& p : det) {
      os << "det\t" << FloatString(p.theta) << '\t' << FloatString(p.pmiss)
         << '\t' << FloatString(p.pfa) << '\t' << FloatString(p.twv) << "\n";
    }
  }
  return os.str();
}

}  // namespace kws
