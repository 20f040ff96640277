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

#include "kws/gradcheck.h"

#include <cmath>

#include "kws/adam.h"
#include "kws/cells.h"
#include "kws/encoder.h"
#include "kws/kernels.h"
#include "kws/rng.h"
#include "kws/tape.h"

namespace kws {

using nn::CellKind;
using nn::Direction;
using nn::Mode;
using nn::Ragged;
using nn::Tape;
using DTensor = nn::Tensor<double>;

GradCheckReport CheckGradients(
    const std::string& name, const ParamMap& params,
    const std::function<double(const ParamMap&)>& forward,
    const std::function<ParamMap(const ParamMap&)>& gradient,
    double tolerance, double step) {
  GradCheckReport report;
  report.name = name;
  ParamMap analytic = gradient(params);
  double max_err = 0.0;
  for (const auto& [pname, tensor] : params) {
    auto it = analytic.find(pname);
    Require(it != analytic.end(),
            StrCat("gradcheck ", name, ": no analytic gradient for ", pname));
    for (size_t i = 0; i < tensor.data.size(); ++i) {
      ParamMap p = params;
      p[pname].data[i] = tensor.data[i] + step;
      const double up = forward(p);
      p[pname].data[i] = tensor.data[i] - step;
      const double down = forward(p);
      const double numeric = (up - down) / (2.0 * step);
      const double a = it->second.data[i];
      const double err =
          std::abs(a - numeric) /
          std::max({std::abs(a), std::abs(numeric), 1e-3});
      max_err = std::max(max_err, err);
    }
  }
  report.max_rel_err = max_err;
  report.pass = max_err < tolerance;
  return report;
}

namespace {

DTensor RandTensor(Rng* rng, std::vector<int64_t> shape, double scale = 1.0) {
  DTensor t(std::move(shape));
  for (auto& v : t.data) v = scale * rng->Gaussian();
  return t;
}

std::vector<double> RandLabels(Rng* rng, size_t n) {
  std::vector<double> y(n);
  for (auto& v : y) v = rng->Bernoulli(0.4) ? 1.0 : 0.0;
  return y;
}

// Sums all elements of a tape value through a weighting vector so the
// checked loss mixes every output coordinate.
int WeightedSum(Tape<double>& tape, int x_id, const DTensor& weights) {
  const auto& x = tape.Value(x_id);
  Require(weights.numel() == x.numel(), "gradcheck: weight size mismatch");
  DTensor out({1});
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    s += x.data[static_cast<size_t>(i)] * weights.data[static_cast<size_t>(i)];
  }
  out.data[0] = s;
  return tape.Push(std::move(out), {x_id},
                   [x_id, weights](Tape<double>& t, const DTensor& gy) {
                     DTensor& gx = t.Grad(x_id);
                     for (size_t i = 0; i < gx.data.size(); ++i) {
                       gx.data[i] += gy.data[0] * weights.data[i];
                     }
                   });
}

struct Case {
  std::string name;
  ParamMap params;
  std::function<double(const ParamMap&, ParamMap*)> run;  // grads optional
  // Kernel checks use the standard 1e-4 step. The composed model is
  // stiffer (batch statistics over 2-3 samples), so its truncation
  // error at 1e-4 dominates; a smaller step keeps the check sharp.
  double step = 1e-4;

  GradCheckReport Check() const {
    auto fwd = [this](const ParamMap& p) { return run(p, nullptr); };
    auto grad = [this](const ParamMap& p) {
      ParamMap g;
      run(p, &g);
      return g;
    };
    return CheckGradients(name, params, fwd, grad, 1e-4, step);
  }
};

// Builds one kernel graph: leaf inputs come from the param map so both
// parameter and data gradients are checked.
Case MakeAffineCase(Rng* rng) {
  Case c;
  c.name = "affine";
  c.params["w"] = RandTensor(rng, {4, 3});
  c.params["b"] = RandTensor(rng, {4});
  c.params["x"] = RandTensor(rng, {3, 5});
  DTensor weights = RandTensor(rng, {4 * 5});
  c.run = [weights](const ParamMap& p, ParamMap* grads) {
    Tape<double> tape;
    const int w = tape.Param("w", p.at("w"));
    const int b = tape.Param("b", p.at("b"));
    const int x = tape.Param("x", p.at("x"));
    const int y = nn::Affine(tape, w, b, x);
    const int loss = WeightedSum(tape, y, weights);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

Case MakeEmbeddingCase(Rng* rng) {
  Case c;
  c.name = "embedding_lookup";
  c.params["table"] = RandTensor(rng, {5, 3});
  const std::vector<int64_t> ids = {1, 4, 1, 0};  // repeated id on purpose
  DTensor weights = RandTensor(rng, {3 * 4});
  c.run = [ids, weights](const ParamMap& p, ParamMap* grads) {
    Tape<double> tape;
    const int table = tape.Param("table", p.at("table"));
    const int y = nn::EmbeddingLookup(tape, table, ids);
    const int loss = WeightedSum(tape, y, weights);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

Case MakeBatchNormCase(Rng* rng, Mode mode) {
  Case c;
  c.name = mode == Mode::kTrain ? "batchnorm_train" : "batchnorm_infer";
  c.params["x"] = RandTensor(rng, {3, 7});
  c.params["gamma"] = RandTensor(rng, {3}, 0.5);
  c.params["beta"] = RandTensor(rng, {3}, 0.5);
  DTensor rm = RandTensor(rng, {3}, 0.3);
  DTensor rv = DTensor::Full({3}, 1.0);
  for (auto& v : rv.data) v += 0.3 * std::abs(rng->Gaussian());
  DTensor weights = RandTensor(rng, {3 * 7});
  c.run = [mode, rm, rv, weights](const ParamMap& p, ParamMap* grads) {
    Tape<double> tape;
    const int x = tape.Param("x", p.at("x"));
    const int gamma = tape.Param("gamma", p.at("gamma"));
    const int beta = tape.Param("beta", p.at("beta"));
    DTensor rme = rm, rve = rv;  // fresh running stats each evaluation
    const int y = nn::BatchNorm(tape, x, gamma, beta, mode, &rme, &rve);
    const int loss = WeightedSum(tape, y, weights);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

Case MakeDropoutCase(Rng* rng) {
  Case c;
  c.name = "dropout_train";
  c.params["x"] = RandTensor(rng, {4, 6});
  DTensor weights = RandTensor(rng, {4 * 6});
  c.run = [weights](const ParamMap& p, ParamMap* grads) {
    Tape<double> tape;
    const int x = tape.Param("x", p.at("x"));
    Rng drop(4242);  // fixed mask: same function at every evaluation
    const int y = nn::Dropout(tape, x, 0.4, Mode::kTrain, &drop);
    const int loss = WeightedSum(tape, y, weights);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

Case MakeDownsampleCase(Rng* rng) {
  Case c;
  c.name = "temporal_downsample";
  c.params["x"] = RandTensor(rng, {3, 11});  // two sequences: 7 + 4 frames
  const Ragged layout = Ragged::FromLengths({7, 4});
  DTensor weights = RandTensor(rng, {3 * (7 / 2 + 4 / 2)});
  c.run = [layout, weights](const ParamMap& p, ParamMap* grads) {
    Tape<double> tape;
    const int x = tape.Param("x", p.at("x"));
    Ragged out;
    const int y = nn::TemporalDownsample(tape, x, layout, 2, &out);
    const int loss = WeightedSum(tape, y, weights);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

Case MakeSumPositionsCase(Rng* rng) {
  Case c;
  c.name = "sum_positions";
  c.params["x"] = RandTensor(rng, {3, 9});
  const Ragged layout = Ragged::FromLengths({4, 5});
  DTensor weights = RandTensor(rng, {3 * 2});
  c.run = [layout, weights](const ParamMap& p, ParamMap* grads) {
    Tape<double> tape;
    const int x = tape.Param("x", p.at("x"));
    const int y = nn::SumPositions(tape, x, layout);
    const int loss = WeightedSum(tape, y, weights);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

Case MakeRnnCase(Rng* rng, CellKind cell, Direction dir,
                 const std::string& name) {
  Case c;
  c.name = name;
  const int64_t input = 3, hidden = 2;
  const int64_t gates = nn::GateCount(cell);
  c.params["x"] = RandTensor(rng, {input, 9});  // sequences 5 + 3 + 1
  c.params["f.wx"] = RandTensor(rng, {gates * hidden, input}, 0.6);
  c.params["f.wh"] = RandTensor(rng, {gates * hidden, hidden}, 0.6);
  c.params["f.b"] = RandTensor(rng, {gates * hidden}, 0.3);
  const bool bidir = dir == Direction::kBidirectional;
  if (bidir) {
    c.params["b.wx"] = RandTensor(rng, {gates * hidden, input}, 0.6);
    c.params["b.wh"] = RandTensor(rng, {gates * hidden, hidden}, 0.6);
    c.params["b.b"] = RandTensor(rng, {gates * hidden}, 0.3);
  }
  const Ragged layout = Ragged::FromLengths({5, 3, 1});
  DTensor weights = RandTensor(rng, {(bidir ? 2 : 1) * hidden * 9});
  c.run = [cell, dir, bidir, layout, weights](const ParamMap& p,
                                              ParamMap* grads) {
    Tape<double> tape;
    const int x = tape.Param("x", p.at("x"));
    nn::RnnParamIds<double> fwd{tape.Param("f.wx", p.at("f.wx")),
                                tape.Param("f.wh", p.at("f.wh")),
                                tape.Param("f.b", p.at("f.b"))};
    nn::RnnParamIds<double> bwd;
    if (bidir) {
      bwd = {tape.Param("b.wx", p.at("b.wx")),
             tape.Param("b.wh", p.at("b.wh")),
             tape.Param("b.b", p.at("b.b"))};
    }
    const int y = nn::RecurrentForward(tape, cell, dir, fwd, bwd, x, layout);
    const int loss = WeightedSum(tape, y, weights);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

Case MakePairScoresCase(Rng* rng) {
  Case c;
  c.name = "pair_scores";
  c.params["h"] = RandTensor(rng, {4, 7}, 0.7);  // docs of 4 + 3 frames
  c.params["e"] = RandTensor(rng, {4, 2}, 0.7);
  const Ragged docs = Ragged::FromLengths({4, 3});
  const std::vector<std::pair<int64_t, int64_t>> pairs = {
      {0, 0}, {1, 1}, {0, 1}};
  DTensor weights = RandTensor(rng, {4 + 3 + 3});
  c.run = [docs, pairs, weights](const ParamMap& p, ParamMap* grads) {
    Tape<double> tape;
    const int h = tape.Param("h", p.at("h"));
    const int e = tape.Param("e", p.at("e"));
    Ragged out;
    const int z = nn::PairScores(tape, h, docs, e, pairs, &out);
    const int loss = WeightedSum(tape, z, weights);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

// Raw score inputs in (0.1, 0.9) and away from the margin boundaries
// so the indicator masks are locally constant under the 1e-4 step.
DTensor SafeScores(Rng* rng, int64_t n, double phi) {
  DTensor z({1, n});
  for (auto& v : z.data) {
    do {
      v = rng->Uniform(0.05, 0.95);
    } while (std::abs(v - phi) < 0.02 || std::abs(v - (1.0 - phi)) < 0.02);
  }
  return z;
}

Case MakeMarginLossCase(Rng* rng, double lambda, double phi,
                        const std::string& name) {
  Case c;
  c.name = name;
  c.params["z"] = SafeScores(rng, 12, phi);
  const std::vector<double> labels = RandLabels(rng, 12);
  c.run = [labels, lambda, phi](const ParamMap& p, ParamMap* grads) {
    Tape<double> tape;
    const int z = tape.Param("z", p.at("z"));
    const int loss = nn::MarginLoss(tape, z, labels, lambda, phi);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

Case MakePairMarginLossCase(Rng* rng, double lambda, double phi,
                            const std::string& name) {
  Case c;
  c.name = name;
  c.params["h"] = RandTensor(rng, {3, 7}, 0.5);
  c.params["e"] = RandTensor(rng, {3, 2}, 0.5);
  const Ragged docs = Ragged::FromLengths({4, 3});
  const std::vector<std::pair<int64_t, int64_t>> pairs = {
      {0, 0}, {1, 1}, {1, 0}};
  const std::vector<double> labels = RandLabels(rng, 4 + 3 + 4);
  c.run = [docs, pairs, labels, lambda, phi](const ParamMap& p,
                                             ParamMap* grads) {
    Tape<double> tape;
    const int h = tape.Param("h", p.at("h"));
    const int e = tape.Param("e", p.at("e"));
    const int loss =
        nn::PairMarginLoss(tape, h, docs, e, pairs, labels, lambda, phi);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

// Composed model: 3-frame utterance, 2-symbol query, one training
// pair, margin loss. Exercises every kernel the training loop uses.
Case MakeFullModelCase(uint64_t seed, double lambda, double phi,
                       const std::string& name) {
  Case c;
  c.name = name;
  c.step = 1e-5;
  ModelConfig cfg;
  cfg.feature_dim = 3;
  cfg.symbol_count = 4;
  cfg.embed_dim = 3;
  cfg.query_layers = 1;
  cfg.query_hidden = 2;
  cfg.doc_layers = 2;
  cfg.doc_hidden = 3;
  cfg.downsample = {1, 2};
  cfg.joint_dim = 4;
  cfg.dropout = 0.3;
  const ParameterStore ps = InitModelParams(cfg, seed);
  c.params = ToDouble(ps.tensors);
  // Running statistics are state, not parameters; keep them out of the
  // finite-difference sweep but feed fresh copies to every evaluation.
  ParamMap running;
  for (auto it = c.params.begin(); it != c.params.end();) {
    if (!ParameterStore::IsTrainable(it->first)) {
      running[it->first] = it->second;
      it = c.params.erase(it);
    } else {
      ++it;
    }
  }
  Rng data_rng(Rng::Derive(seed, 77));
  DTensor features = RandTensor(&data_rng, {3, 3}, 0.8);
  const std::vector<int64_t> symbols = {1, 3};
  const std::vector<double> labels = {1.0};  // one downsampled frame
  c.run = [cfg, running, features, symbols, labels, lambda, phi, seed](
              const ParamMap& p, ParamMap* grads) {
    NamedTensors<double> store = p;
    for (const auto& [k, v] : running) store[k] = v;
    Tape<double> tape;
    GraphBinder<double> pb(&tape, &store);
    Rng dropout_rng(Rng::Derive(seed, 99));  // same masks every call
    const Ragged queries = Ragged::FromLengths({2});
    const int e = BuildQueryEncoder(tape, pb, cfg, symbols, queries,
                                    Mode::kTrain);
    const Ragged utts = Ragged::FromLengths({3});
    const int x = tape.Leaf(features, false);
    Ragged enc_layout;
    const int h = BuildDocumentEncoder(tape, pb, cfg, x, utts, Mode::kTrain,
                                       &dropout_rng, &enc_layout);
    const std::vector<std::pair<int64_t, int64_t>> pairs = {{0, 0}};
    const int loss =
        nn::PairMarginLoss(tape, h, enc_layout, e, pairs, labels, lambda, phi);
    if (grads) *grads = tape.Backward(loss);
    return tape.Value(loss).data[0];
  };
  return c;
}

}  // namespace

std::vector<GradCheckReport> RunGradcheckSuite(uint64_t seed) {
  Rng rng(seed);
  std::vector<Case> cases;
  cases.push_back(MakeAffineCase(&rng));
  cases.push_back(MakeEmbeddingCase(&rng));
  cases.push_back(MakeBatchNormCase(&rng, Mode::kTrain));
  cases.push_back(MakeBatchNormCase(&rng, Mode::kInfer));
  cases.push_back(MakeDropoutCase(&rng));
  cases.push_back(MakeDownsampleCase(&rng));
  cases.push_back(MakeSumPositionsCase(&rng));
  cases.push_back(MakeRnnCase(&rng, CellKind::kGru, Direction::kForward,
                              "gru_forward"));
  cases.push_back(MakeRnnCase(&rng, CellKind::kGru, Direction::kBackward,
                              "gru_backward_dir"));
  cases.push_back(MakeRnnCase(&rng, CellKind::kGru, Direction::kBidirectional,
                              "gru_bidirectional"));
  cases.push_back(MakeRnnCase(&rng, CellKind::kLstm, Direction::kForward,
                              "lstm_forward"));
  cases.push_back(MakeRnnCase(&rng, CellKind::kLstm, Direction::kBidirectional,
                              "lstm_bidirectional"));
  cases.push_back(MakePairScoresCase(&rng));
  cases.push_back(MakeMarginLossCase(&rng, 1.0, 1.0, "margin_loss_bce"));
  cases.push_back(MakeMarginLossCase(&rng, 5.0, 0.7, "margin_loss_margin"));
  cases.push_back(
      MakePairMarginLossCase(&rng, 1.0, 1.0, "pair_margin_loss_bce"));
  cases.push_back(
      MakePairMarginLossCase(&rng, 5.0, 0.7, "pair_margin_loss_margin"));
  cases.push_back(MakeFullModelCase(seed + 1, 1.0, 1.0, "full_model_bce"));
  cases.push_back(MakeFullModelCase(seed + 2, 5.0, 0.7, "full_model_margin"));

  std::vector<GradCheckReport> reports;
  reports.reserve(cases.size());
  for (const Case& c : cases) reports.push_back(c.Check());
  return reports;
}

}  // namespace kws
