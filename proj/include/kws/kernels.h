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
// Differentiable kernels. Each kernel validates its inputs, computes
// the forward value, and registers a hand-written backward closure on
// the tape. Sequence-valued tensors are (dim x length); batches of
// sequences are packed along columns and described by a Ragged layout,
// so every packed column is a valid (unpadded) frame.

#ifndef KWS_KERNELS_H_
#define KWS_KERNELS_H_

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "kws/rng.h"
#include "kws/tape.h"
#include "kws/tensor.h"

namespace kws {
namespace nn {

// Y = W X + b with b broadcast across the temporal (column) axis.
// W: (O x I), X: (I x N), b: (O) -> Y: (O x N).
template <typename T>
int Affine(Tape<T>& tape, int w_id, int b_id, int x_id) {
  const Tensor<T>& w = tape.Value(w_id);
  const Tensor<T>& b = tape.Value(b_id);
  const Tensor<T>& x = tape.Value(x_id);
  Require(w.ndim() == 2 && x.ndim() == 2,
          StrCat("affine: W and X must be matrices, got ndim ", w.ndim(), "/",
                 x.ndim()));
  Require(w.cols() == x.rows(),
          StrCat("affine: inner dimensions disagree: W is ", w.rows(), "x",
                 w.cols(), ", X is ", x.rows(), "x", x.cols()));
  Require(b.numel() == w.rows(),
          StrCat("affine: bias length ", b.numel(), " must equal output dim ",
                 w.rows()));
  Tensor<T> y({w.rows(), x.cols()});
  AsMat(y).noalias() = AsMat(w) * AsMat(x);
  AsMat(y).colwise() += AsVec(b);
  return tape.Push(std::move(y), {w_id, b_id, x_id},
                   [w_id, b_id, x_id](Tape<T>& t, const Tensor<T>& gy) {
                     auto dy = AsMat(gy);
                     AsMat(t.Grad(w_id)).noalias() +=
                         dy * AsMat(t.Value(x_id)).transpose();
                     AsVec(t.Grad(b_id)) += dy.rowwise().sum();
                     AsMat(t.Grad(x_id)).noalias() +=
                         AsMat(t.Value(w_id)).transpose() * dy;
                   });
}

// Row-gather of an embedding table. table: (V x E), ids: length K ->
// output (E x K), one column per position. The gradient scatters
// additively into the looked-up rows.
template <typename T>
int EmbeddingLookup(Tape<T>& tape, int table_id,
                    const std::vector<int64_t>& ids) {
  const Tensor<T>& table = tape.Value(table_id);
  Require(table.ndim() == 2, "embedding_lookup: table must be a matrix");
  Require(!ids.empty(), "embedding_lookup: empty id sequence");
  const int64_t v = table.rows(), e = table.cols();
  for (size_t k = 0; k < ids.size(); ++k) {
    Require(ids[k] >= 0 && ids[k] < v,
            StrCat("embedding_lookup: id ", ids[k], " at position ", k,
                   " outside table with ", v, " rows"));
  }
  Tensor<T> y({e, static_cast<int64_t>(ids.size())});
  for (size_t k = 0; k < ids.size(); ++k) {
    for (int64_t j = 0; j < e; ++j) y.at(j, static_cast<int64_t>(k)) = table.at(ids[k], j);
  }
  return tape.Push(std::move(y), {table_id},
                   [table_id, ids](Tape<T>& t, const Tensor<T>& gy) {
                     Tensor<T>& gt = t.Grad(table_id);
                     const int64_t e = gt.cols();
                     for (size_t k = 0; k < ids.size(); ++k) {
                       for (int64_t j = 0; j < e; ++j) {
                         gt.at(ids[k], j) += gy.at(j, static_cast<int64_t>(k));
                       }
                     }
                   });
}

// Batch normalization over the column axis: every feature (row) is
// normalized across all packed valid frames. Train mode uses batch
// statistics (biased variance) and updates the running buffers in
// place; infer mode reads the running buffers only, so its output does
// not depend on batch composition. The indicator-free statistics paths
// are treated as constants in infer mode.
template <typename T>
int BatchNorm(Tape<T>& tape, int x_id, int gamma_id, int beta_id, Mode mode,
              Tensor<T>* running_mean, Tensor<T>* running_var,
              T momentum = T(0.1), T eps = T(1e-5)) {
  const Tensor<T>& x = tape.Value(x_id);
  Require(x.ndim() == 2, "batchnorm: input must be a matrix");
  const int64_t f = x.rows(), n = x.cols();
  const Tensor<T>& gamma = tape.Value(gamma_id);
  const Tensor<T>& beta = tape.Value(beta_id);
  Require(gamma.numel() == f && beta.numel() == f,
          "batchnorm: scale/shift length must equal feature dim");
  Require(running_mean && running_var && running_mean->numel() == f &&
              running_var->numel() == f,
          "batchnorm: running statistics must match feature dim");

  Tensor<T> mean({f}), inv_std({f}), xhat({f, n});
  if (mode == Mode::kTrain) {
    Require(n >= 2, StrCat("batchnorm: train mode needs at least 2 samples "
                           "per feature, got ",
                           n));
    for (int64_t i = 0; i < f; ++i) {
      // 64-bit accumulation for the statistics.
      double s = 0.0;
      for (int64_t j = 0; j < n; ++j) s += static_cast<double>(x.at(i, j));
      const double mu = s / static_cast<double>(n);
      double v = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        const double d = static_cast<double>(x.at(i, j)) - mu;
        v += d * d;
      }
      v /= static_cast<double>(n);
      mean.data[i] = static_cast<T>(mu);
      inv_std.data[i] =
          static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(eps)));
      running_mean->data[i] = (T(1) - momentum) * running_mean->data[i] +
                              momentum * static_cast<T>(mu);
      running_var->data[i] = (T(1) - momentum) * running_var->data[i] +
                             momentum * static_cast<T>(v);
    }
  } else {
    for (int64_t i = 0; i < f; ++i) {
      mean.data[i] = running_mean->data[i];
      inv_std.data[i] = T(1) / std::sqrt(running_var->data[i] + eps);
    }
  }
  Tensor<T> y({f, n});
  for (int64_t i = 0; i < f; ++i) {
    const T mu = mean.data[i], is = inv_std.data[i];
    const T g = gamma.data[i], be = beta.data[i];
    for (int64_t j = 0; j < n; ++j) {
      const T xh = (x.at(i, j) - mu) * is;
      xhat.at(i, j) = xh;
      y.at(i, j) = g * xh + be;
    }
  }
  const bool train = mode == Mode::kTrain;
  return tape.Push(
      std::move(y), {x_id, gamma_id, beta_id},
      [x_id, gamma_id, beta_id, xhat = std::move(xhat),
       inv_std = std::move(inv_std), train](Tape<T>& t, const Tensor<T>& gy) {
        const int64_t f = gy.rows(), n = gy.cols();
        Tensor<T>& gx = t.Grad(x_id);
        Tensor<T>& ggamma = t.Grad(gamma_id);
        Tensor<T>& gbeta = t.Grad(beta_id);
        const Tensor<T>& gamma = t.Value(gamma_id);
        for (int64_t i = 0; i < f; ++i) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (int64_t j = 0; j < n; ++j) {
            const double dy = static_cast<double>(gy.at(i, j));
            sum_dy += dy;
            sum_dy_xhat += dy * static_cast<double>(xhat.at(i, j));
          }
          ggamma.data[i] += static_cast<T>(sum_dy_xhat);
          gbeta.data[i] += static_cast<T>(sum_dy);
          const T g_is = gamma.data[i] * inv_std.data[i];
          if (train) {
            // Batch statistics carry gradient.
            const T m_dy = static_cast<T>(sum_dy / static_cast<double>(n));
            const T m_dy_xhat =
                static_cast<T>(sum_dy_xhat / static_cast<double>(n));
            for (int64_t j = 0; j < n; ++j) {
              gx.at(i, j) +=
                  g_is * (gy.at(i, j) - m_dy - xhat.at(i, j) * m_dy_xhat);
            }
          } else {
            for (int64_t j = 0; j < n; ++j) gx.at(i, j) += g_is * gy.at(i, j);
          }
        }
      });
}

// Inverted dropout. Train mode zeroes each element with probability p
// and scales survivors by 1/(1-p); infer mode is the identity.
template <typename T>
int Dropout(Tape<T>& tape, int x_id, double p, Mode mode, Rng* rng) {
  Require(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
  const Tensor<T>& x = tape.Value(x_id);
  if (mode == Mode::kInfer || p == 0.0) {
    Tensor<T> y = x;
    return tape.Push(std::move(y), {x_id},
                     [x_id](Tape<T>& t, const Tensor<T>& gy) {
                       auto gx = AsVec(t.Grad(x_id));
                       gx += AsVec(gy);
                     });
  }
  Require(rng != nullptr, "dropout: train mode needs an RNG");
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.data.size());
  for (size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng->Uniform() < p ? T(0) : scale;
  }
  Tensor<T> y(x.shape);
  for (size_t i = 0; i < mask.size(); ++i) y.data[i] = x.data[i] * mask[i];
  return tape.Push(std::move(y), {x_id},
                   [x_id, mask = std::move(mask)](Tape<T>& t,
                                                  const Tensor<T>& gy) {
                     Tensor<T>& gx = t.Grad(x_id);
                     for (size_t i = 0; i < mask.size(); ++i) {
                       gx.data[i] += gy.data[i] * mask[i];
                     }
                   });
}

// Input column indices selected by stride-s downsampling of an
// N-frame sequence: the last frame of each window [k*s, (k+1)*s).
// Size is floor(N/s); empty when N < s (callers reject sequences
// shorter than the total downsampling before encoding).
inline std::vector<int64_t> DownsampleIndices(int64_t n, int64_t s) {
  Require(n >= 0 && s >= 1, "temporal_downsample: need N >= 0 and s >= 1");
  std::vector<int64_t> idx(static_cast<size_t>(n / s));
  for (size_t k = 0; k < idx.size(); ++k) {
    idx[k] = static_cast<int64_t>(k) * s + s - 1;
  }
  return idx;
}

// Stride-s selection: output frame k of each sequence is the last
// frame of the input window [k*s, (k+1)*s), so each sequence shrinks
// from N to floor(N/s) frames. Every sequence must keep at least one
// frame. Returns the new packed value and writes the downsampled
// layout to *out_ragged.
template <typename T>
int TemporalDownsample(Tape<T>& tape, int x_id, const Ragged& ragged,
                       int64_t s, Ragged* out_ragged) {
  Require(s >= 1, "temporal_downsample: factor must be >= 1");
  const Tensor<T>& x = tape.Value(x_id);
  Require(x.ndim() == 2 && x.cols() == ragged.total(),
          "temporal_downsample: packed layout disagrees with value");
  std::vector<int64_t> new_lens(ragged.lengths.size());
  for (size_t i = 0; i < ragged.lengths.size(); ++i) {
    new_lens[i] = ragged.lengths[i] / s;
    Require(new_lens[i] >= 1,
            StrCat("temporal_downsample: sequence ", i, " has ",
                   ragged.lengths[i], " frames, shorter than factor ", s));
  }
  Ragged out = Ragged::FromLengths(std::move(new_lens));
  const int64_t f = x.rows();

  // Column selection map: output column -> input column.
  std::vector<int64_t> pick(static_cast<size_t>(out.total()));
  for (int64_t i = 0; i < out.size(); ++i) {
    for (int64_t k = 0; k < out.lengths[i]; ++k) {
      pick[static_cast<size_t>(out.offsets[i] + k)] =
          ragged.offsets[i] + k * s + s - 1;
    }
  }
  Tensor<T> y({f, out.total()});
  for (int64_t j = 0; j < out.total(); ++j) {
    for (int64_t i = 0; i < f; ++i) y.at(i, j) = x.at(i, pick[static_cast<size_t>(j)]);
  }
  *out_ragged = out;
  return tape.Push(std::move(y), {x_id},
                   [x_id, pick = std::move(pick)](Tape<T>& t,
                                                  const Tensor<T>& gy) {
                     Tensor<T>& gx = t.Grad(x_id);
                     const int64_t f = gx.rows();
                     for (size_t j = 0; j < pick.size(); ++j) {
                       for (int64_t i = 0; i < f; ++i) {
                         gx.at(i, pick[j]) += gy.at(i, static_cast<int64_t>(j));
                       }
                     }
                   });
}

// Per-sequence sum over positions: (F x sum K_i) -> (F x B).
template <typename T>
int SumPositions(Tape<T>& tape, int x_id, const Ragged& ragged) {
  const Tensor<T>& x = tape.Value(x_id);
  Require(x.ndim() == 2 && x.cols() == ragged.total(),
          "sum_positions: packed layout disagrees with value");
  const int64_t f = x.rows();
  Tensor<T> y({f, ragged.size()});
  for (int64_t b = 0; b < ragged.size(); ++b) {
    for (int64_t k = 0; k < ragged.lengths[b]; ++k) {
      const int64_t j = ragged.offsets[b] + k;
      for (int64_t i = 0; i < f; ++i) y.at(i, b) += x.at(i, j);
    }
  }
  Ragged r = ragged;
  return tape.Push(std::move(y), {x_id},
                   [x_id, r](Tape<T>& t, const Tensor<T>& gy) {
                     Tensor<T>& gx = t.Grad(x_id);
                     const int64_t f = gx.rows();
                     for (int64_t b = 0; b < r.size(); ++b) {
                       for (int64_t k = 0; k < r.lengths[b]; ++k) {
                         const int64_t j = r.offsets[b] + k;
                         for (int64_t i = 0; i < f; ++i) {
                           gx.at(i, j) += gy.at(i, b);
                         }
                       }
                     }
                   });
}

template <typename T>
T SigmoidScalar(T x) {
  if (x >= T(0)) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Pairwise frame scores. h: packed document encodings (D x sum Nhat),
// e: query embeddings (D x Q). For every pair (query q, document u) the
// output holds sigmoid(h_u^T e_q), packed along columns in pair order.
// Writes the per-pair layout to *out_ragged.
template <typename T>
int PairScores(Tape<T>& tape, int h_id, const Ragged& docs, int e_id,
               const std::vector<std::pair<int64_t, int64_t>>& pairs,
               Ragged* out_ragged) {
  const Tensor<T>& h = tape.Value(h_id);
  const Tensor<T>& e = tape.Value(e_id);
  Require(h.ndim() == 2 && e.ndim() == 2 && h.rows() == e.rows(),
          StrCat("pair_scores: joint dimensions disagree: ", h.rows(), " vs ",
                 e.rows()));
  Require(h.cols() == docs.total(), "pair_scores: packed layout mismatch");
  const int64_t d = h.rows();
  std::vector<int64_t> lens(pairs.size());
  for (size_t p = 0; p < pairs.size(); ++p) {
    const auto [q, u] = pairs[p];
    Require(q >= 0 && q < e.cols(), "pair_scores: query index out of range");
    Require(u >= 0 && u < docs.size(),
            "pair_scores: document index out of range");
    lens[p] = docs.lengths[u];
  }
  Ragged out = Ragged::FromLengths(std::move(lens));
  Require(out.total() > 0, "pair_scores: no frames to score");
  Tensor<T> z({1, out.total()});
  for (size_t p = 0; p < pairs.size(); ++p) {
    const auto [q, u] = pairs[p];
    for (int64_t k = 0; k < docs.lengths[u]; ++k) {
      double s = 0.0;
      const int64_t hj = docs.offsets[u] + k;
      for (int64_t i = 0; i < d; ++i) {
        s += static_cast<double>(h.at(i, hj)) * static_cast<double>(e.at(i, q));
      }
      z.at(0, out.offsets[static_cast<int64_t>(p)] + k) =
          SigmoidScalar(static_cast<T>(s));
    }
  }
  *out_ragged = out;
  Tensor<T> z_saved = z;
  Ragged docs_c = docs, out_c = out;
  auto pairs_c = pairs;
  return tape.Push(
      std::move(z), {h_id, e_id},
      [h_id, e_id, z_saved = std::move(z_saved), docs_c, out_c,
       pairs_c](Tape<T>& t, const Tensor<T>& gy) {
        Tensor<T>& gh = t.Grad(h_id);
        Tensor<T>& ge = t.Grad(e_id);
        const Tensor<T>& h = t.Value(h_id);
        const Tensor<T>& e = t.Value(e_id);
        const int64_t d = h.rows();
        for (size_t p = 0; p < pairs_c.size(); ++p) {
          const auto [q, u] = pairs_c[p];
          for (int64_t k = 0; k < docs_c.lengths[u]; ++k) {
            const int64_t zj = out_c.offsets[static_cast<int64_t>(p)] + k;
            const T z = z_saved.at(0, zj);
            const T gs = gy.at(0, zj) * z * (T(1) - z);
            if (gs == T(0)) continue;
            const int64_t hj = docs_c.offsets[u] + k;
            for (int64_t i = 0; i < d; ++i) {
              gh.at(i, hj) += gs * e.at(i, q);
              ge.at(i, q) += gs * h.at(i, hj);
            }
          }
        }
      });
}

// Margin-masked weighted cross-entropy, summed over all packed frames:
//   J = -sum_n [ 1(z > 1-phi) (1-y) log(1-z) + 1(z < phi) lambda y log z ].
// The indicators are treated as constants of the forward pass. With
// lambda = 1 and phi = 1 this is exactly binary cross-entropy.
template <typename T>
int MarginLoss(Tape<T>& tape, int z_id, const std::vector<T>& labels, T lambda,
               T phi) {
  const Tensor<T>& z = tape.Value(z_id);
  Require(z.numel() == static_cast<int64_t>(labels.size()),
          StrCat("margin_loss: ", z.numel(), " scores vs ", labels.size(),
                 " labels"));
  Require(lambda > T(0), "margin_loss: lambda must be positive");
  Require(phi > T(0.5) && phi <= T(1), "margin_loss: phi must be in (0.5, 1]");
  constexpr double kTiny = 1e-12;
  double j = 0.0;
  for (size_t n = 0; n < labels.size(); ++n) {
    const double zn = static_cast<double>(z.data[n]);
    const double yn = static_cast<double>(labels[n]);
    if (zn > 1.0 - static_cast<double>(phi)) {
      j -= (1.0 - yn) * std::log(std::max(1.0 - zn, kTiny));
    }
    if (zn < static_cast<double>(phi)) {
      j -= static_cast<double>(lambda) * yn * std::log(std::max(zn, kTiny));
    }
  }
  Tensor<T> out({1});
  out.data[0] = static_cast<T>(j);
  return tape.Push(
      std::move(out), {z_id},
      [z_id, labels, lambda, phi](Tape<T>& t, const Tensor<T>& gy) {
        Tensor<T>& gz = t.Grad(z_id);
        const Tensor<T>& z = t.Value(z_id);
        const T g = gy.data[0];
        for (size_t n = 0; n < labels.size(); ++n) {
          const T zn = z.data[n];
          const T yn = labels[n];
          T d = T(0);
          if (zn > T(1) - phi) {
            d += (T(1) - yn) / std::max(T(1) - zn, T(1e-12));
          }
          if (zn < phi) {
            d -= lambda * yn / std::max(zn, T(1e-12));
          }
          gz.data[n] += g * d;
        }
      });
}

// Fused pair scoring + margin loss used by the training loop. Avoids
// materializing huge intermediate dJ/dz values: the gradient w.r.t.
// the logit is bounded (z for active negative frames, -lambda*(1-z)
// for active positive frames), so saturated scores stay stable.
// labels holds one value per packed output frame in pair order.
template <typename T>
int PairMarginLoss(Tape<T>& tape, int h_id, const Ragged& docs, int e_id,
                   const std::vector<std::pair<int64_t, int64_t>>& pairs,
                   const std::vector<T>& labels, T lambda, T phi) {
  const Tensor<T>& h = tape.Value(h_id);
  const Tensor<T>& e = tape.Value(e_id);
  Require(h.ndim() == 2 && e.ndim() == 2 && h.rows() == e.rows(),
          "pair_margin_loss: joint dimensions disagree");
  Require(lambda > T(0), "pair_margin_loss: lambda must be positive");
  Require(phi > T(0.5) && phi <= T(1),
          "pair_margin_loss: phi must be in (0.5, 1]");
  std::vector<int64_t> lens(pairs.size());
  for (size_t p = 0; p < pairs.size(); ++p) lens[p] = docs.lengths[pairs[p].second];
  Ragged out = Ragged::FromLengths(std::move(lens));
  Require(out.total() == static_cast<int64_t>(labels.size()),
          "pair_margin_loss: label count disagrees with pair frames");

  const int64_t d = h.rows();
  std::vector<T> z_all(static_cast<size_t>(out.total()));
  double j = 0.0;
  constexpr double kTiny = 1e-12;
  for (size_t p = 0; p < pairs.size(); ++p) {
    const auto [q, u] = pairs[p];
    for (int64_t k = 0; k < docs.lengths[u]; ++k) {
      const int64_t hj = docs.offsets[u] + k;
      double s = 0.0;
      for (int64_t i = 0; i < d; ++i) {
        s += static_cast<double>(h.at(i, hj)) * static_cast<double>(e.at(i, q));
      }
      const int64_t zj = out.offsets[static_cast<int64_t>(p)] + k;
      const double zn = static_cast<double>(SigmoidScalar(s));
      z_all[static_cast<size_t>(zj)] = static_cast<T>(zn);
      const double yn = static_cast<double>(labels[static_cast<size_t>(zj)]);
      if (zn > 1.0 - static_cast<double>(phi)) {
        j -= (1.0 - yn) * std::log(std::max(1.0 - zn, kTiny));
      }
      if (zn < static_cast<double>(phi)) {
        j -= static_cast<double>(lambda) * yn * std::log(std::max(zn, kTiny));
      }
    }
  }
  Tensor<T> loss({1});
  loss.data[0] = static_cast<T>(j);
  Ragged docs_c = docs, out_c = out;
  auto pairs_c = pairs;
  return tape.Push(
      std::move(loss), {h_id, e_id},
      [h_id, e_id, z_all = std::move(z_all), labels, lambda, phi, docs_c,
       out_c, pairs_c](Tape<T>& t, const Tensor<T>& gy) {
        Tensor<T>& gh = t.Grad(h_id);
        Tensor<T>& ge = t.Grad(e_id);
        const Tensor<T>& h = t.Value(h_id);
        const Tensor<T>& e = t.Value(e_id);
        const int64_t d = h.rows();
        const T g = gy.data[0];
        for (size_t p = 0; p < pairs_c.size(); ++p) {
          const auto [q, u] = pairs_c[p];
          for (int64_t k = 0; k < docs_c.lengths[u]; ++k) {
            const int64_t zj = out_c.offsets[static_cast<int64_t>(p)] + k;
            const T z = z_all[static_cast<size_t>(zj)];
            const T y = labels[static_cast<size_t>(zj)];
            // dJ/dlogit, indicators as constants.
            T gs = T(0);
            if (z > T(1) - phi) gs += (T(1) - y) * z;
            if (z < phi) gs -= lambda * y * (T(1) - z);
            gs *= g;
            if (gs == T(0)) continue;
            const int64_t hj = docs_c.offsets[u] + k;
            for (int64_t i = 0; i < d; ++i) {
              gh.at(i, hj) += gs * e.at(i, q);
              ge.at(i, q) += gs * h.at(i, hj);
            }
          }
        }
      });
}

}  // namespace nn
}  // namespace kws

#endif  // KWS_KERNELS_H_
