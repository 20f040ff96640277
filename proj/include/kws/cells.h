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
// Recurrent kernels. A whole (batched, packed) sequence pass is one
// tape kernel with a hand-written backward (BPTT). Cell equations are
// the standard ones:
//
//   GRU   z = sig(Wz x + Uz h + bz)          update gate
//         r = sig(Wr x + Ur h + br)          reset gate
//         n = tanh(Wn x + r .* (Un h) + bn)  candidate
//         h' = (1 - z) .* h + z .* n
//
//   LSTM  i, f, o = sig(W{i,f,o} x + U{i,f,o} h + b{i,f,o})
//         g  = tanh(Wg x + Ug h + bg)
//         c' = f .* c + i .* g
//         h' = o .* tanh(c')
//
// Gate blocks are packed row-wise into one wx/wh/b per direction:
// GRU rows [z | r | n], LSTM rows [i | f | g | o]. Initial states are
// zero. The backward direction scans the sequence from the end; its
// output stays aligned with input time, so the bidirectional output is
// the row-wise concatenation [forward ; backward].

#ifndef KWS_CELLS_H_
#define KWS_CELLS_H_

#include <atomic>
#include <memory>
#include <thread>
#include <utility>
#include <vector>

#include "kws/kernels.h"
#include "kws/tape.h"
#include "kws/tensor.h"

namespace kws {
namespace nn {

enum class CellKind { kGru, kLstm };
enum class Direction { kForward, kBackward, kBidirectional };

inline int64_t GateCount(CellKind cell) {
  return cell == CellKind::kGru ? 3 : 4;
}

// Process-wide worker count for sequence-parallel kernels. Affects
// speed only: work is split by sequence with disjoint outputs and all
// cross-sequence reductions happen in a fixed order, so results are
// bit-identical for any thread count.
inline std::atomic<int>& NumThreadsRef() {
  static std::atomic<int> n{2};
  return n;
}
inline void SetNumThreads(int n) { NumThreadsRef() = n < 1 ? 1 : n; }
inline int GetNumThreads() { return NumThreadsRef(); }

template <typename Fn>
void ParallelFor(int64_t n, Fn&& fn) {
  const int workers = std::min<int64_t>(GetNumThreads(), n);
  if (workers <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&fn, w, workers, n]() {
      for (int64_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

template <typename T>
struct RnnParamIds {
  int wx = -1;  // (G*H x I)
  int wh = -1;  // (G*H x H)
  int b = -1;   // (G*H)
};

namespace detail {

// Saved activations for one direction, laid out row-per-packed-column
// so each step touches contiguous memory.
template <typename T>
struct RnnSaved {
  Tensor<T> gates;   // (sumN x G*H) post-activation gate values
  Tensor<T> h_prev;  // (sumN x H) state before consuming that column
  Tensor<T> extra;   // LSTM: c after the step; GRU: Un h (candidate path)
};

// Packed column consumed at scan step k of sequence i.
inline int64_t ScanCol(const Ragged& r, int64_t i, int64_t k, bool reverse) {
  return r.offsets[i] + (reverse ? r.lengths[i] - 1 - k : k);
}

template <typename T>
void RunDirectionForward(CellKind cell, bool reverse, const Tensor<T>& wx,
                         const Tensor<T>& wh, const Tensor<T>& b,
                         const Tensor<T>& x, const Ragged& ragged,
                         Tensor<T>* out, int64_t out_row0, RnnSaved<T>* saved,
                         bool keep_saved) {
  const int64_t gh = wx.rows();
  const int64_t h_dim = wh.cols();
  const int64_t total = ragged.total();
  const int64_t g = GateCount(cell);
  Require(gh == g * h_dim, "recurrent_forward: gate rows disagree with cell");

  // Input contribution for every packed column, one GEMM.
  Tensor<T> a({total, gh});
  AsMat(a).noalias() = AsMat(x).transpose() * AsMat(wx).transpose();
  AsMat(a).rowwise() += AsVec(b).transpose();

  if (keep_saved) {
    saved->gates = Tensor<T>({total, gh});
    saved->h_prev = Tensor<T>({total, h_dim});
    saved->extra = Tensor<T>({total, h_dim});
  }

  auto wh_m = AsMat(wh);
  ParallelFor(ragged.size(), [&](int64_t i) {
    const int64_t n = ragged.lengths[i];
    AlignedVec<T> h(static_cast<size_t>(h_dim), T(0));
    AlignedVec<T> c(static_cast<size_t>(h_dim), T(0));
    AlignedVec<T> rh(static_cast<size_t>(gh));
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> h_v(h.data(), h_dim);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> rh_v(rh.data(), gh);
    for (int64_t k = 0; k < n; ++k) {
      const int64_t j = ScanCol(ragged, i, k, reverse);
      if (keep_saved) {
        for (int64_t d = 0; d < h_dim; ++d) saved->h_prev.at(j, d) = h[d];
      }
      rh_v.noalias() = wh_m * h_v;
      const T* aj = &a.at(j, 0);
      if (cell == CellKind::kGru) {
        for (int64_t d = 0; d < h_dim; ++d) {
          const T z = SigmoidScalar(aj[d] + rh[d]);
          const T r = SigmoidScalar(aj[h_dim + d] + rh[h_dim + d]);
          const T un_h = rh[2 * h_dim + d];
          const T cand = std::tanh(aj[2 * h_dim + d] + r * un_h);
          const T hn = (T(1) - z) * h[d] + z * cand;
          if (keep_saved) {
            saved->gates.at(j, d) = z;
            saved->gates.at(j, h_dim + d) = r;
            saved->gates.at(j, 2 * h_dim + d) = cand;
            saved->extra.at(j, d) = un_h;
          }
          h[d] = hn;
        }
      } else {
        for (int64_t d = 0; d < h_dim; ++d) {
          const T ig = SigmoidScalar(aj[d] + rh[d]);
          const T fg = SigmoidScalar(aj[h_dim + d] + rh[h_dim + d]);
          const T gg = std::tanh(aj[2 * h_dim + d] + rh[2 * h_dim + d]);
          const T og = SigmoidScalar(aj[3 * h_dim + d] + rh[3 * h_dim + d]);
          const T cn = fg * c[d] + ig * gg;
          const T hn = og * std::tanh(cn);
          if (keep_saved) {
            saved->gates.at(j, d) = ig;
            saved->gates.at(j, h_dim + d) = fg;
            saved->gates.at(j, 2 * h_dim + d) = gg;
            saved->gates.at(j, 3 * h_dim + d) = og;
            saved->extra.at(j, d) = cn;
          }
          c[d] = cn;
          h[d] = hn;
        }
      }
      for (int64_t d = 0; d < h_dim; ++d) out->at(out_row0 + d, j) = h[d];
    }
  });
}

// BPTT for one direction. gy_rows holds the upstream gradient as
// (sumN x H) rows aligned with packed columns. Accumulates into the
// parameter/input gradients.
template <typename T>
void RunDirectionBackward(CellKind cell, bool reverse, const Tensor<T>& wx,
                          const Tensor<T>& wh, const Tensor<T>& x,
                          const Ragged& ragged, const RnnSaved<T>& saved,
                          const Tensor<T>& gy_rows, Tensor<T>* gwx,
                          Tensor<T>* gwh, Tensor<T>* gb, Tensor<T>* gx) {
  const int64_t gh = wx.rows();
  const int64_t h_dim = wh.cols();
  const int64_t total = ragged.total();
  const bool gru = cell == CellKind::kGru;

  // Pre-activation gradients per packed column. For the LSTM the input
  // and recurrent sides share pre-activations; the GRU candidate path
  // differs (reset gate multiplies only the recurrent side).
  Tensor<T> da({total, gh});
  Tensor<T> drh = gru ? Tensor<T>({total, gh}) : Tensor<T>({1, 1});

  auto wh_m = AsMat(wh);
  ParallelFor(ragged.size(), [&](int64_t i) {
    const int64_t n = ragged.lengths[i];
    AlignedVec<T> dh(static_cast<size_t>(h_dim), T(0));
    AlignedVec<T> dc(static_cast<size_t>(h_dim), T(0));
    AlignedVec<T> dstep(static_cast<size_t>(gh));
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dh_v(dh.data(), h_dim);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> dstep_v(dstep.data(),
                                                                  gh);
    for (int64_t k = n - 1; k >= 0; --k) {
      const int64_t j = ScanCol(ragged, i, k, reverse);
      for (int64_t d = 0; d < h_dim; ++d) dh[d] += gy_rows.at(j, d);
      if (gru) {
        for (int64_t d = 0; d < h_dim; ++d) {
          const T z = saved.gates.at(j, d);
          const T r = saved.gates.at(j, h_dim + d);
          const T cand = saved.gates.at(j, 2 * h_dim + d);
          const T un_h = saved.extra.at(j, d);
          const T hp = saved.h_prev.at(j, d);
          const T dz = dh[d] * (cand - hp) * z * (T(1) - z);
          const T dcand = dh[d] * z * (T(1) - cand * cand);
          const T dr = dcand * un_h * r * (T(1) - r);
          da.at(j, d) = dz;
          da.at(j, h_dim + d) = dr;
          da.at(j, 2 * h_dim + d) = dcand;
          drh.at(j, d) = dz;
          drh.at(j, h_dim + d) = dr;
          drh.at(j, 2 * h_dim + d) = dcand * r;
          dstep[d] = dz;
          dstep[h_dim + d] = dr;
          dstep[2 * h_dim + d] = dcand * r;
          dh[d] = dh[d] * (T(1) - z);
        }
      } else {
        for (int64_t d = 0; d < h_dim; ++d) {
          const T ig = saved.gates.at(j, d);
          const T fg = saved.gates.at(j, h_dim + d);
          const T gg = saved.gates.at(j, 2 * h_dim + d);
          const T og = saved.gates.at(j, 3 * h_dim + d);
          const T cn = saved.extra.at(j, d);
          const T tc = std::tanh(cn);
          const int64_t jprev = ScanCol(ragged, i, k - 1, reverse);
          const T cp = k > 0 ? saved.extra.at(jprev, d) : T(0);
          const T do_ = dh[d] * tc * og * (T(1) - og);
          T dcn = dc[d] + dh[d] * og * (T(1) - tc * tc);
          const T di = dcn * gg * ig * (T(1) - ig);
          const T df = dcn * cp * fg * (T(1) - fg);
          const T dg = dcn * ig * (T(1) - gg * gg);
          da.at(j, d) = di;
          da.at(j, h_dim + d) = df;
          da.at(j, 2 * h_dim + d) = dg;
          da.at(j, 3 * h_dim + d) = do_;
          dstep[d] = di;
          dstep[h_dim + d] = df;
          dstep[2 * h_dim + d] = dg;
          dstep[3 * h_dim + d] = do_;
          dc[d] = dcn * fg;
          dh[d] = T(0);
        }
      }
      // State gradient through the recurrent weights.
      dh_v.noalias() += wh_m.transpose() * dstep_v;
    }
  });

  // Parameter and input gradients as whole-batch GEMMs; order is fixed
  // so results do not depend on the worker count.
  const Tensor<T>& dr_side = gru ? drh : da;
  AsMat(*gwx).noalias() += AsMat(da).transpose() * AsMat(x).transpose();
  AsVec(*gb) += AsMat(da).colwise().sum().transpose();
  AsMat(*gwh).noalias() += AsMat(dr_side).transpose() * AsMat(saved.h_prev);
  AsMat(*gx).noalias() += AsMat(wx).transpose() * AsMat(da).transpose();
}

}  // namespace detail

// Whole-sequence recurrent pass over a packed batch. Returns the
// packed output: (H x sumN) for a single direction, (2H x sumN) for
// bidirectional with forward rows on top. Sequences must be nonempty.
template <typename T>
int RecurrentForward(Tape<T>& tape, CellKind cell, Direction dir,
                     const RnnParamIds<T>& fwd, const RnnParamIds<T>& bwd,
                     int x_id, const Ragged& ragged) {
  Require(ragged.size() > 0, "recurrent_forward: empty batch");
  for (int64_t l : ragged.lengths) {
    Require(l >= 1, "recurrent_forward: empty sequence");
  }
  const Tensor<T>& x = tape.Value(x_id);
  Require(x.ndim() == 2 && x.cols() == ragged.total(),
          "recurrent_forward: packed layout disagrees with value");
  const bool bidir = dir == Direction::kBidirectional;

  const Tensor<T>& wx_f = tape.Value(fwd.wx);
  const Tensor<T>& wh_f = tape.Value(fwd.wh);
  const Tensor<T>& b_f = tape.Value(fwd.b);
  Require(wx_f.cols() == x.rows(),
          StrCat("recurrent_forward: input dim ", x.rows(),
                 " does not match cell input size ", wx_f.cols()));
  const int64_t h_dim = wh_f.cols();
  Require(wh_f.rows() == wx_f.rows() && b_f.numel() == wx_f.rows(),
          "recurrent_forward: parameter shapes disagree");

  const int64_t out_rows = bidir ? 2 * h_dim : h_dim;
  Tensor<T> y({out_rows, ragged.total()});

  auto saved_f = std::make_shared<detail::RnnSaved<T>>();
  auto saved_b = std::make_shared<detail::RnnSaved<T>>();
  const bool keep = tape.recording() &&
                    (tape.NeedsGrad(x_id) || tape.NeedsGrad(fwd.wx));

  const bool fwd_reverse = dir == Direction::kBackward;
  detail::RunDirectionForward(cell, fwd_reverse, wx_f, wh_f, b_f, x, ragged,
                              &y, 0, saved_f.get(), keep);
  if (bidir) {
    const Tensor<T>& wx_b = tape.Value(bwd.wx);
    const Tensor<T>& wh_b = tape.Value(bwd.wh);
    const Tensor<T>& b_b = tape.Value(bwd.b);
    Require(wx_b.cols() == x.rows() && wh_b.cols() == h_dim &&
                wh_b.rows() == wx_b.rows() && wx_b.rows() == wx_f.rows(),
            "recurrent_forward: backward-direction shapes disagree");
    detail::RunDirectionForward(cell, true, wx_b, wh_b, b_b, x, ragged, &y,
                                h_dim, saved_b.get(), keep);
  }

  std::vector<int> inputs = {x_id, fwd.wx, fwd.wh, fwd.b};
  if (bidir) {
    inputs.push_back(bwd.wx);
    inputs.push_back(bwd.wh);
    inputs.push_back(bwd.b);
  }
  Ragged ragged_c = ragged;
  return tape.Push(
      std::move(y), inputs,
      [cell, dir, fwd, bwd, x_id, ragged_c, saved_f, saved_b, h_dim,
       fwd_reverse](Tape<T>& t, const Tensor<T>& gy) {
        const Tensor<T>& x = t.Value(x_id);
        const int64_t total = ragged_c.total();
        Tensor<T> gy_rows({total, h_dim});
        AsMat(gy_rows) = AsMat(gy).topRows(h_dim).transpose();
        detail::RunDirectionBackward(cell, fwd_reverse, t.Value(fwd.wx),
                                     t.Value(fwd.wh), x, ragged_c, *saved_f,
                                     gy_rows, &t.Grad(fwd.wx), &t.Grad(fwd.wh),
                                     &t.Grad(fwd.b), &t.Grad(x_id));
        if (dir == Direction::kBidirectional) {
          AsMat(gy_rows) = AsMat(gy).bottomRows(h_dim).transpose();
          detail::RunDirectionBackward(cell, true, t.Value(bwd.wx),
                                       t.Value(bwd.wh), x, ragged_c, *saved_b,
                                       gy_rows, &t.Grad(bwd.wx),
                                       &t.Grad(bwd.wh), &t.Grad(bwd.b),
                                       &t.Grad(x_id));
        }
      });
}

}  // namespace nn
}  // namespace kws

#endif  // KWS_CELLS_H_
