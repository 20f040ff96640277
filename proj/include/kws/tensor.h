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

#ifndef KWS_TENSOR_H_
#define KWS_TENSOR_H_

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "kws/common.h"

namespace kws {
namespace nn {

inline int64_t Numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    Require(d > 0, "Tensor: extents must be positive");
    n *= d;
  }
  return n;
}

// 64-byte-aligned storage. Eigen's vectorized traversals peel to the
// first aligned element of a buffer, so reduction order (and the last
// bits of float sums) would otherwise depend on where the allocator
// happened to place the data. Fixing the base alignment makes every
// kernel bit-reproducible across runs and thread counts.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

// Dense row-major tensor. Values are stored at the template precision;
// float in production, double for finite-difference checks. Sequence
// values follow the convention "features along rows, time along
// columns" so a matrix holding a sequence has shape (dim, length).
template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  AlignedVec<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s)
      : shape(std::move(s)), data(static_cast<size_t>(Numel(shape)), T(0)) {}
  Tensor(std::vector<int64_t> s, const std::vector<T>& d)
      : shape(std::move(s)), data(d.begin(), d.end()) {
    Require(static_cast<int64_t>(data.size()) == Numel(shape),
            "Tensor: data length must equal product of shape");
  }
  Tensor(std::vector<int64_t> s, std::initializer_list<T> d)
      : shape(std::move(s)), data(d.begin(), d.end()) {
    Require(static_cast<int64_t>(data.size()) == Numel(shape),
            "Tensor: data length must equal product of shape");
  }

  static Tensor Zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
  static Tensor Full(std::vector<int64_t> s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t ndim() const { return static_cast<int64_t>(shape.size()); }
  int64_t rows() const {
    Require(ndim() == 2, "Tensor: rows() requires a matrix");
    return shape[0];
  }
  int64_t cols() const {
    Require(ndim() == 2, "Tensor: cols() requires a matrix");
    return shape[1];
  }

  T& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  const T& at(int64_t r, int64_t c) const {
    return data[static_cast<size_t>(r * cols() + c)];
  }

  bool AllFinite() const {
    for (T v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  bool SameShape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
using EigenMatrix =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<EigenMatrix<T>> AsMat(Tensor<T>& t) {
  Require(t.ndim() == 2, "AsMat: tensor must be 2-D");
  return Eigen::Map<EigenMatrix<T>>(t.data.data(), t.shape[0], t.shape[1]);
}

template <typename T>
Eigen::Map<const EigenMatrix<T>> AsMat(const Tensor<T>& t) {
  Require(t.ndim() == 2, "AsMat: tensor must be 2-D");
  return Eigen::Map<const EigenMatrix<T>>(t.data.data(), t.shape[0],
                                          t.shape[1]);
}

template <typename T>
Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> AsVec(Tensor<T>& t) {
  return Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(t.data.data(),
                                                         t.numel());
}

template <typename T>
Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> AsVec(
    const Tensor<T>& t) {
  return Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(t.data.data(),
                                                               t.numel());
}

// Ragged layout for a batch of variable-length sequences packed along
// the column axis of one matrix. lengths[i] columns starting at
// offsets[i] belong to sequence i; there is no padding, so every packed
// column is a valid frame.
struct Ragged {
  std::vector<int64_t> lengths;
  std::vector<int64_t> offsets;

  static Ragged FromLengths(std::vector<int64_t> lens) {
    Ragged r;
    r.offsets.resize(lens.size());
    int64_t off = 0;
    for (size_t i = 0; i < lens.size(); ++i) {
      r.offsets[i] = off;
      off += lens[i];
    }
    r.lengths = std::move(lens);
    return r;
  }

  int64_t total() const {
    return lengths.empty() ? 0
                           : offsets.back() + lengths.back();
  }
  int64_t size() const { return static_cast<int64_t>(lengths.size()); }
};

}  // namespace nn
}  // namespace kws

#endif  // KWS_TENSOR_H_
