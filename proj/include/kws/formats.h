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
// Low-level file plumbing shared by all formats: little-endian binary
// fields, atomic whole-file writes (temp + rename), tab-separated text
// rows, and shortest-round-trip float printing.

#ifndef KWS_FORMATS_H_
#define KWS_FORMATS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "kws/tensor.h"

namespace kws {

// ---- binary buffers -------------------------------------------------

class ByteWriter {
 public:
  void Magic(const char tag[5]);
  void U32(uint32_t v);
  void U64(uint64_t v);
  void F32(float v);
  void Bytes(const void* p, size_t n);
  void Str(const std::string& s);  // u32 length + bytes
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  // context names the file in error messages.
  ByteReader(std::string bytes, std::string context);
  void ExpectMagic(const char tag[5]);
  uint32_t U32();
  uint64_t U64();
  float F32();
  std::string Str();
  void F32Array(float* dst, size_t n);
  bool AtEnd() const { return pos_ == buf_.size(); }
  // Raises a truncation error mentioning `what` if fewer than n bytes
  // remain.
  void Need(size_t n, const std::string& what);

 private:
  std::string buf_;
  std::string context_;
  size_t pos_ = 0;
};

// ---- files ----------------------------------------------------------

std::string ReadFileBytes(const std::string& path);
// Writes via a temporary file in the same directory, then renames.
void WriteFileAtomic(const std::string& path, const std::string& bytes);
void EnsureDir(const std::string& path);

// ---- text -----------------------------------------------------------

// Shortest decimal string that round-trips the value exactly.
std::string FloatString(double v);
double ParseDouble(const std::string& s, const std::string& context);
int64_t ParseInt(const std::string& s, const std::string& context);

std::vector<std::string> SplitTabs(const std::string& line);

// Reads a tab-separated file: one row per non-empty line, each with
// exactly `columns` fields (0 = any).
std::vector<std::vector<std::string>> ReadTsv(const std::string& path,
                                              size_t columns);

// ---- feature archives ------------------------------------------------

// One utterance of acoustic features at a 10 ms frame step, stored as
// (frames x dim) to match the on-disk row order.
struct FeatureMatrix {
  nn::Tensor<float> frames;  // shape (N, feature_dim)
  int64_t num_frames() const { return frames.shape[0]; }
  int64_t dim() const { return frames.shape[1]; }
};

// Feature archive: "KWSF", version, row count, column count (u32 LE),
// then row-major float32 frames.
void SaveFeatures(const FeatureMatrix& m, const std::string& path);
FeatureMatrix LoadFeatures(const std::string& path);

}  // namespace kws

#endif  // KWS_FORMATS_H_
