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

#include "kws/formats.h"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "kws/common.h"

namespace kws {

namespace fs = std::filesystem;

static_assert(sizeof(float) == 4, "float32 storage required");

namespace {
// The formats are little-endian by contract; on the (little-endian)
// targets we build for the in-memory representation matches.
void PutLe(std::string* buf, const void* p, size_t n) {
  buf->append(reinterpret_cast<const char*>(p), n);
}
}  // namespace

void ByteWriter::Magic(const char tag[5]) { buf_.append(tag, 4); }
void ByteWriter::U32(uint32_t v) { PutLe(&buf_, &v, 4); }
void ByteWriter::U64(uint64_t v) { PutLe(&buf_, &v, 8); }
void ByteWriter::F32(float v) { PutLe(&buf_, &v, 4); }
void ByteWriter::Bytes(const void* p, size_t n) { PutLe(&buf_, p, n); }
void ByteWriter::Str(const std::string& s) {
  U32(static_cast<uint32_t>(s.size()));
  buf_.append(s);
}

ByteReader::ByteReader(std::string bytes, std::string context)
    : buf_(std::move(bytes)), context_(std::move(context)) {}

void ByteReader::Need(size_t n, const std::string& what) {
  if (pos_ + n > buf_.size()) {
    Fail(StrCat(context_, ": truncated while reading ", what, " (need ", n,
                " bytes at offset ", pos_, ", file has ", buf_.size(), ")"));
  }
}

void ByteReader::ExpectMagic(const char tag[5]) {
  Need(4, StrCat("magic '", tag, "'"));
  if (std::memcmp(buf_.data() + pos_, tag, 4) != 0) {
    Fail(StrCat(context_, ": corrupt header, expected magic '", tag, "'"));
  }
  pos_ += 4;
}

uint32_t ByteReader::U32() {
  Need(4, "u32 field");
  uint32_t v;
  std::memcpy(&v, buf_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

uint64_t ByteReader::U64() {
  Need(8, "u64 field");
  uint64_t v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

float ByteReader::F32() {
  Need(4, "f32 field");
  float v;
  std::memcpy(&v, buf_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::string ByteReader::Str() {
  const uint32_t n = U32();
  Need(n, "string payload");
  std::string s(buf_.data() + pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::F32Array(float* dst, size_t n) {
  Need(4 * n, "f32 array");
  std::memcpy(dst, buf_.data() + pos_, 4 * n);
  pos_ += 4 * n;
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), StrCat("cannot open ", path));
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  Require(!in.bad(), StrCat("read error on ", path));
  return bytes;
}

void WriteFileAtomic(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    Require(out.good(), StrCat("cannot write ", tmp));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    Require(out.good(), StrCat("write failed on ", tmp));
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  Require(!ec, StrCat("cannot rename ", tmp, " to ", path, ": ", ec.message()));
}

void EnsureDir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  Require(!ec || fs::is_directory(path),
          StrCat("cannot create directory ", path));
}

std::string FloatString(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  Require(res.ec == std::errc(), "FloatString: conversion failed");
  return std::string(buf, res.ptr);
}

double ParseDouble(const std::string& s, const std::string& context) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  Require(res.ec == std::errc() && res.ptr == s.data() + s.size(),
          StrCat(context, ": bad number '", s, "'"));
  return v;
}

int64_t ParseInt(const std::string& s, const std::string& context) {
  int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  Require(res.ec == std::errc() && res.ptr == s.data() + s.size(),
          StrCat(context, ": bad integer '", s, "'"));
  return v;
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::vector<std::vector<std::string>> ReadTsv(const std::string& path,
                                              size_t columns) {
  const std::string bytes = ReadFileBytes(path);
  std::vector<std::vector<std::string>> rows;
  size_t start = 0;
  size_t lineno = 0;
  while (start < bytes.size()) {
    size_t end = bytes.find('\n', start);
    if (end == std::string::npos) end = bytes.size();
    ++lineno;
    std::string line = bytes.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      auto fields = SplitTabs(line);
      Require(columns == 0 || fields.size() == columns,
              StrCat(path, ":", lineno, ": expected ", columns,
                     " tab-separated fields, got ", fields.size()));
      rows.push_back(std::move(fields));
    }
    start = end + 1;
  }
  return rows;
}

void SaveFeatures(const FeatureMatrix& m, const std::string& path) {
  Require(m.frames.ndim() == 2, "features must be (frames x dim)");
  ByteWriter w;
  w.Magic("KWSF");
  w.U32(1);
  w.U32(static_cast<uint32_t>(m.num_frames()));
  w.U32(static_cast<uint32_t>(m.dim()));
  w.Bytes(m.frames.data.data(), m.frames.data.size() * 4);
  WriteFileAtomic(path, w.buffer());
}

FeatureMatrix LoadFeatures(const std::string& path) {
  ByteReader r(ReadFileBytes(path), path);
  r.ExpectMagic("KWSF");
  const uint32_t version = r.U32();
  Require(version == 1, StrCat(path, ": unsupported feature version ", version));
  const uint32_t rows = r.U32();
  const uint32_t cols = r.U32();
  Require(rows > 0 && cols > 0, StrCat(path, ": empty feature matrix"));
  FeatureMatrix m;
  m.frames = nn::Tensor<float>({rows, cols});
  r.F32Array(m.frames.data.data(), m.frames.data.size());
  Require(r.AtEnd(), StrCat(path, ": trailing bytes after declared payload"));
  return m;
}

}  // namespace kws
