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

#ifndef KWS_COMMON_H_
#define KWS_COMMON_H_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace kws {

// All contract violations (bad shapes, malformed files, invalid configs)
// surface as KwsError; the CLI turns them into nonzero exits.
class KwsError : public std::runtime_error {
 public:
  explicit KwsError(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void Fail(const std::string& msg) { throw KwsError(msg); }

inline void Require(bool cond, const std::string& msg) {
  if (!cond) Fail(msg);
}

template <typename... Args>
std::string StrCat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace kws

#endif  // KWS_COMMON_H_
