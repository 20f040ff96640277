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

#ifndef KWS_GRADCHECK_H_
#define KWS_GRADCHECK_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kws/tensor.h"

namespace kws {

// Central finite-difference check of an analytic gradient, run in
// double precision with step 1e-4. `forward` must be a pure function
// of the parameter map; `gradient` returns the analytic gradients for
// the same map.
struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

using ParamMap = std::map<std::string, nn::Tensor<double>>;

GradCheckReport CheckGradients(
    const std::string& name, const ParamMap& params,
    const std::function<double(const ParamMap&)>& forward,
    const std::function<ParamMap(const ParamMap&)>& gradient,
    double tolerance = 1e-4, double step = 1e-4);

// The full kernel-by-kernel suite plus the composed model check
// (3-frame utterance, 2-symbol query). Exposed to the CLI `gradcheck`
// command.
std::vector<GradCheckReport> RunGradcheckSuite(uint64_t seed);

}  // namespace kws

#endif  // KWS_GRADCHECK_H_
