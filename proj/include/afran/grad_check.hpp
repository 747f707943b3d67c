/* Copyright 2026 The AFRAN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <functional>
#include <vector>

#include "afran/tensor.hpp"

namespace afran {

struct GradCheckResult {
  double max_rel_error = 0.0;
  bool finite = true;
  std::size_t checked = 0;

  bool ok(double tol) const { return finite && max_rel_error < tol; }
};

/// Compares reverse-mode gradients of the scalar `f` w.r.t. each of `inputs`
/// against central finite differences. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           double step = 1e-5);

}  // namespace afran
