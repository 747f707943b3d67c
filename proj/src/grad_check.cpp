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

#include "afran/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace afran {

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           double step) {
  GradCheckResult result;
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor root = f();
  if (root.numel() != 1) throw ShapeError("grad_check needs a scalar function");
  backward(root);

  for (auto& t : inputs) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      double plus, minus;
      {
        NoGradGuard guard;
        values[i] = saved + step;
        plus = f().item();
        values[i] = saved - step;
        minus = f().item();
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[i];
      if (!std::isfinite(a) || !std::isfinite(numeric)) {
        result.finite = false;
        continue;
      }
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace afran
