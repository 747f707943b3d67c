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

#include <span>
#include <vector>

#include "afran/anchors.hpp"
#include "afran/tensor.hpp"

namespace afran {

double smooth_l1(double x);

/// sum_r w_r * -log softmax(logits_r)[target_r] over rows of (1,1,R,K).
Tensor cross_entropy_rows(const Tensor& logits, std::span<const int> targets,
                          std::span<const double> weights);

/// sum_r w_r * sum_m smooth_l1(pred_r[m] - target_r[m]) over rows of (1,1,R,4).
Tensor smooth_l1_rows(const Tensor& pred, std::span<const Deltas> targets,
                      std::span<const double> weights);

struct ConfLoss {
  Tensor value;  // scalar, already divided by num_pos
  int num_pos = 0;
  int num_neg = 0;                  // hard negatives retained
  std::vector<std::size_t> negatives;  // their row indices, hardest first
};

/// Softmax cross entropy over positives (class > 0) plus the
/// floor(ohem_ratio * N_pos) highest-loss negatives (class 0), normalized by
/// N_pos. Rows with eligible[r] == 0 never count as negatives. N_pos = 0
/// gives a zero loss.
ConfLoss conf_loss(const Tensor& logits, std::span<const int> classes, double ohem_ratio = 3.0,
                   std::span<const char> eligible = {});

/// Smooth-L1 over positive rows, normalized by the positive count.
Tensor reg_loss(const Tensor& pred, std::span<const Deltas> targets, std::span<const int> classes);

struct PartLoss {
  Tensor conf;
  Tensor reg;
  int num_pos = 0;
  int num_neg = 0;
};

struct LossReport {
  double total = 0, arm = 0, adm = 0;
  double arm_conf = 0, arm_reg = 0, adm_conf = 0, adm_reg = 0;
  int arm_pos = 0, adm_pos = 0;
  Tensor value;  // differentiable total
};

/// Each part is conf + alpha * reg; the total is their sum.
LossReport total_loss(const PartLoss& arm, const PartLoss& adm, double alpha = 1.0);

/// Batch mean of per-image reports (value included).
LossReport mean_report(const std::vector<LossReport>& parts);

}  // namespace afran
