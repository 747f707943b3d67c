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

#include "afran/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "afran/ops.hpp"

namespace afran {
namespace {

void check_rows(const Tensor& t, int values, std::size_t rows, const char* who) {
  const Shape s = t.shape();
  if (s.n != 1 || s.c != 1 || s.w != values || static_cast<std::size_t>(s.h) != rows)
    throw ShapeError(std::string(who) + ": expected (1,1," + std::to_string(rows) + "," +
                     std::to_string(values) + "), got " + s.str());
}

// log-sum-exp of one row, shifted by its max.
double log_sum_exp(const double* row, int k) {
  const double m = *std::max_element(row, row + k);
  double s = 0;
  for (int j = 0; j < k; ++j) s += std::exp(row[j] - m);
  return m + std::log(s);
}

}  // namespace

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const int> targets,
                          std::span<const double> weights) {
  const int k = logits.shape().w;
  check_rows(logits, k, targets.size(), "cross_entropy_rows");
  if (weights.size() != targets.size()) throw ShapeError("cross_entropy_rows: weight count");
  const double* x = logits.data().data();
  double total = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (weights[r] == 0) continue;
    if (targets[r] < 0 || targets[r] >= k) throw std::out_of_range("cross_entropy_rows: class index");
    total += weights[r] * (log_sum_exp(x + r * k, k) - x[r * k + targets[r]]);
  }
  Tensor out = Tensor::scalar(total);
  std::vector<int> t(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  record(out, {logits}, [t = std::move(t), w = std::move(w), k](detail::TensorImpl& self) {
    auto* in = self.parents[0].get();
    const double g = self.grad[0];
    auto gx = grad_of(*in);
    const double* x = in->data.data();
    for (std::size_t r = 0; r < t.size(); ++r) {
      if (w[r] == 0) continue;
      const double lse = log_sum_exp(x + r * k, k);
      for (int j = 0; j < k; ++j) {
        const double p = std::exp(x[r * k + j] - lse);
        gx[r * k + j] += g * w[r] * (p - (j == t[r] ? 1.0 : 0.0));
      }
    }
  });
  return out;
}

Tensor smooth_l1_rows(const Tensor& pred, std::span<const Deltas> targets,
                      std::span<const double> weights) {
  check_rows(pred, 4, targets.size(), "smooth_l1_rows");
  if (weights.size() != targets.size()) throw ShapeError("smooth_l1_rows: weight count");
  std::vector<double> tgt(targets.size() * 4);
  for (std::size_t r = 0; r < targets.size(); ++r) {
    tgt[4 * r] = targets[r].dx;
    tgt[4 * r + 1] = targets[r].dy;
    tgt[4 * r + 2] = targets[r].dw;
    tgt[4 * r + 3] = targets[r].dh;
  }
  const double* p = pred.data().data();
  double total = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (weights[r] == 0) continue;
    double s = 0;
    for (int m = 0; m < 4; ++m) s += smooth_l1(p[4 * r + m] - tgt[4 * r + m]);
    total += weights[r] * s;
  }
  Tensor out = Tensor::scalar(total);
  std::vector<double> w(weights.begin(), weights.end());
  record(out, {pred}, [tgt = std::move(tgt), w = std::move(w)](detail::TensorImpl& self) {
    auto* in = self.parents[0].get();
    const double g = self.grad[0];
    auto gp = grad_of(*in);
    for (std::size_t r = 0; r < w.size(); ++r) {
      if (w[r] == 0) continue;
      for (int m = 0; m < 4; ++m) {
        const double d = in->data[4 * r + m] - tgt[4 * r + m];
        gp[4 * r + m] += g * w[r] * (std::abs(d) < 1.0 ? d : (d > 0 ? 1.0 : -1.0));
      }
    }
  });
  return out;
}

ConfLoss conf_loss(const Tensor& logits, std::span<const int> classes, double ohem_ratio,
                   std::span<const char> eligible) {
  const std::size_t rows = classes.size();
  const int k = logits.shape().w;
  check_rows(logits, k, rows, "conf_loss");
  if (!eligible.empty() && eligible.size() != rows) throw ShapeError("conf_loss: eligible mask size");
  ConfLoss out;
  std::vector<std::size_t> negs;
  for (std::size_t r = 0; r < rows; ++r) {
    if (classes[r] > 0)
      ++out.num_pos;
    else if (eligible.empty() || eligible[r])
      negs.push_back(r);
  }
  if (out.num_pos == 0) {
    out.value = Tensor::scalar(0.0);
    return out;
  }
  const std::size_t want = static_cast<std::size_t>(std::floor(ohem_ratio * out.num_pos));
  const std::size_t keep = std::min(want, negs.size());
  const double* x = logits.data().data();
  std::vector<double> neg_loss(rows, 0.0);
  for (std::size_t r : negs) neg_loss[r] = log_sum_exp(x + r * k, k) - x[r * k];
  std::stable_sort(negs.begin(), negs.end(),
                   [&](std::size_t a, std::size_t b) { return neg_loss[a] > neg_loss[b]; });
  negs.resize(keep);
  out.num_neg = static_cast<int>(keep);

  std::vector<int> target(rows, 0);
  std::vector<double> weight(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    if (classes[r] > 0) target[r] = classes[r], weight[r] = 1.0;
  for (std::size_t r : negs) weight[r] = 1.0;
  out.value = scale(cross_entropy_rows(logits, target, weight), 1.0 / out.num_pos);
  out.negatives = std::move(negs);
  return out;
}

Tensor reg_loss(const Tensor& pred, std::span<const Deltas> targets, std::span<const int> classes) {
  if (classes.size() != targets.size()) throw ShapeError("reg_loss: class/target count mismatch");
  std::vector<double> weight(classes.size(), 0.0);
  int npos = 0;
  for (std::size_t r = 0; r < classes.size(); ++r)
    if (classes[r] > 0) weight[r] = 1.0, ++npos;
  if (npos == 0) return Tensor::scalar(0.0);
  return scale(smooth_l1_rows(pred, targets, weight), 1.0 / npos);
}

LossReport total_loss(const PartLoss& arm, const PartLoss& adm, double alpha) {
  LossReport r;
  r.arm_conf = arm.conf.item();
  r.arm_reg = arm.reg.item();
  r.adm_conf = adm.conf.item();
  r.adm_reg = adm.reg.item();
  r.arm_pos = arm.num_pos;
  r.adm_pos = adm.num_pos;
  Tensor l_arm = add(arm.conf, scale(arm.reg, alpha));
  Tensor l_adm = add(adm.conf, scale(adm.reg, alpha));
  r.value = add(l_arm, l_adm);
  r.arm = l_arm.item();
  r.adm = l_adm.item();
  r.total = r.arm + r.adm;
  return r;
}

LossReport mean_report(const std::vector<LossReport>& parts) {
  LossReport m;
  if (parts.empty()) {
    m.value = Tensor::scalar(0.0);
    return m;
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  Tensor v;
  for (const LossReport& p : parts) {
    m.arm_conf += p.arm_conf * inv;
    m.arm_reg += p.arm_reg * inv;
    m.adm_conf += p.adm_conf * inv;
    m.adm_reg += p.adm_reg * inv;
    m.arm += p.arm * inv;
    m.adm += p.adm * inv;
    m.arm_pos += p.arm_pos;
    m.adm_pos += p.adm_pos;
    v = v.defined() ? add(v, p.value) : p.value;
  }
  m.total = m.arm + m.adm;
  m.value = scale(v, inv);
  return m;
}

}  // namespace afran
