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

#include "afran/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "afran/network.hpp"
#include "json.hpp"

namespace afran {
namespace {

bool outside(double area, AreaRange r) { return area < r.lo || area > r.hi; }

struct ImageMatch {
  std::vector<std::size_t> order;  // detection indices by descending score
  std::vector<char> tp;            // per ordered detection
  std::vector<char> ignored;
};

// Greedy highest-score-first matching. Each detection takes the unmatched gt
// of highest IoU >= thresh, preferring in-range gts; ties keep the lower gt.
ImageMatch match_image(const std::vector<Detection>& dets, const std::vector<Box>& gts,
                       double thresh, AreaRange area) {
  ImageMatch m;
  m.order.resize(dets.size());
  std::iota(m.order.begin(), m.order.end(), 0);
  std::stable_sort(m.order.begin(), m.order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<char> gt_ignored(gts.size()), gt_used(gts.size(), 0);
  for (std::size_t g = 0; g < gts.size(); ++g) gt_ignored[g] = outside(gts[g].area(), area);
  m.tp.assign(dets.size(), 0);
  m.ignored.assign(dets.size(), 0);
  for (std::size_t k = 0; k < m.order.size(); ++k) {
    const Box& d = dets[m.order[k]].box;
    int best = -1;
    double best_iou = 0;
    bool best_ignored = true;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g]) continue;
      const double v = iou(d, gts[g]);
      if (v < thresh) continue;
      const bool ig = gt_ignored[g];
      // In-range gts always beat ignored ones.
      if (best >= 0 && !best_ignored && ig) continue;
      if (best < 0 || (best_ignored && !ig) || v > best_iou) {
        best = static_cast<int>(g);
        best_iou = v;
        best_ignored = ig;
      }
    }
    if (best >= 0) {
      gt_used[best] = 1;
      if (best_ignored)
        m.ignored[k] = 1;
      else
        m.tp[k] = 1;
    } else if (outside(d.area(), area)) {
      m.ignored[k] = 1;
    }
  }
  return m;
}

std::vector<std::vector<Detection>> above(const std::vector<std::vector<Detection>>& dets,
                                          double conf) {
  std::vector<std::vector<Detection>> out(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (const Detection& d : dets[i])
      if (d.score >= conf) out[i].push_back(d);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::optional<double> average_precision(const std::vector<std::vector<Detection>>& dets,
                                        const std::vector<std::vector<Box>>& gts, double iou_thresh,
                                        AreaRange area, PrCurve* curve) {
  if (dets.size() != gts.size()) throw std::invalid_argument("average_precision: image count mismatch");
  struct Entry {
    double score;
    std::size_t image, index;
    bool tp;
  };
  std::vector<Entry> all;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (const Box& g : gts[i]) npos += !outside(g.area(), area);
    const ImageMatch m = match_image(dets[i], gts[i], iou_thresh, area);
    for (std::size_t k = 0; k < m.order.size(); ++k)
      if (!m.ignored[k]) all.push_back({dets[i][m.order[k]].score, i, m.order[k], m.tp[k] != 0});
  }
  if (npos == 0) return std::nullopt;
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });
  std::vector<double> rec(all.size()), prec(all.size());
  double tp = 0, fp = 0;
  for (std::size_t k = 0; k < all.size(); ++k) {
    (all[k].tp ? tp : fp) += 1;
    rec[k] = tp / static_cast<double>(npos);
    prec[k] = tp / (tp + fp);
  }
  for (std::size_t k = all.size(); k-- > 1;) prec[k - 1] = std::max(prec[k - 1], prec[k]);
  double sum = 0;
  const double max_recall = rec.empty() ? 0.0 : rec.back();
  if (curve) curve->recall.clear(), curve->precision.clear();
  for (int t = 0; t <= 100; ++t) {
    const double r = t / 100.0;
    const auto it = std::lower_bound(rec.begin(), rec.end(), r);
    const double p = it == rec.end() ? 0.0 : prec[it - rec.begin()];
    sum += p;
    if (curve && !rec.empty() && r <= max_recall) {
      curve->recall.push_back(r);
      curve->precision.push_back(p);
    }
  }
  return sum / 101.0;
}

EvalReport evaluate(const std::vector<std::vector<Detection>>& dets,
                    const std::vector<std::vector<Box>>& gts, const EvalOptions& opt) {
  if (dets.size() != gts.size()) throw std::invalid_argument("evaluate: image count mismatch");
  EvalReport rep;
  rep.num_images = static_cast<int>(gts.size());
  for (const auto& g : gts) rep.num_gt += static_cast<int>(g.size());
  const auto ap_dets = above(dets, opt.ap_conf);
  for (const auto& d : ap_dets) rep.num_detections += static_cast<int>(d.size());

  double sum = 0;
  bool defined = true;
  for (int t = 0; t < 10; ++t) {
    const double thresh = 0.5 + 0.05 * t;
    PrCurve c;
    auto v = average_precision(ap_dets, gts, thresh, kAreaAll, &c);
    if (!v) {
      defined = false;
      break;
    }
    sum += *v;
    if (t == 0) rep.ap50 = v, c.name = "pr_iou50", rep.curves.push_back(c);
    if (t == 5) rep.ap75 = v, c.name = "pr_iou75", rep.curves.push_back(c);
  }
  if (defined) rep.ap = sum / 10.0;

  auto area_ap = [&](AreaRange r) -> std::optional<double> {
    double s = 0;
    for (int t = 0; t < 10; ++t) {
      auto v = average_precision(ap_dets, gts, 0.5 + 0.05 * t, r);
      if (!v) return std::nullopt;
      s += *v;
    }
    return s / 10.0;
  };
  rep.ap_small = area_ap(kAreaSmall);
  rep.ap_medium = area_ap(kAreaMedium);
  rep.ap_large = area_ap(kAreaLarge);

  const auto prf_dets = above(dets, opt.prf_conf);
  double tp = 0, ndet = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const ImageMatch m = match_image(prf_dets[i], gts[i], opt.prf_iou, kAreaAll);
    for (char x : m.tp) tp += x;
    ndet += static_cast<double>(prf_dets[i].size());
  }
  rep.precision = ndet > 0 ? tp / ndet : 0.0;
  rep.recall = rep.num_gt > 0 ? tp / rep.num_gt : 0.0;
  rep.f1 = rep.precision + rep.recall > 0
               ? 2 * rep.precision * rep.recall / (rep.precision + rep.recall)
               : 0.0;
  if (rep.curves.empty()) {
    rep.curves.push_back({"pr_iou50", {}, {}});
    rep.curves.push_back({"pr_iou75", {}, {}});
  }
  return rep;
}

std::string report_to_json(const EvalReport& r) {
  using json = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"AP", opt(r.ap)},
            {"AP50", opt(r.ap50)},
            {"AP75", opt(r.ap75)},
            {"APs", opt(r.ap_small)},
            {"APm", opt(r.ap_medium)},
            {"APl", opt(r.ap_large)},
            {"precision", r.precision},
            {"recall", r.recall},
            {"F1", r.f1},
            {"num_images", r.num_images},
            {"num_gt", r.num_gt},
            {"num_detections", r.num_detections}};
  if (r.params_total) j["params_total"] = *r.params_total;
  if (r.mac_total) j["mac_total"] = *r.mac_total;
  json curves = json::object();
  for (const PrCurve& c : r.curves) curves[c.name] = {{"recall", c.recall}, {"precision", c.precision}};
  j["pr_curves"] = curves;
  return j.dump(2) + "\n";
}

std::string line_chart_svg(const std::string& title, const std::vector<double>& x,
                           const std::vector<std::pair<std::string, std::vector<double>>>& series,
                           const std::string& x_label, const std::string& y_label) {
  constexpr double W = 640, H = 420, L = 60, R = 20, T = 40, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!x.empty()) {
    x0 = *std::min_element(x.begin(), x.end());
    x1 = *std::max_element(x.begin(), x.end());
  }
  bool first = true;
  for (const auto& [name, ys] : series)
    for (double v : ys) {
      if (!std::isfinite(v)) continue;
      if (first) y0 = y1 = v, first = false;
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title
    << "</text>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4, yv = y0 + (y1 - y0) * t / 4;
    s << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
      << fmt(xv).substr(0, 6) << "</text>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
      << fmt(yv).substr(0, 6) << "</text>\n";
  }
  s << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << x_label
    << "</text>\n"
    << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << H / 2 << ")\">" << y_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& [name, ys] = series[k];
    const char* color = kColors[k % 6];
    if (!ys.empty()) {
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < ys.size() && i < x.size(); ++i)
        if (std::isfinite(ys[i])) s << fmt(px(x[i])) << "," << fmt(py(ys[i])) << " ";
      s << "\"/>\n";
    }
    s << "<text x=\"" << W - R - 120 << "\" y=\"" << T + 14 * (k + 1) << "\" fill=\"" << color
      << "\">" << name << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void emit_curves(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (const PrCurve& c : report.curves) {
    std::string csv = "recall,precision\n";
    for (std::size_t i = 0; i < c.recall.size(); ++i)
      csv += fmt(c.recall[i]) + "," + fmt(c.precision[i]) + "\n";
    write_text(dir / (c.name + ".csv"), csv);
    write_text(dir / (c.name + ".svg"),
               line_chart_svg(c.name, c.recall, {{"precision", c.precision}}, "recall", "precision"));
  }
}

std::int64_t layer_params(const LayerDesc& l) {
  const ConvSpec& s = l.spec;
  return static_cast<std::int64_t>(s.out_channels) *
         (static_cast<std::int64_t>(s.kernel_h) * s.kernel_w * s.in_channels + (s.has_bias ? 1 : 0));
}

std::int64_t layer_macs(const LayerDesc& l) {
  const ConvSpec& s = l.spec;
  return static_cast<std::int64_t>(s.out_channels) * s.in_channels * s.kernel_h * s.kernel_w *
         l.positions;
}

Complexity complexity_of(const std::vector<LayerDesc>& layers) {
  Complexity c;
  for (const LayerDesc& l : layers) {
    c.layers.push_back({l.name, l.kind, layer_params(l), layer_macs(l)});
    c.params_total += c.layers.back().params;
    c.mac_total += c.layers.back().macs;
  }
  return c;
}

Complexity params_count(const NetConfig& cfg) {
  Model m(cfg, 0, true);
  return complexity_of(m.store().layers());
}

Complexity mac_count(const NetConfig& cfg, int input_size) {
  NetConfig c = cfg;
  c.input_size = input_size;
  Model m(c, 0, true);
  return complexity_of(m.store().layers());
}

std::string complexity_table(const Complexity& c) {
  std::size_t w = 5;
  for (const LayerCost& l : c.layers) w = std::max(w, l.name.size());
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-7s  %14s  %18s\n", static_cast<int>(w), "layer", "kind",
                "params", "mac");
  s << buf;
  for (const LayerCost& l : c.layers) {
    std::snprintf(buf, sizeof buf, "%-*s  %-7s  %14lld  %18lld\n", static_cast<int>(w), l.name.c_str(),
                  to_string(l.kind), static_cast<long long>(l.params), static_cast<long long>(l.macs));
    s << buf;
  }
  std::snprintf(buf, sizeof buf, "%-*s  %-7s  %14lld  %18lld\n", static_cast<int>(w), "total", "",
                static_cast<long long>(c.params_total), static_cast<long long>(c.mac_total));
  s << buf;
  std::snprintf(buf, sizeof buf, "params %.2fM  mac %.2fG\n", c.params_total / 1e6, c.mac_total / 1e9);
  s << buf;
  return s.str();
}

std::string complexity_to_json(const Complexity& c) {
  using json = nlohmann::ordered_json;
  json layers = json::array();
  for (const LayerCost& l : c.layers)
    layers.push_back({{"name", l.name}, {"kind", to_string(l.kind)}, {"params", l.params}, {"mac", l.macs}});
  json j = {{"params_total", c.params_total}, {"mac_total", c.mac_total}, {"layers", layers}};
  return j.dump(2) + "\n";
}

}  // namespace afran
