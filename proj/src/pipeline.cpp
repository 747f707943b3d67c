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

#include "afran/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace afran {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<Box> valid_boxes(const std::vector<Box>& in) {
  std::vector<Box> out;
  for (const Box& b : in)
    if (b.width() >= 1.0 && b.height() >= 1.0) out.push_back(b);
  return out;
}

void scale_detections(std::vector<Detection>& dets, double sx, double sy) {
  for (Detection& d : dets) d.box = {d.box.x1 * sx, d.box.y1 * sy, d.box.x2 * sx, d.box.y2 * sy};
}

// Shared inference loop. Optional gts (source frame) feed anchor statistics.
std::vector<std::vector<Detection>> infer(const Model& model, const std::vector<const Image*>& images,
                                          int batch, const std::vector<std::vector<Box>>* gts,
                                          AnchorQuality* quality) {
  NoGradGuard guard;
  const int size = model.config().input_size;
  std::vector<std::vector<Detection>> out(images.size());
  double sum_init = 0, sum_ref = 0;
  int count = 0;
  batch = std::max(1, batch);
  for (std::size_t start = 0; start < images.size(); start += batch) {
    const std::size_t end = std::min(images.size(), start + batch);
    std::vector<Image> resized;
    std::vector<Annotation> anns;
    for (std::size_t i = start; i < end; ++i) {
      Image img = *images[i];
      Annotation ann;
      if (gts) ann.boxes = (*gts)[i];
      resize_square(img, ann, size);
      resized.push_back(std::move(img));
      anns.push_back(std::move(ann));
    }
    std::vector<const Image*> ptrs;
    for (const Image& img : resized) ptrs.push_back(&img);
    const ForwardResult fwd = model.forward(image_to_tensor(ptrs));
    for (std::size_t i = start; i < end; ++i) {
      const int b = static_cast<int>(i - start);
      auto dets = detect_image(model, fwd, b);
      scale_detections(dets, static_cast<double>(images[i]->width) / size,
                       static_cast<double>(images[i]->height) / size);
      out[i] = std::move(dets);
      if (quality && gts && !anns[b].boxes.empty()) {
        const AnchorQuality q = anchor_quality(model, fwd, b, anns[b].boxes);
        sum_init += q.initial * q.num_gt;
        sum_ref += q.refined * q.num_gt;
        count += q.num_gt;
      }
    }
  }
  if (quality) {
    quality->num_gt = count;
    quality->initial = count ? sum_init / count : 0.0;
    quality->refined = count ? sum_ref / count : 0.0;
  }
  return out;
}

const char* kLogHeader =
    "step,epoch,lr,total,arm,adm,arm_conf,arm_reg,adm_conf,adm_reg,arm_pos,adm_pos";

void write_loss_curve(const fs::path& log, const fs::path& svg) {
  std::ifstream in(log);
  std::string line;
  std::getline(in, line);
  std::vector<double> steps, totals;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string step, epoch, lr, total;
    if (!std::getline(ss, step, ',') || !std::getline(ss, epoch, ',') || !std::getline(ss, lr, ',') ||
        !std::getline(ss, total, ','))
      continue;
    steps.push_back(std::stod(step));
    totals.push_back(std::stod(total));
  }
  std::ofstream(svg) << line_chart_svg("training loss", steps, {{"total", totals}}, "step", "loss");
}

// Keeps the header and rows with step <= last_step.
void truncate_log(const fs::path& log, long last_step) {
  std::ifstream in(log);
  if (!in) return;
  std::vector<std::string> keep;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      keep.push_back(line);
      first = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stol(line.substr(0, line.find(','))) <= last_step) keep.push_back(line);
  }
  in.close();
  std::ofstream out(log, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

}  // namespace

double learning_rate(const TrainConfig& cfg, int epoch, long step_in_epoch, long steps_per_epoch) {
  double lr = cfg.lr;
  for (int e : cfg.lr_decay_epochs)
    if (epoch >= e) lr *= cfg.gamma;
  const long warm = static_cast<long>(cfg.warmup_epochs) * steps_per_epoch;
  const long step = static_cast<long>(epoch) * steps_per_epoch + step_in_epoch;
  if (warm > 0 && step < warm) {
    const double start = cfg.lr / 1000.0;
    lr = start + (cfg.lr - start) * static_cast<double>(step) / static_cast<double>(warm);
  }
  return lr;
}

Sample prepare_sample(const Image& image, const Annotation& ann, int input_size, bool do_augment,
                      std::uint64_t seed, const AugmentConfig& aug) {
  Sample s{image, ann};
  if (do_augment) {
    std::mt19937_64 rng(seed);
    augment(s.image, s.annotation, rng, aug);
  }
  resize_square(s.image, s.annotation, input_size);
  std::vector<Box> boxes;
  std::vector<int> labels;
  for (std::size_t i = 0; i < s.annotation.boxes.size(); ++i) {
    const Box& b = s.annotation.boxes[i];
    if (b.width() >= 1.0 && b.height() >= 1.0) {
      boxes.push_back(b);
      labels.push_back(i < s.annotation.labels.size() ? s.annotation.labels[i] : 1);
    }
  }
  s.annotation.boxes = std::move(boxes);
  s.annotation.labels = std::move(labels);
  return s;
}

Checkpoint make_checkpoint(const Model& model, const std::string& state_json,
                           const std::vector<Tensor>* momentum, const std::vector<Tensor>* second_moment) {
  Checkpoint ckpt;
  ckpt.config_json = net_config_to_json(model.config());
  ckpt.state_json = state_json;
  const auto& params = model.store().parameters();
  for (const auto& [name, t] : params) ckpt.tensors.emplace_back(name, t);
  if (momentum)
    for (std::size_t i = 0; i < params.size(); ++i)
      ckpt.tensors.emplace_back("momentum/" + params[i].first, (*momentum)[i]);
  if (second_moment)
    for (std::size_t i = 0; i < params.size(); ++i)
      ckpt.tensors.emplace_back("second_moment/" + params[i].first, (*second_moment)[i]);
  return ckpt;
}

std::unique_ptr<Model> load_model(const fs::path& checkpoint) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  auto model = std::make_unique<Model>(parse_net_config(ckpt.config_json), 0);
  load_parameters(model->store(), ckpt);
  return model;
}

TrainSummary train_model(const RunConfig& cfg, const Dataset& data, const TrainOptions& opt) {
  cfg.model.validate();
  cfg.train.validate();
  const TrainConfig& tc = cfg.train;
  fs::create_directories(opt.out_dir);

  const auto train_anns = data.subset("train");
  if (train_anns.empty()) throw std::runtime_error("training split is empty");
  std::vector<Image> images;
  images.reserve(train_anns.size());
  for (const Annotation* a : train_anns) images.push_back(read_png(data.root / a->image));

  Model model(cfg.model, tc.seed);
  const auto& params = model.store().parameters();
  std::vector<Tensor> momentum;
  for (const auto& [name, p] : params) momentum.emplace_back(p.shape(), 0.0);
  const bool adam = tc.optimizer == "adam";
  std::vector<Tensor> second;
  if (adam)
    for (const auto& [name, p] : params) second.emplace_back(p.shape(), 0.0);

  int start_epoch = 0;
  long step = 0;
  double best_ap50 = -1;
  const fs::path log_path = opt.out_dir / "train_log.csv";
  const fs::path epochs_path = opt.out_dir / "epochs.csv";
  if (opt.resume) {
    const Checkpoint ckpt = load_checkpoint(*opt.resume);
    if (ckpt.config_json != net_config_to_json(cfg.model))
      throw CheckpointError("checkpoint model config differs from the run config");
    load_parameters(model.store(), ckpt);
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;
    auto restore = [&](const std::string& slot, std::vector<Tensor>& dst) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto it = by_name.find(slot + "/" + params[i].first);
        if (it == by_name.end()) throw CheckpointError("checkpoint lacks " + slot + " for " + params[i].first);
        const auto src = it->second->data();
        std::copy(src.begin(), src.end(), dst[i].mutable_data().begin());
      }
    };
    restore("momentum", momentum);
    if (adam) restore("second_moment", second);
    const json state = json::parse(ckpt.state_json);
    start_epoch = state.at("epoch").get<int>();
    step = state.at("step").get<long>();
    best_ap50 = state.value("best_ap50", -1.0);
    truncate_log(log_path, step);
    // epochs.csv rows are keyed by epoch index in the first column.
    truncate_log(epochs_path, start_epoch - 1);
  } else {
    std::ofstream(log_path, std::ios::trunc) << kLogHeader << '\n';
    std::ofstream(epochs_path, std::ios::trunc)
        << "epoch,lr,mean_total,val_ap50,val_ap,anchor_iou_initial,anchor_iou_refined,seconds\n";
  }

  const long n = static_cast<long>(images.size());
  const long batch = tc.batch;
  const long steps_per_epoch = (n + batch - 1) / batch;
  const AugmentConfig& aug = cfg.data.augment;
  const int size = cfg.model.input_size;

  TrainSummary summary;
  summary.best_ap50 = best_ap50;
  int end_epoch = tc.epochs;
  if (opt.stop_after_epochs >= 0) end_epoch = std::min(end_epoch, start_epoch + opt.stop_after_epochs);

  std::ofstream log(log_path, std::ios::app);
  for (int epoch = start_epoch; epoch < end_epoch; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 perm_rng(derive_seed(tc.seed, 0x100000000ull + epoch));
    for (long i = n - 1; i > 0; --i) std::swap(order[i], order[perm_rng() % (i + 1)]);

    auto load_batch = [&](long s) {
      std::vector<Sample> out;
      for (long i = s * batch; i < std::min(n, (s + 1) * batch); ++i) {
        const long idx = order[i];
        const std::uint64_t seed = derive_seed(derive_seed(tc.seed, epoch), static_cast<std::uint64_t>(idx));
        out.push_back(prepare_sample(images[idx], *train_anns[idx], size, tc.augment, seed, aug));
      }
      return out;
    };

    double epoch_total = 0;
    double lr = 0;
    std::future<std::vector<Sample>> next;
    if (opt.threads > 1) next = std::async(std::launch::async, load_batch, 0L);
    for (long s = 0; s < steps_per_epoch; ++s) {
      std::vector<Sample> samples = opt.threads > 1 ? next.get() : load_batch(s);
      if (opt.threads > 1 && s + 1 < steps_per_epoch) next = std::async(std::launch::async, load_batch, s + 1);

      lr = learning_rate(tc, epoch, s, steps_per_epoch);
      model.store().zero_grad();
      std::vector<const Image*> ptrs;
      for (const Sample& smp : samples) ptrs.push_back(&smp.image);
      const ForwardResult fwd = model.forward(image_to_tensor(ptrs));
      std::vector<LossReport> reports;
      for (std::size_t b = 0; b < samples.size(); ++b)
        reports.push_back(image_loss(model, fwd, static_cast<int>(b), samples[b].annotation.boxes,
                                     samples[b].annotation.labels));
      const LossReport rep = mean_report(reports);
      if (!std::isfinite(rep.total))
        throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                              std::to_string(step + 1));
      if (rep.value.requires_grad()) backward(rep.value);

      double scale = 1.0;
      if (tc.grad_clip > 0) {
        double sq = 0;
        for (const auto& [name, p] : params)
          if (p.has_grad())
            for (double g : p.grad()) sq += g * g;
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm)) throw TrainingAborted("non-finite gradient at step " + std::to_string(step + 1));
        if (norm > tc.grad_clip) scale = tc.grad_clip / norm;
      }
      // bias corrections for the adam moments, t counted from 1
      const double c1 = 1 - std::pow(tc.momentum, static_cast<double>(step + 1));
      const double c2 = 1 - std::pow(tc.beta2, static_cast<double>(step + 1));
      for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor w = params[i].second;
        auto wd = w.mutable_data();
        auto v = momentum[i].mutable_data();
        const bool has = w.has_grad();
        std::span<const double> g;
        if (has) g = std::as_const(w).grad();
        if (!adam) {
          for (std::size_t k = 0; k < wd.size(); ++k) {
            const double gk = has ? g[k] * scale : 0.0;
            v[k] = tc.momentum * v[k] + gk + tc.weight_decay * wd[k];
            wd[k] -= lr * v[k];
          }
          continue;
        }
        auto s2 = second[i].mutable_data();
        for (std::size_t k = 0; k < wd.size(); ++k) {
          const double gk = (has ? g[k] * scale : 0.0) + tc.weight_decay * wd[k];
          v[k] = tc.momentum * v[k] + (1 - tc.momentum) * gk;
          s2[k] = tc.beta2 * s2[k] + (1 - tc.beta2) * gk * gk;
          wd[k] -= lr * (v[k] / c1) / (std::sqrt(s2[k] / c2) + 1e-8);
        }
      }
      ++step;
      epoch_total += rep.total;
      if (summary.steps == 0) summary.first_loss = rep.total;
      ++summary.steps;
      if (step % std::max(1, tc.log_every) == 0) {
        log << step << ',' << epoch << ',' << fmt17(lr) << ',' << fmt17(rep.total) << ',' << fmt17(rep.arm)
            << ',' << fmt17(rep.adm) << ',' << fmt17(rep.arm_conf) << ',' << fmt17(rep.arm_reg) << ','
            << fmt17(rep.adm_conf) << ',' << fmt17(rep.adm_reg) << ',' << rep.arm_pos << ',' << rep.adm_pos
            << '\n';
      }
    }
    log.flush();
    const double mean_total = epoch_total / static_cast<double>(steps_per_epoch);
    if (epoch == start_epoch) summary.first_epoch_loss = mean_total;
    summary.last_epoch_loss = mean_total;

    double ap50 = -1, ap = -1;
    AnchorQuality aq;
    if (!data.split.val.empty()) {
      const SplitEvaluation ev = evaluate_split(model, data, "val", static_cast<int>(batch));
      ap50 = ev.report.ap50.value_or(0.0);
      ap = ev.report.ap.value_or(0.0);
      aq = ev.anchors;
    }
    const bool improved = ap50 > best_ap50;
    if (improved) best_ap50 = ap50;
    const json state = {{"epoch", epoch + 1}, {"step", step}, {"best_ap50", best_ap50}};
    // Write best first so a crash between the two leaves last.ckpt older.
    if (improved) save_checkpoint(opt.out_dir / "best.ckpt", make_checkpoint(model, state.dump(), &momentum, adam ? &second : nullptr));
    save_checkpoint(opt.out_dir / "last.ckpt", make_checkpoint(model, state.dump(), &momentum, adam ? &second : nullptr));

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    {
      std::ofstream ep(epochs_path, std::ios::app);
      ep << epoch << ',' << fmt17(lr) << ',' << fmt17(mean_total) << ',' << fmt17(ap50) << ',' << fmt17(ap)
         << ',' << fmt17(aq.initial) << ',' << fmt17(aq.refined) << ',' << fmt17(secs) << '\n';
    }
    write_loss_curve(log_path, opt.out_dir / "loss_curve.svg");
    if (opt.progress) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "epoch %d/%d  loss %.4f  val AP50 %.4f  lr %.2e  %.1fs\n", epoch + 1,
                    tc.epochs, mean_total, ap50, lr, secs);
      *opt.progress << buf << std::flush;
    }
    ++summary.epochs_completed;
  }
  summary.best_ap50 = best_ap50;
  return summary;
}

std::vector<std::vector<Detection>> run_detector(const Model& model, const std::vector<Image>& images,
                                                 int batch) {
  std::vector<const Image*> ptrs;
  for (const Image& img : images) ptrs.push_back(&img);
  return infer(model, ptrs, batch, nullptr, nullptr);
}

SplitEvaluation evaluate_split(const Model& model, const Dataset& data, const std::string& split, int batch) {
  SplitEvaluation ev;
  std::vector<Image> images;
  for (const Annotation* a : data.subset(split)) {
    images.push_back(read_png(data.root / a->image));
    ev.image_ids.push_back(fs::path(a->image).stem().string());
    ev.gts.push_back(valid_boxes(a->boxes));
  }
  std::vector<const Image*> ptrs;
  for (const Image& img : images) ptrs.push_back(&img);
  ev.detections = infer(model, ptrs, batch, &ev.gts, &ev.anchors);
  ev.report = evaluate(ev.detections, ev.gts);
  return ev;
}

std::string detections_to_jsonl(const std::vector<std::string>& ids,
                                const std::vector<std::vector<Detection>>& dets) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    json boxes = json::array(), scores = json::array(), labels = json::array();
    for (const Detection& d : dets[i]) {
      boxes.push_back({d.box.x1, d.box.y1, d.box.x2, d.box.y2});
      scores.push_back(d.score);
      labels.push_back(d.label);
    }
    out += json{{"image_id", ids[i]}, {"boxes", boxes}, {"scores", scores}, {"labels", labels}}.dump();
    out += '\n';
  }
  return out;
}

std::string overlay_svg(const std::string& image_href, int width, int height,
                        const std::vector<Detection>& dets) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\""
    << width << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  s << "<image xlink:href=\"" << image_href << "\" x=\"0\" y=\"0\" width=\"" << width << "\" height=\""
    << height << "\"/>\n";
  char buf[256];
  for (const Detection& d : dets) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#ff3030\" "
                  "stroke-width=\"1.5\"/>\n<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" fill=\"#ffff40\">%.2f</text>\n",
                  d.box.x1, d.box.y1, d.box.width(), d.box.height(), d.box.x1, std::max(10.0, d.box.y1 - 2),
                  d.score);
    s << buf;
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<Detection> detect_scene(const Model& model, const Image& scene, int tile, int overlap) {
  if (tile <= 0) tile = model.config().input_size;
  if (scene.width <= tile && scene.height <= tile) return run_detector(model, {scene}, 1)[0];
  const Tiles tiles = tile_large_scene(scene, tile, overlap);
  const auto per_tile = run_detector(model, tiles.tiles, 4);
  return map_back(per_tile, tiles.placements, model.config().nms);
}

}  // namespace afran
