// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <ATen/CPUGeneratorImpl.h>

#include "forgeloc/errors.hpp"
#include "forgeloc/image_io.hpp"
#include "forgeloc/rng.hpp"

namespace forgeloc {

using nlohmann::json;

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  FORGELOC_REQUIRE(scores.size() == labels.size(), "scores and labels differ in length");
  std::int64_t positives = 0;
  for (int l : labels) {
    FORGELOC_REQUIRE(l == 0 || l == 1, "labels must be 0 or 1");
    positives += l;
  }
  const auto n = static_cast<std::int64_t>(labels.size());
  if (positives == 0 || positives == n) throw UndefinedMetric("average precision needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  double prev_recall = 0.0;
  std::int64_t tp = 0;
  std::int64_t seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    // Every frame sharing this score crosses the cut together.
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      tp += labels[order[i]];
      ++seen;
      ++i;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

double detection_accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  FORGELOC_REQUIRE(scores.size() == labels.size(), "scores and labels differ in length");
  FORGELOC_REQUIRE(!scores.empty(), "accuracy needs at least one frame");
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += ((scores[i] >= threshold ? 1 : 0) == labels[i]);
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

Confusion confusion(const torch::Tensor& pred, const torch::Tensor& gt) {
  FORGELOC_REQUIRE(pred.defined() && gt.defined(), "masks must be defined");
  FORGELOC_REQUIRE(pred.sizes() == gt.sizes(), "predicted and ground-truth masks differ in size");
  auto p = pred.to(torch::kFloat64).ge(0.5);
  auto g = gt.to(torch::kFloat64).ge(0.5);
  Confusion c;
  c.tp = (p & g).sum().item<std::int64_t>();
  c.fp = (p & ~g).sum().item<std::int64_t>();
  c.fn = (~p & g).sum().item<std::int64_t>();
  c.tn = (~p & ~g).sum().item<std::int64_t>();
  return c;
}

double f1_score(const Confusion& c) {
  const auto denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double mcc(const Confusion& c) {
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  const double tn = static_cast<double>(c.tn);
  const double a = tp + fp, b = tp + fn, d = tn + fp, e = tn + fn;
  if (a == 0 || b == 0 || d == 0 || e == 0) return 0.0;
  // Paired products keep perfect agreement at exactly 1 (tp^2 and tn^2 are exact squares).
  return (tp * tn - fp * fn) / (std::sqrt(a * b) * std::sqrt(d * e));
}

LocalizationScores localization_metrics(const ForgeryMask& pred, const ForgeryMask& gt) {
  const auto c = confusion(pred.values, gt.values);
  return {f1_score(c), mcc(c)};
}

MaskRule parse_mask_rule(const std::string& s) {
  if (s == "histogram") return MaskRule::kHistogram;
  if (s == "fixed") return MaskRule::kFixed;
  throw InvalidArgument("unknown mask rule '" + s + "' (expected histogram or fixed)");
}

std::string to_string(MaskRule r) { return r == MaskRule::kHistogram ? "histogram" : "fixed"; }

// ---------------------------------------------------------------------------
// Predictors

NetworkPredictor::NetworkPredictor(ForgeryNet net) : net_(std::move(net)) { net_->eval(); }

Prediction NetworkPredictor::predict(const torch::Tensor& frame, const ManifestRecord&, std::size_t) {
  return predict_frame(frame);
}

Prediction NetworkPredictor::predict_frame(const torch::Tensor& frame) {
  const auto grid = net_->grid();
  auto ft = FrameTensor::make(frame);
  if (ft.height() != grid.height || ft.width() != grid.width)
    throw InvalidArgument("frame is " + std::to_string(ft.height()) + "x" + std::to_string(ft.width()) +
                          " but the model expects " + std::to_string(grid.height) + "x" +
                          std::to_string(grid.width));
  torch::NoGradGuard no_grad;
  net_->eval();
  auto blocks = tile_frame(ft, grid).unsqueeze(0);
  auto out = net_->forward(blocks);
  Prediction p;
  p.p_fake = out.p[0][1].item<double>();
  p.q = out.q[0].to(torch::kFloat64).contiguous();
  if (out.maps.defined()) p.maps = out.maps[0].contiguous();
  p.grid = grid;
  return p;
}

Prediction OraclePredictor::predict(const torch::Tensor& frame, const ManifestRecord& record, std::size_t) {
  Prediction p;
  p.p_fake = record.manipulated() ? 1.0 : 0.0;
  p.grid = plan_grid(frame.size(0), frame.size(1));
  p.mask = read_mask(record.mask_path);
  return p;
}

namespace {

// FNV-1a, stable across standard libraries unlike std::hash.
std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

}  // namespace

RandomPredictor::RandomPredictor(BlockGrid grid, std::uint64_t seed) : grid_(grid), seed_(seed) {}

Prediction RandomPredictor::predict(const torch::Tensor& frame, const ManifestRecord& record,
                                    std::size_t frame_index) {
  auto rng = make_rng(seed_, {stable_hash(record.id), frame_index});
  Prediction p;
  p.grid = grid_.height == frame.size(0) && grid_.width == frame.size(1)
               ? grid_
               : plan_grid(frame.size(0), frame.size(1), grid_.block_size);
  p.p_fake = uniform(rng, 0.0, 1.0);
  auto gen = at::detail::createCPUGenerator(rng());
  p.q = torch::rand({p.grid.count()}, gen, torch::kFloat64);
  return p;
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const DatasetMetrics& m) {
  return json{{"dataset", m.dataset},
              {"Det. mAP", optional_number(m.ap)},
              {"Det. ACC", m.acc},
              {"Loc. MCC", m.loc_mcc},
              {"Loc. F1", m.loc_f1},
              {"Loc. MCC (pooled)", m.loc_mcc_pooled},
              {"Loc. F1 (pooled)", m.loc_f1_pooled},
              {"frames", m.frames},
              {"localization_frames", m.localization_frames},
              {"authentic_excluded", m.authentic_excluded}};
}

DatasetMetrics summarize(const std::string& name, const std::vector<const FrameResult*>& frames) {
  DatasetMetrics m;
  m.dataset = name;
  m.frames = static_cast<std::int64_t>(frames.size());
  std::vector<double> scores;
  std::vector<int> labels;
  Confusion pooled;
  double f1_sum = 0.0, mcc_sum = 0.0;
  for (const auto* f : frames) {
    scores.push_back(f->p_fake);
    labels.push_back(f->label);
    if (f->localization_scored) {
      ++m.localization_frames;
      f1_sum += f->scores.f1;
      mcc_sum += f->scores.mcc;
      pooled += f->confusion;
    } else if (f->label == 0) {
      ++m.authentic_excluded;
    }
  }
  if (!scores.empty()) m.acc = detection_accuracy(scores, labels);
  try {
    m.ap = average_precision(scores, labels);
  } catch (const UndefinedMetric&) {
    m.ap.reset();
  }
  if (m.localization_frames > 0) {
    m.loc_f1 = f1_sum / static_cast<double>(m.localization_frames);
    m.loc_mcc = mcc_sum / static_cast<double>(m.localization_frames);
    m.loc_f1_pooled = f1_score(pooled);
    m.loc_mcc_pooled = mcc(pooled);
  }
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

json to_json(const ThresholdReport& r) {
  return json{{"threshold", r.threshold},
              {"fallback_used", r.fallback_used},
              {"peak_bin", r.peak_bin},
              {"valley_bin", r.valley_bin},
              {"bins", r.histogram.size()}};
}

json to_json(const FrameResult& r) {
  json j{{"frame_id", r.frame_id},
         {"dataset", r.dataset},
         {"true_label", r.label},
         {"detection_score", r.p_fake},
         {"pred_mask_path", r.pred_mask_path},
         {"gt_mask_path", r.gt_mask_path},
         {"localization_scored", r.localization_scored}};
  if (r.threshold) j["threshold_report"] = to_json(*r.threshold);
  if (r.localization_scored) {
    j["f1"] = r.scores.f1;
    j["mcc"] = r.scores.mcc;
    j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}};
  }
  return j;
}

MetricsReport aggregate(std::vector<FrameResult> frames, std::vector<std::string> errors) {
  MetricsReport report;
  std::map<std::string, std::vector<const FrameResult*>> groups;
  std::vector<const FrameResult*> all;
  for (const auto& f : frames) {
    FORGELOC_REQUIRE(f.p_fake >= 0.0 && f.p_fake <= 1.0, "detection score outside [0, 1]");
    groups[f.dataset].push_back(&f);
    all.push_back(&f);
  }
  std::vector<double> aps;
  for (const auto& [name, group] : groups) {
    report.datasets.push_back(summarize(name, group));
    if (report.datasets.back().ap) aps.push_back(*report.datasets.back().ap);
  }
  report.overall = summarize("overall", all);
  // The summary row carries the mean of per-dataset APs.
  report.overall.ap.reset();
  if (!aps.empty()) report.overall.ap = std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
  report.frames = std::move(frames);
  report.errors = std::move(errors);
  return report;
}

json to_json(const MetricsReport& r) {
  json datasets = json::array();
  for (const auto& d : r.datasets) datasets.push_back(metrics_json(d));
  json frames = json::array();
  for (const auto& f : r.frames) frames.push_back(to_json(f));
  return json{{"columns", {"Det. mAP", "Det. ACC", "Loc. MCC", "Loc. F1"}},
              {"datasets", datasets},
              {"summary", metrics_json(r.overall)},
              {"mask_rule", r.mask_rule},
              {"localization_mode", r.localization_mode},
              {"frames_evaluated", r.overall.frames},
              {"errors", r.errors},
              {"frames", frames}};
}

std::string render_table(const MetricsReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %9s %9s %9s %9s %7s\n", "dataset", "Det. mAP", "Det. ACC", "Loc. MCC",
                "Loc. F1", "frames");
  os << line;
  auto row = [&](const DatasetMetrics& m) {
    std::snprintf(line, sizeof line, "%-10s %9s %9s %9s %9s %7lld\n", m.dataset.c_str(),
                  m.ap ? fmt(*m.ap).c_str() : "n/a", fmt(m.acc).c_str(), fmt(m.loc_mcc).c_str(),
                  fmt(m.loc_f1).c_str(), static_cast<long long>(m.frames));
    os << line;
  };
  for (const auto& d : r.datasets) row(d);
  row(r.overall);
  os << "localization: " << r.localization_mode << ", mask rule: " << r.mask_rule << "\n";
  if (!r.errors.empty()) os << r.errors.size() << " item(s) failed, see report errors\n";
  return os.str();
}

ForgeryMask predicted_mask(const Prediction& prediction, const BlockGrid& grid, MaskRule rule,
                           const ThresholdOptions& threshold, std::optional<ThresholdReport>* report) {
  if (report) report->reset();
  if (prediction.p_fake < 0.5) return ForgeryMask::zeros(grid.height, grid.width);
  if (prediction.mask) {
    FORGELOC_REQUIRE(prediction.mask->height() == grid.height && prediction.mask->width() == grid.width,
                     "predicted mask does not match the frame size");
    return ForgeryMask::binary(prediction.mask->values.ge(0.5).to(torch::kFloat32));
  }
  FORGELOC_REQUIRE(prediction.q.defined() && prediction.q.numel() == grid.count(),
                   "block probabilities do not match the grid");
  if (rule == MaskRule::kHistogram) {
    auto result = postprocess(prediction.q, grid, threshold);
    if (report) *report = result.report;
    return result.mask;
  }
  auto soft = upscale_soft(prediction.q.to(torch::kFloat64).view({grid.rows, grid.cols}), grid, grid.height,
                           grid.width);
  return ForgeryMask::binary(soft.ge(0.5).to(torch::kFloat32));
}

MetricsReport evaluate_corpus(const std::vector<ManifestRecord>& records, FramePredictor& predictor,
                              const EvalOptions& options) {
  if (records.empty()) throw InvalidArgument("manifest has no records");
  std::vector<FrameResult> frames;
  std::vector<std::string> errors;
  std::size_t selected = 0;
  if (!options.mask_dir.empty()) std::filesystem::create_directories(options.mask_dir);

  for (const auto& rec : records) {
    if (!options.split.empty() && rec.split != options.split) continue;
    ++selected;
    ForgeryMask gt;
    try {
      gt = read_mask(rec.mask_path);
    } catch (const std::exception& e) {
      errors.push_back(rec.id + ": " + e.what());
      continue;
    }
    for (std::size_t i = 0; i < rec.frame_paths.size(); ++i) {
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "/%04zu", i);
      const std::string frame_id = rec.id + suffix;
      try {
        auto frame = read_frame(rec.frame_paths[i]);
        FORGELOC_REQUIRE(frame.height() == gt.height() && frame.width() == gt.width(),
                         "frame and ground-truth mask differ in size");
        auto pred = predictor.predict(frame.pixels, rec, i);
        FrameResult r;
        r.frame_id = frame_id;
        r.dataset = rec.dataset;
        r.label = rec.manipulated() ? 1 : 0;
        r.p_fake = std::clamp(pred.p_fake, 0.0, 1.0);
        r.gt_mask_path = rec.mask_path.string();
        auto mask = predicted_mask(pred, pred.grid, options.rule, options.threshold, &r.threshold);
        if (!options.mask_dir.empty()) {
          char name[16];
          std::snprintf(name, sizeof name, "_%04zu.png", i);
          auto path = options.mask_dir / (rec.id + name);
          write_mask(path, mask);
          r.pred_mask_path = path.string();
        }
        if (r.label == 1) {
          r.localization_scored = true;
          r.confusion = confusion(mask.values, gt.values);
          r.scores = {f1_score(r.confusion), mcc(r.confusion)};
        }
        frames.push_back(std::move(r));
      } catch (const std::exception& e) {
        errors.push_back(frame_id + ": " + e.what());
      }
    }
  }
  if (selected == 0) throw InvalidArgument("no manifest records in split '" + options.split + "'");
  if (frames.empty()) throw IoError("no frame could be evaluated (" + std::to_string(errors.size()) + " errors)");

  auto report = aggregate(std::move(frames), std::move(errors));
  report.mask_rule = to_string(options.rule);
  if (!options.keep_frames) report.frames.clear();
  return report;
}

// ---------------------------------------------------------------------------
// Throughput

json to_json(const ThroughputReport& r) {
  return json{{"frames", r.frames}, {"seconds", r.seconds}, {"fps", r.fps},
              {"height", r.height}, {"width", r.width},     {"hardware", r.hardware}};
}

std::string hardware_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      auto pos = line.find(':');
      if (pos != std::string::npos) cpu = line.substr(pos + 2);
      break;
    }
  }
  return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " hw threads, torch " +
         std::to_string(at::get_num_threads()) + " intra-op threads";
}

ThroughputReport benchmark_throughput(ForgeryNet net, std::int64_t n_frames, int warmup, std::uint64_t seed) {
  FORGELOC_REQUIRE(n_frames >= 1, "benchmark needs at least one frame");
  FORGELOC_REQUIRE(warmup >= 0, "warmup must be non-negative");
  const auto grid = net->grid();
  NetworkPredictor predictor(net);
  auto gen = at::detail::createCPUGenerator(seed);
  auto frame = torch::rand({grid.height, grid.width, 3}, gen, torch::kFloat32);

  auto run_one = [&] {
    auto pred = predictor.predict_frame(frame);
    (void)predicted_mask(pred, grid, MaskRule::kHistogram, {});
  };
  for (int i = 0; i < warmup; ++i) run_one();

  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t i = 0; i < n_frames; ++i) run_one();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  ThroughputReport r;
  r.frames = n_frames;
  r.seconds = elapsed.count();
  r.fps = r.seconds > 0 ? static_cast<double>(n_frames) / r.seconds : 0.0;
  r.height = grid.height;
  r.width = grid.width;
  r.hardware = hardware_descriptor();
  return r;
}

}  // namespace forgeloc
