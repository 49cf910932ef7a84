// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame-level detection metrics (AP, accuracy at 0.5), pixel-level localization
// metrics (F1, MCC), corpus evaluation and throughput benchmarking.
//
// Zero-denominator conventions: F1 = 0 when 2TP + FP + FN = 0, MCC = 0 when any
// confusion-matrix marginal is 0.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "forgeloc/block_geometry.hpp"
#include "forgeloc/datagen/corpus.hpp"
#include "forgeloc/model.hpp"
#include "forgeloc/postprocess.hpp"

namespace forgeloc {

/// All-points AP over scores sorted descending, tied scores entering together.
/// Labels are 1 = fake. Throws UndefinedMetric unless both classes are present.
double average_precision(std::span<const double> scores, std::span<const int> labels);

/// Fraction of frames where (score >= threshold) matches the label.
double detection_accuracy(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  Confusion& operator+=(const Confusion& o);
};

/// Both masks are binarized at 0.5 (values >= 0.5 count as tampered).
Confusion confusion(const torch::Tensor& pred, const torch::Tensor& gt);

double f1_score(const Confusion& c);
double mcc(const Confusion& c);

struct LocalizationScores {
  double f1 = 0.0;
  double mcc = 0.0;
};

LocalizationScores localization_metrics(const ForgeryMask& pred, const ForgeryMask& gt);

/// How predicted masks are produced from block probabilities.
enum class MaskRule {
  kHistogram,  // histogram-valley threshold, hole filling, upscale
  kFixed,      // soft upscale of q binarized at 0.5
};

MaskRule parse_mask_rule(const std::string& s);
std::string to_string(MaskRule r);

struct Prediction {
  double p_fake = 0.0;
  torch::Tensor q;                  // [K]; may be undefined when `mask` is set
  torch::Tensor maps;               // [L, M, N] or undefined
  std::optional<ForgeryMask> mask;  // direct pixel mask, bypasses post-processing
  BlockGrid grid;                   // geometry q refers to
};

class FramePredictor {
 public:
  virtual ~FramePredictor() = default;
  virtual Prediction predict(const torch::Tensor& frame, const ManifestRecord& record, std::size_t frame_index) = 0;
  virtual std::string name() const = 0;
};

class NetworkPredictor : public FramePredictor {
 public:
  explicit NetworkPredictor(ForgeryNet net);
  Prediction predict(const torch::Tensor& frame, const ManifestRecord& record, std::size_t frame_index) override;
  std::string name() const override { return "network"; }

  /// Model-only path used by inference and benchmarking.
  Prediction predict_frame(const torch::Tensor& frame);

 private:
  ForgeryNet net_;
};

/// Reads the ground truth back: p_fake from the item kind, mask from disk.
class OraclePredictor : public FramePredictor {
 public:
  Prediction predict(const torch::Tensor& frame, const ManifestRecord& record, std::size_t frame_index) override;
  std::string name() const override { return "oracle"; }
};

/// Uniform random scores and block probabilities.
class RandomPredictor : public FramePredictor {
 public:
  RandomPredictor(BlockGrid grid, std::uint64_t seed);
  Prediction predict(const torch::Tensor& frame, const ManifestRecord& record, std::size_t frame_index) override;
  std::string name() const override { return "random"; }

 private:
  BlockGrid grid_;
  std::uint64_t seed_;
};

struct FrameResult {
  std::string frame_id;
  std::string dataset;
  int label = 0;
  double p_fake = 0.0;
  std::optional<ThresholdReport> threshold;
  std::string pred_mask_path;
  std::string gt_mask_path;
  bool localization_scored = false;
  Confusion confusion;
  LocalizationScores scores;
};

nlohmann::json to_json(const ThresholdReport& r);
nlohmann::json to_json(const FrameResult& r);

struct DatasetMetrics {
  std::string dataset;
  std::optional<double> ap;
  double acc = 0.0;
  double loc_f1 = 0.0;   // per-frame mean
  double loc_mcc = 0.0;
  double loc_f1_pooled = 0.0;
  double loc_mcc_pooled = 0.0;
  std::int64_t frames = 0;
  std::int64_t localization_frames = 0;
  std::int64_t authentic_excluded = 0;
};

struct MetricsReport {
  std::vector<DatasetMetrics> datasets;
  DatasetMetrics overall;  // ACC/F1/MCC over all frames; ap holds mAP over datasets
  std::vector<FrameResult> frames;
  std::vector<std::string> errors;
  std::string mask_rule;
  std::string localization_mode = "per-frame mean";
};

nlohmann::json to_json(const MetricsReport& r);
/// Plain-text table with one row per dataset plus the summary row.
std::string render_table(const MetricsReport& r);

struct EvalOptions {
  std::string split = "test";  // empty = every split
  MaskRule rule = MaskRule::kHistogram;
  ThresholdOptions threshold;
  std::filesystem::path mask_dir;  // write predicted masks here when non-empty
  bool keep_frames = true;
};

/// Aggregates per-dataset metrics from frame results.
MetricsReport aggregate(std::vector<FrameResult> frames, std::vector<std::string> errors = {});

/// Mask for a prediction under the given rule; zeroed when p_fake < 0.5.
ForgeryMask predicted_mask(const Prediction& prediction, const BlockGrid& grid, MaskRule rule,
                           const ThresholdOptions& threshold, std::optional<ThresholdReport>* report = nullptr);

/// Missing or unreadable files become entries in `errors`; evaluation continues.
MetricsReport evaluate_corpus(const std::vector<ManifestRecord>& records, FramePredictor& predictor,
                              const EvalOptions& options = {});

struct ThroughputReport {
  std::int64_t frames = 0;
  double seconds = 0.0;
  double fps = 0.0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::string hardware;
};

nlohmann::json to_json(const ThroughputReport& r);
std::string hardware_descriptor();

/// Runs n frames of the model's input size one at a time (tiling, forward pass and
/// post-processing) after `warmup` untimed frames.
ThroughputReport benchmark_throughput(ForgeryNet net, std::int64_t n_frames, int warmup = 2, std::uint64_t seed = 0);

}  // namespace forgeloc
