// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations used by the unit and acceptance tests.
// Everything here is written as plain scalar loops over std::vector so it shares
// no code path with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace oracle {

inline double clipped_log(double v) { return std::log(std::max(v, 1e-12)); }

// -log p[c]
inline double camera_ce(const std::vector<double>& p, std::size_t c) { return -clipped_log(p[c]); }

// -(w0 log p0 + w1 log p1)
inline double detection_ce(double p0, double p1, double w0, double w1) {
  double s = 0.0;
  if (w0 != 0.0) s -= w0 * clipped_log(p0);
  if (w1 != 0.0) s -= w1 * clipped_log(p1);
  return s;
}

inline double block_ce(const std::vector<double>& q, const std::vector<double>& z) {
  double s = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) s += -z[k] * clipped_log(q[k]) - (1.0 - z[k]) * clipped_log(1.0 - q[k]);
  return s;
}

inline double blend(double ld, double ll, double alpha) { return alpha * ld + (1.0 - alpha) * ll; }

// Fraction of tampered pixels per block; the padded area counts as clean.
inline std::vector<double> block_fractions(const std::vector<std::vector<int>>& mask, int bs) {
  const int h = static_cast<int>(mask.size());
  const int w = static_cast<int>(mask[0].size());
  const int rows = (h + bs - 1) / bs;
  const int cols = (w + bs - 1) / bs;
  std::vector<double> z;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      long count = 0;
      for (int y = r * bs; y < (r + 1) * bs; ++y)
        for (int x = c * bs; x < (c + 1) * bs; ++x)
          if (y < h && x < w && mask[y][x]) ++count;
      z.push_back(static_cast<double>(count) / (static_cast<double>(bs) * bs));
    }
  }
  return z;
}

// Histogram-valley threshold via run-length compression of the histogram:
// consecutive equal counts collapse into one level, the peak is the first level
// higher than both neighbours (missing neighbours count as lower) and the valley
// is the first later level lower than two existing neighbours. Returns -1 when no
// valley exists, else the bin index at the middle of the valley run.
inline int valley_bin(const std::vector<double>& q, int bins = 256) {
  std::vector<long> hist(static_cast<std::size_t>(bins), 0);
  for (double v : q) {
    int b = static_cast<int>(std::floor(v * bins));
    b = std::clamp(b, 0, bins - 1);
    ++hist[static_cast<std::size_t>(b)];
  }
  struct Run {
    long level;
    int first;
    int last;
  };
  std::vector<Run> runs;
  for (int b = 0; b < bins; ++b) {
    if (!runs.empty() && runs.back().level == hist[static_cast<std::size_t>(b)]) {
      runs.back().last = b;
    } else {
      runs.push_back({hist[static_cast<std::size_t>(b)], b, b});
    }
  }
  const int n = static_cast<int>(runs.size());
  int peak = -1;
  for (int i = 0; i < n && peak < 0; ++i) {
    const bool left = i == 0 || runs[i - 1].level < runs[i].level;
    const bool right = i == n - 1 || runs[i + 1].level < runs[i].level;
    if (left && right) peak = i;
  }
  if (peak < 0) return -1;
  for (int i = peak + 1; i + 1 < n; ++i)
    if (runs[i - 1].level > runs[i].level && runs[i + 1].level > runs[i].level)
      return (runs[i].first + runs[i].last) / 2;
  return -1;
}

// Bilinear value at pixel centre (i, j) of an M x N lattice anchored at block centres.
inline double bilinear_at(const std::vector<std::vector<double>>& g, int bs, int i, int j) {
  const int m = static_cast<int>(g.size());
  const int n = static_cast<int>(g[0].size());
  const double u = std::clamp((i + 0.5) / bs - 0.5, 0.0, static_cast<double>(m - 1));
  const double v = std::clamp((j + 0.5) / bs - 0.5, 0.0, static_cast<double>(n - 1));
  const int r0 = static_cast<int>(std::floor(u));
  const int c0 = static_cast<int>(std::floor(v));
  const int r1 = std::min(r0 + 1, m - 1);
  const int c1 = std::min(c0 + 1, n - 1);
  const double fy = u - r0;
  const double fx = v - c0;
  return (1 - fy) * (1 - fx) * g[r0][c0] + (1 - fy) * fx * g[r0][c1] + fy * (1 - fx) * g[r1][c0] +
         fy * fx * g[r1][c1];
}

struct Counts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count(const std::vector<int>& pred, const std::vector<int>& gt) {
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && gt[i]) ++c.tp;
    else if (pred[i] && !gt[i]) ++c.fp;
    else if (!pred[i] && gt[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline double f1(const Counts& c) {
  const long d = 2 * c.tp + c.fp + c.fn;
  return d == 0 ? 0.0 : 2.0 * c.tp / d;
}

inline double mcc(const Counts& c) {
  const double tp = c.tp, fp = c.fp, fn = c.fn, tn = c.tn;
  const double d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (d == 0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(d);
}

// Area under the precision/recall step curve, enumerating every distinct score as a
// cut point: AP = sum over cuts of (R_i - R_{i-1}) * P_i.
inline double pr_area(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> cuts(scores);
  std::sort(cuts.begin(), cuts.end(), std::greater<>());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  long positives = 0;
  for (int l : labels) positives += l;
  double area = 0.0, prev_recall = 0.0;
  for (double t : cuts) {
    long tp = 0, predicted = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        ++predicted;
        tp += labels[i];
      }
    }
    const double recall = static_cast<double>(tp) / positives;
    const double precision = static_cast<double>(tp) / predicted;
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

// Closed-form stepwise decay: initial * rate^floor(epoch / step).
inline double step_decay(double initial, double rate, int step, int epoch) {
  return initial * std::pow(rate, std::floor(static_cast<double>(epoch) / static_cast<double>(step)));
}

}  // namespace oracle

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("forgeloc-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
