#pragma once

// Per-grid-cell scores for point forecasts. Every target cell i carries a
// weight w_i = mask_i / q_i (zero when the radar has no observation, the
// inverse inclusion probability of its example otherwise).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/grid.hpp"

namespace nowcast {

/// Cell weights over a window of one observation frame.
inline std::vector<double> cell_weights(const RadarField& obs, const CellWindow& window, double q) {
  if (!(q > 0.0)) throw InvalidWeightError("cell_weights: inclusion probability must be positive");
  const double inv = 1.0 / q;
  std::vector<double> w;
  w.reserve(window.size());
  for (std::size_t r = 0; r < window.height; ++r)
    for (std::size_t c = 0; c < window.width; ++c)
      w.push_back(obs.valid(window.row0 + r, window.col0 + c) ? inv : 0.0);
  return w;
}

namespace point_detail {
inline void check_aligned(std::size_t f, std::size_t o, std::size_t w, const char* who) {
  if (f != o || f != w)
    throw ArgumentError(std::string(who) + ": forecast, observation and weight sizes differ (" + std::to_string(f) +
                        ", " + std::to_string(o) + ", " + std::to_string(w) + ")");
}
}  // namespace point_detail

/// Weighted first and second moments of (forecast, observation) pairs.
/// Updates use the pairwise (Chan et al.) formulas so merging shards is
/// stable; merging in a fixed order gives bit-identical results.
class PointAccumulator {
 public:
  void add(double f, double o, double w) noexcept {
    if (w == 0.0) return;
    const double total = weight_ + w;
    const double df = f - mean_f_;
    const double dob = o - mean_o_;
    mean_f_ += df * (w / total);
    mean_o_ += dob * (w / total);
    m2_f_ += w * df * (f - mean_f_);
    m2_o_ += w * dob * (o - mean_o_);
    c_fo_ += w * df * (o - mean_o_);
    sq_err_ += w * (f - o) * (f - o);
    weight_ = total;
    track(f, o);
  }

  void merge(const PointAccumulator& other) noexcept {
    if (other.weight_ == 0.0) return;
    if (weight_ == 0.0) {
      *this = other;
      return;
    }
    const double total = weight_ + other.weight_;
    const double df = other.mean_f_ - mean_f_;
    const double dob = other.mean_o_ - mean_o_;
    const double k = weight_ * other.weight_ / total;
    m2_f_ += other.m2_f_ + df * df * k;
    m2_o_ += other.m2_o_ + dob * dob * k;
    c_fo_ += other.c_fo_ + df * dob * k;
    mean_f_ += df * (other.weight_ / total);
    mean_o_ += dob * (other.weight_ / total);
    sq_err_ += other.sq_err_;
    weight_ = total;
    min_f_ = std::min(min_f_, other.min_f_);
    max_f_ = std::max(max_f_, other.max_f_);
    min_o_ = std::min(min_o_, other.min_o_);
    max_o_ = std::max(max_o_, other.max_o_);
  }

  double weight_sum() const noexcept { return weight_; }

  double mse() const {
    if (!(weight_ > 0.0)) throw EmptyDataError("mse: total weight is zero");
    return sq_err_ / weight_;
  }

  double pcc() const {
    if (!(weight_ > 0.0)) throw EmptyDataError("pcc: total weight is zero");
    if (min_f_ == max_f_) throw DegenerateVarianceError("pcc: forecast has zero weighted variance");
    if (min_o_ == max_o_) throw DegenerateVarianceError("pcc: observation has zero weighted variance");
    const double r = c_fo_ / std::sqrt(m2_f_ * m2_o_);
    return std::clamp(r, -1.0, 1.0);
  }

 private:
  void track(double f, double o) noexcept {
    min_f_ = std::min(min_f_, f);
    max_f_ = std::max(max_f_, f);
    min_o_ = std::min(min_o_, o);
    max_o_ = std::max(max_o_, o);
  }

  double weight_ = 0.0;
  double mean_f_ = 0.0, mean_o_ = 0.0;
  double m2_f_ = 0.0, m2_o_ = 0.0, c_fo_ = 0.0;
  double sq_err_ = 0.0;
  double min_f_ = HUGE_VAL, max_f_ = -HUGE_VAL;
  double min_o_ = HUGE_VAL, max_o_ = -HUGE_VAL;
};

inline double mse(std::span<const double> forecast, std::span<const double> obs, std::span<const double> weights) {
  point_detail::check_aligned(forecast.size(), obs.size(), weights.size(), "mse");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < forecast.size(); ++i) {
    const double d = forecast[i] - obs[i];
    num += weights[i] * d * d;
    den += weights[i];
  }
  if (!(den > 0.0)) throw EmptyDataError("mse: total weight is zero");
  return num / den;
}

/// Weighted Pearson correlation; means and standard deviations use the
/// normalized weights.
inline double pcc(std::span<const double> forecast, std::span<const double> obs, std::span<const double> weights) {
  point_detail::check_aligned(forecast.size(), obs.size(), weights.size(), "pcc");
  PointAccumulator acc;
  for (std::size_t i = 0; i < forecast.size(); ++i) acc.add(forecast[i], obs[i], weights[i]);
  return acc.pcc();
}

/// Weighted contingency counts for the event "rain >= t".
struct CsiCounts {
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;

  void add(double f, double o, double threshold, double w) noexcept {
    const bool fe = f >= threshold;
    const bool oe = o >= threshold;
    if (fe && oe)
      tp += w;
    else if (fe)
      fp += w;
    else if (oe)
      fn += w;
  }

  CsiCounts& operator+=(const CsiCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend CsiCounts operator+(CsiCounts a, const CsiCounts& b) noexcept { return a += b; }
  friend bool operator==(const CsiCounts&, const CsiCounts&) = default;
};

inline CsiCounts csi_accumulate(std::span<const double> forecast, std::span<const double> obs, double threshold,
                                std::span<const double> weights) {
  point_detail::check_aligned(forecast.size(), obs.size(), weights.size(), "csi_accumulate");
  if (!(threshold > 0.0)) throw ConfigError("csi_accumulate: threshold must be > 0");
  CsiCounts c;
  for (std::size_t i = 0; i < forecast.size(); ++i) c.add(forecast[i], obs[i], threshold, weights[i]);
  return c;
}

/// TP / (TP + FP + FN). No events forecast or observed anywhere is an error,
/// not a score.
inline double csi(const CsiCounts& c) {
  const double den = c.tp + c.fp + c.fn;
  if (!(den > 0.0)) throw UndefinedScoreError("csi: no events forecast or observed");
  return c.tp / den;
}

inline double f1_score(const CsiCounts& c) {
  const double den = 2.0 * c.tp + c.fp + c.fn;
  if (!(den > 0.0)) throw UndefinedScoreError("f1: no events forecast or observed");
  return 2.0 * c.tp / den;
}

}  // namespace nowcast
