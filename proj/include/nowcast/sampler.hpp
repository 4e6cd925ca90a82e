#pragma once

// Importance-sampled dataset construction.
//
// Candidate crops are accepted with probability
//   q = min(1, q_min + (m / C) * sum_c (1 - exp(-x_c / s))),   C = T * h * w,
// which favours rainy crops. Sums over the full candidate population are
// recovered without bias by weighting each accepted crop with 1 / q.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/grid.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

struct SamplingParams {
  double saturation = 1.0;          ///< s, mm/hr
  double multiplier = 0.1;          ///< m
  double q_min = 2e-4;              ///< minimum inclusion probability
  std::size_t spatial_offset = 32;  ///< candidate grid step, cells
  bool random_offset = true;        ///< default for the training split
  std::int64_t temporal_offset = 300;  ///< seconds between candidate start times
  std::size_t total_frames = 24;    ///< T = M + N
  std::size_t context_frames = 4;   ///< M
  std::size_t height = 256;
  std::size_t width = 256;

  std::size_t target_frames() const noexcept { return total_frames - context_frames; }

  void validate() const {
    if (!(saturation > 0.0)) throw ConfigError("sampling: saturation s must be > 0");
    if (!(multiplier >= 0.0)) throw ConfigError("sampling: multiplier m must be >= 0");
    if (!(q_min > 0.0 && q_min <= 1.0)) throw ConfigError("sampling: q_min must lie in (0, 1]");
    if (spatial_offset < 1) throw ConfigError("sampling: spatial offset must be >= 1");
    if (temporal_offset < 1) throw ConfigError("sampling: temporal offset must be >= 1 second");
    if (context_frames < 1 || total_frames <= context_frames)
      throw ConfigError("sampling: need 1 <= M < T");
    if (height < 1 || width < 1) throw ConfigError("sampling: crop must be at least 1x1");
  }
};

enum class RadarDataset { uk, us };
enum class DataSplit { train, validation, test };

/// Parameter sets used to build the published UK and US datasets.
inline SamplingParams sampling_preset(RadarDataset dataset, DataSplit split) {
  SamplingParams p;
  const bool uk = dataset == RadarDataset::uk;
  p.total_frames = uk ? 24 : 20;
  p.context_frames = 4;
  switch (split) {
    case DataSplit::train:
      p.saturation = 1.0;
      p.multiplier = 0.1;
      p.q_min = 2e-4;
      p.height = p.width = 256;
      p.spatial_offset = 32;
      p.random_offset = true;
      p.temporal_offset = uk ? 5 * 60 : 6 * 60;
      break;
    case DataSplit::validation:
      p.saturation = 1.0;
      p.multiplier = uk ? 2.2 : 0.2;
      p.q_min = 5e-3;
      p.height = p.width = 256;
      p.spatial_offset = 256;
      p.random_offset = false;
      p.temporal_offset = uk ? 20 * 60 : 24 * 60;
      break;
    case DataSplit::test:
      p.saturation = uk ? 10.0 : 30.0;
      p.multiplier = uk ? 1.0 : 0.2;
      p.q_min = uk ? 2e-5 : 2.5e-4;
      p.height = p.width = 512;
      p.spatial_offset = 64;
      p.random_offset = false;
      p.temporal_offset = uk ? 20 * 60 : 24 * 60;
      break;
  }
  return p;
}

/// 1 - exp(-x / s); missing cells (negative x) count as no rain.
inline double saturate(double x, double s) noexcept { return x > 0.0 ? 1.0 - std::exp(-x / s) : 0.0; }

namespace sampler_detail {

inline double clamp_inclusion(double saturated_sum, std::size_t cells, const SamplingParams& p) {
  const double q = p.q_min + p.multiplier / static_cast<double>(cells) * saturated_sum;
  return q < 1.0 ? q : 1.0;
}

inline double saturated_window_sum(const RadarField& f, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w,
                                   double s) {
  const auto v = f.values();
  double sum = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    const float* row = v.data() + (y0 + r) * f.width() + x0;
    for (std::size_t c = 0; c < w; ++c) sum += saturate(row[c], s);
  }
  return sum;
}

}  // namespace sampler_detail

/// Inclusion probability of an example under the given parameters.
inline double acceptance_probability(const Example& ex, const SamplingParams& p) {
  if (ex.total_frames() != p.total_frames || ex.height() != p.height || ex.width() != p.width)
    throw ConfigError("acceptance_probability: example geometry " + std::to_string(ex.total_frames()) + "x" +
                      std::to_string(ex.height()) + "x" + std::to_string(ex.width()) + " does not match parameters " +
                      std::to_string(p.total_frames) + "x" + std::to_string(p.height) + "x" +
                      std::to_string(p.width));
  double sum = 0.0;
  for (std::size_t t = 0; t < ex.total_frames(); ++t)
    sum += sampler_detail::saturated_window_sum(ex.frame(t), 0, 0, p.height, p.width, p.saturation);
  return sampler_detail::clamp_inclusion(sum, p.total_frames * p.height * p.width, p);
}

/// Same value as acceptance_probability(extract_crop(...)), without the copy.
inline double acceptance_probability(const RadarSequence& seq, const CropOrigin& at, const SamplingParams& p) {
  if (at.t0 + p.total_frames > seq.length() || at.y0 + p.height > seq.height() || at.x0 + p.width > seq.width())
    throw RangeError("acceptance_probability: crop outside sequence");
  double sum = 0.0;
  for (std::size_t t = 0; t < p.total_frames; ++t)
    sum += sampler_detail::saturated_window_sum(seq.frame(at.t0 + t), at.y0, at.x0, p.height, p.width, p.saturation);
  return sampler_detail::clamp_inclusion(sum, p.total_frames * p.height * p.width, p);
}

enum class SamplingMode {
  train,  ///< accepted crops get a uniform random offset in [0, spatial_offset)^2
  eval,   ///< crops stay on the candidate grid
};

/// One accepted crop, before its frames are copied out.
struct SampledCrop {
  std::size_t source = 0;  ///< index into the source list
  CropOrigin origin;
  double q = 1.0;  ///< inclusion probability actually applied
  friend bool operator==(const SampledCrop&, const SampledCrop&) = default;
};

struct WeightedExample {
  Example example;
  double q = 1.0;
  std::size_t source = 0;
};

struct SamplingSummary {
  std::size_t candidates = 0;
  std::size_t accepted = 0;        ///< passed the acceptance draw
  std::size_t removed_masked = 0;  ///< accepted but entirely masked
  bool empty() const noexcept { return accepted == removed_masked; }
};

struct SamplingPlan {
  std::vector<SampledCrop> crops;
  SamplingSummary summary;
};

/// Scans candidate crops (source, then time, then row, then column) and
/// keeps each with probability q. The accept/offset draws for a candidate
/// come from a generator keyed on (seed, source, t0, y0, x0), so the plan is
/// identical for any worker count.
///
/// An empty plan (nothing fits, or nothing survives) is reported through
/// summary.empty() rather than an exception.
inline SamplingPlan plan_subsampled_dataset(std::span<const RadarSequence> sources, const SamplingParams& p,
                                            SamplingMode mode, std::uint64_t seed, unsigned workers = 1) {
  p.validate();
  const bool shift = mode == SamplingMode::train;
  const std::size_t slack = shift ? p.spatial_offset - 1 : 0;

  std::vector<SampledCrop> candidates;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& seq = sources[i];
    if (p.temporal_offset % seq.interval() != 0)
      throw ConfigError("sampling: temporal offset " + std::to_string(p.temporal_offset) +
                        " s is not a multiple of the source interval " + std::to_string(seq.interval()) + " s");
    const auto t_step = static_cast<std::size_t>(p.temporal_offset / seq.interval());
    for (std::size_t t0 = 0; t0 + p.total_frames <= seq.length(); t0 += t_step)
      for (std::size_t y0 = 0; y0 + p.height + slack <= seq.height(); y0 += p.spatial_offset)
        for (std::size_t x0 = 0; x0 + p.width + slack <= seq.width(); x0 += p.spatial_offset)
          candidates.push_back({i, {t0, y0, x0}, 1.0});
  }

  enum : std::uint8_t { rejected, kept, masked };
  std::vector<std::uint8_t> status(candidates.size(), rejected);
  parallel_for(candidates.size(), workers, [&](std::size_t k) {
    auto& cand = candidates[k];
    const auto& seq = sources[cand.source];
    const double q = acceptance_probability(seq, cand.origin, p);
    KeyedRng rng{seed, cand.source, cand.origin.t0, cand.origin.y0, cand.origin.x0};
    if (!(rng.uniform() < q)) return;
    cand.q = q;
    if (shift) {
      cand.origin.y0 += rng.below(p.spatial_offset);
      cand.origin.x0 += rng.below(p.spatial_offset);
      cand.q = q / static_cast<double>(p.spatial_offset * p.spatial_offset);
    }
    bool any_valid = false;
    for (std::size_t t = 0; t < p.total_frames && !any_valid; ++t) {
      const auto& f = seq.frame(cand.origin.t0 + t);
      for (std::size_t r = 0; r < p.height && !any_valid; ++r)
        for (std::size_t c = 0; c < p.width; ++c)
          if (f.valid(cand.origin.y0 + r, cand.origin.x0 + c)) {
            any_valid = true;
            break;
          }
    }
    status[k] = any_valid ? kept : masked;
  });

  SamplingPlan plan;
  plan.summary.candidates = candidates.size();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (status[k] == rejected) continue;
    ++plan.summary.accepted;
    if (status[k] == masked) {
      ++plan.summary.removed_masked;
      continue;
    }
    plan.crops.push_back(candidates[k]);
  }
  return plan;
}

inline WeightedExample materialize(std::span<const RadarSequence> sources, const SampledCrop& crop,
                                   const SamplingParams& p) {
  WeightedExample out;
  out.example = extract_crop(sources[crop.source], crop.origin.t0, crop.origin.y0, crop.origin.x0, p.context_frames,
                             p.target_frames(), p.height, p.width);
  out.example.inclusion_probability = crop.q;
  out.q = crop.q;
  out.source = crop.source;
  return out;
}

/// plan_subsampled_dataset() followed by copying out every accepted crop.
inline std::vector<WeightedExample> build_subsampled_dataset(std::span<const RadarSequence> sources,
                                                             const SamplingParams& p, SamplingMode mode,
                                                             std::uint64_t seed, unsigned workers = 1,
                                                             SamplingSummary* summary = nullptr) {
  const auto plan = plan_subsampled_dataset(sources, p, mode, seed, workers);
  if (summary) *summary = plan.summary;
  std::vector<WeightedExample> out;
  out.reserve(plan.crops.size());
  for (const auto& c : plan.crops) out.push_back(materialize(sources, c, p));
  return out;
}

/// Importance-weighted estimate of a population sum: sum_l S_l / q_l.
inline double weighted_estimate(std::span<const double> scores, std::span<const double> inclusion) {
  if (scores.size() != inclusion.size())
    throw ArgumentError("weighted_estimate: " + std::to_string(scores.size()) + " scores but " +
                        std::to_string(inclusion.size()) + " weights");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(inclusion[i] > 0.0))
      throw InvalidWeightError("weighted_estimate: inclusion probability " + std::to_string(inclusion[i]) +
                               " at index " + std::to_string(i) + " is not positive");
    total += scores[i] / inclusion[i];
  }
  return total;
}

/// Percentage of valid cells per rain-rate interval. With edges e_0 < ... < e_k
/// the bins are x <= e_0, (e_0, e_1], ..., (e_{k-1}, e_k], x > e_k.
struct RainfallDistribution {
  std::vector<double> edges;
  std::vector<std::uint64_t> counts;  // edges.size() + 1 bins
  std::uint64_t total = 0;

  std::vector<double> percentages() const {
    if (total == 0) throw EmptyDataError("rainfall_distribution: no valid cells");
    std::vector<double> pct(counts.size());
    for (std::size_t b = 0; b < counts.size(); ++b)
      pct[b] = 100.0 * static_cast<double>(counts[b]) / static_cast<double>(total);
    return pct;
  }

  std::vector<std::string> labels() const {
    auto fmt = [](double v) {
      std::string s = std::to_string(v);
      s.erase(s.find_last_not_of('0') + 1);
      if (s.back() == '.') s.pop_back();
      return s;
    };
    std::vector<std::string> out;
    out.push_back("=" + fmt(edges.front()));
    for (std::size_t b = 1; b < edges.size(); ++b) out.push_back("(" + fmt(edges[b - 1]) + "," + fmt(edges[b]) + "]");
    out.push_back(">" + fmt(edges.back()));
    return out;
  }
};

/// Interval edges of the published rainfall-distribution table.
inline std::vector<double> default_rain_bins() { return {0.0, 0.1, 1.0, 4.0, 5.0, 8.0, 10.0}; }

class RainfallHistogram {
 public:
  explicit RainfallHistogram(std::vector<double> edges = default_rain_bins()) {
    if (edges.empty()) throw ConfigError("rainfall_distribution: need at least one bin edge");
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (!(edges[i] > edges[i - 1])) throw ConfigError("rainfall_distribution: edges must increase");
    dist_.edges = std::move(edges);
    dist_.counts.assign(dist_.edges.size() + 1, 0);
  }

  void add(const RadarField& f) {
    for (float v : f.values()) {
      if (v < 0.0f) continue;
      std::size_t b = 0;
      while (b < dist_.edges.size() && static_cast<double>(v) > dist_.edges[b]) ++b;
      ++dist_.counts[b];
      ++dist_.total;
    }
  }

  const RainfallDistribution& result() const {
    if (dist_.total == 0) throw EmptyDataError("rainfall_distribution: no valid cells");
    return dist_;
  }

 private:
  RainfallDistribution dist_;
};

inline RainfallDistribution rainfall_distribution(std::span<const WeightedExample> dataset,
                                                  std::vector<double> edges = default_rain_bins()) {
  RainfallHistogram hist(std::move(edges));
  for (const auto& we : dataset)
    for (std::size_t t = 0; t < we.example.total_frames(); ++t) hist.add(we.example.frame(t));
  return hist.result();
}

inline RainfallDistribution rainfall_distribution(std::span<const RadarSequence> sequences,
                                                  std::vector<double> edges = default_rain_bins()) {
  RainfallHistogram hist(std::move(edges));
  for (const auto& seq : sequences)
    for (const auto& f : seq.frames()) hist.add(f);
  return hist.result();
}

}  // namespace nowcast
