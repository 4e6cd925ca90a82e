#pragma once

// Neighbourhood-pooled scores over K x K windows of the scoring window,
// visited with stride ceil(K / 4). A neighbourhood containing any missing
// cell gets weight zero; otherwise it inherits 1 / q of its example.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/grid.hpp"
#include "nowcast/verify_ensemble.hpp"

namespace nowcast {

inline std::size_t neighborhood_stride(std::size_t k) noexcept { return (k + 3) / 4; }

struct Neighborhood {
  std::size_t row0 = 0;  ///< top-left cell, crop coordinates
  std::size_t col0 = 0;
  std::size_t size = 1;  ///< K
  double weight = 0.0;
  friend bool operator==(const Neighborhood&, const Neighborhood&) = default;
};

/// All K x K windows fully inside `window`, row-major, weights unset.
inline std::vector<Neighborhood> enumerate_neighborhoods(const CellWindow& window, std::size_t k) {
  if (k < 1) throw ConfigError("neighborhoods: K must be >= 1");
  if (k > window.height || k > window.width)
    throw ConfigError("neighborhoods: K = " + std::to_string(k) + " exceeds the " + std::to_string(window.height) +
                      "x" + std::to_string(window.width) + " scoring window");
  const std::size_t stride = neighborhood_stride(k);
  std::vector<Neighborhood> out;
  for (std::size_t r = 0; r + k <= window.height; r += stride)
    for (std::size_t c = 0; c + k <= window.width; c += stride) out.push_back({window.row0 + r, window.col0 + c, k, 0.0});
  return out;
}

inline bool neighborhood_valid(const RadarField& f, const Neighborhood& nb) noexcept {
  for (std::size_t r = 0; r < nb.size; ++r)
    for (std::size_t c = 0; c < nb.size; ++c)
      if (!f.valid(nb.row0 + r, nb.col0 + c)) return false;
  return true;
}

/// Neighbourhoods of one example's target frame with their weights.
inline std::vector<Neighborhood> enumerate_neighborhoods(const Example& ex, const CellWindow& window, std::size_t k,
                                                         std::size_t lead) {
  auto out = enumerate_neighborhoods(window, k);
  const auto& obs = ex.targets.at(lead);
  const double inv = 1.0 / ex.inclusion_probability;
  for (auto& nb : out) nb.weight = neighborhood_valid(obs, nb) ? inv : 0.0;
  return out;
}

/// Fraction of cells in the window at or above the threshold.
inline double exceed_fraction(const RadarField& f, const Neighborhood& nb, double threshold) noexcept {
  std::size_t n = 0;
  for (std::size_t r = 0; r < nb.size; ++r)
    for (std::size_t c = 0; c < nb.size; ++c) n += f(nb.row0 + r, nb.col0 + c) >= threshold;
  return static_cast<double>(n) / static_cast<double>(nb.size * nb.size);
}

enum class Pooling { average, maximum };

inline double pool(const RadarField& f, const Neighborhood& nb, Pooling how) noexcept {
  double acc = how == Pooling::average ? 0.0 : -HUGE_VAL;
  for (std::size_t r = 0; r < nb.size; ++r)
    for (std::size_t c = 0; c < nb.size; ++c) {
      const double v = f(nb.row0 + r, nb.col0 + c);
      acc = how == Pooling::average ? acc + v : std::max(acc, v);
    }
  return how == Pooling::average ? acc / static_cast<double>(nb.size * nb.size) : acc;
}

/// Weighted fractions Brier score and its no-skill upper bound.
struct FssAccumulator {
  double fbs_sum = 0.0;
  double fbs_worst_sum = 0.0;
  double weight_sum = 0.0;

  /// `mean_forecast_fraction` is the ensemble mean of P_F.
  void add(double mean_forecast_fraction, double observed_fraction, double w) noexcept {
    const double d = mean_forecast_fraction - observed_fraction;
    fbs_sum += w * d * d;
    fbs_worst_sum += w * (mean_forecast_fraction * mean_forecast_fraction + observed_fraction * observed_fraction);
    weight_sum += w;
  }

  FssAccumulator& operator+=(const FssAccumulator& o) noexcept {
    fbs_sum += o.fbs_sum;
    fbs_worst_sum += o.fbs_worst_sum;
    weight_sum += o.weight_sum;
    return *this;
  }

  double fss() const {
    if (!(fbs_worst_sum > 0.0)) throw UndefinedScoreError("fss: no events forecast or observed in any neighbourhood");
    return 1.0 - fbs_sum / fbs_worst_sum;
  }
};

/// Adds one lead time of one example. `members` are that lead's member
/// frames; neighbourhoods where any member is missing also get weight zero.
inline void accumulate_fss(FssAccumulator& acc, std::span<const RadarField* const> members, const RadarField& obs,
                           const std::vector<Neighborhood>& neighborhoods, double threshold) {
  for (const auto& nb : neighborhoods) {
    if (nb.weight == 0.0) continue;
    bool ok = true;
    double pf = 0.0;
    for (const auto* m : members) {
      if (!neighborhood_valid(*m, nb)) {
        ok = false;
        break;
      }
      pf += exceed_fraction(*m, nb, threshold);
    }
    if (!ok) continue;
    pf /= static_cast<double>(members.size());
    acc.add(pf, exceed_fraction(obs, nb, threshold), nb.weight);
  }
}

/// CRPS of member values pooled over each neighbourhood, weighted per
/// neighbourhood. Single-member forecasts score |pooled F - pooled O|.
inline void accumulate_pooled_crps(WeightedMean& acc, std::span<const RadarField* const> members, const RadarField& obs,
                                   const std::vector<Neighborhood>& neighborhoods, Pooling how,
                                   CrpsEstimator estimator = CrpsEstimator::fair) {
  std::vector<double> pooled(members.size());
  for (const auto& nb : neighborhoods) {
    if (nb.weight == 0.0) continue;
    bool ok = true;
    for (std::size_t s = 0; s < members.size() && ok; ++s) {
      if (!neighborhood_valid(*members[s], nb)) ok = false;
      else pooled[s] = pool(*members[s], nb, how);
    }
    if (!ok) continue;
    const double o = pool(obs, nb, how);
    const double score = members.size() == 1 ? std::abs(pooled[0] - o) : crps_ensemble(pooled, o, estimator);
    acc.add(score, nb.weight);
  }
}

namespace pooled_detail {
inline std::vector<const RadarField*> lead_members(const EnsembleForecast& fc, std::size_t lead) {
  std::vector<const RadarField*> out;
  for (const auto& m : fc.members()) out.push_back(&m.at(lead));
  return out;
}
inline void check_inputs(std::span<const EnsembleForecast> forecasts, std::span<const Example> examples) {
  if (forecasts.size() != examples.size()) throw ArgumentError("pooled: forecast and example counts differ");
  for (std::size_t i = 0; i < examples.size(); ++i) forecasts[i].check_matches(examples[i]);
}
}  // namespace pooled_detail

/// Fractions skill score over all examples and lead times.
inline double fss(std::span<const EnsembleForecast> forecasts, std::span<const Example> examples, double threshold,
                  std::size_t k, std::size_t window_side) {
  pooled_detail::check_inputs(forecasts, examples);
  FssAccumulator acc;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto window = central_window(examples[i], window_side);
    for (std::size_t lead = 0; lead < examples[i].targets.size(); ++lead) {
      const auto nbs = enumerate_neighborhoods(examples[i], window, k, lead);
      const auto members = pooled_detail::lead_members(forecasts[i], lead);
      accumulate_fss(acc, members, examples[i].targets[lead], nbs, threshold);
    }
  }
  return acc.fss();
}

/// Pooled CRPS over all examples and lead times. Requires S >= 2.
inline double pooled_crps(std::span<const EnsembleForecast> forecasts, std::span<const Example> examples,
                          std::size_t k, Pooling how, std::size_t window_side) {
  pooled_detail::check_inputs(forecasts, examples);
  WeightedMean acc;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (forecasts[i].size() < 2) throw EnsembleTooSmallError("pooled_crps: the fair estimator needs 2 members");
    const auto window = central_window(examples[i], window_side);
    for (std::size_t lead = 0; lead < examples[i].targets.size(); ++lead) {
      const auto nbs = enumerate_neighborhoods(examples[i], window, k, lead);
      const auto members = pooled_detail::lead_members(forecasts[i], lead);
      accumulate_pooled_crps(acc, members, examples[i].targets[lead], nbs, how);
    }
  }
  if (!(acc.weight > 0.0)) throw EmptyDataError("pooled_crps: no valid neighbourhoods");
  return acc.value();
}

}  // namespace nowcast
