#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

enum class CrpsEstimator {
  fair,       ///< unbiased: E|X-y| - 1/(2S(S-1)) sum_{i!=j} |x_i-x_j|
  empirical,  ///< plug-in ECDF: E|X-y| - 1/(2S^2) sum_{i,j} |x_i-x_j| (for cross-tool comparison)
};

namespace ensemble_detail {

/// sum_{i<j} |x_i - x_j| from sorted values as sum_k gap_k * k * (S - k).
/// All terms are nonnegative and vanish exactly for a constant ensemble.
inline double pairwise_spread(std::span<const double> sorted) {
  const std::size_t s = sorted.size();
  double total = 0.0;
  for (std::size_t k = 1; k < s; ++k)
    total += (sorted[k] - sorted[k - 1]) * static_cast<double>(k) * static_cast<double>(s - k);
  return total;
}

}  // namespace ensemble_detail

/// CRPS of an S-member ensemble against one observation, in the sorted
/// probability-weighted-moment form (O(S log S)).
inline double crps_ensemble(std::span<const double> members, double obs, CrpsEstimator estimator = CrpsEstimator::fair) {
  const std::size_t s = members.size();
  if (s == 0) throw EnsembleTooSmallError("crps: empty ensemble");
  if (estimator == CrpsEstimator::fair && s < 2)
    throw EnsembleTooSmallError("crps: the fair estimator needs at least 2 members");
  std::vector<double> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end());
  double abs_err = 0.0;
  for (double x : sorted) abs_err += std::abs(x - obs);
  abs_err /= static_cast<double>(s);
  const double sd = static_cast<double>(s);
  const double denom = estimator == CrpsEstimator::fair ? sd * (sd - 1.0) : sd * sd;
  const double score = abs_err - ensemble_detail::pairwise_spread(sorted) / denom;
  return score > 0.0 ? score : 0.0;
}

inline double crps_fair(std::span<const double> members, double obs) {
  return crps_ensemble(members, obs, CrpsEstimator::fair);
}

/// Weighted sum of per-cell scores; value() is the weight-normalized mean.
struct WeightedMean {
  double sum = 0.0;
  double weight = 0.0;

  void add(double value, double w) noexcept {
    sum += w * value;
    weight += w;
  }
  WeightedMean& operator+=(const WeightedMean& o) noexcept {
    sum += o.sum;
    weight += o.weight;
    return *this;
  }
  double value() const {
    if (!(weight > 0.0)) throw EmptyDataError("weighted mean: total weight is zero");
    return sum / weight;
  }
};

/// Weighted mean of per-cell fair CRPS over cells.
inline double crps_dataset(const std::vector<std::vector<double>>& ensembles, std::span<const double> obs,
                           std::span<const double> weights) {
  if (ensembles.size() != obs.size() || obs.size() != weights.size())
    throw ArgumentError("crps_dataset: ensemble, observation and weight counts differ");
  WeightedMean acc;
  for (std::size_t i = 0; i < obs.size(); ++i)
    if (weights[i] != 0.0) acc.add(crps_fair(ensembles[i], obs[i]), weights[i]);
  return acc.value();
}

struct ReliabilityTable {
  std::size_t members = 0;            ///< S
  std::vector<double> probability;    ///< k / S, k = 0..S
  std::vector<double> f_pred;         ///< weighted forecast frequency, sums to 1
  std::vector<std::optional<double>> f_obs_given_pred;  ///< empty when the bin was never forecast
  std::vector<double> bin_weight;     ///< unnormalized sum of weights per bin
};

/// Sharpness and reliability over the S + 1 exact ensemble proportions.
class ReliabilityAccumulator {
 public:
  explicit ReliabilityAccumulator(std::size_t members = 0)
      : members_(members), pred_(members + 1, 0.0), obs_(members + 1, 0.0) {}

  std::size_t members() const noexcept { return members_; }

  /// `exceed` is the number of members at or above the threshold.
  void add_count(std::size_t exceed, bool observed, double w) noexcept {
    pred_[exceed] += w;
    if (observed) obs_[exceed] += w;
  }

  void add(std::span<const double> ens, double obs, double threshold, double w) {
    if (ens.size() != members_) throw ArgumentError("reliability: ensemble size changed");
    std::size_t k = 0;
    for (double x : ens) k += x >= threshold;
    add_count(k, obs >= threshold, w);
  }

  ReliabilityAccumulator& operator+=(const ReliabilityAccumulator& o) {
    if (o.members_ != members_) throw ArgumentError("reliability: cannot merge different ensemble sizes");
    for (std::size_t k = 0; k <= members_; ++k) {
      pred_[k] += o.pred_[k];
      obs_[k] += o.obs_[k];
    }
    return *this;
  }

  double weight_sum() const noexcept {
    double t = 0.0;
    for (double v : pred_) t += v;
    return t;
  }

  ReliabilityTable table() const {
    const double total = weight_sum();
    if (!(total > 0.0)) throw EmptyDataError("reliability: total weight is zero");
    ReliabilityTable t;
    t.members = members_;
    for (std::size_t k = 0; k <= members_; ++k) {
      t.probability.push_back(static_cast<double>(k) / static_cast<double>(members_));
      t.f_pred.push_back(pred_[k] / total);
      t.bin_weight.push_back(pred_[k]);
      t.f_obs_given_pred.push_back(pred_[k] > 0.0 ? std::optional<double>(obs_[k] / pred_[k]) : std::nullopt);
    }
    return t;
  }

 private:
  std::size_t members_;
  std::vector<double> pred_;
  std::vector<double> obs_;
};

inline ReliabilityTable reliability(const std::vector<std::vector<double>>& ensembles, std::span<const double> obs,
                                    double threshold, std::span<const double> weights) {
  if (ensembles.empty()) throw EmptyDataError("reliability: no cells");
  if (ensembles.size() != obs.size() || obs.size() != weights.size())
    throw ArgumentError("reliability: ensemble, observation and weight counts differ");
  if (!(threshold > 0.0)) throw ConfigError("reliability: threshold must be > 0");
  ReliabilityAccumulator acc(ensembles.front().size());
  for (std::size_t i = 0; i < obs.size(); ++i) acc.add(ensembles[i], obs[i], threshold, weights[i]);
  return acc.table();
}

/// Rank of the observation among the members (0..S). Ties are broken by
/// placing the observation uniformly at random among the tied positions.
inline std::size_t observation_rank(std::span<const double> ens, double obs, KeyedRng& rng) {
  std::size_t below = 0, ties = 0;
  for (double x : ens) {
    below += x < obs;
    ties += x == obs;
  }
  return ties == 0 ? below : below + static_cast<std::size_t>(rng.below(ties + 1));
}

class RankHistogram {
 public:
  explicit RankHistogram(std::size_t members = 0) : counts_(members + 1, 0) {}

  std::size_t members() const noexcept { return counts_.size() - 1; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  void add_rank(std::size_t rank) { ++counts_.at(rank); }

  RankHistogram& operator+=(const RankHistogram& o) {
    if (o.counts_.size() != counts_.size()) throw ArgumentError("rank histogram: cannot merge different sizes");
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += o.counts_[k];
    return *this;
  }

  /// Relative frequency per rank.
  std::vector<double> frequencies() const {
    const auto t = total();
    if (t == 0) throw EmptyDataError("rank histogram: no cells");
    std::vector<double> f;
    for (auto c : counts_) f.push_back(static_cast<double>(c) / static_cast<double>(t));
    return f;
  }

 private:
  std::vector<std::uint64_t> counts_;
};

/// Unweighted rank histogram over valid cells. Tie-breaking for cell i uses
/// a generator keyed on (seed, i), independent of how cells are sharded.
inline RankHistogram rank_histogram(const std::vector<std::vector<double>>& ensembles, std::span<const double> obs,
                                    std::span<const std::uint8_t> valid, std::uint64_t seed) {
  if (ensembles.empty()) throw EmptyDataError("rank_histogram: no cells");
  if (ensembles.size() != obs.size() || obs.size() != valid.size())
    throw ArgumentError("rank_histogram: ensemble, observation and mask counts differ");
  RankHistogram hist(ensembles.front().size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!valid[i]) continue;
    KeyedRng rng{seed, 0, i, 0};
    hist.add_rank(observation_rank(ensembles[i], obs[i], rng));
  }
  return hist;
}

}  // namespace nowcast
