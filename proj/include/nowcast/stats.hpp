#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

struct PairedUnit {
  std::string id;
  double score_a = 0.0;
  double score_b = 0.0;
};

/// Per-unit scores of two methods on the same independent units.
struct PairedSample {
  std::vector<PairedUnit> units;

  std::size_t size() const noexcept { return units.size(); }
  double mean_difference() const {
    if (units.empty()) throw InsufficientDataError("paired sample is empty");
    double s = 0.0;
    for (const auto& u : units) s += u.score_a - u.score_b;
    return s / static_cast<double>(units.size());
  }
};

struct PermutationResult {
  double p_value = 1.0;
  double mean_difference = 0.0;
  std::uint64_t permutations = 0;
  std::uint64_t at_least_as_extreme = 0;  ///< permuted |T| >= observed |T|
};

/// Two-sided paired permutation test of equal means. Each permutation flips
/// the sign of every unit difference independently; the statistic is the mean
/// difference and p = (1 + #{|T_perm| >= |T_obs|}) / (n_perm + 1).
/// Sign bits for permutation j come from a generator keyed on (seed, j).
inline PermutationResult paired_permutation_test(const PairedSample& sample, std::uint64_t n_perm, std::uint64_t seed,
                                                 unsigned workers = 1) {
  const std::size_t n = sample.size();
  if (n < 2) throw InsufficientDataError("permutation test needs at least 2 units, got " + std::to_string(n));
  if (n_perm < 1) throw ArgumentError("permutation test needs at least 1 permutation");

  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = sample.units[i].score_a - sample.units[i].score_b;
  double observed = 0.0;
  for (double d : diff) observed += d;
  // Compare sums instead of means; the 1e-12 slack absorbs rounding of the
  // identity permutation being summed in a different sign pattern.
  const double bar = std::abs(observed) * (1.0 - 1e-12);

  constexpr std::uint64_t chunk = 1u << 14;
  const std::uint64_t chunks = (n_perm + chunk - 1) / chunk;
  std::vector<std::uint64_t> hits(chunks, 0);
  parallel_for(static_cast<std::size_t>(chunks), workers, [&](std::size_t c) {
    const std::uint64_t begin = c * chunk;
    const std::uint64_t end = std::min(n_perm, begin + chunk);
    std::uint64_t count = 0;
    for (std::uint64_t j = begin; j < end; ++j) {
      KeyedRng rng{seed, j};
      double t = 0.0;
      std::uint64_t bits = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) bits = rng();
        t += (bits & 1u) ? -diff[i] : diff[i];
        bits >>= 1;
      }
      count += std::abs(t) >= bar;
    }
    hits[c] = count;
  });

  PermutationResult r;
  r.permutations = n_perm;
  for (auto h : hits) r.at_least_as_extreme += h;
  r.p_value = static_cast<double>(r.at_least_as_extreme + 1) / static_cast<double>(n_perm + 1);
  r.mean_difference = observed / static_cast<double>(n);
  return r;
}

namespace stats_detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  return h;
}

}  // namespace stats_detail

/// Regularized incomplete beta function I_x(a, b), a, b > 0.
inline double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw ArgumentError("incomplete_beta: shape parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * stats_detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * stats_detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Inverse of I_x(a, b) in x by bisection to 1e-12 (or tighter).
inline double beta_quantile(double p, double a, double b) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("beta_quantile: probability outside [0, 1]");
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (incomplete_beta(mid, a, b) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Exact (Clopper-Pearson) two-sided 1 - alpha interval for a binomial
/// proportion after k successes in n trials.
inline Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double alpha = 0.05) {
  if (n < 1) throw ArgumentError("clopper_pearson: n must be >= 1");
  if (k > n) throw ArgumentError("clopper_pearson: k exceeds n");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("clopper_pearson: alpha must lie in (0, 1)");
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  Interval ci;
  ci.lo = k == 0 ? 0.0 : beta_quantile(alpha / 2.0, kd, nd - kd + 1.0);
  ci.hi = k == n ? 1.0 : beta_quantile(1.0 - alpha / 2.0, kd + 1.0, nd - kd);
  return ci;
}

/// Monday-based week containing a Unix timestamp. Week boundaries coincide
/// with ISO weeks; the index counts continuously across years.
inline std::int64_t week_index(std::int64_t unix_seconds) noexcept {
  auto floor_div = [](std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); };
  const std::int64_t days = floor_div(unix_seconds, 86400);
  return floor_div(days + 3, 7);  // 1970-01-01 was a Thursday
}

/// ISO 8601 label ("2019-W05") of a week index.
inline std::string iso_week_label(std::int64_t week) {
  // Year of a day count, after H. Hinnant's civil_from_days.
  auto year_of = [](std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const std::int64_t doe = z - era * 146097;
    const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const std::int64_t mp = (5 * doy + 2) / 153;
    return yoe + era * 400 + (mp >= 10);
  };
  // Day count of January 1st.
  auto jan1 = [](std::int64_t y) {
    y -= 1;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const std::int64_t yoe = y - era * 400;
    return era * 146097 + yoe * 365 + yoe / 4 - yoe / 100 + 306 - 719468;
  };
  // An ISO week belongs to the year of its Thursday.
  const std::int64_t thursday = week * 7;
  const std::int64_t year = year_of(thursday);
  const std::int64_t number = (thursday - jan1(year)) / 7 + 1;
  std::string w = std::to_string(number);
  if (w.size() < 2) w = "0" + w;
  return std::to_string(year) + "-W" + w;
}

enum class WeekParity { even, odd };

struct WeekScore {
  std::int64_t week = 0;
  std::string label;
  double score = 0.0;   ///< importance-weighted mean over the week's examples
  double weight = 0.0;  ///< sum of 1 / q
  std::size_t examples = 0;
};

/// Groups per-example scores into weeks, keeps every other week and averages
/// each kept week with weights 1 / q. Non-finite scores are skipped. Fewer
/// than two resulting units is an error.
inline std::vector<WeekScore> weekly_units(std::span<const std::int64_t> timestamps, std::span<const double> scores,
                                           std::span<const double> inclusion, WeekParity keep = WeekParity::even) {
  if (timestamps.size() != scores.size() || scores.size() != inclusion.size())
    throw ArgumentError("weekly_units: timestamp, score and weight counts differ");
  std::map<std::int64_t, WeekScore> weeks;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) continue;
    if (!(inclusion[i] > 0.0)) throw InvalidWeightError("weekly_units: inclusion probability must be positive");
    const auto wk = week_index(timestamps[i]);
    const bool even = (wk % 2 + 2) % 2 == 0;
    if (even != (keep == WeekParity::even)) continue;
    auto& u = weeks[wk];
    u.week = wk;
    const double w = 1.0 / inclusion[i];
    u.score += w * scores[i];
    u.weight += w;
    ++u.examples;
  }
  std::vector<WeekScore> out;
  for (auto& [wk, u] : weeks) {
    u.score /= u.weight;
    u.label = iso_week_label(wk);
    out.push_back(std::move(u));
  }
  if (out.size() < 2)
    throw InsufficientDataError("weekly_units: " + std::to_string(out.size()) +
                                " week(s) selected, need at least 2 independent units");
  return out;
}

/// Pairs two weekly tables by week. Weeks present in only one table are
/// reported in the error message.
inline PairedSample pair_units(const std::vector<WeekScore>& a, const std::vector<WeekScore>& b) {
  std::map<std::int64_t, const WeekScore*> in_b;
  for (const auto& u : b) in_b[u.week] = &u;
  std::set<std::int64_t> seen;
  std::vector<std::string> missing;
  PairedSample out;
  for (const auto& u : a) {
    seen.insert(u.week);
    auto it = in_b.find(u.week);
    if (it == in_b.end()) {
      missing.push_back(u.label + " (only in A)");
      continue;
    }
    out.units.push_back({u.label, u.score, it->second->score});
  }
  for (const auto& u : b)
    if (!seen.count(u.week)) missing.push_back(u.label + " (only in B)");
  if (!missing.empty()) {
    std::string msg = "unit keys differ:";
    for (const auto& m : missing) msg += " " + m;
    throw ArgumentError(msg);
  }
  return out;
}

}  // namespace nowcast
