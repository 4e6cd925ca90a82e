#pragma once

// Generator and discriminator objectives as plain functions of fields and
// discriminator scores.
//
//   L_G = mean D(G) + mean T({X; G}) - lambda * L_R          (maximized)
//   L_R = 1/(H W N) || (mean_Z G - X) * w(X) ||_1
//   L_D = mean ReLU(1 - D(real)) + mean ReLU(1 + D(fake))    (minimized)
//
// The rain weight is w(y) = min(y + 1, 24): heavier rain counts more, with
// the weight clipped at 24 so spuriously large radar values cannot dominate.
// RainWeightForm::literal_max gives max(y + 1, 24) instead (constant 24 up to
// y = 23) for comparison against code written that way.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/grid.hpp"

namespace nowcast {

inline constexpr double kDefaultRegularizerScale = 20.0;  // lambda
inline constexpr std::size_t kDefaultGeneratorSamples = 6;

enum class RainWeightForm { clipped, literal_max };

inline double rain_weight(double y, RainWeightForm form = RainWeightForm::clipped) {
  if (!(y >= 0.0)) throw ArgumentError("rain_weight: rain rate must be >= 0, got " + std::to_string(y));
  return form == RainWeightForm::clipped ? std::min(y + 1.0, 24.0) : std::max(y + 1.0, 24.0);
}

/// S generator sample stacks (N x H x W each) for one input context.
struct GeneratorSamples {
  std::vector<FrameStack> samples;
};

/// Rain-weighted L1 distance between the sample mean and the target,
/// averaged over valid target cells. Masked target cells are dropped from
/// both the sum and the normalizer.
inline double grid_cell_regularizer(const GeneratorSamples& gen, const FrameStack& target,
                                    RainWeightForm form = RainWeightForm::clipped) {
  if (gen.samples.empty()) throw ArgumentError("grid_cell_regularizer: no samples");
  if (target.empty()) throw ArgumentError("grid_cell_regularizer: empty target");
  for (const auto& s : gen.samples) {
    if (s.size() != target.size()) throw ConfigError("grid_cell_regularizer: sample lead count differs from target");
    for (std::size_t t = 0; t < target.size(); ++t)
      if (!s[t].same_shape(target[t])) throw ConfigError("grid_cell_regularizer: sample shape differs from target");
  }
  const double inv_s = 1.0 / static_cast<double>(gen.samples.size());
  double total = 0.0;
  std::size_t cells = 0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const auto& x = target[t];
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!x.valid_at(i)) continue;
      double mean = 0.0;
      for (const auto& s : gen.samples) mean += s[t][i];
      mean *= inv_s;
      const double y = x[i];
      total += std::abs(mean - y) * rain_weight(y, form);
      ++cells;
    }
  }
  if (cells == 0) throw EmptyDataError("grid_cell_regularizer: target has no valid cells");
  return total / static_cast<double>(cells);
}

namespace loss_detail {
inline double mean(std::span<const double> xs, const char* who) {
  if (xs.empty()) throw ArgumentError(std::string(who) + ": empty score set");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}
}  // namespace loss_detail

/// Hinge loss of a spatial or temporal discriminator.
inline double hinge_discriminator_loss(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) throw ArgumentError("hinge_discriminator_loss: empty score set");
  double r = 0.0, f = 0.0;
  for (double d : real_scores) r += std::max(0.0, 1.0 - d);
  for (double d : fake_scores) f += std::max(0.0, 1.0 + d);
  return r / static_cast<double>(real_scores.size()) + f / static_cast<double>(fake_scores.size());
}

/// Generator objective to be maximized; optimizers that minimize must negate it.
inline double generator_objective(std::span<const double> spatial_fake, std::span<const double> temporal_fake,
                                  double regularizer, double lambda = kDefaultRegularizerScale) {
  if (!(regularizer >= 0.0)) throw ArgumentError("generator_objective: regularizer must be >= 0");
  if (!(lambda >= 0.0)) throw ArgumentError("generator_objective: lambda must be >= 0");
  return loss_detail::mean(spatial_fake, "generator_objective") +
         loss_detail::mean(temporal_fake, "generator_objective") - lambda * regularizer;
}

}  // namespace nowcast
