#pragma once

#include <cstdint>
#include <vector>

#include "nowcast/grid.hpp"
#include "nowcast/rng.hpp"

namespace test {

/// Field with values drawn uniformly from {0, 1/32, ..., hi} and a fraction
/// of cells masked.
inline nowcast::RadarField random_field(std::size_t h, std::size_t w, nowcast::KeyedRng& rng, double hi = 10.0,
                                        double masked = 0.0) {
  std::vector<float> v(h * w);
  const auto steps = static_cast<std::uint64_t>(hi * 32.0) + 1;
  for (auto& x : v) {
    x = static_cast<float>(static_cast<double>(rng.below(steps)) / 32.0);
    if (masked > 0.0 && rng.uniform() < masked) x = nowcast::kMissingValue;
  }
  return nowcast::RadarField(h, w, std::move(v));
}

inline nowcast::FrameStack random_stack(std::size_t n, std::size_t h, std::size_t w, nowcast::KeyedRng& rng,
                                        double hi = 10.0, double masked = 0.0) {
  nowcast::FrameStack out;
  for (std::size_t t = 0; t < n; ++t) out.push_back(random_field(h, w, rng, hi, masked));
  return out;
}

inline nowcast::Example random_example(std::size_t m, std::size_t n, std::size_t h, std::size_t w,
                                       nowcast::KeyedRng& rng, double masked = 0.0, double q = 1.0) {
  nowcast::Example ex;
  ex.context = random_stack(m, h, w, rng, 10.0, masked);
  ex.targets = random_stack(n, h, w, rng, 10.0, masked);
  ex.inclusion_probability = q;
  return ex;
}

}  // namespace test
