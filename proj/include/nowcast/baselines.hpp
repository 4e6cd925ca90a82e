#pragma once

// Reference forecasts and synthetic radar data. None of this is meant to be
// skilful; it exists so the verification code can be exercised end to end.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/grid.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

/// Integer displacement per frame interval, in cells (positive = down/right).
struct MotionVector {
  int dy = 0;
  int dx = 0;
  friend bool operator==(const MotionVector&, const MotionVector&) = default;
};

/// Repeats the last context frame for every lead time.
inline EnsembleForecast eulerian_persistence(const FrameStack& context, std::size_t n_lead) {
  if (context.empty()) throw ArgumentError("eulerian_persistence: empty context");
  if (n_lead < 1) throw ArgumentError("eulerian_persistence: need at least one lead time");
  return EnsembleForecast({FrameStack(n_lead, context.back())});
}

/// Moves every cell of `src` by (dy, dx). Cells uncovered by the move are
/// valid zero rain; missing cells travel with the field.
inline RadarField displace(const RadarField& src, long dy, long dx) {
  const long h = static_cast<long>(src.height()), w = static_cast<long>(src.width());
  RadarField out(src.height(), src.width(), 0.0f);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      const long sy = y - dy, sx = x - dx;
      if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
      out.set(static_cast<std::size_t>(y), static_cast<std::size_t>(x),
              src(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)));
    }
  return out;
}

/// Pearson correlation of f2 against f1 displaced by (dy, dx), over cells
/// valid in both. Returns NaN when the overlap is empty and 0 when either
/// side is constant on it.
inline double shifted_correlation(const RadarField& f1, const RadarField& f2, int dy, int dx) {
  const long h = static_cast<long>(f1.height()), w = static_cast<long>(f1.width());
  double n = 0.0, sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
  for (long y = std::max(0L, static_cast<long>(dy)); y < std::min(h, h + dy); ++y)
    for (long x = std::max(0L, static_cast<long>(dx)); x < std::min(w, w + dx); ++x) {
      const auto yy = static_cast<std::size_t>(y), xx = static_cast<std::size_t>(x);
      const auto sy = static_cast<std::size_t>(y - dy), sx = static_cast<std::size_t>(x - dx);
      if (!f2.valid(yy, xx) || !f1.valid(sy, sx)) continue;
      const double a = f1(sy, sx), b = f2(yy, xx);
      n += 1.0;
      sa += a;
      sb += b;
      saa += a * a;
      sbb += b * b;
      sab += a * b;
    }
  if (n == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double va = saa - sa * sa / n, vb = sbb - sb * sb / n;
  if (!(va > 1e-12 * (saa + 1e-300)) || !(vb > 1e-12 * (sbb + 1e-300))) return 0.0;
  return (sab - sa * sb / n) / std::sqrt(va * vb);
}

/// Integer shift (|dy|, |dx| <= max_shift) that best maps f1 onto f2. Ties go
/// to the smallest displacement, then to the lexicographically smallest
/// (dy, dx).
inline MotionVector estimate_shift(const RadarField& f1, const RadarField& f2, int max_shift) {
  if (!f1.same_shape(f2)) throw ConfigError("estimate_shift: fields differ in shape");
  if (max_shift < 0) throw ArgumentError("estimate_shift: max_shift must be >= 0");
  MotionVector best;
  double best_score = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (int dy = -max_shift; dy <= max_shift; ++dy)
    for (int dx = -max_shift; dx <= max_shift; ++dx) {
      const double score = shifted_correlation(f1, f2, dy, dx);
      if (std::isnan(score)) continue;
      const int norm = dy * dy + dx * dx;
      const int best_norm = best.dy * best.dy + best.dx * best.dx;
      // Lexicographic order is the scan order, so only strictly smaller
      // norms can displace an equal-score incumbent.
      if (!found || score > best_score || (score == best_score && norm < best_norm)) {
        best = {dy, dx};
        best_score = score;
        found = true;
      }
    }
  if (!found) throw EstimationError("estimate_shift: no shift leaves any jointly valid cells");
  return best;
}

/// Advects the last context frame with the shift estimated from the last two.
inline EnsembleForecast lagrangian_persistence(const FrameStack& context, std::size_t n_lead, int max_shift) {
  if (context.size() < 2) throw ArgumentError("lagrangian_persistence: need at least 2 context frames");
  if (n_lead < 1) throw ArgumentError("lagrangian_persistence: need at least one lead time");
  const auto v = estimate_shift(context[context.size() - 2], context.back(), max_shift);
  FrameStack member;
  member.reserve(n_lead);
  for (std::size_t k = 1; k <= n_lead; ++k) {
    const long step = static_cast<long>(k);
    member.push_back(displace(context.back(), step * v.dy, step * v.dx));
  }
  return EnsembleForecast({std::move(member)});
}

namespace baseline_detail {

/// L x L box average of white noise, rescaled by L so each cell keeps
/// standard deviation sigma.
inline std::vector<double> smoothed_noise(std::size_t h, std::size_t w, double sigma, std::size_t length,
                                          KeyedRng& rng) {
  const std::size_t ph = h + length - 1, pw = w + length - 1;
  std::vector<double> white(ph * pw);
  for (auto& v : white) v = rng.normal();
  // Summed-area table with a zero border.
  std::vector<double> sat((ph + 1) * (pw + 1), 0.0);
  for (std::size_t r = 0; r < ph; ++r)
    for (std::size_t c = 0; c < pw; ++c)
      sat[(r + 1) * (pw + 1) + c + 1] =
          white[r * pw + c] + sat[r * (pw + 1) + c + 1] + sat[(r + 1) * (pw + 1) + c] - sat[r * (pw + 1) + c];
  std::vector<double> out(h * w);
  const double scale = sigma / static_cast<double>(length);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double s = sat[(r + length) * (pw + 1) + c + length] - sat[r * (pw + 1) + c + length] -
                       sat[(r + length) * (pw + 1) + c] + sat[r * (pw + 1) + c];
      out[r * w + c] = s * scale;
    }
  return out;
}

}  // namespace baseline_detail

/// S members, each the base forecast plus spatially smoothed Gaussian noise,
/// clamped at zero. Member s, lead t draws from a generator keyed on
/// (seed, s, t).
inline EnsembleForecast perturbed_ensemble(const FrameStack& base, std::size_t members, double noise_sigma,
                                           std::size_t length_scale, std::uint64_t seed) {
  if (base.empty()) throw ArgumentError("perturbed_ensemble: empty base forecast");
  if (members < 2) throw ArgumentError("perturbed_ensemble: need at least 2 members");
  if (!(noise_sigma >= 0.0)) throw ArgumentError("perturbed_ensemble: noise sigma must be >= 0");
  if (length_scale < 1) throw ArgumentError("perturbed_ensemble: length scale must be >= 1");
  std::vector<FrameStack> out(members);
  for (std::size_t s = 0; s < members; ++s) {
    out[s].reserve(base.size());
    for (std::size_t t = 0; t < base.size(); ++t) {
      const auto& b = base[t];
      if (noise_sigma == 0.0) {
        out[s].push_back(b);
        continue;
      }
      KeyedRng rng{seed, s, t};
      const auto noise = baseline_detail::smoothed_noise(b.height(), b.width(), noise_sigma, length_scale, rng);
      std::vector<float> values(b.size());
      for (std::size_t i = 0; i < b.size(); ++i)
        values[i] = b.valid_at(i) ? static_cast<float>(std::max(0.0, b[i] + noise[i])) : kMissingValue;
      out[s].emplace_back(b.height(), b.width(), std::move(values));
    }
  }
  return EnsembleForecast(std::move(out));
}

struct SyntheticEventParams {
  std::size_t frames = 24;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t blobs = 3;
  double velocity_y = 0.0;  ///< cells per frame
  double velocity_x = 1.0;
  double intensity = 10.0;  ///< peak rain rate of the strongest blob, mm/hr
  double growth = 0.0;      ///< per-frame log growth rate of every blob
  std::int64_t start_time = 0;
  std::int64_t interval = 300;
};

/// Gaussian rain blobs advecting at constant velocity, quantized like
/// ingested radar. Blob centres sit on a 1/64-cell grid, so with integer
/// velocities each frame is an exact shift of the previous one.
inline RadarSequence synthetic_event(const SyntheticEventParams& p, std::uint64_t seed) {
  if (p.frames < 1 || p.height < 1 || p.width < 1) throw ArgumentError("synthetic_event: dimensions must be positive");
  if (p.interval < 1) throw ArgumentError("synthetic_event: interval must be positive");
  struct Blob {
    double cy, cx, sigma, amplitude;
  };
  KeyedRng rng{seed, 0x5eed};
  std::vector<Blob> blobs(p.blobs);
  const double max_sigma = std::max(2.0, static_cast<double>(std::min(p.height, p.width)) / 8.0);
  // Centres are drawn for the middle frame so blobs cross the domain
  // rather than drift out of it.
  const double half = 0.5 * static_cast<double>(p.frames - 1);
  for (auto& b : blobs) {
    b.cy = static_cast<double>(rng.below(p.height * 64)) / 64.0 - std::round(p.velocity_y * half);
    b.cx = static_cast<double>(rng.below(p.width * 64)) / 64.0 - std::round(p.velocity_x * half);
    b.sigma = 2.0 + (max_sigma - 2.0) * rng.uniform();
    b.amplitude = p.intensity * (0.5 + 0.5 * rng.uniform());
  }
  FrameStack frames;
  frames.reserve(p.frames);
  std::vector<double> raw(p.height * p.width);
  for (std::size_t t = 0; t < p.frames; ++t) {
    const double td = static_cast<double>(t);
    const double scale = std::exp(p.growth * td);
    for (std::size_t y = 0; y < p.height; ++y)
      for (std::size_t x = 0; x < p.width; ++x) {
        double v = 0.0;
        for (const auto& b : blobs) {
          const double ry = static_cast<double>(y) - b.cy - p.velocity_y * td;
          const double rx = static_cast<double>(x) - b.cx - p.velocity_x * td;
          v += b.amplitude * std::exp(-(ry * ry + rx * rx) / (2.0 * b.sigma * b.sigma));
        }
        raw[y * p.width + x] = v * scale;
      }
    frames.push_back(ingest_frame(p.height, p.width, raw));
  }
  return RadarSequence::regular(std::move(frames), p.start_time, p.interval);
}

}  // namespace nowcast
