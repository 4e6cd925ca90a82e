#pragma once

// Radially averaged power spectral density of full frames.
//
// Conventions: the field mean is removed, no taper is applied, power is
// |DFT|^2 / (H W) so the ring totals add up to sum (x - mean)^2, and each
// non-DC frequency cell goes to ring round(sqrt(kx^2 + ky^2)) with kx, ky in
// cycles per frame. For non-square frames the radius mixes two different
// physical units; the wavelength axis then uses sqrt(H W) * spacing as the
// frame extent.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/grid.hpp"

namespace nowcast {

struct PsdRing {
  std::size_t index = 0;       ///< radial wavenumber, cycles per frame
  double wavelength_km = 0.0;  ///< frame extent / index
  double mean_power = 0.0;     ///< zero when the ring holds no cells
  double total_power = 0.0;
  std::size_t cells = 0;
};

struct PsdCurve {
  double spacing_km = 1.0;
  double extent_km = 0.0;
  std::vector<PsdRing> rings;  ///< rings[k - 1] is ring k

  double total_power() const noexcept {
    double t = 0.0;
    for (const auto& r : rings) t += r.total_power;
    return t;
  }
  std::size_t total_cells() const noexcept {
    std::size_t n = 0;
    for (const auto& r : rings) n += r.cells;
    return n;
  }
};

namespace spectral_detail {

// Only fftw_execute is thread-safe; planning is not.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

inline std::vector<double> power_spectrum(const RadarField& field) {
  const std::size_t h = field.height(), w = field.width(), n = h * w;
  const auto v = field.values();
  double mean = 0.0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(n);

  std::unique_ptr<fftw_complex, FftwFree> buf(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
  if (!buf) throw std::bad_alloc();
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf.get(), buf.get(), FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf.get()[i][0] = static_cast<double>(v[i]) - mean;
    buf.get()[i][1] = 0.0;
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<double> power(n);
  const double norm = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double re = buf.get()[i][0], im = buf.get()[i][1];
    power[i] = (re * re + im * im) * norm;
  }
  return power;
}

inline long signed_frequency(std::size_t index, std::size_t n) noexcept {
  return index <= n / 2 ? static_cast<long>(index) : static_cast<long>(index) - static_cast<long>(n);
}

}  // namespace spectral_detail

/// Integer ring of DFT cell (row, col) on an h x w grid; 0 only for DC.
inline std::size_t psd_ring_index(std::size_t row, std::size_t col, std::size_t h, std::size_t w) noexcept {
  const double ky = static_cast<double>(spectral_detail::signed_frequency(row, h));
  const double kx = static_cast<double>(spectral_detail::signed_frequency(col, w));
  return static_cast<std::size_t>(std::lround(std::sqrt(kx * kx + ky * ky)));
}

inline std::size_t psd_ring_count(std::size_t h, std::size_t w) noexcept {
  std::size_t max_ring = 0;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) max_ring = std::max(max_ring, psd_ring_index(r, c, h, w));
  return max_ring;
}

inline PsdCurve psd_radial(const RadarField& field, double spacing_km = 1.0) {
  if (!(spacing_km > 0.0)) throw ConfigError("psd: grid spacing must be positive");
  if (!field.fully_valid())
    throw MaskedFrameError("psd: frame has " + std::to_string(field.size() - field.valid_count()) + " masked cells");
  const std::size_t h = field.height(), w = field.width();
  const auto power = spectral_detail::power_spectrum(field);

  PsdCurve curve;
  curve.spacing_km = spacing_km;
  curve.extent_km = std::sqrt(static_cast<double>(h) * static_cast<double>(w)) * spacing_km;
  const std::size_t rings = psd_ring_count(h, w);
  curve.rings.resize(rings);
  for (std::size_t k = 0; k < rings; ++k) {
    curve.rings[k].index = k + 1;
    curve.rings[k].wavelength_km = curve.extent_km / static_cast<double>(k + 1);
  }
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const auto k = psd_ring_index(r, c, h, w);
      if (k == 0) continue;
      auto& ring = curve.rings[k - 1];
      ring.total_power += power[r * w + c];
      ++ring.cells;
    }
  for (auto& ring : curve.rings)
    ring.mean_power = ring.cells ? ring.total_power / static_cast<double>(ring.cells) : 0.0;
  return curve;
}

/// Elementwise mean of the curves of equally shaped frames.
inline PsdCurve mean_psd(std::span<const RadarField> frames, double spacing_km = 1.0) {
  if (frames.empty()) throw EmptyDataError("psd: no frames");
  PsdCurve acc;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].same_shape(frames[0])) throw ConfigError("psd: frames differ in shape");
    auto c = psd_radial(frames[i], spacing_km);
    if (i == 0) {
      acc = std::move(c);
      continue;
    }
    for (std::size_t k = 0; k < acc.rings.size(); ++k) {
      acc.rings[k].mean_power += c.rings[k].mean_power;
      acc.rings[k].total_power += c.rings[k].total_power;
    }
  }
  const double n = static_cast<double>(frames.size());
  for (auto& r : acc.rings) {
    r.mean_power /= n;
    r.total_power /= n;
  }
  return acc;
}

struct PsdComparison {
  PsdCurve model;
  PsdCurve obs;
};

/// Mean curves of model and observed frames for one lead time.
inline PsdComparison psd_compare(std::span<const RadarField> model_frames, std::span<const RadarField> obs_frames,
                                 double spacing_km = 1.0) {
  if (model_frames.empty() || obs_frames.empty()) throw EmptyDataError("psd_compare: empty frame set");
  if (!model_frames[0].same_shape(obs_frames[0]))
    throw ConfigError("psd_compare: model frames are " + std::to_string(model_frames[0].height()) + "x" +
                      std::to_string(model_frames[0].width()) + ", observed frames are " +
                      std::to_string(obs_frames[0].height()) + "x" + std::to_string(obs_frames[0].width()));
  return {mean_psd(model_frames, spacing_km), mean_psd(obs_frames, spacing_km)};
}

}  // namespace nowcast
