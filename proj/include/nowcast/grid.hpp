#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/error.hpp"

namespace nowcast {

/// Radar composites are quantized in steps of 1/32 mm/hr.
inline constexpr double kRainQuantum = 1.0 / 32.0;
/// Rain rates above this are clipped.
inline constexpr double kMaxRainRate = 128.0;
/// Canonical value stored in missing (radar-masked) cells.
inline constexpr float kMissingValue = -1.0f;

/// Rounds a rain rate to the nearest multiple of 1/32 mm/hr (ties round
/// up), then caps it at 128 mm/hr. Input must be finite and >= 0.
inline double quantize_rain_rate(double x) {
  const double q = std::floor(x * 32.0 + 0.5) / 32.0;
  return q > kMaxRainRate ? kMaxRainRate : q;
}

/// One H x W precipitation grid in mm/hr. Missing cells hold kMissingValue;
/// any negative value is canonicalized to it on construction.
///
/// Observation fields produced by ingest_frame() are additionally
/// quantized to 1/32 mm/hr and capped at 128 mm/hr (see is_quantized()).
/// Forecast fields only need finite, nonnegative valid cells.
class RadarField {
 public:
  RadarField() = default;

  RadarField(std::size_t height, std::size_t width, float fill = 0.0f)
      : height_(height), width_(width), values_(height * width, fill < 0.0f ? kMissingValue : fill) {
    check_shape();
  }

  RadarField(std::size_t height, std::size_t width, std::vector<float> values)
      : height_(height), width_(width), values_(std::move(values)) {
    check_shape();
    if (values_.size() != height_ * width_)
      throw ConfigError("RadarField: expected " + std::to_string(height_ * width_) + " values, got " +
                        std::to_string(values_.size()));
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw IngestError("RadarField: non-finite value at row " + std::to_string(i / width_) + ", col " +
                          std::to_string(i % width_));
      if (values_[i] < 0.0f) values_[i] = kMissingValue;
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }

  float operator()(std::size_t row, std::size_t col) const noexcept { return values_[row * width_ + col]; }
  float operator[](std::size_t index) const noexcept { return values_[index]; }

  bool valid(std::size_t row, std::size_t col) const noexcept { return values_[row * width_ + col] >= 0.0f; }
  bool valid_at(std::size_t index) const noexcept { return values_[index] >= 0.0f; }

  /// Sets a cell; negative values mark it missing.
  void set(std::size_t row, std::size_t col, float value) noexcept {
    values_[row * width_ + col] = value < 0.0f ? kMissingValue : value;
  }
  void set_missing(std::size_t row, std::size_t col) noexcept { values_[row * width_ + col] = kMissingValue; }

  std::span<const float> values() const noexcept { return values_; }

  std::size_t valid_count() const noexcept {
    std::size_t n = 0;
    for (float v : values_) n += v >= 0.0f;
    return n;
  }
  bool all_masked() const noexcept { return valid_count() == 0; }
  bool fully_valid() const noexcept { return valid_count() == values_.size(); }

  /// True when every valid cell is a multiple of 1/32 in [0, 128].
  bool is_quantized() const noexcept {
    for (float v : values_) {
      if (v < 0.0f) continue;
      if (v > kMaxRainRate || quantize_rain_rate(v) != v) return false;
    }
    return true;
  }

  bool same_shape(const RadarField& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const RadarField&, const RadarField&) = default;

 private:
  void check_shape() const {
    if (height_ < 1 || width_ < 1) throw ConfigError("RadarField: height and width must be >= 1");
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> values_;
};

using FrameStack = std::vector<RadarField>;

/// Frames with equal shape at a constant time step.
class RadarSequence {
 public:
  RadarSequence() = default;

  RadarSequence(FrameStack frames, std::vector<std::int64_t> timestamps, std::int64_t interval)
      : frames_(std::move(frames)), timestamps_(std::move(timestamps)), interval_(interval) {
    if (frames_.empty()) throw ConfigError("RadarSequence: no frames");
    if (frames_.size() != timestamps_.size())
      throw ConfigError("RadarSequence: frame and timestamp counts differ");
    if (interval_ <= 0) throw ConfigError("RadarSequence: interval must be positive");
    for (std::size_t t = 1; t < frames_.size(); ++t) {
      if (!frames_[t].same_shape(frames_[0])) throw ConfigError("RadarSequence: frames differ in shape");
      if (timestamps_[t] - timestamps_[t - 1] != interval_)
        throw ConfigError("RadarSequence: timestamps not spaced by the interval at frame " + std::to_string(t));
    }
  }

  /// Builds a sequence with timestamps start, start + interval, ...
  static RadarSequence regular(FrameStack frames, std::int64_t start, std::int64_t interval) {
    std::vector<std::int64_t> ts(frames.size());
    for (std::size_t t = 0; t < ts.size(); ++t) ts[t] = start + static_cast<std::int64_t>(t) * interval;
    return RadarSequence(std::move(frames), std::move(ts), interval);
  }

  std::size_t length() const noexcept { return frames_.size(); }
  std::size_t height() const noexcept { return frames_.empty() ? 0 : frames_[0].height(); }
  std::size_t width() const noexcept { return frames_.empty() ? 0 : frames_[0].width(); }
  std::int64_t interval() const noexcept { return interval_; }

  const RadarField& frame(std::size_t t) const { return frames_.at(t); }
  const FrameStack& frames() const noexcept { return frames_; }
  const std::vector<std::int64_t>& timestamps() const noexcept { return timestamps_; }

  friend bool operator==(const RadarSequence&, const RadarSequence&) = default;

 private:
  FrameStack frames_;
  std::vector<std::int64_t> timestamps_;
  std::int64_t interval_ = 0;
};

struct CropOrigin {
  std::size_t t0 = 0;
  std::size_t y0 = 0;
  std::size_t x0 = 0;
  friend bool operator==(const CropOrigin&, const CropOrigin&) = default;
};

/// A spatiotemporal crop: M context frames followed by N target frames.
struct Example {
  FrameStack context;
  FrameStack targets;
  CropOrigin origin;
  double inclusion_probability = 1.0;

  std::size_t height() const noexcept { return targets.empty() ? 0 : targets.front().height(); }
  std::size_t width() const noexcept { return targets.empty() ? 0 : targets.front().width(); }
  std::size_t total_frames() const noexcept { return context.size() + targets.size(); }

  /// Frame t of the concatenated context + target stack.
  const RadarField& frame(std::size_t t) const {
    return t < context.size() ? context.at(t) : targets.at(t - context.size());
  }

  bool all_masked() const noexcept {
    for (const auto& f : context)
      if (!f.all_masked()) return false;
    for (const auto& f : targets)
      if (!f.all_masked()) return false;
    return true;
  }
};

/// S member forecasts for one example, each an N-frame stack.
class EnsembleForecast {
 public:
  EnsembleForecast() = default;

  explicit EnsembleForecast(std::vector<FrameStack> members) : members_(std::move(members)) {
    if (members_.empty()) throw ConfigError("EnsembleForecast: needs at least one member");
    const auto& ref = members_.front();
    if (ref.empty()) throw ConfigError("EnsembleForecast: members need at least one lead time");
    for (const auto& m : members_) {
      if (m.size() != ref.size()) throw ConfigError("EnsembleForecast: members differ in lead count");
      for (const auto& f : m)
        if (!f.same_shape(ref.front())) throw ConfigError("EnsembleForecast: members differ in frame shape");
    }
  }

  std::size_t size() const noexcept { return members_.size(); }
  std::size_t leads() const noexcept { return members_.empty() ? 0 : members_.front().size(); }
  std::size_t height() const noexcept { return members_.empty() ? 0 : members_.front().front().height(); }
  std::size_t width() const noexcept { return members_.empty() ? 0 : members_.front().front().width(); }

  const FrameStack& member(std::size_t s) const { return members_.at(s); }
  const std::vector<FrameStack>& members() const noexcept { return members_; }

  /// Throws ConfigError unless the forecast matches the example's targets.
  void check_matches(const Example& ex) const {
    if (leads() != ex.targets.size() || height() != ex.height() || width() != ex.width())
      throw ConfigError("EnsembleForecast: shape " + std::to_string(leads()) + "x" + std::to_string(height()) + "x" +
                        std::to_string(width()) + " does not match example targets " +
                        std::to_string(ex.targets.size()) + "x" + std::to_string(ex.height()) + "x" +
                        std::to_string(ex.width()));
  }

  friend bool operator==(const EnsembleForecast&, const EnsembleForecast&) = default;

 private:
  std::vector<FrameStack> members_;
};

/// Canonicalizes one raw frame: negative -> missing, otherwise rounded to
/// 1/32 mm/hr and capped at 128 mm/hr.
inline RadarField ingest_frame(std::size_t height, std::size_t width, std::span<const double> raw) {
  if (height < 1 || width < 1) throw IngestError("ingest_frame: empty grid");
  if (raw.size() != height * width)
    throw IngestError("ingest_frame: expected " + std::to_string(height * width) + " values, got " +
                      std::to_string(raw.size()));
  std::vector<float> values(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double x = raw[i];
    if (!std::isfinite(x))
      throw IngestError("ingest_frame: non-finite value at row " + std::to_string(i / width) + ", col " +
                        std::to_string(i % width));
    values[i] = x < 0.0 ? kMissingValue : static_cast<float>(quantize_rain_rate(x));
  }
  return RadarField(height, width, std::move(values));
}

inline RadarField ingest_frame(const std::vector<std::vector<double>>& raw) {
  if (raw.empty() || raw.front().empty()) throw IngestError("ingest_frame: empty grid");
  const std::size_t width = raw.front().size();
  std::vector<double> flat;
  flat.reserve(raw.size() * width);
  for (std::size_t r = 0; r < raw.size(); ++r) {
    if (raw[r].size() != width)
      throw IngestError("ingest_frame: row " + std::to_string(r) + " has " + std::to_string(raw[r].size()) +
                        " entries, expected " + std::to_string(width));
    flat.insert(flat.end(), raw[r].begin(), raw[r].end());
  }
  return ingest_frame(raw.size(), width, flat);
}

inline RadarField crop_field(const RadarField& src, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  std::vector<float> values(h * w);
  const auto sv = src.values();
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) values[r * w + c] = sv[(y0 + r) * src.width() + (x0 + c)];
  return RadarField(h, w, std::move(values));
}

/// Copies a T = M + N frame, h x w window out of a sequence.
inline Example extract_crop(const RadarSequence& seq, std::size_t t0, std::size_t y0, std::size_t x0,
                            std::size_t context_frames, std::size_t target_frames, std::size_t h, std::size_t w) {
  if (context_frames < 1 || target_frames < 1) throw ConfigError("extract_crop: M and N must be >= 1");
  if (h < 1 || w < 1) throw ConfigError("extract_crop: crop must be at least 1x1");
  if (t0 + context_frames + target_frames > seq.length())
    throw RangeError("extract_crop: frames [" + std::to_string(t0) + ", " +
                     std::to_string(t0 + context_frames + target_frames) + ") exceed sequence length " +
                     std::to_string(seq.length()));
  if (y0 + h > seq.height() || x0 + w > seq.width())
    throw RangeError("extract_crop: window at (" + std::to_string(y0) + ", " + std::to_string(x0) + ") of size " +
                     std::to_string(h) + "x" + std::to_string(w) + " exceeds frame " + std::to_string(seq.height()) +
                     "x" + std::to_string(seq.width()));
  Example ex;
  ex.origin = {t0, y0, x0};
  ex.context.reserve(context_frames);
  ex.targets.reserve(target_frames);
  for (std::size_t t = 0; t < context_frames; ++t) ex.context.push_back(crop_field(seq.frame(t0 + t), y0, x0, h, w));
  for (std::size_t t = 0; t < target_frames; ++t)
    ex.targets.push_back(crop_field(seq.frame(t0 + context_frames + t), y0, x0, h, w));
  return ex;
}

/// Rectangular block of cells [row0, row0 + height) x [col0, col0 + width).
struct CellWindow {
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return height * width; }
  bool contains(std::size_t row, std::size_t col) const noexcept {
    return row >= row0 && row < row0 + height && col >= col0 && col < col0 + width;
  }
  friend bool operator==(const CellWindow&, const CellWindow&) = default;
};

/// Centered side x side scoring window of an h x w crop.
inline CellWindow central_window(std::size_t h, std::size_t w, std::size_t side) {
  if (side < 1 || side > h || side > w)
    throw ConfigError("central_window: side " + std::to_string(side) + " does not fit a " + std::to_string(h) + "x" +
                      std::to_string(w) + " crop");
  if ((h - side) % 2 != 0 || (w - side) % 2 != 0)
    throw ConfigError("central_window: side " + std::to_string(side) + " cannot be centered in a " +
                      std::to_string(h) + "x" + std::to_string(w) + " crop");
  return CellWindow{(h - side) / 2, (w - side) / 2, side, side};
}

inline CellWindow central_window(const Example& ex, std::size_t side) {
  return central_window(ex.height(), ex.width(), side);
}

}  // namespace nowcast
