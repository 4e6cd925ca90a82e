#pragma once

// On-disk formats.
//
// RGF1 radar stack (little-endian):
//   "RGF1" | u32 version=1 | u32 T | u32 H | u32 W | T x i64 timestamps |
//   T*H*W x f32 values (frame-major, then row-major), missing = -1.0
//
// RGE1 ensemble forecast record (little-endian):
//   "RGE1" | u32 version=1 | u32 S | u32 N | u32 H | u32 W |
//   S*N*H*W x f32 values (member-major, then lead, then row-major)
// A forecast set file is a concatenation of RGE1 records, one per manifest row.
//
// Manifest: tab-separated text, one WeightedExample per line:
//   source  t0  y0  x0  h  w  M  N  q
// Lines starting with '#' are comments.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/grid.hpp"

namespace nowcast {

namespace io_detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

/// Bounds-checked little-endian reader over an in-memory buffer.
class Reader {
 public:
  Reader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_));
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    auto s = bytes(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
    return v;
  }
  std::uint64_t u64() {
    auto s = bytes(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool at_end() const noexcept { return pos_ == data_.size(); }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace io_detail

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::string encode_rgf(const RadarSequence& seq) {
  std::string out;
  out.reserve(20 + 8 * seq.length() + 4 * seq.length() * seq.height() * seq.width());
  out.append("RGF1");
  io_detail::put_u32(out, 1);
  io_detail::put_u32(out, static_cast<std::uint32_t>(seq.length()));
  io_detail::put_u32(out, static_cast<std::uint32_t>(seq.height()));
  io_detail::put_u32(out, static_cast<std::uint32_t>(seq.width()));
  for (auto ts : seq.timestamps()) io_detail::put_u64(out, static_cast<std::uint64_t>(ts));
  for (const auto& f : seq.frames())
    for (float v : f.values()) io_detail::put_f32(out, v);
  return out;
}

/// Decodes an RGF1 stack. Single-frame stacks carry no spacing information
/// and get `default_interval`.
inline RadarSequence decode_rgf(std::string_view data, const std::string& what = "RGF1",
                                std::int64_t default_interval = 300) {
  io_detail::Reader rd(data, what);
  if (rd.bytes(4) != "RGF1") throw FormatError(what + ": bad magic (expected RGF1)");
  if (auto v = rd.u32(); v != 1) throw FormatError(what + ": unsupported version " + std::to_string(v));
  const std::size_t t = rd.u32(), h = rd.u32(), w = rd.u32();
  if (t == 0 || h == 0 || w == 0) throw FormatError(what + ": empty dimensions");
  std::vector<std::int64_t> ts(t);
  for (auto& x : ts) x = static_cast<std::int64_t>(rd.u64());
  rd.need(4 * t * h * w);
  FrameStack frames;
  frames.reserve(t);
  for (std::size_t k = 0; k < t; ++k) {
    std::vector<float> values(h * w);
    for (auto& v : values) v = rd.f32();
    frames.emplace_back(h, w, std::move(values));
  }
  if (!rd.at_end()) throw FormatError(what + ": " + std::to_string(rd.remaining()) + " trailing bytes");
  const std::int64_t interval = t >= 2 ? ts[1] - ts[0] : default_interval;
  try {
    return RadarSequence(std::move(frames), std::move(ts), interval);
  } catch (const ConfigError& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline void write_rgf(const std::string& path, const RadarSequence& seq) { write_file(path, encode_rgf(seq)); }

inline RadarSequence read_rgf(const std::string& path) { return decode_rgf(read_file(path), path); }

inline void append_rge(std::string& out, const EnsembleForecast& fc) {
  out.append("RGE1");
  io_detail::put_u32(out, 1);
  io_detail::put_u32(out, static_cast<std::uint32_t>(fc.size()));
  io_detail::put_u32(out, static_cast<std::uint32_t>(fc.leads()));
  io_detail::put_u32(out, static_cast<std::uint32_t>(fc.height()));
  io_detail::put_u32(out, static_cast<std::uint32_t>(fc.width()));
  for (const auto& member : fc.members())
    for (const auto& f : member)
      for (float v : f.values()) io_detail::put_f32(out, v);
}

/// Decodes a concatenation of RGE1 records.
inline std::vector<EnsembleForecast> decode_rge_set(std::string_view data, const std::string& what = "RGE1") {
  io_detail::Reader rd(data, what);
  std::vector<EnsembleForecast> out;
  while (!rd.at_end()) {
    const std::string rec = what + " record " + std::to_string(out.size());
    if (rd.bytes(4) != "RGE1") throw FormatError(rec + ": bad magic (expected RGE1)");
    if (auto v = rd.u32(); v != 1) throw FormatError(rec + ": unsupported version " + std::to_string(v));
    const std::size_t s = rd.u32(), n = rd.u32(), h = rd.u32(), w = rd.u32();
    if (s == 0 || n == 0 || h == 0 || w == 0) throw FormatError(rec + ": empty dimensions");
    rd.need(4 * s * n * h * w);
    std::vector<FrameStack> members(s);
    for (auto& m : members) {
      m.reserve(n);
      for (std::size_t k = 0; k < n; ++k) {
        std::vector<float> values(h * w);
        for (auto& v : values) v = rd.f32();
        m.emplace_back(h, w, std::move(values));
      }
    }
    out.emplace_back(std::move(members));
  }
  return out;
}

inline void write_rge_set(const std::string& path, const std::vector<EnsembleForecast>& set) {
  std::string out;
  for (const auto& fc : set) append_rge(out, fc);
  write_file(path, out);
}

inline std::vector<EnsembleForecast> read_rge_set(const std::string& path) {
  return decode_rge_set(read_file(path), path);
}

/// Reads RGE1 records one at a time so a large forecast set never has to be
/// held in memory at once.
class RgeReader {
 public:
  explicit RgeReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
  }

  /// Next record, or false at a clean end of file.
  bool next(EnsembleForecast& out) {
    char magic[4];
    in_.read(magic, 4);
    if (in_.gcount() == 0 && in_.eof()) return false;
    const std::string rec = path_ + " record " + std::to_string(index_);
    std::string header(magic, static_cast<std::size_t>(in_.gcount()));
    header.resize(24);
    in_.read(header.data() + 4, 20);
    if (in_.gcount() != 20) throw FormatError(rec + ": truncated header");
    io_detail::Reader rd(header, rec);
    if (rd.bytes(4) != "RGE1") throw FormatError(rec + ": bad magic (expected RGE1)");
    if (auto v = rd.u32(); v != 1) throw FormatError(rec + ": unsupported version " + std::to_string(v));
    const std::size_t s = rd.u32(), n = rd.u32(), h = rd.u32(), w = rd.u32();
    if (s == 0 || n == 0 || h == 0 || w == 0) throw FormatError(rec + ": empty dimensions");
    std::string body(4 * s * n * h * w, '\0');
    in_.read(body.data(), static_cast<std::streamsize>(body.size()));
    if (static_cast<std::size_t>(in_.gcount()) != body.size()) throw FormatError(rec + ": truncated values");
    io_detail::Reader vals(body, rec);
    std::vector<FrameStack> members(s);
    for (auto& m : members) {
      m.reserve(n);
      for (std::size_t k = 0; k < n; ++k) {
        std::vector<float> values(h * w);
        for (auto& v : values) v = vals.f32();
        m.emplace_back(h, w, std::move(values));
      }
    }
    out = EnsembleForecast(std::move(members));
    ++index_;
    return true;
  }

  std::size_t records_read() const noexcept { return index_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t index_ = 0;
};

/// Shortest round-trippable text form of a double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf.data(), buf.size(), "%.*g", prec, v);
    if (std::strtod(buf.data(), nullptr) == v) break;
  }
  return buf.data();
}

struct ManifestRecord {
  std::string source;
  std::size_t t0 = 0, y0 = 0, x0 = 0;
  std::size_t h = 0, w = 0;
  std::size_t context = 0, targets = 0;
  double q = 1.0;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

inline std::string encode_manifest(const std::vector<ManifestRecord>& records) {
  std::ostringstream os;
  os << "# source\tt0\ty0\tx0\th\tw\tM\tN\tq\n";
  for (const auto& r : records)
    os << r.source << '\t' << r.t0 << '\t' << r.y0 << '\t' << r.x0 << '\t' << r.h << '\t' << r.w << '\t' << r.context
       << '\t' << r.targets << '\t' << format_double(r.q) << '\n';
  return os.str();
}

inline std::vector<ManifestRecord> decode_manifest(std::string_view text, const std::string& what = "manifest") {
  std::vector<ManifestRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 9)
      throw FormatError(what + ":" + std::to_string(lineno) + ": expected 9 tab-separated fields, got " +
                        std::to_string(fields.size()));
    ManifestRecord r;
    try {
      r.source = fields[0];
      r.t0 = std::stoull(fields[1]);
      r.y0 = std::stoull(fields[2]);
      r.x0 = std::stoull(fields[3]);
      r.h = std::stoull(fields[4]);
      r.w = std::stoull(fields[5]);
      r.context = std::stoull(fields[6]);
      r.targets = std::stoull(fields[7]);
      r.q = std::stod(fields[8]);
    } catch (const std::logic_error&) {
      throw FormatError(what + ":" + std::to_string(lineno) + ": malformed number");
    }
    if (!(r.q > 0.0 && r.q <= 1.0))
      throw FormatError(what + ":" + std::to_string(lineno) + ": inclusion probability outside (0, 1]");
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  write_file(path, encode_manifest(records));
}

inline std::vector<ManifestRecord> read_manifest(const std::string& path) {
  return decode_manifest(read_file(path), path);
}

}  // namespace nowcast
