// nowcast: batch front end for dataset construction, baselines, verification
// and significance testing.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 empty result (a warning; outputs may be missing).

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/baselines.hpp"
#include "nowcast/error.hpp"
#include "nowcast/evaluate.hpp"
#include "nowcast/grid.hpp"
#include "nowcast/io.hpp"
#include "nowcast/losses.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/sampler.hpp"
#include "nowcast/spectral.hpp"
#include "nowcast/stats.hpp"
#include "nowcast/version.hpp"

namespace fs = std::filesystem;
using namespace nowcast;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitEmpty = 3;

constexpr std::size_t kBatch = 64;

/// Raised when a command finished but produced nothing useful.
struct EmptyResult : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Canonical key=value listing of the parameters that determine a command's
/// output. Worker counts and paths of output files are deliberately absent.
class Provenance {
 public:
  explicit Provenance(std::string command) : command_(std::move(command)) {}
  template <class T>
  Provenance& add(const std::string& key, const T& value) {
    std::ostringstream os;
    if constexpr (std::is_floating_point_v<T>)
      os << format_double(value);
    else
      os << value;
    text_ += key + "=" + os.str() + "\n";
    return *this;
  }
  template <class T>
  Provenance& add_list(const std::string& key, const std::vector<T>& values) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) joined += ",";
      if constexpr (std::is_floating_point_v<T>)
        joined += format_double(values[i]);
      else
        joined += std::to_string(values[i]);
    }
    return add(key, joined);
  }
  std::string header() const {
    return "nowcast " + std::string(kVersion) + " " + command_ + " config=" + hex64(fnv1a64(command_ + "\n" + text_));
  }

 private:
  std::string command_;
  std::string text_;
};

fs::path output_path(const std::string& dir, const std::string& name) {
  fs::path p = fs::path(dir) / name;  // an absolute name replaces dir
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
  }
  return p;
}

/// Manifest sources are stored relative to the manifest's directory.
std::string relative_source(const fs::path& source, const fs::path& manifest) {
  const auto src = fs::absolute(source).lexically_normal();
  const auto base = fs::absolute(manifest).parent_path().lexically_normal();
  auto rel = src.lexically_relative(base);
  return rel.empty() ? src.string() : rel.generic_string();
}

class SourceCache {
 public:
  SourceCache(const std::vector<ManifestRecord>& records, const std::string& manifest_path) {
    const auto base = fs::path(manifest_path).parent_path();
    for (const auto& r : records) {
      if (seqs_.count(r.source)) continue;
      fs::path p(r.source);
      if (p.is_relative()) p = base / p;
      seqs_.emplace(r.source, read_rgf(p.string()));
    }
  }

  const RadarSequence& get(const std::string& source) const { return seqs_.at(source); }

  Example example(const ManifestRecord& r) const {
    auto ex = extract_crop(get(r.source), r.t0, r.y0, r.x0, r.context, r.targets, r.h, r.w);
    ex.inclusion_probability = r.q;
    return ex;
  }

 private:
  std::map<std::string, RadarSequence> seqs_;
};

std::vector<ManifestRecord> load_manifest(const std::string& path) {
  auto records = read_manifest(path);
  if (records.empty()) throw EmptyResult("manifest '" + path + "' has no examples");
  return records;
}

/// Runs body(i) for every index of a batch and rethrows the failure with
/// the lowest index, tagged with its example number.
template <class Body>
void run_batch(std::size_t begin, std::size_t count, unsigned workers, Body&& body) {
  std::vector<std::exception_ptr> failures(count);
  parallel_for(count, workers, [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < count; ++i)
    if (failures[i]) {
      std::cerr << "example " << begin + i << ": ";
      std::rethrow_exception(failures[i]);
    }
}

std::vector<double> read_numbers(const std::string& path) {
  std::string text = read_file(path);
  for (char& c : text)
    if (c == ',') c = ' ';
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw FormatError(path + ": not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

// --- dataset synth -----------------------------------------------------------

struct SynthOptions {
  std::size_t events = 24;
  std::size_t frames = 24;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t blobs = 6;
  double intensity = 12.0;
  int max_speed = 2;
  double growth = 0.0;
  std::int64_t start = 1546819200;  // Monday 2019-01-07 00:00 UTC
  std::int64_t spacing = 7 * 86400;
  std::int64_t interval = 300;
  std::uint64_t seed = 0;
  std::string prefix = "event";
  std::string out_dir = ".";
};

int run_synth(const SynthOptions& o) {
  if (o.max_speed < 1) throw ConfigError("dataset synth: --max-speed must be >= 1");
  for (std::size_t e = 0; e < o.events; ++e) {
    KeyedRng rng{o.seed, e, 1};
    int vy = 0, vx = 0;
    const auto span = static_cast<std::uint64_t>(2 * o.max_speed + 1);
    while (vy == 0 && vx == 0) {
      vy = static_cast<int>(rng.below(span)) - o.max_speed;
      vx = static_cast<int>(rng.below(span)) - o.max_speed;
    }
    SyntheticEventParams p;
    p.frames = o.frames;
    p.height = o.height;
    p.width = o.width;
    p.blobs = o.blobs;
    p.velocity_y = vy;
    p.velocity_x = vx;
    p.intensity = o.intensity;
    p.growth = o.growth;
    p.start_time = o.start + static_cast<std::int64_t>(e) * o.spacing;
    p.interval = o.interval;
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03zu.rgf", o.prefix.c_str(), e);
    const auto path = output_path(o.out_dir, name);
    write_rgf(path.string(), synthetic_event(p, hash_key({o.seed, e})));
    std::cout << path.string() << '\t' << vy << '\t' << vx << '\n';
  }
  return kExitOk;
}

// --- dataset build -----------------------------------------------------------

struct BuildOptions {
  std::vector<std::string> inputs;
  std::string preset = "uk-test";
  std::string mode;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out = "manifest.tsv";
  std::string out_dir = ".";
  SamplingParams params;
};

SamplingParams preset_params(const std::string& name) {
  static const std::map<std::string, std::pair<RadarDataset, DataSplit>> presets = {
      {"uk-train", {RadarDataset::uk, DataSplit::train}},  {"uk-validation", {RadarDataset::uk, DataSplit::validation}},
      {"uk-test", {RadarDataset::uk, DataSplit::test}},    {"us-train", {RadarDataset::us, DataSplit::train}},
      {"us-validation", {RadarDataset::us, DataSplit::validation}}, {"us-test", {RadarDataset::us, DataSplit::test}},
  };
  auto it = presets.find(name);
  if (it == presets.end()) throw ConfigError("unknown preset '" + name + "'");
  return sampling_preset(it->second.first, it->second.second);
}

int run_build(const BuildOptions& o) {
  const auto& p = o.params;
  p.validate();
  const SamplingMode mode = o.mode == "train" ? SamplingMode::train : SamplingMode::eval;
  std::vector<RadarSequence> sources;
  sources.reserve(o.inputs.size());
  for (const auto& in : o.inputs) sources.push_back(read_rgf(in));

  const auto plan = plan_subsampled_dataset(sources, p, mode, o.seed, o.workers);
  const auto manifest = output_path(o.out_dir, o.out);
  std::vector<ManifestRecord> records;
  records.reserve(plan.crops.size());
  for (const auto& c : plan.crops)
    records.push_back({relative_source(o.inputs[c.source], manifest), c.origin.t0, c.origin.y0, c.origin.x0, p.height,
                       p.width, p.context_frames, p.target_frames(), c.q});
  write_manifest(manifest.string(), records);

  const auto& s = plan.summary;
  std::cout << "candidates " << s.candidates << "\naccepted " << s.accepted << "\nremoved_masked " << s.removed_masked
            << "\nexamples " << records.size() << "\nacceptance_rate "
            << format_double(s.candidates ? static_cast<double>(s.accepted) / static_cast<double>(s.candidates) : 0.0)
            << "\nmanifest " << manifest.string() << '\n';
  if (records.empty()) throw EmptyResult("no examples selected");
  return kExitOk;
}

// --- dataset stats -----------------------------------------------------------

struct StatsOptions {
  std::vector<std::string> inputs;
  std::string manifest;
  std::vector<double> edges = default_rain_bins();
  std::string out;
  std::string out_dir = ".";
};

int run_stats(const StatsOptions& o) {
  if (o.inputs.empty() == o.manifest.empty()) throw ConfigError("dataset stats: give exactly one of --input or --manifest");
  RainfallHistogram hist(o.edges);
  Provenance prov("dataset stats");
  prov.add_list("edges", o.edges);
  if (!o.manifest.empty()) {
    const auto records = load_manifest(o.manifest);
    const SourceCache cache(records, o.manifest);
    for (const auto& r : records) {
      const auto ex = cache.example(r);
      for (std::size_t t = 0; t < ex.total_frames(); ++t) hist.add(ex.frame(t));
    }
  } else {
    for (const auto& in : o.inputs)
      for (const auto& f : read_rgf(in).frames()) hist.add(f);
  }
  const auto dist = hist.result();
  const auto pct = dist.percentages();
  const auto labels = dist.labels();
  std::ostringstream os;
  os << "# " << prov.header() << "\nbin,count,percent\n";
  for (std::size_t b = 0; b < pct.size(); ++b)
    os << '"' << labels[b] << "\"," << dist.counts[b] << ',' << format_double(pct[b]) << '\n';
  std::cout << os.str();
  if (!o.out.empty()) write_file(output_path(o.out_dir, o.out).string(), os.str());
  return kExitOk;
}

// --- baseline run ------------------------------------------------------------

struct BaselineOptions {
  std::string manifest;
  std::string method = "lagrangian";
  std::string base = "lagrangian";
  std::size_t members = 20;
  double noise_sigma = 1.0;
  std::size_t length_scale = 4;
  int max_shift = 4;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out = "forecasts.rge";
  std::string out_dir = ".";
};

EnsembleForecast baseline_forecast(const BaselineOptions& o, const Example& ex, std::size_t index) {
  const auto n = ex.targets.size();
  if (o.method == "eulerian") return eulerian_persistence(ex.context, n);
  if (o.method == "lagrangian") return lagrangian_persistence(ex.context, n, o.max_shift);
  if (o.method == "truth") return EnsembleForecast({ex.targets});
  // perturbed
  const auto base = o.base == "eulerian" ? eulerian_persistence(ex.context, n) : lagrangian_persistence(ex.context, n, o.max_shift);
  return perturbed_ensemble(base.member(0), o.members, o.noise_sigma, o.length_scale, hash_key({o.seed, index}));
}

int run_baseline(const BaselineOptions& o) {
  const auto records = load_manifest(o.manifest);
  const SourceCache cache(records, o.manifest);
  const auto path = output_path(o.out_dir, o.out);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  std::size_t members = 0;
  for (std::size_t begin = 0; begin < records.size(); begin += kBatch) {
    const std::size_t count = std::min(kBatch, records.size() - begin);
    std::vector<std::string> encoded(count);
    run_batch(begin, count, o.workers, [&](std::size_t i) {
      const auto fc = baseline_forecast(o, cache.example(records[begin + i]), begin + i);
      append_rge(encoded[i], fc);
      if (begin + i == 0) members = fc.size();
    });
    for (const auto& e : encoded) out.write(e.data(), static_cast<std::streamsize>(e.size()));
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
  std::cout << "method " << o.method << "\nexamples " << records.size() << "\nmembers " << members << "\nforecasts "
            << path.string() << '\n';
  return kExitOk;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateOptions {
  std::string manifest;
  std::string forecasts;
  std::vector<double> thresholds{1.0, 4.0, 8.0};
  std::vector<std::size_t> scales{1, 4, 16};
  std::size_t window = 64;
  double spacing_km = 1.0;
  std::string crps = "fair";
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out_dir = ".";
};

int run_evaluate(const EvaluateOptions& o) {
  const auto records = load_manifest(o.manifest);
  const SourceCache cache(records, o.manifest);

  EvalConfig cfg;
  cfg.thresholds = o.thresholds;
  cfg.scales = o.scales;
  cfg.window = o.window;
  cfg.spacing_km = o.spacing_km;
  cfg.seed = o.seed;
  cfg.crps = o.crps == "empirical" ? CrpsEstimator::empirical : CrpsEstimator::fair;
  cfg.interval = cache.get(records[0].source).interval();
  for (const auto& r : records)
    if (cache.get(r.source).interval() != cfg.interval)
      throw ConfigError("evaluate: sources differ in frame interval ('" + r.source + "')");

  RgeReader reader(o.forecasts);
  std::optional<Evaluation> eval;
  std::vector<ExampleSummary> summaries(records.size());
  for (std::size_t begin = 0; begin < records.size(); begin += kBatch) {
    const std::size_t count = std::min(kBatch, records.size() - begin);
    std::vector<EnsembleForecast> fcs(count);
    for (auto& fc : fcs)
      if (!reader.next(fc))
        throw FormatError(o.forecasts + ": holds " + std::to_string(reader.records_read()) +
                          " forecasts, manifest has " + std::to_string(records.size()) + " examples");
    if (!eval) eval.emplace(cfg, records[0].targets, fcs[0].size());
    std::vector<EvalPartial> partials(count);
    run_batch(begin, count, o.workers, [&](std::size_t i) {
      const auto& r = records[begin + i];
      const auto ex = cache.example(r);
      auto& s = summaries[begin + i];
      partials[i] = eval->score(ex, fcs[i], begin + i, &s);
      s.timestamp = cache.get(r.source).timestamps()[r.t0 + r.context - 1];
    });
    for (const auto& p : partials) eval->merge(p);
  }
  EnsembleForecast extra;
  if (reader.next(extra))
    throw FormatError(o.forecasts + ": holds more forecasts than the manifest's " + std::to_string(records.size()) +
                      " examples");

  Provenance prov("evaluate");
  prov.add_list("thresholds", cfg.thresholds)
      .add_list("scales", cfg.scales)
      .add("window", cfg.window)
      .add("spacing_km", cfg.spacing_km)
      .add("crps", o.crps)
      .add("seed", cfg.seed)
      .add("manifest_digest", hex64(fnv1a64(encode_manifest(records))));
  const auto header = prov.header();
  write_file(output_path(o.out_dir, "metrics.csv").string(), eval->metrics_csv(header));
  write_file(output_path(o.out_dir, "reliability.csv").string(), eval->reliability_csv(header));
  write_file(output_path(o.out_dir, "rank_histogram.csv").string(), eval->rank_histogram_csv(header));
  write_file(output_path(o.out_dir, "scores.csv").string(), eval->scores_csv(summaries, header));
  std::cout << "examples " << records.size() << "\nmembers " << eval->members() << "\nleads " << eval->leads()
            << "\noutput " << fs::path(o.out_dir).string() << '\n';
  return kExitOk;
}

// --- compare -----------------------------------------------------------------

struct CompareOptions {
  std::string a;
  std::string b;
  std::string metric = "csi_1";
  std::uint64_t permutations = 1000000;
  std::uint64_t seed = 0;
  std::string parity = "even";
  double alpha = 0.05;
  unsigned workers = 1;
  std::string out;
  std::string out_dir = ".";
};

struct ScoreTable {
  std::vector<std::int64_t> timestamps;
  std::vector<double> q;
  std::vector<double> values;
};

ScoreTable read_scores(const std::string& path, const std::string& metric) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::string> header;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  ScoreTable t;
  std::size_t lineno = 0, c_ts = 0, c_q = 0, c_m = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line);
    if (header.empty()) {
      header = fields;
      auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
          if (header[i] == name) return i;
        throw FormatError(path + ": no column '" + name + "'");
      };
      c_ts = col("timestamp");
      c_q = col("q");
      c_m = col(metric);
      continue;
    }
    if (fields.size() != header.size())
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " fields");
    try {
      t.timestamps.push_back(std::stoll(fields[c_ts]));
      t.q.push_back(std::stod(fields[c_q]));
      t.values.push_back(std::strtod(fields[c_m].c_str(), nullptr));
    } catch (const std::logic_error&) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  if (header.empty()) throw FormatError(path + ": no header line");
  return t;
}

int run_compare(const CompareOptions& o) {
  if (o.permutations < 1) throw ArgumentError("compare: --permutations must be >= 1");
  const auto keep = o.parity == "odd" ? WeekParity::odd : WeekParity::even;
  const auto ta = read_scores(o.a, o.metric);
  const auto tb = read_scores(o.b, o.metric);
  const auto ua = weekly_units(ta.timestamps, ta.values, ta.q, keep);
  const auto ub = weekly_units(tb.timestamps, tb.values, tb.q, keep);
  const auto sample = pair_units(ua, ub);
  const auto result = paired_permutation_test(sample, o.permutations, o.seed, o.workers);

  // Lower is better for error metrics, higher for skill scores.
  const bool higher_better = o.metric.rfind("csi", 0) == 0 || o.metric.rfind("fss", 0) == 0;
  std::uint64_t a_better = 0;
  for (const auto& u : sample.units)
    if (higher_better ? u.score_a > u.score_b : u.score_a < u.score_b) ++a_better;
  const auto ci = clopper_pearson(a_better, sample.size(), o.alpha);

  Provenance prov("compare");
  prov.add("metric", o.metric).add("permutations", o.permutations).add("seed", o.seed).add("parity", o.parity).add(
      "alpha", o.alpha);
  std::ostringstream os;
  os << "# " << prov.header() << "\nweek,examples_a,examples_b,score_a,score_b,difference\n";
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& u = sample.units[i];
    os << u.id << ',' << ua[i].examples << ',' << ub[i].examples << ',' << format_double(u.score_a) << ','
       << format_double(u.score_b) << ',' << format_double(u.score_a - u.score_b) << '\n';
  }
  os << "\nmetric=" << o.metric << "\nunits=" << sample.size() << "\nmean_difference=" << format_double(result.mean_difference)
     << "\np_value=" << format_double(result.p_value) << "\npermutations=" << result.permutations
     << "\nat_least_as_extreme=" << result.at_least_as_extreme << "\na_better=" << a_better << '/' << sample.size()
     << "\na_better_interval=" << format_double(ci.lo) << ',' << format_double(ci.hi) << "\nalpha=" << format_double(o.alpha)
     << '\n';
  std::cout << os.str();
  if (!o.out.empty()) write_file(output_path(o.out_dir, o.out).string(), os.str());
  return kExitOk;
}

// --- psd ---------------------------------------------------------------------

struct PsdOptions {
  std::vector<std::string> model;
  std::vector<std::string> obs;
  double spacing_km = 1.0;
  std::string out = "psd.csv";
  std::string out_dir = ".";
};

int run_psd(const PsdOptions& o) {
  if (o.model.size() != o.obs.size())
    throw ConfigError("psd: " + std::to_string(o.model.size()) + " model files but " + std::to_string(o.obs.size()) +
                      " observation files");
  std::vector<RadarSequence> model, obs;
  for (std::size_t i = 0; i < o.model.size(); ++i) {
    model.push_back(read_rgf(o.model[i]));
    obs.push_back(read_rgf(o.obs[i]));
    if (model.back().length() != obs.back().length())
      throw ConfigError("psd: '" + o.model[i] + "' and '" + o.obs[i] + "' differ in frame count");
  }
  Provenance prov("psd");
  prov.add("spacing_km", o.spacing_km);
  std::ostringstream os;
  os << "# " << prov.header() << "\nlead_time_minutes,ring,wavelength_km,power,source\n";
  std::size_t skipped = 0, written = 0;
  std::size_t leads = model[0].length();
  for (const auto& m : model) leads = std::min(leads, m.length());
  for (std::size_t t = 0; t < leads; ++t) {
    std::vector<RadarField> mf, of;
    for (std::size_t i = 0; i < model.size(); ++i) {
      const auto& a = model[i].frame(t);
      const auto& b = obs[i].frame(t);
      if (!a.fully_valid() || !b.fully_valid()) {
        std::cerr << "warning: skipping masked frame " << t << " of pair " << i << '\n';
        ++skipped;
        continue;
      }
      mf.push_back(a);
      of.push_back(b);
    }
    if (mf.empty()) continue;
    const auto cmp = psd_compare(mf, of, o.spacing_km);
    const double minutes = static_cast<double>((t + 1) * static_cast<std::size_t>(model[0].interval())) / 60.0;
    for (const auto* curve : {&cmp.model, &cmp.obs})
      for (const auto& r : curve->rings)
        os << format_double(minutes) << ',' << r.index << ',' << format_double(r.wavelength_km) << ','
           << format_double(r.mean_power) << ',' << (curve == &cmp.model ? "model" : "obs") << '\n';
    ++written;
  }
  std::cerr << "skipped_frames " << skipped << '\n';
  if (written == 0) throw EmptyResult("psd: every frame was masked");
  const auto path = output_path(o.out_dir, o.out);
  write_file(path.string(), os.str());
  std::cout << "leads " << written << "\nskipped_frames " << skipped << "\noutput " << path.string() << '\n';
  return kExitOk;
}

// --- loss eval ---------------------------------------------------------------

struct LossOptions {
  std::string samples;
  std::string target;
  std::string real_scores;
  std::string fake_scores;
  std::string spatial_fake;
  std::string temporal_fake;
  double lambda = kDefaultRegularizerScale;
  std::string rain_weight = "clipped";
};

int run_loss(const LossOptions& o) {
  const bool want_reg = !o.samples.empty() || !o.target.empty();
  if (want_reg && (o.samples.empty() || o.target.empty()))
    throw ConfigError("loss eval: --samples and --target go together");
  if (!want_reg && o.real_scores.empty() && o.fake_scores.empty())
    throw ConfigError("loss eval: nothing to evaluate");
  std::optional<double> reg;
  if (want_reg) {
    auto set = read_rge_set(o.samples);
    if (set.size() != 1) throw FormatError(o.samples + ": expected exactly one forecast record");
    const auto target = read_rgf(o.target);
    const auto form = o.rain_weight == "max" ? RainWeightForm::literal_max : RainWeightForm::clipped;
    reg = grid_cell_regularizer(GeneratorSamples{set[0].members()}, target.frames(), form);
    std::cout << "regularizer=" << format_double(*reg) << '\n';
  }
  if (!o.real_scores.empty() || !o.fake_scores.empty()) {
    if (o.real_scores.empty() || o.fake_scores.empty())
      throw ConfigError("loss eval: --real-scores and --fake-scores go together");
    std::cout << "discriminator_loss="
              << format_double(hinge_discriminator_loss(read_numbers(o.real_scores), read_numbers(o.fake_scores))) << '\n';
  }
  if (!o.spatial_fake.empty() || !o.temporal_fake.empty()) {
    if (o.spatial_fake.empty() || o.temporal_fake.empty() || !reg)
      throw ConfigError("loss eval: the generator objective needs --spatial-fake, --temporal-fake, --samples and --target");
    std::cout << "generator_objective="
              << format_double(generator_objective(read_numbers(o.spatial_fake), read_numbers(o.temporal_fake), *reg,
                                                   o.lambda))
              << '\n';
  }
  return kExitOk;
}

void add_out_dir(CLI::App* cmd, std::string& dir) {
  cmd->add_option("--out-dir", dir, "Directory for outputs")->envname("NOWCAST_OUTPUT_DIR")->capture_default_str();
}

void add_workers(CLI::App* cmd, unsigned& workers) {
  cmd->add_option("--workers", workers, "Worker threads (results do not depend on this)")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Precipitation nowcast verification toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
  app.require_subcommand(1);

  std::function<int()> action;

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Build and inspect datasets");
  dataset->require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = dataset->add_subcommand("synth", "Write synthetic advecting-blob radar events");
  synth_cmd->add_option("--events", synth.events)->capture_default_str();
  synth_cmd->add_option("--frames", synth.frames)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--height", synth.height)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--width", synth.width)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--blobs", synth.blobs)->capture_default_str();
  synth_cmd->add_option("--intensity", synth.intensity, "Peak rain rate, mm/hr")->capture_default_str();
  synth_cmd->add_option("--max-speed", synth.max_speed, "Largest velocity component, cells per frame")->capture_default_str();
  synth_cmd->add_option("--growth", synth.growth, "Per-frame log growth rate")->capture_default_str();
  synth_cmd->add_option("--start", synth.start, "Unix time of the first event")->capture_default_str();
  synth_cmd->add_option("--event-spacing", synth.spacing, "Seconds between event starts")->capture_default_str();
  synth_cmd->add_option("--interval", synth.interval, "Seconds between frames")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--prefix", synth.prefix)->capture_default_str();
  add_out_dir(synth_cmd, synth.out_dir);
  synth_cmd->callback([&] { action = [&] { return run_synth(synth); }; });

  BuildOptions build;
  auto* build_cmd = dataset->add_subcommand("build", "Importance-sample crops into a manifest");
  build_cmd->add_option("--input", build.inputs, "RGF1 source files")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--preset", build.preset, "uk|us-train|validation|test")->capture_default_str();
  build_cmd->add_option("--mode", build.mode, "train (random offsets) or eval; defaults from the preset")
      ->check(CLI::IsMember({"train", "eval"}));
  auto* o_sat = build_cmd->add_option("--saturation", build.params.saturation, "s, mm/hr");
  auto* o_mul = build_cmd->add_option("--multiplier", build.params.multiplier, "m");
  auto* o_qmin = build_cmd->add_option("--q-min", build.params.q_min);
  auto* o_so = build_cmd->add_option("--spatial-offset", build.params.spatial_offset, "cells");
  auto* o_to = build_cmd->add_option("--temporal-offset", build.params.temporal_offset, "seconds");
  auto* o_t = build_cmd->add_option("--frames", build.params.total_frames, "T = M + N");
  auto* o_m = build_cmd->add_option("--context", build.params.context_frames, "M");
  auto* o_h = build_cmd->add_option("--height", build.params.height);
  auto* o_w = build_cmd->add_option("--width", build.params.width);
  build_cmd->add_option("--seed", build.seed)->capture_default_str();
  build_cmd->add_option("--out", build.out, "Manifest file name")->capture_default_str();
  add_workers(build_cmd, build.workers);
  add_out_dir(build_cmd, build.out_dir);
  build_cmd->callback([&] {
    // Preset first, then explicit flags or config keys on top.
    auto chosen = preset_params(build.preset);
    const auto given = build.params;
    if (o_sat->count()) chosen.saturation = given.saturation;
    if (o_mul->count()) chosen.multiplier = given.multiplier;
    if (o_qmin->count()) chosen.q_min = given.q_min;
    if (o_so->count()) chosen.spatial_offset = given.spatial_offset;
    if (o_to->count()) chosen.temporal_offset = given.temporal_offset;
    if (o_t->count()) chosen.total_frames = given.total_frames;
    if (o_m->count()) chosen.context_frames = given.context_frames;
    if (o_h->count()) chosen.height = given.height;
    if (o_w->count()) chosen.width = given.width;
    if (build.mode.empty()) build.mode = chosen.random_offset ? "train" : "eval";
    chosen.random_offset = build.mode == "train";
    build.params = chosen;
    action = [&] { return run_build(build); };
  });

  StatsOptions stats;
  auto* stats_cmd = dataset->add_subcommand("stats", "Rainfall distribution of sources or a manifest");
  stats_cmd->add_option("--input", stats.inputs, "RGF1 source files")->check(CLI::ExistingFile);
  stats_cmd->add_option("--manifest", stats.manifest)->check(CLI::ExistingFile);
  stats_cmd->add_option("--edges", stats.edges, "Bin edges, mm/hr")->delimiter(',')->capture_default_str();
  stats_cmd->add_option("--out", stats.out, "Also write the table to this file");
  add_out_dir(stats_cmd, stats.out_dir);
  stats_cmd->callback([&] { action = [&] { return run_stats(stats); }; });

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Reference forecasts");
  baseline->require_subcommand(1);
  BaselineOptions base;
  auto* base_cmd = baseline->add_subcommand("run", "Write baseline forecasts for every manifest example");
  base_cmd->add_option("--manifest", base.manifest)->required()->check(CLI::ExistingFile);
  base_cmd->add_option("--method", base.method)
      ->check(CLI::IsMember({"eulerian", "lagrangian", "perturbed", "truth"}))
      ->capture_default_str();
  base_cmd->add_option("--base", base.base, "Deterministic forecast the perturbed ensemble is built around")
      ->check(CLI::IsMember({"eulerian", "lagrangian"}))
      ->capture_default_str();
  base_cmd->add_option("--members", base.members, "Ensemble size for --method perturbed")
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000}))
      ->capture_default_str();
  base_cmd->add_option("--noise-sigma", base.noise_sigma, "mm/hr")->check(CLI::NonNegativeNumber)->capture_default_str();
  base_cmd->add_option("--length-scale", base.length_scale, "Noise correlation length, cells")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  base_cmd->add_option("--max-shift", base.max_shift, "Motion search radius, cells per frame")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  base_cmd->add_option("--seed", base.seed)->capture_default_str();
  base_cmd->add_option("--out", base.out, "Forecast set file name")->capture_default_str();
  add_workers(base_cmd, base.workers);
  add_out_dir(base_cmd, base.out_dir);
  base_cmd->callback([&] { action = [&] { return run_baseline(base); }; });

  // evaluate
  EvaluateOptions ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score a forecast set against its manifest");
  ev_cmd->add_option("--manifest", ev.manifest)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--forecasts", ev.forecasts)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--thresholds", ev.thresholds, "mm/hr")->delimiter(',')->capture_default_str();
  ev_cmd->add_option("--scales", ev.scales, "Neighborhood sizes, cells")->delimiter(',')->capture_default_str();
  ev_cmd->add_option("--window", ev.window, "Side of the central scoring window, cells")->capture_default_str();
  ev_cmd->add_option("--spacing-km", ev.spacing_km)->check(CLI::PositiveNumber)->capture_default_str();
  ev_cmd->add_option("--crps", ev.crps, "fair (unbiased) or empirical (plug-in CDF) estimator")
      ->check(CLI::IsMember({"fair", "empirical"}))
      ->capture_default_str();
  ev_cmd->add_option("--seed", ev.seed, "Rank-histogram tie breaking")->capture_default_str();
  add_workers(ev_cmd, ev.workers);
  add_out_dir(ev_cmd, ev.out_dir);
  ev_cmd->callback([&] { action = [&] { return run_evaluate(ev); }; });

  // compare
  CompareOptions cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Paired permutation test over weekly units");
  cmp_cmd->add_option("--a", cmp.a, "scores.csv of method A")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--b", cmp.b, "scores.csv of method B")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--metric", cmp.metric, "Column of scores.csv")->capture_default_str();
  cmp_cmd->add_option("--permutations", cmp.permutations)->capture_default_str();
  cmp_cmd->add_option("--seed", cmp.seed)->capture_default_str();
  cmp_cmd->add_option("--parity", cmp.parity, "Which weeks to keep")
      ->check(CLI::IsMember({"even", "odd"}))
      ->capture_default_str();
  cmp_cmd->add_option("--alpha", cmp.alpha, "Interval level is 1 - alpha")->capture_default_str();
  cmp_cmd->add_option("--out", cmp.out, "Also write the report to this file");
  add_workers(cmp_cmd, cmp.workers);
  add_out_dir(cmp_cmd, cmp.out_dir);
  cmp_cmd->callback([&] { action = [&] { return run_compare(cmp); }; });

  // psd
  PsdOptions psd;
  auto* psd_cmd = app.add_subcommand("psd", "Radially averaged power spectra of model and observed frames");
  psd_cmd->add_option("--model", psd.model, "RGF1 files")->required()->check(CLI::ExistingFile);
  psd_cmd->add_option("--obs", psd.obs, "RGF1 files, paired with --model in order")->required()->check(CLI::ExistingFile);
  psd_cmd->add_option("--spacing-km", psd.spacing_km)->check(CLI::PositiveNumber)->capture_default_str();
  psd_cmd->add_option("--out", psd.out)->capture_default_str();
  add_out_dir(psd_cmd, psd.out_dir);
  psd_cmd->callback([&] { action = [&] { return run_psd(psd); }; });

  // loss
  auto* loss = app.add_subcommand("loss", "Objective functions");
  loss->require_subcommand(1);
  LossOptions lo;
  auto* loss_cmd = loss->add_subcommand("eval", "Evaluate the regularizer, hinge losses and generator objective");
  loss_cmd->add_option("--samples", lo.samples, "RGE1 file with one record of generator samples")->check(CLI::ExistingFile);
  loss_cmd->add_option("--target", lo.target, "RGF1 file with the target frames")->check(CLI::ExistingFile);
  loss_cmd->add_option("--real-scores", lo.real_scores, "Discriminator scores of real data")->check(CLI::ExistingFile);
  loss_cmd->add_option("--fake-scores", lo.fake_scores, "Discriminator scores of generated data")->check(CLI::ExistingFile);
  loss_cmd->add_option("--spatial-fake", lo.spatial_fake)->check(CLI::ExistingFile);
  loss_cmd->add_option("--temporal-fake", lo.temporal_fake)->check(CLI::ExistingFile);
  loss_cmd->add_option("--lambda", lo.lambda)->check(CLI::NonNegativeNumber)->capture_default_str();
  loss_cmd->add_option("--rain-weight", lo.rain_weight, "clipped: min(y+1, 24); max: max(y+1, 24)")
      ->check(CLI::IsMember({"clipped", "max"}))
      ->capture_default_str();
  loss_cmd->callback([&] { action = [&] { return run_loss(lo); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action();
  } catch (const EmptyResult& e) {
    std::cerr << "warning: " << e.what() << '\n';
    return kExitEmpty;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
