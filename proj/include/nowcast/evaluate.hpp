#pragma once

// Dataset-level evaluation: scores every example independently into a
// partial result, then merges partials in example order. Because the merge
// order never depends on how examples were distributed over workers, the
// final numbers are bit-identical for any worker count.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/grid.hpp"
#include "nowcast/io.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/verify_ensemble.hpp"
#include "nowcast/verify_point.hpp"
#include "nowcast/verify_pooled.hpp"

namespace nowcast {

struct EvalConfig {
  std::vector<double> thresholds{1.0, 4.0, 8.0};  ///< mm/hr
  std::vector<std::size_t> scales{1, 4, 16};      ///< K, cells
  std::size_t window = 64;                         ///< side of the central scoring window
  double spacing_km = 1.0;
  std::int64_t interval = 300;  ///< seconds between lead times
  std::uint64_t seed = 0;       ///< rank-histogram tie breaking
  CrpsEstimator crps = CrpsEstimator::fair;

  void validate() const {
    if (thresholds.empty()) throw ConfigError("evaluate: no thresholds");
    for (double t : thresholds)
      if (!(t > 0.0)) throw ConfigError("evaluate: thresholds must be > 0");
    for (auto k : scales)
      if (k < 1 || k > window) throw ConfigError("evaluate: scale " + std::to_string(k) + " outside [1, window]");
    if (window < 1) throw ConfigError("evaluate: window must be >= 1");
    if (!(spacing_km > 0.0)) throw ConfigError("evaluate: spacing must be > 0");
    if (interval < 1) throw ConfigError("evaluate: interval must be >= 1 s");
  }
};

/// Everything accumulated for one lead time.
struct LeadScores {
  PointAccumulator point;
  std::vector<CsiCounts> csi;  // per threshold
  WeightedMean crps;
  std::vector<std::vector<FssAccumulator>> fss;  // [scale][threshold]
  std::vector<WeightedMean> crps_avg_pool;       // per scale
  std::vector<WeightedMean> crps_max_pool;       // per scale

  LeadScores() = default;
  LeadScores(std::size_t thresholds, std::size_t scales)
      : csi(thresholds),
        fss(scales, std::vector<FssAccumulator>(thresholds)),
        crps_avg_pool(scales),
        crps_max_pool(scales) {}

  LeadScores& operator+=(const LeadScores& o) {
    point.merge(o.point);
    for (std::size_t i = 0; i < csi.size(); ++i) csi[i] += o.csi[i];
    crps += o.crps;
    for (std::size_t k = 0; k < fss.size(); ++k) {
      for (std::size_t i = 0; i < fss[k].size(); ++i) fss[k][i] += o.fss[k][i];
      crps_avg_pool[k] += o.crps_avg_pool[k];
      crps_max_pool[k] += o.crps_max_pool[k];
    }
    return *this;
  }
};

/// Partial result for one example (or, after merging, for a dataset).
struct EvalPartial {
  std::vector<LeadScores> leads;
  std::vector<ReliabilityAccumulator> reliability;  // per threshold, all leads
  RankHistogram ranks;

  EvalPartial& operator+=(const EvalPartial& o) {
    for (std::size_t l = 0; l < leads.size(); ++l) leads[l] += o.leads[l];
    for (std::size_t i = 0; i < reliability.size(); ++i) reliability[i] += o.reliability[i];
    ranks += o.ranks;
    return *this;
  }
};

/// Per-example summary used for significance testing across weeks.
struct ExampleSummary {
  std::size_t index = 0;
  std::int64_t timestamp = 0;  ///< issue time (last context frame)
  double q = 1.0;
  double mse = std::numeric_limits<double>::quiet_NaN();
  double crps = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> csi;  // per threshold, NaN when undefined
};

namespace eval_detail {
template <class F>
double or_nan(F&& f) {
  try {
    return f();
  } catch (const UndefinedScoreError&) {
  } catch (const EmptyDataError&) {
  } catch (const DegenerateVarianceError&) {
  }
  return std::numeric_limits<double>::quiet_NaN();
}
}  // namespace eval_detail

class Evaluation {
 public:
  Evaluation(EvalConfig cfg, std::size_t leads, std::size_t members) : cfg_(std::move(cfg)), leads_(leads), members_(members) {
    cfg_.validate();
    if (leads_ < 1) throw ConfigError("evaluate: need at least one lead time");
    if (members_ < 1) throw ConfigError("evaluate: need at least one member");
    total_ = empty_partial();
  }

  const EvalConfig& config() const noexcept { return cfg_; }
  std::size_t leads() const noexcept { return leads_; }
  std::size_t members() const noexcept { return members_; }

  EvalPartial empty_partial() const {
    EvalPartial p;
    p.leads.assign(leads_, LeadScores(cfg_.thresholds.size(), cfg_.scales.size()));
    p.reliability.assign(cfg_.thresholds.size(), ReliabilityAccumulator(members_));
    p.ranks = RankHistogram(members_);
    return p;
  }

  /// Scores one example. Pure; safe to call concurrently.
  EvalPartial score(const Example& ex, const EnsembleForecast& fc, std::size_t index,
                    ExampleSummary* summary = nullptr) const {
    fc.check_matches(ex);
    if (fc.size() != members_)
      throw ConfigError("evaluate: example " + std::to_string(index) + " has " + std::to_string(fc.size()) +
                        " members, expected " + std::to_string(members_));
    if (ex.targets.size() != leads_)
      throw ConfigError("evaluate: example " + std::to_string(index) + " has " + std::to_string(ex.targets.size()) +
                        " lead times, expected " + std::to_string(leads_));
    if (!(ex.inclusion_probability > 0.0 && ex.inclusion_probability <= 1.0))
      throw InvalidWeightError("evaluate: example " + std::to_string(index) + " has invalid inclusion probability");

    const auto window = central_window(ex, cfg_.window);
    const double inv_q = 1.0 / ex.inclusion_probability;
    const double member_share = 1.0 / static_cast<double>(members_);
    const std::size_t nt = cfg_.thresholds.size();

    EvalPartial p = empty_partial();
    std::vector<double> ens(members_);
    std::vector<const RadarField*> lead_members(members_);

    for (std::size_t lead = 0; lead < leads_; ++lead) {
      const auto& obs = ex.targets[lead];
      auto& ls = p.leads[lead];
      for (std::size_t s = 0; s < members_; ++s) lead_members[s] = &fc.member(s)[lead];

      for (std::size_t r = window.row0; r < window.row0 + window.height; ++r)
        for (std::size_t c = window.col0; c < window.col0 + window.width; ++c) {
          if (!obs.valid(r, c)) continue;
          bool ok = true;
          for (std::size_t s = 0; s < members_ && ok; ++s) {
            if (!lead_members[s]->valid(r, c)) ok = false;
            else ens[s] = (*lead_members[s])(r, c);
          }
          if (!ok) continue;
          const double o = obs(r, c);
          const double wm = inv_q * member_share;
          for (std::size_t s = 0; s < members_; ++s) {
            ls.point.add(ens[s], o, wm);
            for (std::size_t i = 0; i < nt; ++i) ls.csi[i].add(ens[s], o, cfg_.thresholds[i], wm);
          }
          const double crps = members_ == 1 ? std::abs(ens[0] - o) : crps_ensemble(ens, o, cfg_.crps);
          ls.crps.add(crps, inv_q);
          for (std::size_t i = 0; i < nt; ++i) p.reliability[i].add(ens, o, cfg_.thresholds[i], inv_q);
          KeyedRng rng{cfg_.seed, index, r * ex.width() + c, lead};
          p.ranks.add_rank(observation_rank(ens, o, rng));
        }

      for (std::size_t k = 0; k < cfg_.scales.size(); ++k) {
        const auto nbs = enumerate_neighborhoods(ex, window, cfg_.scales[k], lead);
        for (std::size_t i = 0; i < nt; ++i) accumulate_fss(ls.fss[k][i], lead_members, obs, nbs, cfg_.thresholds[i]);
        accumulate_pooled_crps(ls.crps_avg_pool[k], lead_members, obs, nbs, Pooling::average, cfg_.crps);
        accumulate_pooled_crps(ls.crps_max_pool[k], lead_members, obs, nbs, Pooling::maximum, cfg_.crps);
      }
    }

    if (summary) {
      LeadScores all(nt, cfg_.scales.size());
      for (const auto& ls : p.leads) all += ls;
      summary->index = index;
      summary->q = ex.inclusion_probability;
      summary->mse = eval_detail::or_nan([&] { return all.point.mse(); });
      summary->crps = eval_detail::or_nan([&] { return all.crps.value(); });
      summary->csi.clear();
      for (std::size_t i = 0; i < nt; ++i) summary->csi.push_back(eval_detail::or_nan([&] { return csi(all.csi[i]); }));
    }
    return p;
  }

  /// Merge partials in example order.
  void merge(const EvalPartial& p) { total_ += p; }

  const EvalPartial& total() const noexcept { return total_; }

  double lead_minutes(std::size_t lead) const noexcept {
    return static_cast<double>((lead + 1) * static_cast<std::size_t>(cfg_.interval)) / 60.0;
  }

  /// metric,lead_time_minutes,threshold,scale_km,value,weight_sum
  std::string metrics_csv(const std::string& header_comment = {}) const {
    std::ostringstream os;
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "metric,lead_time_minutes,threshold,scale_km,value,weight_sum\n";
    const std::size_t nt = cfg_.thresholds.size();
    auto row = [&](const std::string& metric, const std::string& lead, std::optional<double> thr,
                   std::optional<double> scale_km, double value, double weight) {
      os << metric << ',' << lead << ',' << (thr ? format_double(*thr) : "") << ','
         << (scale_km ? format_double(*scale_km) : "") << ',' << format_double(value) << ',' << format_double(weight)
         << '\n';
    };
    LeadScores all(nt, cfg_.scales.size());
    for (const auto& ls : total_.leads) all += ls;
    for (std::size_t lead = 0; lead <= leads_; ++lead) {
      const bool overall = lead == leads_;
      const LeadScores& ls = overall ? all : total_.leads[lead];
      const std::string lt = overall ? "all" : format_double(lead_minutes(lead));
      const double pw = ls.point.weight_sum();
      row("mse", lt, {}, {}, eval_detail::or_nan([&] { return ls.point.mse(); }), pw);
      row("pcc", lt, {}, {}, eval_detail::or_nan([&] { return ls.point.pcc(); }), pw);
      for (std::size_t i = 0; i < nt; ++i) {
        const auto& c = ls.csi[i];
        row("csi", lt, cfg_.thresholds[i], {}, eval_detail::or_nan([&] { return csi(c); }), c.tp + c.fp + c.fn);
      }
      row("crps", lt, {}, {}, eval_detail::or_nan([&] { return ls.crps.value(); }), ls.crps.weight);
      for (std::size_t k = 0; k < cfg_.scales.size(); ++k) {
        const double km = static_cast<double>(cfg_.scales[k]) * cfg_.spacing_km;
        const auto& avg = ls.crps_avg_pool[k];
        const auto& mx = ls.crps_max_pool[k];
        row("crps_avg_pool", lt, {}, km, eval_detail::or_nan([&] { return avg.value(); }), avg.weight);
        row("crps_max_pool", lt, {}, km, eval_detail::or_nan([&] { return mx.value(); }), mx.weight);
        for (std::size_t i = 0; i < nt; ++i) {
          const auto& f = ls.fss[k][i];
          row("fss", lt, cfg_.thresholds[i], km, eval_detail::or_nan([&] { return f.fss(); }), f.weight_sum);
        }
      }
    }
    return os.str();
  }

  /// threshold,probability,f_pred,f_obs_given_pred,weight_sum
  std::string reliability_csv(const std::string& header_comment = {}) const {
    std::ostringstream os;
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "threshold,probability,f_pred,f_obs_given_pred,weight_sum\n";
    for (std::size_t i = 0; i < cfg_.thresholds.size(); ++i) {
      const auto& acc = total_.reliability[i];
      if (!(acc.weight_sum() > 0.0)) continue;
      const auto t = acc.table();
      for (std::size_t k = 0; k < t.probability.size(); ++k)
        os << format_double(cfg_.thresholds[i]) << ',' << format_double(t.probability[k]) << ','
           << format_double(t.f_pred[k]) << ','
           << (t.f_obs_given_pred[k] ? format_double(*t.f_obs_given_pred[k]) : "nan") << ','
           << format_double(t.bin_weight[k]) << '\n';
    }
    return os.str();
  }

  /// rank,count,frequency
  std::string rank_histogram_csv(const std::string& header_comment = {}) const {
    std::ostringstream os;
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "rank,count,frequency\n";
    const auto& h = total_.ranks;
    const auto total = h.total();
    for (std::size_t k = 0; k < h.counts().size(); ++k)
      os << k << ',' << h.counts()[k] << ','
         << (total ? format_double(static_cast<double>(h.counts()[k]) / static_cast<double>(total)) : "nan") << '\n';
    return os.str();
  }

  /// example,timestamp,q,mse,crps,csi_<t>...
  std::string scores_csv(const std::vector<ExampleSummary>& rows, const std::string& header_comment = {}) const {
    std::ostringstream os;
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "example,timestamp,q,mse,crps";
    for (double t : cfg_.thresholds) os << ",csi_" << format_double(t);
    os << '\n';
    for (const auto& r : rows) {
      os << r.index << ',' << r.timestamp << ',' << format_double(r.q) << ',' << format_double(r.mse) << ','
         << format_double(r.crps);
      for (double v : r.csi) os << ',' << format_double(v);
      os << '\n';
    }
    return os.str();
  }

 private:
  EvalConfig cfg_;
  std::size_t leads_;
  std::size_t members_;
  EvalPartial total_;
};

}  // namespace nowcast
