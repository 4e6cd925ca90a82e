#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "nowcast/verify_pooled.hpp"
#include "support.hpp"

using namespace nowcast;

namespace {

// Direct FSS over examples, written from the definitions without the
// library's neighbourhood helpers.
double fss_oracle(const std::vector<EnsembleForecast>& fcs, const std::vector<Example>& exs, double t, std::size_t k,
                  std::size_t side) {
  double num = 0.0, den = 0.0;
  const std::size_t stride = static_cast<std::size_t>(std::ceil(k / 4.0));
  for (std::size_t e = 0; e < exs.size(); ++e) {
    const auto& ex = exs[e];
    const std::size_t r0 = (ex.height() - side) / 2, c0 = (ex.width() - side) / 2;
    for (std::size_t lead = 0; lead < ex.targets.size(); ++lead)
      for (std::size_t r = r0; r + k <= r0 + side; r += stride)
        for (std::size_t c = c0; c + k <= c0 + side; c += stride) {
          bool masked = false;
          double po = 0.0, pf = 0.0;
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              const float o = ex.targets[lead](r + i, c + j);
              masked |= o < 0;
              po += o >= t;
              for (const auto& m : fcs[e].members()) {
                masked |= m[lead](r + i, c + j) < 0;
                pf += m[lead](r + i, c + j) >= t;
              }
            }
          if (masked) continue;
          po /= k * k;
          pf /= k * k * fcs[e].size();
          const double w = 1.0 / ex.inclusion_probability;
          num += w * (pf - po) * (pf - po);
          den += w * (pf * pf + po * po);
        }
  }
  return 1.0 - num / den;
}

}  // namespace

TEST(Neighborhoods, StrideAndCount) {
  EXPECT_EQ(neighborhood_stride(1), 1u);
  EXPECT_EQ(neighborhood_stride(4), 1u);
  EXPECT_EQ(neighborhood_stride(5), 2u);
  EXPECT_EQ(neighborhood_stride(16), 4u);
  const CellWindow w{0, 0, 64, 64};
  EXPECT_EQ(enumerate_neighborhoods(w, 1).size(), 64u * 64u);
  EXPECT_EQ(enumerate_neighborhoods(w, 4).size(), 61u * 61u);
  EXPECT_THROW(enumerate_neighborhoods(w, 65), ConfigError);
}

TEST(Neighborhoods, CountMatchesBruteForce) {
  KeyedRng rng{50};
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t h = 1 + rng.below(40), w = 1 + rng.below(40);
    const std::size_t k = 1 + rng.below(std::min(h, w));
    const std::size_t stride = static_cast<std::size_t>(std::ceil(k / 4.0));
    std::size_t n = 0;
    for (std::size_t r = 0; r + k <= h; ++r)
      for (std::size_t c = 0; c + k <= w; ++c) n += (r % stride == 0 && c % stride == 0);
    EXPECT_EQ(enumerate_neighborhoods(CellWindow{3, 5, h, w}, k).size(), n);
  }
}

TEST(Neighborhoods, MaskedNeighborhoodGetsZeroWeight) {
  Example ex;
  ex.context = FrameStack(1, RadarField(8, 8, 1.0f));
  ex.targets = FrameStack(1, RadarField(8, 8, 1.0f));
  ex.targets[0].set_missing(3, 3);
  ex.inclusion_probability = 0.5;
  const auto nbs = enumerate_neighborhoods(ex, CellWindow{0, 0, 8, 8}, 2, 0);
  for (const auto& nb : nbs) {
    const bool covers = nb.row0 <= 3 && 3 < nb.row0 + 2 && nb.col0 <= 3 && 3 < nb.col0 + 2;
    EXPECT_EQ(nb.weight, covers ? 0.0 : 2.0);
  }
}

TEST(Fss, PerfectAndDisjoint) {
  KeyedRng rng{51};
  std::vector<Example> exs{test::random_example(1, 2, 8, 8, rng)};
  std::vector<EnsembleForecast> perfect{EnsembleForecast({exs[0].targets})};
  EXPECT_EQ(fss(perfect, exs, 4.0, 1, 8), 1.0);

  Example ex;
  ex.context = FrameStack(1, RadarField(4, 4, 0.0f));
  ex.targets = FrameStack(1, RadarField(4, 4, 0.0f));
  ex.targets[0].set(0, 0, 5.0f);
  FrameStack fc(1, RadarField(4, 4, 0.0f));
  fc[0].set(2, 2, 5.0f);
  std::vector<Example> e2{ex};
  std::vector<EnsembleForecast> f2{EnsembleForecast({fc})};
  EXPECT_EQ(fss(f2, e2, 1.0, 1, 4), 0.0);
}

TEST(Fss, EqualFractionsScoreOne) {
  // Different fields with the same event fraction in every 2x2 block.
  Example ex;
  ex.context = FrameStack(1, RadarField(4, 4, 0.0f));
  ex.targets = FrameStack(1, RadarField(4, 4, 0.0f));
  ex.targets[0].set(0, 0, 5.0f);
  FrameStack fc(1, RadarField(4, 4, 0.0f));
  fc[0].set(1, 1, 5.0f);
  // K = 4 covers the whole window.
  std::vector<Example> exs{ex};
  std::vector<EnsembleForecast> fcs{EnsembleForecast({fc})};
  EXPECT_EQ(fss(fcs, exs, 1.0, 4, 4), 1.0);
}

TEST(Fss, MatchesBruteForce) {
  KeyedRng rng{52};
  std::vector<Example> exs;
  std::vector<EnsembleForecast> fcs;
  for (int i = 0; i < 10; ++i) {
    exs.push_back(test::random_example(1, 2, 10, 10, rng, 0.02, 0.1 + 0.9 * rng.uniform()));
    fcs.emplace_back(std::vector<FrameStack>{test::random_stack(2, 10, 10, rng, 10, 0.01),
                                             test::random_stack(2, 10, 10, rng), test::random_stack(2, 10, 10, rng)});
  }
  for (std::size_t k : {1u, 2u, 3u, 5u, 8u})
    for (double t : {1.0, 4.0, 8.0}) EXPECT_NEAR(fss(fcs, exs, t, k, 8), fss_oracle(fcs, exs, t, k, 8), 1e-12);
}

TEST(Fss, InvariantToShufflingInsideNeighborhood) {
  KeyedRng rng{53};
  std::vector<Example> exs{test::random_example(1, 1, 4, 4, rng)};
  std::vector<EnsembleForecast> fcs{EnsembleForecast({test::random_stack(1, 4, 4, rng)})};
  const double before = fss(fcs, exs, 4.0, 4, 4);
  auto shuffled = exs;
  std::vector<float> v(shuffled[0].targets[0].values().begin(), shuffled[0].targets[0].values().end());
  std::reverse(v.begin(), v.end());
  shuffled[0].targets[0] = RadarField(4, 4, v);
  EXPECT_EQ(fss(fcs, shuffled, 4.0, 4, 4), before);
}

TEST(Fss, NoEventsIsUndefined) {
  Example ex;
  ex.context = FrameStack(1, RadarField(4, 4, 0.0f));
  ex.targets = FrameStack(1, RadarField(4, 4, 0.0f));
  std::vector<Example> exs{ex};
  std::vector<EnsembleForecast> fcs{EnsembleForecast({ex.targets})};
  EXPECT_THROW(fss(fcs, exs, 1.0, 2, 4), UndefinedScoreError);
}

TEST(PooledCrps, WorkedExample) {
  // Members [4,0;0,0] and zeros, obs [2,0;0,0].
  Example ex;
  ex.context = FrameStack(1, RadarField(2, 2, 0.0f));
  ex.targets = FrameStack(1, RadarField(2, 2, 0.0f));
  ex.targets[0].set(0, 0, 2.0f);
  FrameStack a(1, RadarField(2, 2, 0.0f)), b(1, RadarField(2, 2, 0.0f));
  b[0].set(0, 0, 4.0f);
  std::vector<Example> exs{ex};
  std::vector<EnsembleForecast> fcs{EnsembleForecast({a, b})};
  EXPECT_EQ(pooled_crps(fcs, exs, 2, Pooling::maximum, 2), 0.0);
  EXPECT_EQ(pooled_crps(fcs, exs, 2, Pooling::average, 2), 0.0);
}

TEST(PooledCrps, KOneEqualsCellCrps) {
  KeyedRng rng{54};
  std::vector<Example> exs;
  std::vector<EnsembleForecast> fcs;
  std::vector<std::vector<double>> ens;
  std::vector<double> obs, w;
  for (int i = 0; i < 5; ++i) {
    exs.push_back(test::random_example(1, 2, 6, 6, rng, 0.0, 0.2 + 0.8 * rng.uniform()));
    fcs.emplace_back(std::vector<FrameStack>{test::random_stack(2, 6, 6, rng), test::random_stack(2, 6, 6, rng),
                                             test::random_stack(2, 6, 6, rng)});
    for (std::size_t lead = 0; lead < 2; ++lead)
      for (std::size_t c = 0; c < 36; ++c) {
        ens.push_back({fcs.back().member(0)[lead][c], fcs.back().member(1)[lead][c], fcs.back().member(2)[lead][c]});
        obs.push_back(exs.back().targets[lead][c]);
        w.push_back(1.0 / exs.back().inclusion_probability);
      }
  }
  const double expected = crps_dataset(ens, obs, w);
  EXPECT_NEAR(pooled_crps(fcs, exs, 1, Pooling::average, 6), expected, 1e-12);
  EXPECT_NEAR(pooled_crps(fcs, exs, 1, Pooling::maximum, 6), expected, 1e-12);
}

TEST(PooledCrps, ConstantFieldsScoreZero) {
  Example ex;
  ex.context = FrameStack(1, RadarField(6, 6, 3.0f));
  ex.targets = FrameStack(1, RadarField(6, 6, 3.0f));
  std::vector<Example> exs{ex};
  std::vector<EnsembleForecast> fcs{EnsembleForecast({ex.targets, ex.targets})};
  for (auto how : {Pooling::average, Pooling::maximum}) EXPECT_EQ(pooled_crps(fcs, exs, 3, how, 6), 0.0);
}

TEST(PooledCrps, IdenticalConstantMembersGiveAbsoluteError) {
  KeyedRng rng{55};
  Example ex = test::random_example(1, 1, 4, 4, rng);
  std::vector<Example> exs{ex};
  std::vector<EnsembleForecast> fcs{EnsembleForecast({FrameStack(1, RadarField(4, 4, 2.0f)), FrameStack(1, RadarField(4, 4, 2.0f))})};
  double mean = 0.0;
  for (float v : ex.targets[0].values()) mean += v;
  mean /= 16.0;
  EXPECT_NEAR(pooled_crps(fcs, exs, 4, Pooling::average, 4), std::abs(mean - 2.0), 1e-12);
}

TEST(PooledCrps, NoValidNeighborhoods) {
  Example ex;
  ex.context = FrameStack(1, RadarField(2, 2, 0.0f));
  ex.targets = FrameStack(1, RadarField(2, 2, -1.0f));
  std::vector<Example> exs{ex};
  std::vector<EnsembleForecast> fcs{EnsembleForecast({FrameStack(1, RadarField(2, 2)), FrameStack(1, RadarField(2, 2))})};
  EXPECT_THROW(pooled_crps(fcs, exs, 1, Pooling::average, 2), EmptyDataError);
}
