#include <gtest/gtest.h>

#include <cmath>

#include "nowcast/baselines.hpp"
#include "nowcast/verify_point.hpp"
#include "support.hpp"

using namespace nowcast;

namespace {

double field_mse(const RadarField& a, const RadarField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

RadarField circular_shift(const RadarField& f, long dy, long dx) {
  const long h = static_cast<long>(f.height()), w = static_cast<long>(f.width());
  RadarField out(f.height(), f.width(), 0.0f);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      out.set(static_cast<std::size_t>(((y + dy) % h + h) % h), static_cast<std::size_t>(((x + dx) % w + w) % w),
              f(static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
  return out;
}

}  // namespace

TEST(Eulerian, RepeatsLastFrame) {
  KeyedRng rng{90};
  const auto ctx = test::random_stack(4, 6, 7, rng, 10.0, 0.1);
  const auto fc = eulerian_persistence(ctx, 5);
  ASSERT_EQ(fc.size(), 1u);
  ASSERT_EQ(fc.member(0).size(), 5u);
  for (const auto& f : fc.member(0)) EXPECT_EQ(f, ctx.back());
  EXPECT_THROW(eulerian_persistence({}, 3), ArgumentError);
  EXPECT_THROW(eulerian_persistence(ctx, 0), ArgumentError);
}

TEST(Eulerian, StaticFieldIsPerfect) {
  KeyedRng rng{91};
  const auto f = test::random_field(8, 8, rng);
  const auto fc = eulerian_persistence(FrameStack(3, f), 4);
  for (const auto& frame : fc.member(0)) {
    const std::vector<double> a(frame.values().begin(), frame.values().end());
    const std::vector<double> b(f.values().begin(), f.values().end());
    const auto c = csi_accumulate(a, b, 1.0, std::vector<double>(a.size(), 1.0));
    EXPECT_EQ(c.fp + c.fn, 0.0);
  }
}

TEST(Displace, MovesAndFills) {
  RadarField f(3, 3, 0.0f);
  f.set(0, 0, 5.0f);
  f.set_missing(2, 2);
  const auto g = displace(f, 1, 1);
  EXPECT_EQ(g(1, 1), 5.0f);
  EXPECT_EQ(g(0, 0), 0.0f);
  EXPECT_TRUE(g.valid(0, 0));
  const auto h = displace(f, -1, -1);
  EXPECT_FALSE(h.valid(1, 1));
}

TEST(EstimateShift, IdentityAndKnownShift) {
  KeyedRng rng{92};
  const auto f = test::random_field(24, 24, rng);
  EXPECT_EQ(estimate_shift(f, f, 4), (MotionVector{0, 0}));
  EXPECT_EQ(estimate_shift(f, circular_shift(f, 3, -2), 4), (MotionVector{3, -2}));
  EXPECT_EQ(estimate_shift(f, displace(f, -1, 4), 4), (MotionVector{-1, 4}));
}

TEST(EstimateShift, ConstantFieldPrefersNoMotion) {
  const RadarField f(5, 5, 2.0f);
  EXPECT_EQ(estimate_shift(f, f, 2), (MotionVector{0, 0}));
}

TEST(EstimateShift, Errors) {
  EXPECT_THROW(estimate_shift(RadarField(2, 2), RadarField(2, 3), 1), ConfigError);
  EXPECT_THROW(estimate_shift(RadarField(2, 2), RadarField(2, 2), -1), ArgumentError);
  EXPECT_THROW(estimate_shift(RadarField(2, 2, -1.0f), RadarField(2, 2, -1.0f), 1), EstimationError);
}

TEST(Lagrangian, RecoversExactAdvection) {
  SyntheticEventParams p;
  p.frames = 8;
  p.height = p.width = 48;
  p.velocity_y = 1;
  p.velocity_x = -2;
  const auto seq = synthetic_event(p, 5);
  const FrameStack ctx(seq.frames().begin(), seq.frames().begin() + 4);
  const auto lag = lagrangian_persistence(ctx, 4, 4);
  const auto eul = eulerian_persistence(ctx, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& obs = seq.frame(4 + k);
    EXPECT_LT(field_mse(lag.member(0)[k], obs), field_mse(eul.member(0)[k], obs)) << k;
  }
  EXPECT_THROW(lagrangian_persistence(FrameStack(1, RadarField(2, 2)), 1, 1), ArgumentError);
}

TEST(Perturbed, ZeroNoiseReturnsBase) {
  KeyedRng rng{93};
  const auto base = test::random_stack(3, 5, 5, rng, 10.0, 0.2);
  const auto fc = perturbed_ensemble(base, 4, 0.0, 3, 1);
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(fc.member(s), base);
}

TEST(Perturbed, DeterministicNonNegativeMaskPreserving) {
  KeyedRng rng{94};
  const auto base = test::random_stack(2, 10, 12, rng, 4.0, 0.1);
  const auto a = perturbed_ensemble(base, 5, 1.0, 3, 77);
  const auto b = perturbed_ensemble(base, 5, 1.0, 3, 77);
  const auto c = perturbed_ensemble(base, 5, 1.0, 3, 78);
  bool differs = false;
  for (std::size_t s = 0; s < 5; ++s) {
    EXPECT_EQ(a.member(s), b.member(s));
    differs |= !(a.member(s) == c.member(s));
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t i = 0; i < base[t].size(); ++i) {
        EXPECT_EQ(a.member(s)[t].valid_at(i), base[t].valid_at(i));
        if (a.member(s)[t].valid_at(i)) {
          EXPECT_GE(a.member(s)[t][i], 0.0f);
        }
      }
  }
  EXPECT_TRUE(differs);
}

TEST(Perturbed, NoiseHasRequestedSpread) {
  const FrameStack base(1, RadarField(64, 64, 100.0f));
  const auto fc = perturbed_ensemble(base, 20, 2.0, 4, 3);
  double s = 0.0, ss = 0.0, n = 0.0;
  for (std::size_t m = 0; m < 20; ++m)
    for (std::size_t i = 0; i < base[0].size(); ++i) {
      const double d = fc.member(m)[0][i] - 100.0;
      s += d;
      ss += d * d;
      n += 1;
    }
  EXPECT_NEAR(s / n, 0.0, 0.1);
  EXPECT_NEAR(std::sqrt(ss / n), 2.0, 0.15);
}

TEST(Perturbed, Errors) {
  const FrameStack base(1, RadarField(2, 2, 1.0f));
  EXPECT_THROW(perturbed_ensemble({}, 2, 1, 1, 0), ArgumentError);
  EXPECT_THROW(perturbed_ensemble(base, 1, 1, 1, 0), ArgumentError);
  EXPECT_THROW(perturbed_ensemble(base, 2, -1, 1, 0), ArgumentError);
  EXPECT_THROW(perturbed_ensemble(base, 2, 1, 0, 0), ArgumentError);
}

TEST(Synthetic, StaticEventRepeats) {
  SyntheticEventParams p;
  p.frames = 4;
  p.height = p.width = 16;
  p.velocity_x = 0;
  const auto seq = synthetic_event(p, 1);
  for (std::size_t t = 1; t < 4; ++t) EXPECT_EQ(seq.frame(t), seq.frame(0));
  EXPECT_EQ(seq.timestamps()[3], 900);
}

TEST(Synthetic, IntegerVelocityShiftsExactly) {
  SyntheticEventParams p;
  p.frames = 3;
  p.height = p.width = 32;
  p.velocity_x = 1;
  const auto seq = synthetic_event(p, 2);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 1; x < 32; ++x) EXPECT_EQ(seq.frame(1)(y, x), seq.frame(0)(y, x - 1));
}

TEST(Synthetic, ZeroIntensityAndQuantization) {
  SyntheticEventParams p;
  p.frames = 2;
  p.height = p.width = 8;
  p.intensity = 0.0;
  const auto dry = synthetic_event(p, 3);
  for (const auto& f : dry.frames())
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(f[i], 0.0f);
  p.intensity = 20.0;
  const auto wet = synthetic_event(p, 3);
  for (const auto& f : wet.frames())
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(f[i] * 32.0f, std::round(f[i] * 32.0f));
  EXPECT_EQ(synthetic_event(p, 3), synthetic_event(p, 3));
  p.frames = 0;
  EXPECT_THROW(synthetic_event(p, 3), ArgumentError);
}
