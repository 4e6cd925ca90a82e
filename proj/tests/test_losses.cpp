#include <gtest/gtest.h>

#include <vector>

#include "nowcast/losses.hpp"
#include "support.hpp"

using namespace nowcast;

namespace {
FrameStack single(float v) { return FrameStack(1, RadarField(1, 1, v)); }
}  // namespace

TEST(RainWeight, ClippedForm) {
  EXPECT_EQ(rain_weight(0.0), 1.0);
  EXPECT_EQ(rain_weight(23.0), 24.0);
  EXPECT_EQ(rain_weight(1000.0), 24.0);
  EXPECT_THROW(rain_weight(-0.5), ArgumentError);
}

TEST(RainWeight, LiteralMaxForm) {
  EXPECT_EQ(rain_weight(0.0, RainWeightForm::literal_max), 24.0);
  EXPECT_EQ(rain_weight(23.0, RainWeightForm::literal_max), 24.0);
  EXPECT_EQ(rain_weight(30.0, RainWeightForm::literal_max), 31.0);
}

TEST(Regularizer, Examples) {
  EXPECT_EQ(grid_cell_regularizer({{single(0), single(2)}}, single(1)), 0.0);
  EXPECT_EQ(grid_cell_regularizer({{single(0), single(0)}}, single(1)), 2.0);
  KeyedRng rng{80};
  const auto t = test::random_stack(2, 4, 4, rng);
  EXPECT_EQ(grid_cell_regularizer({{t, t, t}}, t), 0.0);
}

TEST(Regularizer, MaskedCellsDropped) {
  FrameStack target(1, RadarField(1, 2, 1.0f));
  target[0].set_missing(0, 1);
  FrameStack sample(1, RadarField(1, 2, 0.0f));
  EXPECT_EQ(grid_cell_regularizer({{sample}}, target), 2.0);
  EXPECT_THROW(grid_cell_regularizer({{single(0)}}, single(-1)), EmptyDataError);
}

TEST(Regularizer, Invariances) {
  KeyedRng rng{81};
  for (int rep = 0; rep < 50; ++rep) {
    const auto t = test::random_stack(2, 3, 3, rng, 30.0, 0.1);
    GeneratorSamples g{{test::random_stack(2, 3, 3, rng, 30.0), test::random_stack(2, 3, 3, rng, 30.0)}};
    const double base = grid_cell_regularizer(g, t);
    GeneratorSamples rev{{g.samples[1], g.samples[0]}};
    EXPECT_NEAR(grid_cell_regularizer(rev, t), base, 1e-12);
    GeneratorSamples dup{{g.samples[0], g.samples[1], g.samples[0], g.samples[1]}};
    EXPECT_NEAR(grid_cell_regularizer(dup, t), base, 1e-12);
  }
}

TEST(Regularizer, ShrinkingTowardTargetNeverIncreases) {
  KeyedRng rng{82};
  for (int rep = 0; rep < 50; ++rep) {
    const auto t = test::random_stack(1, 4, 4, rng, 30.0);
    const auto s = test::random_stack(1, 4, 4, rng, 30.0);
    double prev = grid_cell_regularizer({{s}}, t);
    for (double a : {0.25, 0.5, 0.75, 1.0}) {
      std::vector<float> v(16);
      for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<float>((1 - a) * s[0][i] + a * t[0][i]);
      const double cur = grid_cell_regularizer({{FrameStack{RadarField(4, 4, v)}}}, t);
      EXPECT_LE(cur, prev + 1e-12);
      prev = cur;
    }
  }
}

TEST(Regularizer, ShapeMismatch) {
  EXPECT_THROW(grid_cell_regularizer({{FrameStack(2, RadarField(1, 1))}}, single(1)), ConfigError);
}

TEST(Hinge, Examples) {
  const std::vector<double> r1{1.0, 2.0}, f1{-1.0, -3.0};
  EXPECT_EQ(hinge_discriminator_loss(r1, f1), 0.0);
  const std::vector<double> z{0.0};
  EXPECT_EQ(hinge_discriminator_loss(z, z), 2.0);
  const std::vector<double> two{2.0}, m3{-3.0};
  EXPECT_EQ(hinge_discriminator_loss(two, m3), 0.0);
  const std::vector<double> none;
  EXPECT_THROW(hinge_discriminator_loss(none, z), ArgumentError);
}

TEST(Hinge, ZeroExactlyWhenMarginsHold) {
  KeyedRng rng{83};
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> real(1 + rng.below(5)), fake(1 + rng.below(5));
    for (auto& x : real) x = rng.uniform() * 4 - 1.5;
    for (auto& x : fake) x = rng.uniform() * 4 - 2.5;
    bool ok = true;
    for (double x : real) ok &= x >= 1.0;
    for (double x : fake) ok &= x <= -1.0;
    EXPECT_EQ(hinge_discriminator_loss(real, fake) == 0.0, ok);
  }
}

TEST(Hinge, Monotone) {
  const std::vector<double> f{0.3};
  double prev = 1e9;
  for (double r = -2; r <= 2; r += 0.25) {
    const std::vector<double> real{r};
    const double l = hinge_discriminator_loss(real, f);
    EXPECT_LE(l, prev);
    prev = l;
  }
}

TEST(GeneratorObjective, Examples) {
  const std::vector<double> zero{0.0}, one{1.0, 1.0};
  EXPECT_EQ(generator_objective(zero, zero, 0.0), 0.0);
  EXPECT_NEAR(generator_objective(one, one, 0.1, 20.0), 0.0, 1e-15);
  EXPECT_LT(generator_objective(one, one, 0.2), generator_objective(one, one, 0.1));
  EXPECT_NEAR(generator_objective(one, one, 0.3, 7.0) - generator_objective(one, one, 0.1, 7.0), -7.0 * 0.2, 1e-12);
  const std::vector<double> none;
  EXPECT_THROW(generator_objective(none, one, 0.0), ArgumentError);
  EXPECT_EQ(kDefaultRegularizerScale, 20.0);
  EXPECT_EQ(kDefaultGeneratorSamples, 6u);
}
