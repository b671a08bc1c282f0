#include <gtest/gtest.h>

#include <random>

#include "gvc/controller.hpp"
#include "oracles.hpp"

namespace gvc {
namespace {

std::vector<QualityLevel> make_levels(const std::vector<double>& q, const std::vector<double>& d) {
  std::vector<QualityLevel> out;
  for (std::size_t i = 0; i < q.size(); ++i) out.push_back({static_cast<int>(i) + 1, q[i], d[i], 1.0});
  return out;
}

const std::vector<double> kQ{1, 2, 3, 4, 5};
const std::vector<double> kD{0.1, 0.2, 0.4, 0.8, 1.6};

TEST(SelectQuality, ZeroLambdaPicksHighest) {
  const auto levels = make_levels(kQ, kD);
  for (double b : {0.0, 0.3, 2.0, 4.0}) EXPECT_EQ(select_quality(levels, b, 0.0, 1.0), 5);
}

TEST(SelectQuality, TieGoesToLowestIndex) {
  const auto levels = make_levels(kQ, kD);
  EXPECT_DOUBLE_EQ(level_utility(levels[2], 2.0, 5.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(level_utility(levels[3], 2.0, 5.0, 1.0), 2.0);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(select_quality(levels, 2.0, 5.0, 1.0), 3);
}

TEST(SelectQuality, LowBufferSquaredPenalty) {
  const auto levels = make_levels(kQ, kD);
  const double expected[] = {0.6, 1.2, 1.4, 0.8, -1.4};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(level_utility(levels[i], 0.5, 1.0, 2.0), expected[i], 1e-12);
  EXPECT_EQ(select_quality(levels, 0.5, 1.0, 2.0), 3);
}

TEST(SelectQuality, ZeroBufferUsesFloor) {
  const auto levels = make_levels(kQ, kD);
  EXPECT_EQ(select_quality(levels, 0.0, 1.0, 1.0), select_quality(levels, kBufferFloor, 1.0, 1.0));
  EXPECT_EQ(select_quality(levels, 0.0, 1.0, 1.0), 1);
}

TEST(SelectQuality, RejectsBadInput) {
  const auto levels = make_levels(kQ, kD);
  EXPECT_THROW(select_quality({}, 1.0, 1.0, 1.0), ConfigError);
  EXPECT_THROW(select_quality(levels, -0.1, 1.0, 1.0), ConfigError);
  EXPECT_THROW(select_quality(levels, 1.0, std::nan(""), 1.0), ConfigError);
}

TEST(SelectQuality, MatchesExhaustiveOracleAndShiftInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double gammas[] = {0.5, 1.0, 2.0};
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(u(rng) * 10);
    std::vector<double> q, d;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += 0.01 + u(rng);
      q.push_back(acc);
      d.push_back(0.01 + u(rng) * 2.0);
    }
    const double b = kBufferFloor + u(rng) * (4.0 - kBufferFloor);
    const double lambda = u(rng) * 10.0;
    const double gamma = gammas[trial % 3];
    const auto levels = make_levels(q, d);
    const int got = select_quality(levels, b, lambda, gamma);
    EXPECT_EQ(got, oracle::argmax_utility(q, d, b, lambda, gamma, kBufferFloor));

    // Integer shifts keep utilities exactly representable relative to each other.
    auto shifted = q;
    for (auto& x : shifted) x += 7.0;
    const auto sl = make_levels(shifted, d);
    EXPECT_EQ(select_quality(sl, b, lambda, gamma), got);
  }
}

TEST(UpdateBuffer, Examples) {
  auto s = update_buffer(3.0, 1.0, 0.5, 4.0);
  EXPECT_DOUBLE_EQ(s.buffer, 3.5);
  EXPECT_EQ(s.rebuffer, 0.0);
  s = update_buffer(4.0, 1.0, 1.0, 4.0);
  EXPECT_DOUBLE_EQ(s.buffer, 4.0);
  EXPECT_EQ(s.rebuffer, 0.0);
  s = update_buffer(0.2, 1.0, 2.0, 4.0);
  EXPECT_EQ(s.buffer, 0.0);
  EXPECT_DOUBLE_EQ(s.rebuffer, 0.8);
  EXPECT_THROW(update_buffer(1.0, -1.0, 0.0, 4.0), ConfigError);
  EXPECT_THROW(update_buffer(1.0, 1.0, -0.1, 4.0), ConfigError);
}

TEST(UpdateBuffer, BoundsProperty) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    const double bmax = 0.5 + u(rng) * 8;
    const auto s = update_buffer(u(rng) * bmax, u(rng) * 2, u(rng) * 5, bmax);
    EXPECT_GE(s.buffer, 0.0);
    EXPECT_LE(s.buffer, bmax);
    EXPECT_GE(s.rebuffer, 0.0);
    if (s.rebuffer > 0.0) EXPECT_EQ(s.buffer, 0.0);
  }
}

TEST(UpdateLambda, Examples) {
  EXPECT_NEAR(update_lambda(1.0, 3.0, 4.0, 0.1), 1.1, 1e-15);
  EXPECT_EQ(update_lambda(0.7, 4.0, 4.0, 0.1), 0.7);
  EXPECT_EQ(update_lambda(0.0, 4.0, 4.0, 0.1), 0.0);
  EXPECT_THROW(update_lambda(1.0, 1.0, 4.0, 0.0), ConfigError);
}

TEST(UpdateLambda, NonDecreasingWithinBounds) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double lambda = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double next = update_lambda(lambda, u(rng) * 4.0, 4.0, 0.01 + u(rng));
    EXPECT_GE(next, lambda);
    lambda = next;
  }
}

TEST(FbrSelect, ConstantAndValidated) {
  const auto levels = default_levels();
  EXPECT_EQ(fbr_select(3, levels), 3);
  EXPECT_THROW(fbr_select(9, levels), ConfigError);
  EXPECT_THROW(fbr_select(0, levels), ConfigError);
  EXPECT_THROW(Controller({ControllerKind::FBR, 9, {}}, {}, levels), ConfigError);

  Controller c({ControllerKind::FBR, 1, {}}, {}, levels);
  for (int k = 0; k < 50; ++k) EXPECT_EQ(c.step(1.0, k % 3 * 0.7, k).level, 1);
}

TEST(BbSelect, Map) {
  const auto levels = default_levels();
  const BBConfig cfg{1.0, 2.0};
  EXPECT_EQ(bb_select(0.0, cfg, levels), 1);
  EXPECT_EQ(bb_select(1.0, cfg, levels), 1);
  EXPECT_EQ(bb_select(2.0, cfg, levels), 3);
  EXPECT_EQ(bb_select(3.0, cfg, levels), 5);
  EXPECT_EQ(bb_select(2.99, cfg, levels), 4);
}

TEST(BbSelect, Monotone) {
  const auto levels = default_levels();
  for (double r : {0.0, 0.5, 1.0}) {
    for (double c : {0.3, 1.0, 2.5}) {
      int prev = 1;
      for (int i = 0; i <= 400; ++i) {
        const int lvl = bb_select(i * 0.01, {r, c}, levels);
        EXPECT_GE(lvl, prev);
        prev = lvl;
      }
      EXPECT_EQ(prev, 5);
    }
  }
}

TEST(BbConfig, ValidationNamesField) {
  try {
    BBConfig{3.0, 2.0}.validate(4.0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bb.cushion"), std::string::npos);
  }
  EXPECT_NO_THROW((BBConfig{1.0, 3.0}.validate(4.0)));
}

TEST(Levels, Validation) {
  EXPECT_NO_THROW(validate_levels(default_levels()));
  auto bad = default_levels();
  bad[2].index = 7;
  EXPECT_THROW(validate_levels(bad), ConfigError);
  bad = default_levels();
  bad[1].quality = 0.5;
  EXPECT_THROW(validate_levels(bad), ConfigError);
  bad = default_levels();
  bad[0].gen_delay = 0.0;
  EXPECT_THROW(validate_levels(bad), ConfigError);
  EXPECT_THROW(validate_levels({}), ConfigError);
}

TEST(ControllerKindNames, RoundTrip) {
  for (auto k : {ControllerKind::Proposed, ControllerKind::FBR, ControllerKind::BB})
    EXPECT_EQ(controller_kind_from_string(to_string(k)), k);
  EXPECT_THROW(controller_kind_from_string("mpc"), ConfigError);
  EXPECT_EQ((ControllerSpec{ControllerKind::FBR, 2, {}}.label()), "fbr2");
  EXPECT_EQ((ControllerSpec{ControllerKind::BB, 1, {}}.label()), "bb");
}

TEST(Controller, ProposedUpdatesLambdaOthersDoNot) {
  const auto levels = default_levels();
  ControllerConfig cfg;
  Controller p({ControllerKind::Proposed, 1, {}}, cfg, levels);
  Controller b({ControllerKind::BB, 1, {}}, cfg, levels);
  const auto dp = p.step(1.0, 0.0, 0.0);
  const auto db = b.step(1.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(dp.buffer, 1.0);
  EXPECT_DOUBLE_EQ(dp.lambda, cfg.lambda_init + cfg.beta * (cfg.buffer_max - 1.0));
  EXPECT_EQ(db.lambda, cfg.lambda_init);
  EXPECT_EQ(dp.level, select_quality(levels, 1.0, cfg.lambda_init, cfg.gamma));
}

}  // namespace
}  // namespace gvc
