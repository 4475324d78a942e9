#include <gtest/gtest.h>

#include <cmath>

#include "longtail/detail/random.hpp"
#include "longtail/norm_loss.hpp"

using namespace longtail;

namespace {

TargetSequence targets(std::vector<TokenId> ys, std::vector<TokenId> prevs) { return {std::move(ys), std::move(prevs)}; }

NormTable random_table(detail::Rng& rng, std::size_t vocab) {
  NormTable::Rows rows;
  for (TokenId prev = 0; prev < vocab; ++prev) {
    if (rng.bounded(3) == 0) continue;
    std::vector<WeightedNext> entries;
    for (TokenId next = 0; next < vocab; ++next)
      if (rng.bounded(2)) entries.push_back({next, 0.05 + 0.95 * rng.uniform()});
    rows.emplace(prev, std::move(entries));
  }
  return NormTable(NormConfig::for_method(NormMethod::LMN), 0, std::move(rows));
}

std::vector<double> random_logits(detail::Rng& rng, std::size_t n) {
  std::vector<double> z(n);
  for (auto& x : z) x = rng.uniform(-3.0, 3.0);
  return z;
}

}  // namespace

TEST(CrossEntropy, Examples) {
  const std::vector<ProbRow> one{{0.5, 0.5}};
  EXPECT_NEAR(cross_entropy(one, targets({0}, {kBosId})), 0.6931471805599453, 1e-15);
  const std::vector<ProbRow> two{{0.5, 0.5}, {0.25, 0.75}};
  EXPECT_NEAR(cross_entropy(two, targets({0, 0}, {kBosId, 0})), 1.0397207708399179, 1e-15);
}

TEST(CrossEntropy, Errors) {
  const std::vector<ProbRow> zero{{1.0, 0.0}};
  try {
    cross_entropy(zero, targets({1}, {kBosId}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("position 0"), std::string::npos);
  }
  EXPECT_THROW(cross_entropy(zero, targets({0, 0}, {kBosId, 0})), Error);
  EXPECT_THROW(cross_entropy(std::vector<ProbRow>{}, targets({}, {})), Error);
}

TEST(TargetSequence, FramesSentence) {
  const auto t = TargetSequence::from_sentence(TokenSequence{{7, 9}});
  EXPECT_EQ(t.targets, (std::vector<TokenId>{7, 9, kEosId}));
  EXPECT_EQ(t.prevs, (std::vector<TokenId>{kBosId, 7, 9}));
}

TEST(NormalizedCrossEntropy, WorkedExample) {
  // p_hat = [0.5, 0.5], weights 1 and 3 up to scale: p' = [0.25, 0.75], target 1.
  const NormTable table(NormConfig::for_method(NormMethod::LN), 0, {{kBosId, {{1, 1.0}, {0, 1.0 / 3.0}}}});
  const std::vector<ProbRow> rows{{0.5, 0.5}};
  EXPECT_NEAR(normalized_cross_entropy(rows, targets({1}, {kBosId}), table), 0.2876820724517809, 1e-12);
}

TEST(NormalizedCrossEntropy, ZeroedTargetIsAnError) {
  const NormTable table;
  const std::vector<ProbRow> rows{{1.0, 0.0}};
  EXPECT_THROW(normalized_cross_entropy(rows, targets({1}, {kBosId}), table), Error);
}

TEST(NormalizedCrossEntropy, IdentityTableEqualsStandard) {
  detail::Rng rng(51);
  const NormTable identity;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.bounded(10), m = 1 + rng.bounded(6);
    std::vector<ProbRow> rows;
    TargetSequence t;
    for (std::size_t i = 0; i < m; ++i) {
      rows.push_back(softmax(random_logits(rng, n)));
      t.targets.push_back(static_cast<TokenId>(rng.bounded(n)));
      t.prevs.push_back(static_cast<TokenId>(rng.bounded(n)));
    }
    EXPECT_NEAR(normalized_cross_entropy(rows, t, identity), cross_entropy(rows, t), 1e-12);
  }
}

TEST(Gradient, RowsSumToZeroAndMatchFiniteDifferences) {
  detail::Rng rng(53);
  constexpr double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.bounded(12);
    const auto table = random_table(rng, n);
    auto z = random_logits(rng, n);
    const auto y = static_cast<TokenId>(rng.bounded(n));
    const auto prev = static_cast<TokenId>(rng.bounded(n));
    const auto g = normalized_ce_gradient(z, y, prev, table);

    double sum = 0.0;
    for (double v : g) sum += v;
    EXPECT_NEAR(sum, 0.0, 1e-12);

    auto loss = [&](const std::vector<double>& logits) {
      const std::vector<ProbRow> rows{softmax(logits)};
      return normalized_cross_entropy(rows, targets({y}, {prev}), table);
    };
    double err = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double keep = z[j];
      z[j] = keep + h;
      const double up = loss(z);
      z[j] = keep - h;
      const double down = loss(z);
      z[j] = keep;
      const double fd = (up - down) / (2 * h);
      err += (g[j] - fd) * (g[j] - fd);
      norm += g[j] * g[j];
    }
    EXPECT_LT(std::sqrt(err / norm), 1e-4);
  }
}

TEST(Gradient, StableForLargeLogits) {
  const NormTable identity;
  const std::vector<double> z{1000.0, 999.0, -1000.0};
  const auto g = normalized_ce_gradient(z, 0, kBosId, identity);
  for (double v : g) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(normalized_ce_gradient(std::vector<double>{0.0, NAN}, 0, 0, identity), Error);
  EXPECT_THROW(normalized_ce_gradient(std::vector<double>{0.0}, 1, 0, identity), Error);
}

TEST(WeightedSoftmax, MatchesReweightOfSoftmax) {
  detail::Rng rng(59);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.bounded(10);
    const auto z = random_logits(rng, n);
    std::vector<double> w(n);
    for (auto& x : w) x = 0.01 + rng.uniform();
    std::vector<double> out(n);
    weighted_softmax(z, w, out);
    const auto expected = reweight(softmax(z), w);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(out[j], expected[j], 1e-14);
  }
}
