#include <gtest/gtest.h>

#include <array>
#include <random>
#include <span>

#include "attestfl/aggregation.hpp"
#include "oracles.hpp"

using namespace attestfl;

namespace {

using Set = std::vector<std::vector<double>>;

Set random_set(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Set s(n, std::vector<double>(d));
  for (auto& v : s) {
    for (auto& x : v) x = g(rng);
  }
  return s;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double m = 0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

}  // namespace

TEST(Aggregation, MatchesOraclesOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    const std::size_t d = 1 + rng() % 16;
    const Set xs = random_set(rng, n, d);

    EXPECT_LE(max_abs_diff(fedavg(xs), oracle::mean(xs)), 1e-12);
    EXPECT_LE(max_abs_diff(coomed(xs), oracle::coomed(xs)), 1e-12);
    for (std::size_t beta = 0; 2 * beta < n; ++beta) {
      EXPECT_LE(max_abs_diff(trimmed_mean(xs, beta), oracle::trimmed_mean(xs, beta)), 1e-12);
    }
    for (std::size_t f = 0; n >= f + 3; ++f) {
      EXPECT_EQ(krum_select(xs, f), oracle::krum_index(xs, f));
      EXPECT_EQ(krum(xs, f), xs[oracle::krum_index(xs, f)]);
    }
    for (std::size_t f = 0; n >= 4 * f + 3; ++f) {
      EXPECT_LE(max_abs_diff(bulyan(xs, f), oracle::bulyan(xs, f)), 1e-12);
    }
    const auto root = random_set(rng, 1, d)[0];
    EXPECT_LE(max_abs_diff(fltrust(xs, root), oracle::fltrust(xs, root)), 1e-12);
  }
}

TEST(Aggregation, AcceptsSpansAndArrays) {
  std::vector<std::array<double, 3>> xs = {{1, 2, 3}, {3, 2, 1}, {2, 2, 2}};
  EXPECT_EQ(fedavg(xs), (std::vector<double>{2, 2, 2}));
  EXPECT_EQ(coomed(xs), (std::vector<double>{2, 2, 2}));
  std::vector<double> a{1, 2}, b{3, 4};
  std::vector<std::span<const double>> views{a, b};
  EXPECT_EQ(fedavg(views), (std::vector<double>{2, 3}));
}

TEST(Aggregation, KrumTieGoesToLowestIndex) {
  Set xs = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  EXPECT_EQ(krum_select(xs, 1), 0u);
  Set same(5, std::vector<double>{0.5, 0.5});
  EXPECT_EQ(krum_select(same, 2), 0u);
}

TEST(Aggregation, BulyanTrimTieTakesLowerValue) {
  // One coordinate, n = 3, f = 0: keep 3 values closest to median 1.
  Set xs = {{0.0}, {1.0}, {2.0}};
  EXPECT_DOUBLE_EQ(bulyan(xs, 0)[0], 1.0);
  // Seven updates with f = 1: s = 5 picked, keep 3.
  Set ys = {{0}, {1}, {2}, {3}, {4}, {5}, {6}};
  EXPECT_LE(max_abs_diff(bulyan(ys, 1), oracle::bulyan(ys, 1)), 1e-12);
}

TEST(Aggregation, RobustRulesResistOneOutlier) {
  std::mt19937_64 rng(5);
  Set xs = random_set(rng, 9, 4);
  for (auto& v : xs) {
    for (auto& x : v) x = 1.0 + 0.01 * x;
  }
  xs.push_back(std::vector<double>(4, 1e6));
  const std::vector<double> ones(4, 1.0);
  EXPECT_LT(max_abs_diff(krum(xs, 1), ones), 0.1);
  EXPECT_LT(max_abs_diff(coomed(xs), ones), 0.1);
  EXPECT_LT(max_abs_diff(trimmed_mean(xs, 1), ones), 0.1);
  EXPECT_GT(max_abs_diff(fedavg(xs), ones), 1e4);
  Set zs = xs;
  zs.insert(zs.begin(), xs.begin(), xs.begin() + 1);  // n = 11, f = 2
  EXPECT_LT(max_abs_diff(bulyan(zs, 2), ones), 0.1);
}

TEST(Aggregation, FlTrustEdgeCases) {
  Set xs = {{1, 0}, {-1, 0}, {0, 0}};
  // Opposite and zero updates get no trust; the aligned one is rescaled to |root|.
  auto out = fltrust(xs, std::vector<double>{2, 0});
  EXPECT_DOUBLE_EQ(out[0], 2.0);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
  auto none = fltrust(Set{{-1, 0}}, std::vector<double>{1, 0});
  EXPECT_EQ(none, (std::vector<double>{0, 0}));
  try {
    fltrust(xs, std::vector<double>{0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kZeroRootUpdate);
  }
}

TEST(Aggregation, Errors) {
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::kIo;
  };
  Set empty;
  EXPECT_EQ(code_of([&] { fedavg(empty); }), Errc::kEmptyInput);
  EXPECT_EQ(code_of([&] { coomed(empty); }), Errc::kEmptyInput);
  Set ragged = {{1, 2}, {1}};
  EXPECT_EQ(code_of([&] { fedavg(ragged); }), Errc::kDimMismatch);
  Set four(4, std::vector<double>{1.0});
  EXPECT_EQ(code_of([&] { krum(four, 2); }), Errc::kTooFewClients);
  EXPECT_EQ(code_of([&] { bulyan(four, 1); }), Errc::kTooFewClients);
  EXPECT_EQ(code_of([&] { trimmed_mean(four, 2); }), Errc::kTooFewClients);
  EXPECT_EQ(code_of([&] { fltrust(four, std::vector<double>{1.0, 2.0}); }),
            Errc::kDimMismatch);
}

TEST(Aggregation, ClampRule) {
  auto r = clamp_rule({AggKind::kBulyan, 3, 0}, 14);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->f, 2u);
  r = clamp_rule({AggKind::kKrum, 5, 0}, 4);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->f, 1u);
  EXPECT_FALSE(clamp_rule({AggKind::kKrum, 0, 0}, 2));
  EXPECT_FALSE(clamp_rule({AggKind::kFedAvg, 0, 0}, 0));
  r = clamp_rule({AggKind::kTrimmedMean, 0, 4}, 5);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->beta, 2u);
  EXPECT_EQ(parse_agg_kind("bulyan"), AggKind::kBulyan);
  EXPECT_FALSE(parse_agg_kind("median"));
}

TEST(Aggregation, PermutationInvarianceOfSymmetricRules) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 20; ++t) {
    Set xs = random_set(rng, 7, 5);
    Set ys = xs;
    std::shuffle(ys.begin(), ys.end(), rng);
    EXPECT_LE(max_abs_diff(coomed(xs), coomed(ys)), 0);
    EXPECT_LE(max_abs_diff(trimmed_mean(xs, 2), trimmed_mean(ys, 2)), 1e-12);
    EXPECT_LE(max_abs_diff(fedavg(xs), fedavg(ys)), 1e-12);
  }
}
