#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "fbmc/grid.hpp"
#include "support/oracles.hpp"

using namespace fbmc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_copy(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("fbmc_grid_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const auto& e : fs::directory_iterator(FBMC_FIXTURE_DIR))
    if (e.path().extension() == ".csv") fs::copy(e.path(), dir / e.path().filename());
  return dir;
}

// Spread of a line's flow between uniform zone-to-zone transfers, by DC power flow.
double oracle_spread(const GridCase& g, std::size_t line) {
  double best = 0.0;
  for (std::size_t a = 0; a < g.num_zones(); ++a)
    for (std::size_t b = 0; b < g.num_zones(); ++b) {
      if (a == b) continue;
      Vector inj = Vector::Zero(static_cast<Eigen::Index>(g.num_nodes()));
      double na = 0, nb = 0;
      for (std::size_t n = 0; n < g.num_nodes(); ++n) {
        na += g.zone_of(n) == a;
        nb += g.zone_of(n) == b;
      }
      for (std::size_t n = 0; n < g.num_nodes(); ++n) {
        if (g.zone_of(n) == a) inj[static_cast<Eigen::Index>(n)] += 1.0 / na;
        if (g.zone_of(n) == b) inj[static_cast<Eigen::Index>(n)] -= 1.0 / nb;
      }
      best = std::max(best, oracle::dc_flows(g, inj)[static_cast<Eigen::Index>(line)]);
    }
  return best;
}

// Share of line k's pre-outage flow that moves onto line j.
double oracle_lodf(const GridCase& g, std::size_t j, std::size_t k) {
  Vector inj = Vector::Zero(static_cast<Eigen::Index>(g.num_nodes()));
  inj[static_cast<Eigen::Index>(g.line(k).from)] = 1.0;
  inj[static_cast<Eigen::Index>(g.line(k).to)] = -1.0;
  Vector pre = oracle::dc_flows(g, inj);
  Vector post = oracle::dc_flows(g, inj, k);
  return (post[static_cast<Eigen::Index>(j)] - pre[static_cast<Eigen::Index>(j)]) / pre[static_cast<Eigen::Index>(k)];
}

}  // namespace

TEST(Ptdf, RingSplitsTwoThirdsOneThird) {
  auto g = oracle::ring3();
  auto ptdf = build_ptdf(g);
  Vector inj(3);
  inj << 1.0, -1.0, 0.0;
  Vector f = ptdf.flows(inj);
  EXPECT_NEAR(f[0], 2.0 / 3.0, 1e-12);  // 1 -> 2
  EXPECT_NEAR(f[1], 1.0 / 3.0, 1e-12);  // 1 -> 3
  EXPECT_NEAR(f[2], 1.0 / 3.0, 1e-12);  // 3 -> 2
  Vector oracle_f = oracle::dc_flows(g, inj);
  EXPECT_LT((f - oracle_f).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ptdf, ZeroInjectionZeroFlow) {
  auto ptdf = build_ptdf(oracle::fixture().grid);
  EXPECT_EQ(ptdf.flows(Vector::Zero(6)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ptdf, SlackColumnIsZero) {
  const auto& g = oracle::fixture().grid;
  auto ptdf = build_ptdf(g);
  EXPECT_EQ(ptdf.values.col(static_cast<Eigen::Index>(g.slack())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ptdf, RingSlackInvariance) {
  Vector inj(3);
  inj << 1.0, -1.0, 0.0;
  Vector a = build_ptdf(oracle::ring3(0)).flows(inj);
  Vector b = build_ptdf(oracle::ring3(2)).flows(inj);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ptdf, FixtureSlackInvarianceRandomBalanced) {
  const auto& g = oracle::fixture().grid;
  auto p1 = build_ptdf(g);
  auto p2 = build_ptdf(g, 4);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    Vector inj = oracle::balanced(rng, 6);
    EXPECT_LT((p1.flows(inj) - p2.flows(inj)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Ptdf, MatchesDirectSolveOnRandomGrids) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = oracle::random_grid(rng, 2 + trial % 11);
    auto ptdf = build_ptdf(g);
    Vector inj = oracle::balanced(rng, static_cast<Eigen::Index>(g.num_nodes()));
    EXPECT_LT((ptdf.flows(inj) - oracle::dc_flows(g, inj)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Ptdf, DisconnectedNetworkRejected) {
  EXPECT_THROW(GridCase::create({{"a", 0}, {"b", 0}, {"c", 0}}, {{"l", 0, 1, 0.1, 10}}, {"Z"}, 0),
               StructuralError);
}

TEST(Lodf, RingOutageMovesAllFlowToRemainingPath) {
  auto g = oracle::ring3();
  auto ptdf = build_ptdf(g);
  auto lodf = build_lodf(g, ptdf);
  Vector inj(3);
  inj << 1.0, -1.0, 0.0;
  Vector pre = ptdf.flows(inj);
  double post13 = pre[1] + lodf.values(1, 0) * pre[0];
  EXPECT_NEAR(post13, 1.0, 1e-12);
  EXPECT_NEAR(post13, oracle::dc_flows(g, inj, 0)[1], 1e-12);
}

TEST(Lodf, SelfOutageIsMinusOne) {
  const auto& g = oracle::fixture().grid;
  auto lodf = build_lodf(g, build_ptdf(g));
  for (std::size_t k = 0; k < g.num_lines(); ++k) {
    ASSERT_TRUE(lodf.valid(k));
    EXPECT_EQ(lodf.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)), -1.0);
  }
}

TEST(Lodf, RadialLineIsBridge) {
  auto g = GridCase::create({{"a", 0}, {"b", 0}}, {{"l", 0, 1, 0.1, 10}}, {"Z"}, 0);
  auto lodf = build_lodf(g, build_ptdf(g));
  EXPECT_FALSE(lodf.valid(0));
}

TEST(Lodf, MatchesRemovedTopologyOnRandomGrids) {
  std::mt19937_64 rng(17);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    auto g = oracle::random_grid(rng, 3 + trial % 10);
    auto ptdf = build_ptdf(g);
    auto lodf = build_lodf(g, ptdf);
    Vector inj = oracle::balanced(rng, static_cast<Eigen::Index>(g.num_nodes()));
    Vector pre = ptdf.flows(inj);
    for (std::size_t k = 0; k < g.num_lines(); ++k) {
      if (!lodf.valid(k)) {
        EXPECT_THROW(g.without_line(k), StructuralError);
        continue;
      }
      Vector post = oracle::dc_flows(g, inj, k);
      for (std::size_t j = 0; j < g.num_lines(); ++j) {
        if (j == k) continue;
        const auto jj = static_cast<Eigen::Index>(j), kk = static_cast<Eigen::Index>(k);
        worst = std::max(worst, std::abs(pre[jj] + lodf.values(jj, kk) * pre[kk] - post[jj]));
      }
    }
  }
  EXPECT_LT(worst, 1e-6);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 5.0);
}

TEST(Loader, FixtureShape) {
  const auto& b = oracle::fixture();
  EXPECT_EQ(b.grid.num_nodes(), 6u);
  EXPECT_EQ(b.grid.num_lines(), 7u);
  EXPECT_EQ(b.grid.num_zones(), 3u);
  EXPECT_EQ(b.fleet.size(), 8u);
  EXPECT_EQ(b.fleet.intermittent().size(), 2u);
  EXPECT_EQ(b.series.size(), 24u);
}

TEST(Loader, MissingFileNamed) {
  auto dir = scratch_copy("missing");
  fs::remove(dir / "lines.csv");
  try {
    load_grid_data(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("lines.csv"), std::string::npos);
  }
}

TEST(Loader, UnknownGeneratorNodeNamesGenerator) {
  auto dir = scratch_copy("x99");
  std::ofstream(dir / "generators.csv", std::ios::app) << "G9,X99,dispatchable,10,1\n";
  try {
    load_grid_data(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("G9"), std::string::npos);
    EXPECT_NE(what.find("X99"), std::string::npos);
  }
}

TEST(Loader, NonPositiveReactanceRejected) {
  auto dir = scratch_copy("reactance");
  std::ofstream(dir / "lines.csv", std::ios::app) << "L99,N1,N4,0,100\n";
  EXPECT_THROW(load_grid_data(dir), Error);
}

TEST(Cnec, CrossBorderOnlyMatchesOracle) {
  const auto& g = oracle::fixture().grid;
  auto ptdf = build_ptdf(g);
  auto set = select_cnecs(g, ptdf, build_lodf(g, ptdf), {0.05, 0.2, true});
  std::set<std::string> expected;
  for (std::size_t j = 0; j < g.num_lines(); ++j) {
    if (!g.is_cross_border(j)) continue;
    expected.insert(g.line(j).id);
    for (std::size_t k = 0; k < g.num_lines(); ++k)
      if (k != j && std::abs(oracle_lodf(g, j, k)) > 0.2)
        expected.insert(g.line(j).id + "__" + g.line(k).id);
  }
  std::set<std::string> got;
  for (std::size_t i = 0; i < set.size(); ++i) got.insert(set.id(g, i));
  EXPECT_EQ(got, expected);
  std::size_t base = 0;
  for (const auto& c : set.entries) base += !c.outage;
  EXPECT_EQ(base, 3u);
}

TEST(Cnec, InternalLinesFollowZoneToZoneSpread) {
  const auto& g = oracle::fixture().grid;
  auto ptdf = build_ptdf(g);
  auto set = select_cnecs(g, ptdf, build_lodf(g, ptdf), {0.05, 1.0, false});
  for (std::size_t j = 0; j < g.num_lines(); ++j) {
    bool want = g.is_cross_border(j) || oracle_spread(g, j) > 0.05;
    bool have = std::any_of(set.entries.begin(), set.entries.end(),
                            [&](const Cnec& c) { return c.line == j; });
    EXPECT_EQ(have, want) << g.line(j).id;
  }
}

TEST(Cnec, FullThresholdSelectsNoInternalLine) {
  const auto& g = oracle::fixture().grid;
  auto ptdf = build_ptdf(g);
  auto set = select_cnecs(g, ptdf, build_lodf(g, ptdf), {1.0, 0.2, false});
  for (const auto& c : set.entries) EXPECT_TRUE(g.is_cross_border(c.line));
}

TEST(Cnec, FullOutageThresholdHasNoContingencies) {
  const auto& g = oracle::fixture().grid;
  auto ptdf = build_ptdf(g);
  auto set = select_cnecs(g, ptdf, build_lodf(g, ptdf), {0.05, 1.0, false});
  for (const auto& c : set.entries) EXPECT_FALSE(c.outage.has_value());
}

TEST(Cnec, ThresholdComparisonIsStrict) {
  // Ring outage factors are exactly +-1: a threshold of 1 keeps none of them.
  auto g = oracle::ring3();
  auto ptdf = build_ptdf(g);
  auto lodf = build_lodf(g, ptdf);
  EXPECT_EQ(select_cnecs(g, ptdf, lodf, {0.05, 1.0, false}).size(), 3u);
  EXPECT_EQ(select_cnecs(g, ptdf, lodf, {0.05, 0.999, false}).size(), 3u + 6u);

  // An internal line whose spread equals the threshold stays out.
  const auto& f = oracle::fixture().grid;
  auto fp = build_ptdf(f);
  auto fl = build_lodf(f, fp);
  Vector spread = zone_to_zone_ptdf(f, fp);
  for (std::size_t j = 0; j < f.num_lines(); ++j) {
    if (f.is_cross_border(j)) continue;
    const double s = spread[static_cast<Eigen::Index>(j)];
    auto has = [&](double thr) {
      auto set = select_cnecs(f, fp, fl, {thr, 1.0, false});
      return std::any_of(set.entries.begin(), set.entries.end(), [&](const Cnec& c) { return c.line == j; });
    };
    EXPECT_FALSE(has(s)) << f.line(j).id;
    if (s > 1e-6) {
      EXPECT_TRUE(has(s - 1e-6)) << f.line(j).id;
    }
  }
}

TEST(Cnec, ContingencyRowIsPostOutageSensitivity) {
  const auto& g = oracle::fixture().grid;
  auto ptdf = build_ptdf(g);
  auto set = select_cnecs(g, ptdf, build_lodf(g, ptdf), {0.05, 0.2, false});
  std::mt19937_64 rng(5);
  Vector inj = oracle::balanced(rng, 6);
  for (const auto& c : set.entries) {
    if (!c.outage) continue;
    double f = c.ptdf.dot(inj);
    EXPECT_NEAR(f, oracle::dc_flows(g, inj, *c.outage)[static_cast<Eigen::Index>(c.line)], 1e-8);
  }
}

TEST(Cnec, ThresholdsOutsideUnitIntervalRejected) {
  const auto& g = oracle::fixture().grid;
  auto ptdf = build_ptdf(g);
  EXPECT_THROW(select_cnecs(g, ptdf, build_lodf(g, ptdf), {1.5, 0.2, false}), ConfigError);
}
