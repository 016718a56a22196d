#include <gtest/gtest.h>

#include "fbmc/dispatch.hpp"
#include "fbmc/fb_params.hpp"
#include "support/oracles.hpp"
#include "support/simplex.hpp"

using namespace fbmc;

namespace {

CaseBundle merit_toy(double demand) {
  auto g = GridCase::create({{"a", 0}, {"b", 0}}, {{"l", 0, 1, 0.1, 1000}}, {"Z"}, 0);
  Vector d(2);
  d << demand, 0.0;
  return oracle::single_step(g,
                             {{"cheap", 0, GeneratorKind::dispatchable, 50, 10},
                              {"dear", 1, GeneratorKind::dispatchable, 100, 30}},
                             d);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Nodal PTDF from unit transfers against node 0, by the oracle power flow.
Matrix oracle_ptdf(const GridCase& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(g.num_lines()), n);
  for (Eigen::Index k = 1; k < n; ++k) {
    Vector inj = Vector::Zero(n);
    inj[k] = 1.0;
    inj[0] = -1.0;
    p.col(k) = oracle::dc_flows(g, inj);
  }
  return p;
}

// Redispatch written directly as an LP over (G, up, down) per unit and C per
// intermittent unit, solved by the tableau simplex.
oracle::LpResult redispatch_oracle(const CaseBundle& b, std::size_t t, const RedispatchInput& in,
                                   const RedispatchOptions& opt) {
  const auto& fleet = b.fleet;
  const std::size_t nd = fleet.dispatchable().size(), nr = fleet.intermittent().size();
  const std::size_t nv = 3 * nd + nr;
  const double inf = std::numeric_limits<double>::infinity();
  oracle::Lp lp;
  lp.cost.assign(nv, 0.0);
  lp.lower.assign(nv, 0.0);
  lp.upper.assign(nv, inf);
  for (std::size_t k = 0; k < nd; ++k) {
    const auto& g = fleet.at(fleet.dispatchable()[k]);
    lp.cost[3 * k] = g.cost;
    lp.upper[3 * k] = g.capacity;
    lp.cost[3 * k + 1] = lp.cost[3 * k + 2] = opt.redispatch_price;
    oracle::LpRow r{std::vector<double>(nv, 0.0), '=', in.g_ref[static_cast<Eigen::Index>(k)]};
    r.coef[3 * k] = 1.0;
    r.coef[3 * k + 1] = -1.0;
    r.coef[3 * k + 2] = 1.0;
    lp.rows.push_back(r);
  }
  for (std::size_t r = 0; r < nr; ++r) {
    lp.cost[3 * nd + r] = opt.curtailment_penalty;
    lp.lower[3 * nd + r] = in.c_floor[static_cast<Eigen::Index>(r)];
    lp.upper[3 * nd + r] = in.availability[static_cast<Eigen::Index>(r)];
  }
  // Injection per node = constant + coef . x
  const auto nn = static_cast<Eigen::Index>(b.grid.num_nodes());
  Vector constant = -b.series.demand[t];
  Matrix coef = Matrix::Zero(nn, static_cast<Eigen::Index>(nv));
  for (std::size_t k = 0; k < nd; ++k)
    coef(static_cast<Eigen::Index>(fleet.at(fleet.dispatchable()[k]).node), static_cast<Eigen::Index>(3 * k)) = 1.0;
  for (std::size_t r = 0; r < nr; ++r) {
    const auto node = static_cast<Eigen::Index>(fleet.at(fleet.intermittent()[r]).node);
    constant[node] += in.availability[static_cast<Eigen::Index>(r)];
    coef(node, static_cast<Eigen::Index>(3 * nd + r)) = -1.0;
  }
  oracle::LpRow bal{std::vector<double>(nv), '=', -constant.sum()};
  for (std::size_t v = 0; v < nv; ++v) bal.coef[v] = coef.col(static_cast<Eigen::Index>(v)).sum();
  lp.rows.push_back(bal);
  Matrix p = oracle_ptdf(b.grid);
  Matrix fc = p * coef;
  Vector f0 = p * constant;
  for (std::size_t j = 0; j < b.grid.num_lines(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double cap = b.grid.line(j).capacity;
    oracle::LpRow up{std::vector<double>(nv), '<', cap - f0[jj]};
    oracle::LpRow dn{std::vector<double>(nv), '>', -cap - f0[jj]};
    for (std::size_t v = 0; v < nv; ++v) up.coef[v] = dn.coef[v] = fc(jj, static_cast<Eigen::Index>(v));
    lp.rows.push_back(up);
    lp.rows.push_back(dn);
  }
  return oracle::solve_simplex(lp);
}

const DispatchResult& fixture_uniform() {
  static const DispatchResult r = solve_ed({oracle::fixture(), network::Unconstrained{}, {}});
  return r;
}

}  // namespace

TEST(Ed, MeritOrder) {
  auto b = merit_toy(80);
  auto r = solve_ed({b, network::Unconstrained{}, {}});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r.steps[0].generation[0], 50.0, 1e-6);
  EXPECT_NEAR(r.steps[0].generation[1], 30.0, 1e-6);
  EXPECT_NEAR(r.generation_cost(), 1400.0, 1e-5);
}

TEST(Ed, ZeroDemandZeroDispatch) {
  auto b = merit_toy(0);
  auto r = solve_ed({b, network::Unconstrained{}, {}});
  EXPECT_LT(r.steps[0].generation.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(r.objective(), 0.0, 1e-6);
}

TEST(Ed, ShortageIsInfeasibleWithTimestep) {
  auto b = merit_toy(500);
  try {
    solve_ed({b, network::Unconstrained{}, {}});
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.timestep(), 0);
  }
}

TEST(Ed, NodalRespectsLineLimits) {
  const auto& b = oracle::fixture();
  auto ptdf = build_ptdf(b.grid);
  auto r = solve_ed({b, network::Nodal{ptdf}, {}});
  for (const auto& s : r.steps) {
    EXPECT_NEAR(s.injections.sum(), 0.0, 1e-6);
    for (std::size_t j = 0; j < b.grid.num_lines(); ++j)
      EXPECT_LE(std::abs(s.line_flows[static_cast<Eigen::Index>(j)]), b.grid.line(j).capacity + 1e-6);
  }
}

TEST(Ed, FlowBasedBetweenNodalAndIsolatedZones) {
  // Base rows only and no minRAM: the nodal basecase is feasible for the
  // flow-based market, and isolated zones (EX = 0) are feasible as well.
  const auto& b = oracle::fixture();
  auto ptdf = build_ptdf(b.grid);
  auto lodf = build_lodf(b.grid, ptdf);
  auto nodal = solve_ed({b, network::Nodal{ptdf}, {}});
  auto cnecs = select_cnecs(b.grid, ptdf, lodf, {0.05, 1.0, false});
  FbOptions fo;
  fo.minram = 0.0;
  auto fbp = build_fb_parameters(b, cnecs, nodal, fo);
  auto fb = solve_ed({b, network::FlowBased{fbp}, {}});
  auto isolated = solve_ed({b, network::Ntc{NtcTable::uniform(3, 0.0)}, {}});
  EXPECT_LE(fb.objective(), nodal.objective() * (1 + 1e-6));
  EXPECT_LE(fb.objective(), isolated.objective() * (1 + 1e-6));

  // With the default parameters the domain always contains NP = 0.
  auto full = build_fb_parameters(b, select_cnecs(b.grid, ptdf, lodf, {}), nodal, {});
  auto fb_full = solve_ed({b, network::FlowBased{full}, {}});
  EXPECT_LE(fb_full.objective(), isolated.objective() * (1 + 1e-6));
}

TEST(Ed, FlowBasedRowsHoldAtOptimum) {
  const auto& b = oracle::fixture();
  auto ptdf = build_ptdf(b.grid);
  auto nodal = solve_ed({b, network::Nodal{ptdf}, {}});
  auto fbp = build_fb_parameters(b, select_cnecs(b.grid, ptdf, build_lodf(b.grid, ptdf), {}), nodal, {});
  auto r = solve_ed({b, network::FlowBased{fbp}, {}});
  for (std::size_t t = 0; t < r.size(); ++t) {
    const auto& s = fbp.steps[t];
    Vector slack = s.rows() * r.steps[t].net_positions - s.limits();
    EXPECT_LE(slack.maxCoeff(), 1e-6);
    EXPECT_NEAR(r.steps[t].net_positions.sum(), 0.0, 1e-6);
  }
}

TEST(Ed, NtcRelaxationIsMonotone) {
  const auto& b = oracle::fixture();
  double previous = std::numeric_limits<double>::infinity();
  for (double ntc : {0.0, 25.0, 50.0, 100.0, 200.0, 400.0}) {
    auto r = solve_ed({b, network::Ntc{NtcTable::uniform(3, ntc)}, {}});
    EXPECT_LE(r.objective(), previous * (1 + 1e-7)) << ntc;
    previous = r.objective();
  }
  EXPECT_LE(fixture_uniform().objective(), previous * (1 + 1e-7));
}

TEST(Ed, NtcLimitsRespected) {
  const auto& b = oracle::fixture();
  auto r = solve_ed({b, network::Ntc{NtcTable::uniform(3, 60.0)}, {}});
  for (const auto& s : r.steps) EXPECT_LE(s.exchanges.maxCoeff(), 60.0 + 1e-6);
}

TEST(Ed, CurtailmentPricedAtPenalty) {
  const auto& r = fixture_uniform();
  for (const auto& s : r.steps) EXPECT_NEAR(s.curtailment_cost, 5.0 * s.curtailment.sum(), 1e-6);
}

TEST(NtcTableTest, ValidatesShapeAndSign) {
  NtcTable t{Matrix::Constant(2, 2, -1.0)};
  EXPECT_THROW(t.validate(2), ConfigError);
  EXPECT_THROW(NtcTable::uniform(3, 10).validate(2), ConfigError);
}

TEST(Redispatch, NodalMarketNeedsNone) {
  const auto& b = oracle::fixture();
  auto ptdf = build_ptdf(b.grid);
  auto nodal = solve_ed({b, network::Nodal{ptdf}, {}});
  auto rd = solve_redispatch(nodal, b, {});
  EXPECT_LT(rd.redispatch_volume(), 1e-4);
  EXPECT_LT(rd.redispatch_cost(), 1e-3);
}

TEST(Redispatch, MatchesSimplexOracle) {
  const auto& b = oracle::fixture();
  const auto& market = fixture_uniform();
  auto ptdf = build_ptdf(b.grid);
  RedispatchOptions opt;
  std::size_t congested = 0;
  for (std::size_t t = 0; t < b.series.size(); ++t) {
    auto in = redispatch_input(b, market.steps[t], t);
    auto step = redispatch_step(b, ptdf, t, in, opt);
    auto lp = redispatch_oracle(b, t, in, opt);
    ASSERT_TRUE(lp.feasible) << t;
    EXPECT_LT(rel(step.objective, lp.objective), 1e-6) << t;
    double volume = 0.0;
    for (std::size_t k = 0; k < b.fleet.dispatchable().size(); ++k) volume += lp.x[3 * k + 1] + lp.x[3 * k + 2];
    EXPECT_LT(rel(step.redispatch_volume, volume), 1e-6) << t;
    congested += volume > 1e-6;
  }
  EXPECT_GT(congested, 0u);  // the fixture must exercise the oracle
}

TEST(Redispatch, RestoresNodalFeasibility) {
  const auto& b = oracle::fixture();
  auto rd = solve_redispatch(fixture_uniform(), b, {});
  for (const auto& s : rd.steps) {
    EXPECT_LE(s.max_overload, 1e-6);
    for (std::size_t j = 0; j < b.grid.num_lines(); ++j)
      EXPECT_LE(std::abs(s.line_flows[static_cast<Eigen::Index>(j)]), b.grid.line(j).capacity + 1e-6);
  }
  EXPECT_GT(rd.redispatch_volume(), 0.0);
}

TEST(Redispatch, CostIsPricedVolume) {
  const auto& b = oracle::fixture();
  auto rd = solve_redispatch(fixture_uniform(), b, {});
  for (const auto& s : rd.steps) {
    EXPECT_NEAR(s.redispatch_cost, 30.0 * s.redispatch_volume, 1e-6);
    EXPECT_NEAR(s.redispatch_volume, s.redispatch.cwiseAbs().sum(), 1e-6);
  }
}

TEST(Redispatch, CurtailmentNeverBelowMarket) {
  const auto& b = oracle::fixture();
  auto rd = solve_redispatch(fixture_uniform(), b, {});
  for (std::size_t t = 0; t < rd.size(); ++t)
    EXPECT_TRUE((rd.steps[t].curtailment.array() >= fixture_uniform().steps[t].curtailment.array() - 1e-7).all());
}

TEST(Redispatch, NegativePenaltyRejected) {
  const auto& b = oracle::fixture();
  RedispatchOptions opt;
  opt.redispatch_price = -1;
  EXPECT_THROW(solve_redispatch(fixture_uniform(), b, opt), ConfigError);
}
