#ifndef FBMC_DISPATCH_HPP
#define FBMC_DISPATCH_HPP

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "fbmc/conic.hpp"
#include "fbmc/core/error.hpp"
#include "fbmc/core/parallel.hpp"
#include "fbmc/fb_params.hpp"
#include "fbmc/grid.hpp"
#include "fbmc/results.hpp"

namespace fbmc {

// ---------------------------------------------------------------------------
// Problem definition
// ---------------------------------------------------------------------------

/// Directed zone-pair exchange limits. Unlisted pairs carry no capacity.
struct NtcTable {
  Matrix limits;  // zones x zones, MW

  static NtcTable uniform(std::size_t zones, double value) {
    const auto z = static_cast<Eigen::Index>(zones);
    NtcTable t{Matrix::Constant(z, z, value)};
    t.limits.diagonal().setZero();
    t.validate(zones);
    return t;
  }

  NtcTable scaled(double factor) const { return {limits * factor}; }

  void validate(std::size_t zones) const {
    const auto z = static_cast<Eigen::Index>(zones);
    if (limits.rows() != z || limits.cols() != z)
      throw ConfigError("NTC table does not match the zone list");
    if ((limits.array() < 0.0).any()) throw ConfigError("NTC limits must be nonnegative");
  }

  /// CSV with columns from_zone, to_zone, ntc_mw.
  static NtcTable read(const std::filesystem::path& path, const GridCase& grid) {
    auto table = csv::Table::read(path);
    const auto cf = table.column("from_zone"), ct = table.column("to_zone"),
               cv = table.column("ntc_mw");
    const auto z = static_cast<Eigen::Index>(grid.num_zones());
    NtcTable t{Matrix::Zero(z, z)};
    for (const auto& row : table.rows()) {
      auto a = grid.find_zone(table.text(row, cf));
      auto b = grid.find_zone(table.text(row, ct));
      if (!a || !b) throw DataError(table.file(), row.line, "unknown zone in NTC table");
      if (*a == *b) throw DataError(table.file(), row.line, "NTC pair must join two zones");
      double v = table.number(row, cv);
      if (v < 0.0) throw DataError(table.file(), row.line, "NTC limit must be nonnegative");
      t.limits(static_cast<Eigen::Index>(*a), static_cast<Eigen::Index>(*b)) = v;
    }
    return t;
  }
};

namespace network {
struct Unconstrained {};
struct Nodal {
  PtdfMatrix ptdf;
};
struct Ntc {
  NtcTable table;
};
struct FlowBased {
  FbParameters params;
};
}  // namespace network

using NetworkRepresentation =
    std::variant<network::Unconstrained, network::Nodal, network::Ntc, network::FlowBased>;

inline std::string representation_name(const NetworkRepresentation& n) {
  static const char* names[] = {"unconstrained", "nodal", "ntc", "flow_based"};
  return names[n.index()];
}

struct EdOptions {
  double curtailment_penalty = 5.0;  // p, $/MWh
  double exchange_penalty = 0.01;    // $/MWh on every bilateral exchange
  unsigned threads = 1;
};

struct EdProblem {
  const CaseBundle& bundle;
  NetworkRepresentation network;
  EdOptions options;
};

namespace detail {

inline void validate(const EdProblem& p) {
  if (p.options.curtailment_penalty < 0.0 || p.options.exchange_penalty < 0.0)
    throw ConfigError("penalties must be nonnegative");
  if (auto* ntc = std::get_if<network::Ntc>(&p.network))
    ntc->table.validate(p.bundle.grid.num_zones());
  if (auto* fb = std::get_if<network::FlowBased>(&p.network)) {
    if (fb->params.size() != p.bundle.series.size())
      throw ConfigError("flow-based parameters do not cover the horizon");
    if (fb->params.zones.size() != p.bundle.grid.num_zones())
      throw ConfigError("flow-based parameters refer to a different zone list");
  }
}

inline void check_status(const conic::Solution& sol, std::size_t t, const std::string& stage) {
  switch (sol.status) {
    case conic::Status::optimal:
      return;
    case conic::Status::infeasible:
      throw InfeasibleError(fmt::format("{} infeasible at timestep {}", stage, t),
                            static_cast<int>(t), sol.certificate);
    case conic::Status::unbounded:
      throw ConfigError(fmt::format("{} unbounded at timestep {}", stage, t));
    case conic::Status::failed:
      break;
  }
  throw SolverError(fmt::format("{} solver failed at timestep {} after {} iterations", stage, t,
                                sol.iterations));
}

/// Decision variables and derived expressions of one market timestep.
struct MarketModel {
  std::vector<conic::Var> gen;   // dispatchable units, fleet.dispatchable() order
  std::vector<conic::Var> curt;  // intermittent units
  std::vector<std::vector<std::optional<conic::Var>>> ex;
  std::vector<conic::LinExpr> injection;  // per node
  std::vector<conic::LinExpr> net_position;
  conic::LinExpr generation_cost;
  conic::LinExpr curtailment_cost;
  conic::LinExpr exchange_cost;
};

/// Generator, curtailment and exchange variables with balance and
/// net-position definitions. `ntc` (if given) caps every exchange.
inline MarketModel build_market(conic::Model& m, const CaseBundle& b, std::size_t t,
                                const EdOptions& opt, const Matrix* ntc) {
  const auto& fleet = b.fleet;
  const auto& grid = b.grid;
  const Vector& demand = b.series.demand[t];
  const Vector& avail = b.series.availability[t];
  MarketModel mm;
  mm.injection.assign(grid.num_nodes(), conic::LinExpr());
  for (std::size_t n = 0; n < grid.num_nodes(); ++n)
    mm.injection[n] = conic::LinExpr(-demand[static_cast<Eigen::Index>(n)]);
  double supply = 0.0;
  for (std::size_t k : fleet.dispatchable()) {
    const auto& g = fleet.at(k);
    auto v = m.add_var(0.0, g.capacity, "gen " + g.id);
    mm.gen.push_back(v);
    mm.injection[g.node] += conic::LinExpr(v);
    mm.generation_cost.add(v, g.cost);
    supply += g.capacity;
  }
  for (std::size_t r = 0; r < fleet.intermittent().size(); ++r) {
    const auto& g = fleet.at(fleet.intermittent()[r]);
    const double a = avail[static_cast<Eigen::Index>(r)];
    auto v = m.add_var(0.0, a, "curtailment " + g.id);
    mm.curt.push_back(v);
    mm.injection[g.node] += a - conic::LinExpr(v);
    mm.curtailment_cost.add(v, opt.curtailment_penalty);
    supply += a;
  }
  conic::LinExpr balance;
  for (const auto& e : mm.injection) balance += e;
  m.add_eq(balance, 0.0, fmt::format("t{} balance", t));

  // Exchanges: any zone pair may trade. The cap keeps the problem bounded
  // when the exchange penalty is zero and never binds otherwise.
  const std::size_t zones = grid.num_zones();
  const double cap = supply + demand.sum() + 1.0;
  mm.ex.assign(zones, std::vector<std::optional<conic::Var>>(zones));
  mm.net_position.assign(zones, conic::LinExpr());
  for (std::size_t n = 0; n < grid.num_nodes(); ++n) mm.net_position[grid.zone_of(n)] += mm.injection[n];
  std::vector<conic::LinExpr> ex_balance(zones);
  for (std::size_t a = 0; a < zones; ++a)
    for (std::size_t z = 0; z < zones; ++z) {
      if (a == z) continue;
      double ub = ntc ? (*ntc)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(z)) : cap;
      auto v = m.add_var(0.0, ub, fmt::format("exchange {}->{}", grid.zones()[a], grid.zones()[z]));
      mm.ex[a][z] = v;
      mm.exchange_cost.add(v, opt.exchange_penalty);
      ex_balance[a] += conic::LinExpr(v);
      ex_balance[z] -= conic::LinExpr(v);
    }
  for (std::size_t z = 0; z < zones; ++z)
    m.add_eq(mm.net_position[z] - ex_balance[z], 0.0,
             fmt::format("t{} net position {}", t, grid.zones()[z]));
  return mm;
}

inline void add_nodal_limits(conic::Model& m, const GridCase& grid, const PtdfMatrix& ptdf,
                             const std::vector<conic::LinExpr>& injection, std::size_t t) {
  for (std::size_t j = 0; j < grid.num_lines(); ++j) {
    conic::LinExpr flow;
    for (std::size_t n = 0; n < grid.num_nodes(); ++n) {
      double f = ptdf.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n));
      if (f != 0.0) flow += f * injection[n];
    }
    const auto& line = grid.line(j);
    m.add_le(flow, line.capacity, fmt::format("t{} line {} (+)", t, line.id));
    m.add_ge(flow, -line.capacity, fmt::format("t{} line {} (-)", t, line.id));
  }
}

/// Zonal PTDF expression of each CNEC in the positive direction.
inline std::vector<conic::LinExpr> cnec_flows(const FbTimestep& s,
                                              const std::vector<conic::LinExpr>& np) {
  std::vector<conic::LinExpr> flows(static_cast<std::size_t>(s.ptdf_z.rows()));
  for (Eigen::Index i = 0; i < s.ptdf_z.rows(); ++i)
    for (Eigen::Index z = 0; z < s.ptdf_z.cols(); ++z)
      if (s.ptdf_z(i, z) != 0.0) flows[static_cast<std::size_t>(i)] += s.ptdf_z(i, z) * np[static_cast<std::size_t>(z)];
  return flows;
}

inline TimestepDispatch extract(const conic::Solution& sol, const MarketModel& mm,
                                const CaseBundle& b, const PtdfMatrix& ptdf, std::size_t t) {
  const auto& fleet = b.fleet;
  TimestepDispatch d;
  d.generation = Vector::Zero(static_cast<Eigen::Index>(fleet.size()));
  for (std::size_t k = 0; k < mm.gen.size(); ++k)
    d.generation[static_cast<Eigen::Index>(fleet.dispatchable()[k])] = sol.value(mm.gen[k]);
  d.curtailment = Vector::Zero(static_cast<Eigen::Index>(mm.curt.size()));
  for (std::size_t r = 0; r < mm.curt.size(); ++r) {
    double c = sol.value(mm.curt[r]);
    d.curtailment[static_cast<Eigen::Index>(r)] = c;
    d.generation[static_cast<Eigen::Index>(fleet.intermittent()[r])] =
        b.series.availability[t][static_cast<Eigen::Index>(r)] - c;
  }
  d.injections = Vector::Zero(static_cast<Eigen::Index>(mm.injection.size()));
  for (std::size_t n = 0; n < mm.injection.size(); ++n)
    d.injections[static_cast<Eigen::Index>(n)] = sol.value(mm.injection[n]);
  const auto zones = static_cast<Eigen::Index>(mm.net_position.size());
  d.net_positions = Vector::Zero(zones);
  for (Eigen::Index z = 0; z < zones; ++z) d.net_positions[z] = sol.value(mm.net_position[static_cast<std::size_t>(z)]);
  d.exchanges = Matrix::Zero(zones, zones);
  for (std::size_t a = 0; a < mm.ex.size(); ++a)
    for (std::size_t z = 0; z < mm.ex.size(); ++z)
      if (mm.ex[a][z]) d.exchanges(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(z)) = sol.value(*mm.ex[a][z]);
  d.line_flows = ptdf.flows(d.injections);
  d.generation_cost = sol.value(mm.generation_cost);
  d.curtailment_cost = sol.value(mm.curtailment_cost);
  d.exchange_cost = sol.value(mm.exchange_cost);
  d.objective = d.generation_cost + d.curtailment_cost + d.exchange_cost;
  return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Market clearing
// ---------------------------------------------------------------------------

/// Economic dispatch with the chosen network representation. Timesteps are
/// independent and solved one LP each.
inline DispatchResult solve_ed(const EdProblem& problem) {
  detail::validate(problem);
  const CaseBundle& b = problem.bundle;
  const PtdfMatrix ptdf = std::holds_alternative<network::Nodal>(problem.network)
                              ? std::get<network::Nodal>(problem.network).ptdf
                              : build_ptdf(b.grid);
  DispatchResult result;
  result.representation = representation_name(problem.network);
  result.steps.resize(b.series.size());
  parallel_for(b.series.size(), problem.options.threads, [&](std::size_t t) {
    conic::Model m;
    const Matrix* ntc = nullptr;
    if (auto* n = std::get_if<network::Ntc>(&problem.network)) ntc = &n->table.limits;
    auto mm = detail::build_market(m, b, t, problem.options, ntc);
    if (std::holds_alternative<network::Nodal>(problem.network))
      detail::add_nodal_limits(m, b.grid, ptdf, mm.injection, t);
    if (auto* fb = std::get_if<network::FlowBased>(&problem.network)) {
      const auto& s = fb->params.steps[t];
      auto flows = detail::cnec_flows(s, mm.net_position);
      for (std::size_t i = 0; i < flows.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        m.add_le(flows[i], s.ram_pos[ii], fmt::format("t{} cnec {} (+)", t, fb->params.cnec_ids[i]));
        m.add_ge(flows[i], -s.ram_neg[ii], fmt::format("t{} cnec {} (-)", t, fb->params.cnec_ids[i]));
      }
    }
    m.minimize(mm.generation_cost + mm.curtailment_cost + mm.exchange_cost);
    auto sol = m.solve();
    detail::check_status(sol, t, "market clearing");
    result.steps[t] = detail::extract(sol, mm, b, ptdf, t);
  });
  return result;
}

// ---------------------------------------------------------------------------
// Congestion management
// ---------------------------------------------------------------------------

struct RedispatchOptions {
  double redispatch_price = 30.0;    // c_red, $/MWh
  double curtailment_penalty = 5.0;  // p, $/MWh
  std::optional<double> slack_penalty;  // enables priced balance slack
  unsigned threads = 1;
};

/// Reference point of one redispatch problem.
struct RedispatchInput {
  Vector g_ref;         // dispatchable schedule (fleet.dispatchable() order)
  Vector c_floor;       // minimum curtailment per intermittent unit
  Vector availability;  // infeed available per intermittent unit
  // Fixed balancing injection at the slack node, MW. Priced at the slack
  // penalty and counted as slack volume.
  double imbalance = 0.0;
};

inline RedispatchInput redispatch_input(const CaseBundle& b, const TimestepDispatch& market,
                                        std::size_t t) {
  RedispatchInput in;
  const auto& fleet = b.fleet;
  in.g_ref.resize(static_cast<Eigen::Index>(fleet.dispatchable().size()));
  for (std::size_t k = 0; k < fleet.dispatchable().size(); ++k)
    in.g_ref[static_cast<Eigen::Index>(k)] = market.generation[static_cast<Eigen::Index>(fleet.dispatchable()[k])];
  in.c_floor = market.curtailment;
  in.availability = b.series.availability[t];
  return in;
}

/// Minimum-cost nodal correction of one timestep: generation cost plus
/// curtailment penalty plus c_red per MWh moved away from g_ref.
inline RedispatchStep redispatch_step(const CaseBundle& b, const PtdfMatrix& ptdf, std::size_t t,
                                      const RedispatchInput& in, const RedispatchOptions& opt) {
  const auto& fleet = b.fleet;
  const auto& grid = b.grid;
  if (opt.redispatch_price < 0.0 || opt.curtailment_penalty < 0.0)
    throw ConfigError("penalties must be nonnegative");
  conic::Model m;
  const Vector& demand = b.series.demand[t];
  std::vector<conic::LinExpr> injection(grid.num_nodes());
  for (std::size_t n = 0; n < grid.num_nodes(); ++n)
    injection[n] = conic::LinExpr(-demand[static_cast<Eigen::Index>(n)]);
  injection[grid.slack()] += in.imbalance;
  conic::LinExpr gen_cost, curt_cost, red_cost, slack_cost;
  std::vector<conic::Var> gen, curt;
  for (std::size_t k = 0; k < fleet.dispatchable().size(); ++k) {
    const auto& g = fleet.at(fleet.dispatchable()[k]);
    auto v = m.add_var(0.0, g.capacity, "gen " + g.id);
    auto up = m.add_var(0.0, conic::kInf, "up " + g.id);
    auto down = m.add_var(0.0, conic::kInf, "down " + g.id);
    m.add_eq(v - up + conic::LinExpr(down), in.g_ref[static_cast<Eigen::Index>(k)],
             fmt::format("t{} redispatch {}", t, g.id));
    gen.push_back(v);
    injection[g.node] += conic::LinExpr(v);
    gen_cost.add(v, g.cost);
    red_cost.add(up, opt.redispatch_price);
    red_cost.add(down, opt.redispatch_price);
  }
  for (std::size_t r = 0; r < fleet.intermittent().size(); ++r) {
    const auto& g = fleet.at(fleet.intermittent()[r]);
    const auto rr = static_cast<Eigen::Index>(r);
    const double a = in.availability[rr];
    const double floor = in.c_floor[rr];
    if (floor > a + 1e-9)
      throw Error(fmt::format("curtailment floor of {} exceeds its availability at t{}", g.id, t));
    auto v = m.add_var(std::min(floor, a), a, "curtailment " + g.id);
    curt.push_back(v);
    injection[g.node] += a - conic::LinExpr(v);
    curt_cost.add(v, opt.curtailment_penalty);
  }
  conic::LinExpr balance;
  for (const auto& e : injection) balance += e;
  std::optional<conic::Var> shed, spill;
  if (opt.slack_penalty) {
    shed = m.add_var(0.0, conic::kInf, "load shedding");
    spill = m.add_var(0.0, conic::kInf, "spillage");
    injection[grid.slack()] += *shed - *spill;
    balance += *shed - *spill;
    slack_cost.add(*shed, *opt.slack_penalty);
    slack_cost.add(*spill, *opt.slack_penalty);
  }
  m.add_eq(balance, 0.0, fmt::format("t{} balance", t));
  detail::add_nodal_limits(m, grid, ptdf, injection, t);
  m.minimize(gen_cost + curt_cost + red_cost + slack_cost);
  auto sol = m.solve();
  detail::check_status(sol, t, "redispatch");

  RedispatchStep s;
  s.generation = Vector::Zero(static_cast<Eigen::Index>(fleet.size()));
  s.redispatch = Vector::Zero(static_cast<Eigen::Index>(gen.size()));
  for (std::size_t k = 0; k < gen.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    double g = sol.value(gen[k]);
    s.generation[static_cast<Eigen::Index>(fleet.dispatchable()[k])] = g;
    s.redispatch[kk] = g - in.g_ref[kk];
  }
  s.curtailment = Vector::Zero(static_cast<Eigen::Index>(curt.size()));
  for (std::size_t r = 0; r < curt.size(); ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    double c = sol.value(curt[r]);
    s.curtailment[rr] = c;
    s.generation[static_cast<Eigen::Index>(fleet.intermittent()[r])] = in.availability[rr] - c;
  }
  Vector inj(static_cast<Eigen::Index>(injection.size()));
  for (std::size_t n = 0; n < injection.size(); ++n) inj[static_cast<Eigen::Index>(n)] = sol.value(injection[n]);
  s.line_flows = ptdf.flows(inj);
  s.max_overload = (s.line_flows.cwiseAbs() - grid.capacities()).maxCoeff();
  s.generation_cost = sol.value(gen_cost);
  s.curtailment_cost = opt.curtailment_penalty * s.curtailment.sum();
  s.curtailment_delta_cost =
      opt.curtailment_penalty * (s.curtailment - in.c_floor.cwiseMin(in.availability)).sum();
  s.redispatch_volume = s.redispatch.cwiseAbs().sum();
  s.redispatch_cost = opt.redispatch_price * s.redispatch_volume;
  s.slack_volume = std::abs(in.imbalance);
  if (opt.slack_penalty) s.slack_volume += sol.value(*shed) + sol.value(*spill);
  s.slack_cost = opt.slack_penalty.value_or(0.0) * s.slack_volume;
  s.objective = s.generation_cost + s.curtailment_cost + s.redispatch_cost + s.slack_cost;
  return s;
}

/// Redispatch of a market result against the full nodal network.
inline RedispatchResult solve_redispatch(const DispatchResult& market, const CaseBundle& b,
                                         const RedispatchOptions& opt) {
  if (market.size() != b.series.size()) throw Error("market result does not cover the horizon");
  const PtdfMatrix ptdf = build_ptdf(b.grid);
  RedispatchResult res;
  res.steps.resize(market.size());
  parallel_for(market.size(), opt.threads, [&](std::size_t t) {
    res.steps[t] = redispatch_step(b, ptdf, t, redispatch_input(b, market.steps[t], t), opt);
  });
  return res;
}

}  // namespace fbmc

#endif  // FBMC_DISPATCH_HPP
