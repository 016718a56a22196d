#ifndef FBMC_PIPELINE_HPP
#define FBMC_PIPELINE_HPP

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fbmc/chance.hpp"
#include "fbmc/config.hpp"
#include "fbmc/core/hash.hpp"
#include "fbmc/dispatch.hpp"
#include "fbmc/fb_params.hpp"
#include "fbmc/grid.hpp"
#include "fbmc/montecarlo.hpp"

namespace fbmc {

struct StageCosts {
  double generation = 0.0;
  double curtailment = 0.0;
  double redispatch = 0.0;
  double exchange_penalty = 0.0;  // not part of the total

  double total() const { return generation + curtailment + redispatch; }
};

struct CmSummary {
  std::size_t samples = 0;
  std::size_t excluded = 0;
  double mean_cost = 0.0;
  double deterministic_cost = 0.0;
  double mean_redispatch_cost = 0.0;
  double mean_curtailment_cost = 0.0;
  double mean_slack_cost = 0.0;
};

struct ScenarioReport {
  std::string name;
  Mode mode = Mode::fbmc;
  std::vector<std::string> stages;  // executed, in order
  std::optional<StageCosts> basecase;
  StageCosts d1;
  StageCosts d0;
  double curtailment_volume = 0.0;  // C, MWh after congestion management
  double redispatch_volume = 0.0;   // R, MWh
  std::string alpha_source;
  std::optional<CmSummary> cm;
  std::string config_hash;
  std::string dataset_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
  std::map<std::string, double> timings;  // seconds per stage
};

struct ScenarioResults {
  ScenarioConfig config;
  CaseBundle bundle;
  std::optional<DispatchResult> basecase;
  std::optional<CnecSet> cnecs;
  std::optional<FbParameters> fb;
  DispatchResult market;
  std::optional<CcDispatchResult> cc;
  RedispatchResult redispatch;
  std::vector<Vector> alpha;
  std::optional<CmStatistics> cm;
};

struct Scenario {
  ScenarioReport report;
  ScenarioResults results;
};

/// SHA-256 over the five dataset files in a fixed order.
inline std::string dataset_hash(const std::filesystem::path& dir) {
  std::string all;
  for (const char* f : {"nodes.csv", "lines.csv", "generators.csv", "demand.csv", "availability.csv"})
    all += sha256_hex(read_file(dir / f));
  return sha256_hex(all);
}

inline CaseBundle load_case(const ScenarioConfig& c) {
  CaseBundle b = load_grid_data(c.dataset);
  if (c.capacity_scale != 1.0) b.grid = b.grid.with_capacity_scale(c.capacity_scale);
  return b;
}

inline std::map<std::string, double> read_fav(const std::filesystem::path& path) {
  auto table = csv::Table::read(path);
  const auto ci = table.column("cnec_id"), cv = table.column("fav_mw");
  std::map<std::string, double> fav;
  for (const auto& row : table.rows()) fav[table.text(row, ci)] = table.number(row, cv);
  return fav;
}

/// Participation proportional to each unit's two-sided headroom on the
/// market schedule, min(g, gbar - g), so a unit pinned at a bound takes no
/// share. Falls back to installed capacity when nothing has headroom.
inline std::vector<Vector> pro_rata_alpha(const CaseBundle& b, const DispatchResult& market) {
  const auto& disp = b.fleet.dispatchable();
  const auto nd = static_cast<Eigen::Index>(disp.size());
  Vector cap(nd);
  for (Eigen::Index k = 0; k < nd; ++k) cap[k] = b.fleet.at(disp[static_cast<std::size_t>(k)]).capacity;
  if (cap.sum() <= 0.0) throw ConfigError("no dispatchable capacity to share deviations");
  std::vector<Vector> out;
  for (const auto& step : market.steps) {
    Vector a(nd);
    for (Eigen::Index k = 0; k < nd; ++k) {
      const double g = step.generation[static_cast<Eigen::Index>(disp[static_cast<std::size_t>(k)])];
      a[k] = std::max(0.0, std::min(g, cap[k] - g));
    }
    if (a.sum() < kOnlineTolerance) a = cap;
    out.push_back(a / a.sum());
  }
  return out;
}

namespace detail {

class StageTimer {
public:
  StageTimer(ScenarioReport& r, std::string stage) : r_(r), stage_(std::move(stage)) {
    r_.stages.push_back(stage_);
  }
  ~StageTimer() {
    r_.timings[stage_] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  ScenarioReport& r_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline RedispatchResult zero_redispatch(const DispatchResult& market, const CaseBundle& b,
                                        const RedispatchOptions& opt) {
  RedispatchResult r;
  for (std::size_t t = 0; t < market.size(); ++t) {
    const auto& m = market.steps[t];
    RedispatchStep s;
    s.generation = m.generation;
    s.redispatch = Vector::Zero(static_cast<Eigen::Index>(b.fleet.dispatchable().size()));
    s.curtailment = m.curtailment;
    s.line_flows = m.line_flows;
    s.generation_cost = m.generation_cost;
    s.curtailment_cost = opt.curtailment_penalty * m.curtailment.sum();
    s.max_overload = (m.line_flows.cwiseAbs() - b.grid.capacities()).maxCoeff();
    s.objective = s.generation_cost + s.curtailment_cost;
    r.steps.push_back(std::move(s));
  }
  return r;
}

/// Wraps a stage so failures carry the stage name and config hash.
template <class Fn>
auto run_stage(const std::string& stage, const std::string& hash, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(fmt::format("stage {} (config {}): {}", stage, hash.substr(0, 12), e.what()),
                          e.timestep(), e.binding());
  } catch (const SolverError& e) {
    throw SolverError(fmt::format("stage {} (config {}): {}", stage, hash.substr(0, 12), e.what()));
  }
}

}  // namespace detail

/// Builds the flow-based parameters of a flow-based mode: nodal basecase,
/// CNEC selection, pro-rata GSK, reference flows and RAM.
inline void build_flow_based_stages(Scenario& sc) {
  auto& c = sc.results.config;
  auto& r = sc.report;
  auto& res = sc.results;
  const auto hash = r.config_hash;
  EdOptions ed{c.curtailment_penalty, c.exchange_penalty, c.threads};
  const PtdfMatrix ptdf = build_ptdf(res.bundle.grid);
  {
    detail::StageTimer timer(r, "basecase");
    res.basecase = detail::run_stage("basecase", hash, [&] {
      return solve_ed({res.bundle, network::Nodal{ptdf}, ed});
    });
    r.basecase = StageCosts{res.basecase->generation_cost(), res.basecase->curtailment_cost(), 0.0,
                            0.0};
    for (const auto& s : res.basecase->steps) r.basecase->exchange_penalty += s.exchange_cost;
  }
  {
    detail::StageTimer timer(r, "fb_parameters");
    LodfMatrix lodf = build_lodf(res.bundle.grid, ptdf);
    res.cnecs = select_cnecs(res.bundle.grid, ptdf, lodf,
                             {c.z2z_threshold, c.outage_sensitivity, c.cross_border_only});
    FbOptions fo;
    fo.minram = c.minram;
    if (c.fav_file) fo.fav = read_fav(*c.fav_file);
    res.fb = build_fb_parameters(res.bundle, *res.cnecs, *res.basecase, fo);
    // GSK fallbacks repeat hour after hour; report each once with a count.
    std::map<std::string, std::vector<std::size_t>> fallback;
    std::vector<std::string> order;
    for (const auto& g : res.fb->gsks)
      for (const auto& w : g.warnings) {
        auto msg = w.substr(w.find(": ") + 2);
        if (!fallback.count(msg)) order.push_back(msg);
        fallback[msg].push_back(g.timestep);
      }
    for (const auto& msg : order) {
      const auto& ts = fallback[msg];
      r.warnings.push_back(fmt::format("{} ({} timestep{}, first {})", msg, ts.size(),
                                       ts.size() == 1 ? "" : "s", res.bundle.series.timesteps[ts.front()]));
    }
  }
}

/// Executes the stage sequence of the configured mode.
inline Scenario run_scenario(const ScenarioConfig& config) {
  config.validate();
  Scenario sc;
  auto& r = sc.report;
  auto& res = sc.results;
  res.config = config;
  r.name = config.name;
  r.mode = config.mode;
  r.seed = config.seed;
  r.config_hash = config.hash();
  r.dataset_hash = dataset_hash(config.dataset);
  res.bundle = load_case(config);
  const auto& c = res.config;
  const auto& hash = r.config_hash;
  EdOptions ed{c.curtailment_penalty, c.exchange_penalty, c.threads};
  RedispatchOptions rd{c.redispatch_price, c.curtailment_penalty, std::nullopt, c.threads};

  std::optional<UncertaintyModel> unc;
  if (c.chance_constrained() || c.samples > 0)
    unc = build_covariance(res.bundle.series, c.relative_std, c.correlation, c.epsilon);

  if (is_flow_based(c.mode)) {
    build_flow_based_stages(sc);
    if (c.chance_constrained()) {
      detail::StageTimer timer(r, "d1_market_cc");
      res.cc = detail::run_stage("d1_market_cc", hash, [&] {
        return solve_cc_ed({res.bundle, network::FlowBased{*res.fb}, ed}, *unc);
      });
      res.market = res.cc->dispatch;
    } else {
      detail::StageTimer timer(r, "d1_market");
      res.market = detail::run_stage("d1_market", hash, [&] {
        return solve_ed({res.bundle, network::FlowBased{*res.fb}, ed});
      });
    }
  } else {
    const std::string stage = "d1_market_" + to_string(c.mode);
    detail::StageTimer timer(r, stage);
    NetworkRepresentation net = network::Unconstrained{};
    if (c.mode == Mode::nodal) net = network::Nodal{build_ptdf(res.bundle.grid)};
    if (c.mode == Mode::ntc) {
      NtcTable table = c.ntc_file ? NtcTable::read(*c.ntc_file, res.bundle.grid)
                                  : NtcTable::uniform(res.bundle.grid.num_zones(), *c.ntc);
      net = network::Ntc{table};
    }
    res.market = detail::run_stage(stage, hash, [&] { return solve_ed({res.bundle, net, ed}); });
  }
  r.d1 = StageCosts{res.market.generation_cost(), res.market.curtailment_cost(), 0.0, 0.0};
  for (const auto& s : res.market.steps) r.d1.exchange_penalty += s.exchange_cost;

  if (c.mode == Mode::nodal) {
    // The nodal market is already network-feasible: no congestion management.
    res.redispatch = detail::zero_redispatch(res.market, res.bundle, rd);
  } else {
    detail::StageTimer timer(r, "d0_redispatch");
    res.redispatch = detail::run_stage("d0_redispatch", hash, [&] {
      return solve_redispatch(res.market, res.bundle, rd);
    });
  }
  r.d0 = StageCosts{res.redispatch.generation_cost(), res.redispatch.curtailment_cost(),
                    res.redispatch.redispatch_cost(), 0.0};
  r.curtailment_volume = res.redispatch.curtailment_volume();
  r.redispatch_volume = res.redispatch.redispatch_volume();

  if (c.samples > 0) {
    {
      detail::StageTimer timer(r, "alpha");
      if (c.chance_constrained() && c.alpha == "cc") {
        res.alpha = res.cc->alpha;
        r.alpha_source = "cc";
      } else if (is_flow_based(c.mode) && c.alpha == "cc") {
        // Same participation factors as the chance-constrained clearing on
        // these parameters, so the deterministic run sees the same response.
        auto aux = detail::run_stage("alpha", hash, [&] {
          return solve_cc_ed({res.bundle, network::FlowBased{*res.fb}, ed}, *unc);
        });
        res.alpha = aux.alpha;
        r.alpha_source = "cc_auxiliary";
      } else {
        res.alpha = pro_rata_alpha(res.bundle, res.market);
        r.alpha_source = "pro_rata";
        if (c.alpha == "cc")
          r.warnings.push_back("alpha: no flow-based parameters in this mode; using pro-rata headroom shares");
      }
    }
    detail::StageTimer timer(r, "montecarlo");
    auto samples = sample_deviations(*unc, c.samples, c.seed);
    CmOptions cm;
    cm.redispatch = rd;
    cm.redispatch.slack_penalty = c.slack_penalty;
    cm.threads = c.threads;
    res.cm = evaluate_cm(res.bundle, res.market, res.alpha, samples, cm);
    CmSummary s;
    s.samples = res.cm->samples;
    s.excluded = res.cm->excluded.size();
    s.mean_cost = res.cm->mean_cost();
    s.deterministic_cost = res.cm->deterministic_cost();
    s.mean_redispatch_cost = res.cm->mean_of(&CmRecord::redispatch_cost);
    s.mean_curtailment_cost = res.cm->mean_of(&CmRecord::curtailment_cost);
    s.mean_slack_cost = res.cm->mean_of(&CmRecord::slack_cost);
    r.cm = s;
  }
  return sc;
}

/// Stage list each mode executes before optional Monte Carlo stages.
inline std::vector<std::string> expected_stages(Mode m) {
  switch (m) {
    case Mode::fbmc:
    case Mode::fbmc_plus: return {"basecase", "fb_parameters", "d1_market", "d0_redispatch"};
    case Mode::fbmc_cc: return {"basecase", "fb_parameters", "d1_market_cc", "d0_redispatch"};
    case Mode::ntc: return {"d1_market_ntc", "d0_redispatch"};
    case Mode::nodal: return {"d1_market_nodal"};
    case Mode::uniform: return {"d1_market_uniform", "d0_redispatch"};
  }
  return {};
}

}  // namespace fbmc

#endif  // FBMC_PIPELINE_HPP
