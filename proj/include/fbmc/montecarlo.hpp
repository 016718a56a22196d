#ifndef FBMC_MONTECARLO_HPP
#define FBMC_MONTECARLO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "fbmc/chance.hpp"
#include "fbmc/core/parallel.hpp"
#include "fbmc/dispatch.hpp"

namespace fbmc {

/// One draw of forecast errors over the whole horizon.
struct DeviationSample {
  std::size_t id = 0;
  std::uint64_t seed = 0;
  std::vector<Vector> omega;  // per timestep, per intermittent unit, MW
};

/// Independent N(0, Sigma_t) draws per timestep. Sample i uses its own
/// generator seeded from (seed, i), so any subset can be regenerated alone.
inline DeviationSample sample_deviation(const UncertaintyModel& unc, std::uint64_t seed,
                                        std::size_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(std::uint64_t(id) >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  DeviationSample s{id, seed, {}};
  for (std::size_t t = 0; t < unc.size(); ++t) {
    const Matrix& f = unc.factor[t];
    Vector xi(f.cols());
    for (Eigen::Index c = 0; c < f.cols(); ++c) xi[c] = normal(rng);
    s.omega.push_back(f.cols() > 0 ? Vector(f * xi) : Vector::Zero(unc.covariance[t].rows()));
  }
  return s;
}

inline std::vector<DeviationSample> sample_deviations(const UncertaintyModel& unc,
                                                      std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("at least one deviation sample is required");
  std::vector<DeviationSample> out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) out.push_back(sample_deviation(unc, seed, i));
  return out;
}

/// Realized system state after the generator response to a deviation.
struct RealtimeState {
  RedispatchInput input;   // reference point for congestion management
  Vector injections;       // balanced nodal injections before redispatch
  double infeed_clamp = 0.0;     // MW removed by clamping r + omega into [0, gbar]
  double generator_clamp = 0.0;  // MW of response lost to generator limits
  double residual = 0.0;         // imbalance left by clamping, MW
};

/// Applies G = g_da - alpha * delta to the market schedule, where delta is
/// the change of net intermittent infeed (e'omega unless clamping bites).
/// Curtailment keeps its market value where still possible.
inline RealtimeState realtime_state(const CaseBundle& b, const TimestepDispatch& market,
                                    const Vector& alpha, const Vector& omega, std::size_t t) {
  const auto& fleet = b.fleet;
  const auto nd = static_cast<Eigen::Index>(fleet.dispatchable().size());
  const auto nr = static_cast<Eigen::Index>(fleet.intermittent().size());
  if (alpha.size() != nd) throw Error("alpha length does not match the dispatchable fleet");
  if (omega.size() != nr) throw Error("deviation length does not match the intermittent fleet");
  RealtimeState st;
  st.input = redispatch_input(b, market, t);
  const Vector& forecast = b.series.availability[t];
  double delta = 0.0;
  for (Eigen::Index r = 0; r < nr; ++r) {
    const double cap = fleet.at(fleet.intermittent()[static_cast<std::size_t>(r)]).capacity;
    const double raw = forecast[r] + omega[r];
    const double real = std::clamp(raw, 0.0, cap);
    st.infeed_clamp += std::abs(real - raw);
    const double floor = std::min(market.curtailment[r], real);
    delta += (real - floor) - (forecast[r] - market.curtailment[r]);
    st.input.availability[r] = real;
    st.input.c_floor[r] = floor;
  }
  double response = 0.0;
  for (Eigen::Index k = 0; k < nd; ++k) {
    const double cap = fleet.at(fleet.dispatchable()[static_cast<std::size_t>(k)]).capacity;
    const double target = st.input.g_ref[k] - alpha[k] * delta;
    const double g = std::clamp(target, 0.0, cap);
    st.generator_clamp += std::abs(g - target);
    response += g - st.input.g_ref[k];
    st.input.g_ref[k] = g;
  }
  st.residual = response + delta;
  // The residual is absorbed at the slack node as a priced, fixed slack.
  st.input.imbalance = -st.residual;
  st.injections = -b.series.demand[t];
  for (Eigen::Index k = 0; k < nd; ++k)
    st.injections[static_cast<Eigen::Index>(fleet.at(fleet.dispatchable()[static_cast<std::size_t>(k)]).node)] += st.input.g_ref[k];
  for (Eigen::Index r = 0; r < nr; ++r)
    st.injections[static_cast<Eigen::Index>(fleet.at(fleet.intermittent()[static_cast<std::size_t>(r)]).node)] +=
        st.input.availability[r] - st.input.c_floor[r];
  st.injections[static_cast<Eigen::Index>(b.grid.slack())] += st.input.imbalance;
  return st;
}

struct CmRecord {
  std::size_t sample = 0;
  std::size_t timestep = 0;
  bool feasible = true;
  double redispatch_cost = 0.0;
  double curtailment_cost = 0.0;
  double slack_cost = 0.0;
  double redispatch_volume = 0.0;
  double curtailment_volume = 0.0;
  double clamp_mass = 0.0;

  double cm_cost() const { return redispatch_cost + curtailment_cost + slack_cost; }
};

struct CmStatistics {
  std::size_t samples = 0;
  std::vector<CmRecord> records;        // sample-major, timestep-minor
  std::vector<CmRecord> baseline;       // omega = 0, per timestep
  std::vector<std::size_t> excluded;    // samples with an infeasible timestep
  std::vector<double> sample_cost;      // total CM cost per sample (NaN if excluded)
  std::vector<double> envelope_min, envelope_mean, envelope_max;  // per timestep
  std::vector<double> deterministic;    // per timestep baseline CM cost

  std::size_t included() const noexcept { return samples - excluded.size(); }

  /// Sum over timesteps of the per-timestep mean CM cost.
  double mean_cost() const {
    double v = 0.0;
    for (double m : envelope_mean) v += m;
    return v;
  }
  double deterministic_cost() const {
    double v = 0.0;
    for (double d : deterministic) v += d;
    return v;
  }
  double mean_of(double CmRecord::*field) const {
    if (included() == 0) return 0.0;
    double v = 0.0;
    for (const auto& r : records)
      if (std::find(excluded.begin(), excluded.end(), r.sample) == excluded.end()) v += r.*field;
    return v / static_cast<double>(included());
  }
};

struct CmOptions {
  RedispatchOptions redispatch;  // slack_penalty defaults to kDefaultSlackPenalty if unset
  unsigned threads = 1;
};

inline constexpr double kDefaultSlackPenalty = 1000.0;  // $/MWh

namespace detail {

inline CmRecord cm_record(const CaseBundle& b, const PtdfMatrix& ptdf, const TimestepDispatch& market,
                          const Vector& alpha, const Vector& omega, std::size_t t,
                          const RedispatchOptions& opt) {
  CmRecord rec;
  rec.timestep = t;
  auto st = realtime_state(b, market, alpha, omega, t);
  rec.clamp_mass = st.infeed_clamp + st.generator_clamp;
  try {
    auto step = redispatch_step(b, ptdf, t, st.input, opt);
    rec.redispatch_cost = step.redispatch_cost;
    rec.curtailment_cost = step.curtailment_cost;
    rec.slack_cost = step.slack_cost;
    rec.redispatch_volume = step.redispatch_volume;
    rec.curtailment_volume = step.curtailment.sum();
  } catch (const InfeasibleError&) {
    rec.feasible = false;
  } catch (const SolverError&) {
    rec.feasible = false;
  }
  return rec;
}

}  // namespace detail

/// Congestion management for every sample and the omega = 0 baseline.
/// Results are reduced in sample order, so they do not depend on `threads`.
inline CmStatistics evaluate_cm(const CaseBundle& b, const DispatchResult& market,
                                const std::vector<Vector>& alpha,
                                const std::vector<DeviationSample>& samples,
                                const CmOptions& options = {}) {
  const std::size_t horizon = market.size();
  if (alpha.size() != horizon) throw Error("alpha does not cover the horizon");
  RedispatchOptions opt = options.redispatch;
  if (!opt.slack_penalty) opt.slack_penalty = kDefaultSlackPenalty;
  const PtdfMatrix ptdf = build_ptdf(b.grid);
  const auto nr = static_cast<Eigen::Index>(b.fleet.intermittent().size());

  CmStatistics stats;
  stats.samples = samples.size();
  stats.baseline.resize(horizon);
  stats.records.resize(samples.size() * horizon);
  const std::size_t jobs = horizon * (samples.size() + 1);
  parallel_for(jobs, options.threads, [&](std::size_t job) {
    const std::size_t t = job % horizon;
    const std::size_t s = job / horizon;
    if (s == 0) {
      stats.baseline[t] = detail::cm_record(b, ptdf, market.steps[t], alpha[t], Vector::Zero(nr), t, opt);
      return;
    }
    const auto& sample = samples[s - 1];
    if (sample.omega.size() != horizon) throw Error("deviation sample does not cover the horizon");
    auto rec = detail::cm_record(b, ptdf, market.steps[t], alpha[t], sample.omega[t], t, opt);
    rec.sample = sample.id;
    stats.records[(s - 1) * horizon + t] = rec;
  });

  for (std::size_t s = 0; s < samples.size(); ++s) {
    bool ok = true;
    double total = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const auto& r = stats.records[s * horizon + t];
      ok = ok && r.feasible;
      total += r.cm_cost();
    }
    if (!ok) stats.excluded.push_back(samples[s].id);
    stats.sample_cost.push_back(ok ? total : std::numeric_limits<double>::quiet_NaN());
  }
  for (std::size_t t = 0; t < horizon; ++t) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (std::isnan(stats.sample_cost[s])) continue;
      double c = stats.records[s * horizon + t].cm_cost();
      lo = std::min(lo, c);
      hi = std::max(hi, c);
      sum += c;
      ++n;
    }
    if (n == 0) lo = hi = 0.0;
    stats.envelope_min.push_back(lo);
    stats.envelope_max.push_back(hi);
    stats.envelope_mean.push_back(n ? sum / static_cast<double>(n) : 0.0);
    stats.deterministic.push_back(stats.baseline[t].cm_cost());
  }
  return stats;
}

}  // namespace fbmc

#endif  // FBMC_MONTECARLO_HPP
