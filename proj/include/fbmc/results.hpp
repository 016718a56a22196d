#ifndef FBMC_RESULTS_HPP
#define FBMC_RESULTS_HPP

#include <string>
#include <vector>

#include "fbmc/core/types.hpp"

namespace fbmc {

/// Market or basecase outcome of one timestep.
struct TimestepDispatch {
  Vector generation;     // per generator in fleet order; intermittent = r - C
  Vector curtailment;    // per intermittent unit
  Vector injections;     // per node, I_t
  Vector net_positions;  // per zone, NP_t
  Matrix exchanges;      // EX_{z,z'} from z to z'
  Vector line_flows;     // PTDF * I_t on every physical line
  double generation_cost = 0.0;
  double curtailment_cost = 0.0;
  double exchange_cost = 0.0;  // penalty on EX, reported apart from system cost
  double objective = 0.0;
};

struct DispatchResult {
  std::string representation;
  std::vector<TimestepDispatch> steps;

  std::size_t size() const noexcept { return steps.size(); }

  double objective() const {
    double v = 0.0;
    for (const auto& s : steps) v += s.objective;
    return v;
  }
  double generation_cost() const {
    double v = 0.0;
    for (const auto& s : steps) v += s.generation_cost;
    return v;
  }
  double curtailment_cost() const {
    double v = 0.0;
    for (const auto& s : steps) v += s.curtailment_cost;
    return v;
  }
  double curtailment_volume() const {
    double v = 0.0;
    for (const auto& s : steps) v += s.curtailment.sum();
    return v;
  }
};

/// Congestion-management outcome of one timestep.
struct RedispatchStep {
  Vector generation;   // final schedule per generator (fleet order)
  Vector redispatch;   // signed G - g_ref per dispatchable unit
  Vector curtailment;  // final curtailment per intermittent unit
  Vector line_flows;
  double generation_cost = 0.0;
  double curtailment_cost = 0.0;        // p * total final curtailment
  double curtailment_delta_cost = 0.0;  // p * curtailment above the market floor
  double redispatch_cost = 0.0;         // c_red * sum |G^red|
  double redispatch_volume = 0.0;       // sum |G^red|, MWh
  double slack_volume = 0.0;            // balance slack, MWh
  double slack_cost = 0.0;
  double max_overload = 0.0;            // max(|f| - fbar), <= 0 when feasible
  double objective = 0.0;
};

struct RedispatchResult {
  std::vector<RedispatchStep> steps;

  std::size_t size() const noexcept { return steps.size(); }

  double redispatch_cost() const {
    double v = 0.0;
    for (const auto& s : steps) v += s.redispatch_cost;
    return v;
  }
  double redispatch_volume() const {
    double v = 0.0;
    for (const auto& s : steps) v += s.redispatch_volume;
    return v;
  }
  double curtailment_cost() const {
    double v = 0.0;
    for (const auto& s : steps) v += s.curtailment_cost;
    return v;
  }
  double curtailment_volume() const {
    double v = 0.0;
    for (const auto& s : steps) v += s.curtailment.sum();
    return v;
  }
  double generation_cost() const {
    double v = 0.0;
    for (const auto& s : steps) v += s.generation_cost;
    return v;
  }
};

}  // namespace fbmc

#endif  // FBMC_RESULTS_HPP
