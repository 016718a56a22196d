#ifndef FBMC_REPORT_HPP
#define FBMC_REPORT_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "fbmc/core/csv.hpp"
#include "fbmc/core/hash.hpp"
#include "fbmc/pipeline.hpp"

namespace fbmc {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

namespace tables {

inline std::string dispatch(const CaseBundle& b, const DispatchResult& d) {
  csv::Writer w({"timestep", "gen_id", "mw"});
  for (std::size_t t = 0; t < d.size(); ++t)
    for (std::size_t g = 0; g < b.fleet.size(); ++g)
      w.row({b.series.timesteps[t], b.fleet.at(g).id,
             csv::num(d.steps[t].generation[static_cast<Eigen::Index>(g)])});
  return w.str();
}

inline std::string redispatch(const CaseBundle& b, const RedispatchResult& r) {
  csv::Writer w({"timestep", "gen_id", "redispatch_mw", "final_mw"});
  for (std::size_t t = 0; t < r.size(); ++t)
    for (std::size_t k = 0; k < b.fleet.dispatchable().size(); ++k) {
      const auto g = b.fleet.dispatchable()[k];
      w.row({b.series.timesteps[t], b.fleet.at(g).id,
             csv::num(r.steps[t].redispatch[static_cast<Eigen::Index>(k)]),
             csv::num(r.steps[t].generation[static_cast<Eigen::Index>(g)])});
    }
  return w.str();
}

inline std::string curtailment(const CaseBundle& b, const DispatchResult& d, const RedispatchResult& r) {
  csv::Writer w({"timestep", "gen_id", "market_mw", "final_mw"});
  for (std::size_t t = 0; t < d.size(); ++t)
    for (std::size_t k = 0; k < b.fleet.intermittent().size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      w.row({b.series.timesteps[t], b.fleet.at(b.fleet.intermittent()[k]).id,
             csv::num(d.steps[t].curtailment[kk]), csv::num(r.steps[t].curtailment[kk])});
    }
  return w.str();
}

inline std::string net_positions(const CaseBundle& b, const DispatchResult& d) {
  csv::Writer w({"timestep", "zone_id", "mw"});
  for (std::size_t t = 0; t < d.size(); ++t)
    for (std::size_t z = 0; z < b.grid.num_zones(); ++z)
      w.row({b.series.timesteps[t], b.grid.zones()[z],
             csv::num(d.steps[t].net_positions[static_cast<Eigen::Index>(z)])});
  return w.str();
}

inline std::string exchanges(const CaseBundle& b, const DispatchResult& d) {
  csv::Writer w({"timestep", "from_zone", "to_zone", "mw"});
  for (std::size_t t = 0; t < d.size(); ++t)
    for (std::size_t a = 0; a < b.grid.num_zones(); ++a)
      for (std::size_t z = 0; z < b.grid.num_zones(); ++z)
        if (a != z)
          w.row({b.series.timesteps[t], b.grid.zones()[a], b.grid.zones()[z],
                 csv::num(d.steps[t].exchanges(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(z)))});
  return w.str();
}

inline std::string flows(const CaseBundle& b, const DispatchResult& d, const RedispatchResult& r) {
  csv::Writer w({"timestep", "line_id", "market_mw", "final_mw", "capacity_mw"});
  for (std::size_t t = 0; t < d.size(); ++t)
    for (std::size_t j = 0; j < b.grid.num_lines(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      w.row({b.series.timesteps[t], b.grid.line(j).id, csv::num(d.steps[t].line_flows[jj]),
             csv::num(r.steps[t].line_flows[jj]), csv::num(b.grid.line(j).capacity)});
    }
  return w.str();
}

/// Per-timestep cost rows of every reported stage.
inline std::string costs(const ScenarioResults& res) {
  csv::Writer w({"stage", "timestep", "generation_cost", "curtailment_cost", "redispatch_cost"});
  const auto& ts = res.bundle.series.timesteps;
  if (res.basecase)
    for (std::size_t t = 0; t < res.basecase->size(); ++t)
      w.row({"basecase", ts[t], csv::num(res.basecase->steps[t].generation_cost),
             csv::num(res.basecase->steps[t].curtailment_cost), "0"});
  for (std::size_t t = 0; t < res.market.size(); ++t)
    w.row({"d1", ts[t], csv::num(res.market.steps[t].generation_cost),
           csv::num(res.market.steps[t].curtailment_cost), "0"});
  for (std::size_t t = 0; t < res.redispatch.size(); ++t)
    w.row({"d0", ts[t], csv::num(res.redispatch.steps[t].generation_cost),
           csv::num(res.redispatch.steps[t].curtailment_cost),
           csv::num(res.redispatch.steps[t].redispatch_cost)});
  return w.str();
}

inline std::string alpha(const CaseBundle& b, const std::vector<Vector>& a) {
  csv::Writer w({"timestep", "gen_id", "alpha"});
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t k = 0; k < b.fleet.dispatchable().size(); ++k)
      w.row({b.series.timesteps[t], b.fleet.at(b.fleet.dispatchable()[k]).id,
             csv::num(a[t][static_cast<Eigen::Index>(k)])});
  return w.str();
}

inline std::string frm(const CaseBundle& b, const FbParameters& fbp, const CcDispatchResult& cc) {
  csv::Writer w({"timestep", "cnec_id", "t_mw", "margin_mw"});
  for (std::size_t t = 0; t < cc.flow_std.size(); ++t)
    for (std::size_t i = 0; i < fbp.cnec_ids.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      w.row({b.series.timesteps[t], fbp.cnec_ids[i], csv::num(cc.flow_std[t][ii]),
             csv::num(cc.margin[t][ii])});
    }
  return w.str();
}

inline std::string cm_stats(const CaseBundle& b, const CmStatistics& s) {
  csv::Writer w({"sample_id", "timestep", "redispatch_cost", "curtailment_cost", "slack_cost",
                 "redispatch_mwh", "curtailment_mwh", "clamp_mw", "feasible"});
  for (const auto& r : s.records)
    w.row({std::to_string(r.sample), b.series.timesteps[r.timestep], csv::num(r.redispatch_cost),
           csv::num(r.curtailment_cost), csv::num(r.slack_cost), csv::num(r.redispatch_volume),
           csv::num(r.curtailment_volume), csv::num(r.clamp_mass), r.feasible ? "1" : "0"});
  return w.str();
}

inline std::string cm_envelope(const CaseBundle& b, const CmStatistics& s) {
  csv::Writer w({"timestep", "min", "mean", "max", "deterministic"});
  for (std::size_t t = 0; t < s.envelope_mean.size(); ++t)
    w.row({b.series.timesteps[t], csv::num(s.envelope_min[t]), csv::num(s.envelope_mean[t]),
           csv::num(s.envelope_max[t]), csv::num(s.deterministic[t])});
  return w.str();
}

}  // namespace tables

// ---------------------------------------------------------------------------
// Summary and manifest
// ---------------------------------------------------------------------------

inline Json costs_json(const StageCosts& c) {
  return Json{{"generation", c.generation},
              {"curtailment", c.curtailment},
              {"redispatch", c.redispatch},
              {"total", c.total()},
              {"exchange_penalty", c.exchange_penalty}};
}

inline Json summary_json(const ScenarioReport& r) {
  Json j;
  j["scenario"] = r.name;
  j["mode"] = to_string(r.mode);
  j["stages"] = r.stages;
  j["cost_unit"] = "dataset cost units";
  Json costs;
  if (r.basecase) costs["basecase"] = costs_json(*r.basecase);
  costs["d1"] = costs_json(r.d1);
  costs["d0"] = costs_json(r.d0);
  j["costs"] = costs;
  j["volumes_mwh"] = Json{{"curtailment", r.curtailment_volume},
                          {"redispatch", r.redispatch_volume},
                          {"total", r.curtailment_volume + r.redispatch_volume}};
  if (r.cm)
    j["montecarlo"] = Json{{"samples", r.cm->samples},
                           {"excluded", r.cm->excluded},
                           {"alpha_source", r.alpha_source},
                           {"mean_cm_cost", r.cm->mean_cost},
                           {"deterministic_cm_cost", r.cm->deterministic_cost},
                           {"mean_redispatch_cost", r.cm->mean_redispatch_cost},
                           {"mean_curtailment_cost", r.cm->mean_curtailment_cost},
                           {"mean_slack_cost", r.cm->mean_slack_cost}};
  j["screening_gsk"] = "uniform";
  j["config_hash"] = r.config_hash;
  j["dataset_hash"] = r.dataset_hash;
  j["seed"] = r.seed;
  j["warnings"] = r.warnings;
  return j;
}

inline ScenarioReport report_from_summary(const Json& j) {
  ScenarioReport r;
  r.name = j.at("scenario").get<std::string>();
  r.mode = parse_mode(j.at("mode").get<std::string>());
  r.stages = j.at("stages").get<std::vector<std::string>>();
  auto costs = [](const Json& c) {
    return StageCosts{c.at("generation").get<double>(), c.at("curtailment").get<double>(),
                      c.at("redispatch").get<double>(), c.at("exchange_penalty").get<double>()};
  };
  if (j.at("costs").contains("basecase")) r.basecase = costs(j["costs"]["basecase"]);
  r.d1 = costs(j.at("costs").at("d1"));
  r.d0 = costs(j.at("costs").at("d0"));
  r.curtailment_volume = j.at("volumes_mwh").at("curtailment").get<double>();
  r.redispatch_volume = j.at("volumes_mwh").at("redispatch").get<double>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.dataset_hash = j.at("dataset_hash").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

struct SliceRequest {
  std::size_t timestep = 0;
  SliceAxis x{0, 1};
  SliceAxis y{1, 2};
};

inline SliceAxis parse_axis(const std::string& spec, const GridCase& grid, SliceAxis fallback) {
  if (spec.empty()) return fallback;
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError(fmt::format("slice axis '{}' must be FROM:TO", spec));
  auto a = grid.find_zone(spec.substr(0, colon));
  auto b = grid.find_zone(spec.substr(colon + 1));
  if (!a || !b) throw ConfigError(fmt::format("slice axis '{}' names an unknown zone", spec));
  return {*a, *b};
}

inline SliceRequest slice_request(const ScenarioConfig& c, const GridCase& grid) {
  if (grid.num_zones() < 3) throw ConfigError("domain slices need at least three zones");
  SliceRequest s;
  s.timestep = c.slice_timestep;
  s.x = parse_axis(c.slice_x, grid, {0, 1});
  s.y = parse_axis(c.slice_y, grid, {1, 2});
  return s;
}

/// Slice at the market point; for chance-constrained runs a second layer
/// shows the domain shrunk by the probabilistic margins.
inline std::map<std::string, std::string> slice_files(const ScenarioResults& res,
                                                      const SliceRequest& req) {
  if (!res.fb) throw ConfigError("domain slices need a flow-based mode");
  if (req.timestep >= res.fb->size()) throw ConfigError("slice timestep outside the horizon");
  const Vector np = res.market.steps[req.timestep].net_positions;
  // Net positions with the axis exchanges removed, so the market point sits
  // at the coordinates of its own exchanges.
  const auto& ex = res.market.steps[req.timestep].exchanges;
  auto net = [&](SliceAxis a) {
    const auto f = static_cast<Eigen::Index>(a.from), t = static_cast<Eigen::Index>(a.to);
    return ex(f, t) - ex(t, f);
  };
  const double mx = net(req.x), my = net(req.y);
  Vector fixed = np;
  fixed[static_cast<Eigen::Index>(req.x.from)] -= mx;
  fixed[static_cast<Eigen::Index>(req.x.to)] += mx;
  fixed[static_cast<Eigen::Index>(req.y.from)] -= my;
  fixed[static_cast<Eigen::Index>(req.y.to)] += my;
  std::map<std::string, std::string> files;
  auto base = fb_domain_slice(*res.fb, req.timestep, req.x, req.y, fixed);
  base.market_point = geometry::Point{mx, my};
  files["slice_halfplanes.csv"] = slice_halfplanes_csv(base);
  files["slice_vertices.csv"] = slice_vertices_csv(base);
  std::vector<std::pair<DomainSlice, std::string>> layers{{base, "#4a7ab7"}};
  if (res.cc) {
    auto shrunk = fb_domain_slice(*res.fb, req.timestep, req.x, req.y, fixed, res.cc->margin[req.timestep]);
    shrunk.market_point = base.market_point;
    files["slice_frm_halfplanes.csv"] = slice_halfplanes_csv(shrunk);
    files["slice_frm_vertices.csv"] = slice_vertices_csv(shrunk);
    layers.emplace_back(shrunk, "#d9822b");
  }
  files["slice.svg"] = slice_svg(layers);
  return files;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("write failed for {}", path.string()));
}

/// Writes every result table, summary.json and manifest.json (content hashes
/// of all other files except timings.json, which is not deterministic).
/// Returns the manifest.
inline Json emit_reports(const ScenarioReport& report, const ScenarioResults& res,
                         const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw Error(fmt::format("cannot create {}: {}", outdir.string(), ec.message()));
  std::map<std::string, std::string> files;
  const auto& b = res.bundle;
  files["dispatch.csv"] = tables::dispatch(b, res.market);
  files["redispatch.csv"] = tables::redispatch(b, res.redispatch);
  files["curtailment.csv"] = tables::curtailment(b, res.market, res.redispatch);
  files["net_positions.csv"] = tables::net_positions(b, res.market);
  files["exchanges.csv"] = tables::exchanges(b, res.market);
  files["flows.csv"] = tables::flows(b, res.market, res.redispatch);
  files["costs.csv"] = tables::costs(res);
  if (res.fb) files["fb_parameters.csv"] = export_fb_parameters(*res.fb, b.series.timesteps);
  if (res.cc) files["frm.csv"] = tables::frm(b, *res.fb, *res.cc);
  if (!res.alpha.empty()) files["alpha.csv"] = tables::alpha(b, res.alpha);
  else if (res.cc) files["alpha.csv"] = tables::alpha(b, res.cc->alpha);
  if (res.cm) {
    files["cm_stats.csv"] = tables::cm_stats(b, *res.cm);
    files["cm_envelope.csv"] = tables::cm_envelope(b, *res.cm);
  }
  if (res.config.slice && res.fb && b.series.size() > 0)
    for (auto& [name, text] : slice_files(res, slice_request(res.config, b.grid))) files[name] = text;
  files["summary.json"] = summary_json(report).dump(2) + "\n";

  Json manifest;
  manifest["config_hash"] = report.config_hash;
  manifest["dataset_hash"] = report.dataset_hash;
  manifest["seed"] = report.seed;
  Json list = Json::array();
  for (const auto& [name, text] : files) {
    write_text(outdir / name, text);
    list.push_back(Json{{"file", name}, {"bytes", text.size()}, {"sha256", sha256_hex(text)}});
  }
  manifest["files"] = list;
  write_text(outdir / "manifest.json", manifest.dump(2) + "\n");
  Json timings(report.timings);
  write_text(outdir / "timings.json", timings.dump(2) + "\n");
  return manifest;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct Comparison {
  std::string wide;  // stage/component rows x scenario columns
  std::string long_format;
};

inline Comparison compare_scenarios(const std::vector<ScenarioReport>& reports) {
  if (reports.empty()) throw ConfigError("nothing to compare");
  for (const auto& r : reports)
    if (r.dataset_hash != reports.front().dataset_hash)
      throw ConfigError(fmt::format("scenario '{}' uses a different dataset than '{}'", r.name,
                                    reports.front().name));
  struct Item {
    std::string stage, component;
    double (*get)(const ScenarioReport&);
  };
  static const Item items[] = {
      {"d1", "generation", [](const ScenarioReport& r) { return r.d1.generation; }},
      {"d1", "curtailment", [](const ScenarioReport& r) { return r.d1.curtailment; }},
      {"d1", "total", [](const ScenarioReport& r) { return r.d1.total(); }},
      {"d0", "generation", [](const ScenarioReport& r) { return r.d0.generation; }},
      {"d0", "curtailment", [](const ScenarioReport& r) { return r.d0.curtailment; }},
      {"d0", "redispatch", [](const ScenarioReport& r) { return r.d0.redispatch; }},
      {"d0", "total", [](const ScenarioReport& r) { return r.d0.total(); }},
      {"volume", "curtailment_mwh", [](const ScenarioReport& r) { return r.curtailment_volume; }},
      {"volume", "redispatch_mwh", [](const ScenarioReport& r) { return r.redispatch_volume; }},
      {"volume", "total_mwh", [](const ScenarioReport& r) { return r.curtailment_volume + r.redispatch_volume; }},
  };
  std::vector<std::string> header{"stage", "component"};
  for (const auto& r : reports) header.push_back(r.name);
  csv::Writer wide(header);
  csv::Writer lng({"scenario", "mode", "stage", "component", "value"});
  for (const auto& it : items) {
    std::vector<std::string> row{it.stage, it.component};
    for (const auto& r : reports) {
      row.push_back(csv::num(it.get(r)));
      lng.row({r.name, to_string(r.mode), it.stage, it.component, csv::num(it.get(r))});
    }
    wide.row(row);
  }
  return {wide.str(), lng.str()};
}

}  // namespace fbmc

#endif  // FBMC_REPORT_HPP
