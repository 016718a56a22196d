// Command-line front end: run, compare, domain-slice, validate-data.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fbmc/fbmc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

struct Common {
  std::string config;
  std::string out = "out";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::size_t> samples;
  std::optional<unsigned> threads;
};

void check_solver() {
  const char* s = std::getenv("FBMC_SOLVER");
  if (s && std::string(s) != "ipm")
    throw fbmc::ConfigError(fmt::format("FBMC_SOLVER={} is not available (supported: ipm)", s));
}

fbmc::ScenarioConfig resolve(const std::string& file, const Common& c) {
  std::vector<std::string> sets = c.sets;
  if (c.mode) sets.push_back("scenario.mode=" + *c.mode);
  if (c.seed) sets.push_back("montecarlo.seed=" + std::to_string(*c.seed));
  if (c.samples) sets.push_back("montecarlo.samples=" + std::to_string(*c.samples));
  if (c.threads) sets.push_back("scenario.threads=" + std::to_string(*c.threads));
  return fbmc::load_config(file, sets);
}

// Solver noise below a micro-unit would otherwise print as "-0.00".
double tidy(double v) { return std::abs(v) < 1e-6 ? 0.0 : v; }

void print_report(const fbmc::ScenarioReport& r, const std::filesystem::path& out) {
  fmt::print("{} ({}): D-1 total {:.2f}, D-0 total {:.2f} (redispatch {:.2f}), C {:.1f} MWh, R {:.1f} MWh\n",
             r.name, fbmc::to_string(r.mode), tidy(r.d1.total()), tidy(r.d0.total()), tidy(r.d0.redispatch),
             tidy(r.curtailment_volume), tidy(r.redispatch_volume));
  if (r.cm)
    fmt::print("  CM over {} samples: mean {:.2f}, omega=0 {:.2f}, excluded {}\n", r.cm->samples,
               tidy(r.cm->mean_cost), tidy(r.cm->deterministic_cost), r.cm->excluded);
  for (const auto& w : r.warnings) fmt::print(stderr, "warning: {}\n", w);
  fmt::print("  outputs in {}\n", out.string());
}

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "scenario INI file");
  if (config_required) opt->required();
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "Monte Carlo seed");
  app->add_option("--mode", c.mode, "fbmc | fbmc_plus | fbmc_cc | ntc | nodal | uniform");
  app->add_option("--samples", c.samples, "Monte Carlo sample count");
  app->add_option("--threads", c.threads, "worker threads");
  app->add_option("--set", c.sets, "override, section.key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-based market coupling simulator"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "run one scenario and write its reports");
  add_common(run, run_opts, true);

  Common cmp_opts;
  std::vector<std::string> cmp_configs;
  auto* cmp = app.add_subcommand("compare", "run several scenarios and tabulate their costs");
  cmp->add_option("configs", cmp_configs, "scenario INI files")->required();
  add_common(cmp, cmp_opts, false);

  Common slice_opts;
  std::size_t slice_t = 0;
  std::string slice_x, slice_y;
  auto* slice = app.add_subcommand("domain-slice", "write a 2-D slice of the flow-based domain");
  add_common(slice, slice_opts, true);
  slice->add_option("--timestep", slice_t, "timestep index (0-based)");
  slice->add_option("--x", slice_x, "x axis exchange FROM:TO");
  slice->add_option("--y", slice_y, "y axis exchange FROM:TO");

  std::string data_dir;
  auto* validate = app.add_subcommand("validate-data", "load a dataset and report its contents");
  validate->add_option("dir", data_dir, "dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    check_solver();
    if (*run) {
      auto config = resolve(run_opts.config, run_opts);
      auto sc = fbmc::run_scenario(config);
      fbmc::emit_reports(sc.report, sc.results, run_opts.out);
      print_report(sc.report, run_opts.out);
    } else if (*cmp) {
      std::vector<fbmc::ScenarioReport> reports;
      for (const auto& file : cmp_configs) {
        auto config = resolve(file, cmp_opts);
        auto sc = fbmc::run_scenario(config);
        auto dir = std::filesystem::path(cmp_opts.out) / config.name;
        fbmc::emit_reports(sc.report, sc.results, dir);
        print_report(sc.report, dir);
        reports.push_back(sc.report);
      }
      auto table = fbmc::compare_scenarios(reports);
      fbmc::write_text(std::filesystem::path(cmp_opts.out) / "comparison.csv", table.wide);
      fbmc::write_text(std::filesystem::path(cmp_opts.out) / "comparison_long.csv", table.long_format);
      std::cout << table.wide;
    } else if (*slice) {
      auto sets = slice_opts.sets;
      sets.push_back("slice.enabled=true");
      sets.push_back("slice.timestep=" + std::to_string(slice_t));
      if (!slice_x.empty()) sets.push_back("slice.x=" + slice_x);
      if (!slice_y.empty()) sets.push_back("slice.y=" + slice_y);
      sets.push_back("montecarlo.samples=0");
      slice_opts.sets = sets;
      slice_opts.samples.reset();
      auto config = resolve(slice_opts.config, slice_opts);
      if (!fbmc::is_flow_based(config.mode)) throw fbmc::ConfigError("domain-slice needs a flow-based mode");
      auto sc = fbmc::run_scenario(config);
      auto files = fbmc::slice_files(sc.results, fbmc::slice_request(config, sc.results.bundle.grid));
      std::filesystem::create_directories(slice_opts.out);
      for (const auto& [name, text] : files) fbmc::write_text(std::filesystem::path(slice_opts.out) / name, text);
      fmt::print("wrote {} slice files to {}\n", files.size(), slice_opts.out);
    } else if (*validate) {
      auto b = fbmc::load_grid_data(data_dir);
      fmt::print("{} nodes, {} lines, {} zones, {} generators ({} intermittent), {} timesteps\n",
                 b.grid.num_nodes(), b.grid.num_lines(), b.grid.num_zones(), b.fleet.size(),
                 b.fleet.intermittent().size(), b.series.size());
      auto ptdf = fbmc::build_ptdf(b.grid);
      auto lodf = fbmc::build_lodf(b.grid, ptdf);
      std::size_t bridges = 0;
      for (bool br : lodf.bridge) bridges += br;
      fmt::print("{} bridge lines, dataset hash {}\n", bridges, fbmc::dataset_hash(data_dir));
    }
  } catch (const fbmc::InfeasibleError& e) {
    fmt::print(stderr, "infeasible: {}\n", e.what());
    for (const auto& b : e.binding()) fmt::print(stderr, "  binding: {}\n", b);
    return kExitInfeasible;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  }
  return kExitOk;
}
