#ifndef FBMC_GRID_HPP
#define FBMC_GRID_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "fbmc/core/csv.hpp"
#include "fbmc/core/error.hpp"
#include "fbmc/core/types.hpp"

namespace fbmc {

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

struct Node {
  std::string id;
  std::size_t zone = 0;
};

struct Line {
  std::string id;
  std::size_t from = 0;
  std::size_t to = 0;
  double reactance = 0.0;  // p.u. on a common base
  double capacity = 0.0;   // MW
};

/// Physical network: nodes grouped into zones, lines with reactance and
/// thermal capacity, and the slack node used for sensitivity matrices.
/// Immutable once created; `create` enforces all structural invariants.
class GridCase {
public:
  static GridCase create(std::vector<Node> nodes, std::vector<Line> lines,
                         std::vector<std::string> zones, std::size_t slack) {
    GridCase g;
    g.nodes_ = std::move(nodes);
    g.lines_ = std::move(lines);
    g.zones_ = std::move(zones);
    g.slack_ = slack;
    g.validate();
    return g;
  }

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_lines() const noexcept { return lines_.size(); }
  std::size_t num_zones() const noexcept { return zones_.size(); }
  std::size_t slack() const noexcept { return slack_; }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Line>& lines() const noexcept { return lines_; }
  const std::vector<std::string>& zones() const noexcept { return zones_; }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const Line& line(std::size_t j) const { return lines_.at(j); }

  std::optional<std::size_t> find_node(const std::string& id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> find_line(const std::string& id) const {
    for (std::size_t j = 0; j < lines_.size(); ++j)
      if (lines_[j].id == id) return j;
    return std::nullopt;
  }
  std::optional<std::size_t> find_zone(const std::string& id) const {
    auto it = std::find(zones_.begin(), zones_.end(), id);
    if (it == zones_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - zones_.begin());
  }

  std::size_t zone_of(std::size_t node) const { return nodes_.at(node).zone; }

  bool is_cross_border(std::size_t line) const {
    const Line& l = lines_.at(line);
    return nodes_[l.from].zone != nodes_[l.to].zone;
  }

  Vector capacities() const {
    Vector cap(lines_.size());
    for (std::size_t j = 0; j < lines_.size(); ++j) cap[j] = lines_[j].capacity;
    return cap;
  }

  /// Node-to-zone incidence (zones x nodes), the map m^z for nodal quantities.
  Matrix zone_incidence() const {
    Matrix m = Matrix::Zero(num_zones(), num_nodes());
    for (std::size_t n = 0; n < nodes_.size(); ++n) m(nodes_[n].zone, n) = 1.0;
    return m;
  }

  /// Copy with every line capacity multiplied by `factor`.
  GridCase with_capacity_scale(double factor) const {
    if (!(factor > 0.0)) throw ConfigError("line capacity scale factor must be > 0");
    GridCase g = *this;
    for (auto& l : g.lines_) l.capacity *= factor;
    return g;
  }

  GridCase with_slack(std::size_t slack) const {
    GridCase g = *this;
    g.slack_ = slack;
    g.validate();
    return g;
  }

  /// Copy with line `k` removed; throws StructuralError if that disconnects
  /// the network.
  GridCase without_line(std::size_t k) const {
    GridCase g = *this;
    g.lines_.erase(g.lines_.begin() + static_cast<std::ptrdiff_t>(k));
    g.validate();
    return g;
  }

private:
  void validate() {
    if (nodes_.empty()) throw StructuralError("network has no nodes");
    if (slack_ >= nodes_.size()) throw StructuralError("slack is not a valid node");
    node_index_.clear();
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      if (nodes_[n].zone >= zones_.size())
        throw StructuralError(fmt::format("node '{}' has no valid zone", nodes_[n].id));
      if (!node_index_.emplace(nodes_[n].id, n).second)
        throw StructuralError(fmt::format("duplicate node id '{}'", nodes_[n].id));
    }
    std::set<std::string> line_ids;
    for (const auto& l : lines_) {
      if (!line_ids.insert(l.id).second)
        throw StructuralError(fmt::format("duplicate line id '{}'", l.id));
      if (l.from >= nodes_.size() || l.to >= nodes_.size() || l.from == l.to)
        throw StructuralError(fmt::format("line '{}' has invalid endpoints", l.id));
      if (!(l.reactance > 0.0))
        throw StructuralError(fmt::format("line '{}' reactance must be > 0", l.id));
      if (!(l.capacity > 0.0))
        throw StructuralError(fmt::format("line '{}' capacity must be > 0", l.id));
    }
    if (!connected()) throw StructuralError("network graph is not connected");
  }

  bool connected() const {
    std::vector<std::vector<std::size_t>> adj(nodes_.size());
    for (const auto& l : lines_) {
      adj[l.from].push_back(l.to);
      adj[l.to].push_back(l.from);
    }
    std::vector<bool> seen(nodes_.size(), false);
    std::queue<std::size_t> todo;
    todo.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!todo.empty()) {
      auto n = todo.front();
      todo.pop();
      for (auto m : adj[n])
        if (!seen[m]) {
          seen[m] = true;
          ++count;
          todo.push(m);
        }
    }
    return count == nodes_.size();
  }

  std::vector<Node> nodes_;
  std::vector<Line> lines_;
  std::vector<std::string> zones_;
  std::size_t slack_ = 0;
  std::unordered_map<std::string, std::size_t> node_index_;
};

// ---------------------------------------------------------------------------
// Generation and time series
// ---------------------------------------------------------------------------

enum class GeneratorKind { dispatchable, intermittent };

struct Generator {
  std::string id;
  std::size_t node = 0;
  GeneratorKind kind = GeneratorKind::dispatchable;
  double capacity = 0.0;  // MW
  double cost = 0.0;      // $/MWh
};

/// Generators split into the dispatchable set and the intermittent subset R.
class GeneratorFleet {
public:
  GeneratorFleet() = default;
  explicit GeneratorFleet(std::vector<Generator> gens) : gens_(std::move(gens)) {
    for (std::size_t g = 0; g < gens_.size(); ++g) {
      if (gens_[g].capacity < 0.0)
        throw DataError(fmt::format("generator '{}' has negative capacity", gens_[g].id));
      if (gens_[g].kind == GeneratorKind::intermittent) {
        if (gens_[g].cost != 0.0)
          throw DataError(
              fmt::format("intermittent generator '{}' must have zero cost", gens_[g].id));
        intermittent_.push_back(g);
      } else {
        dispatchable_.push_back(g);
      }
    }
  }

  const std::vector<Generator>& all() const noexcept { return gens_; }
  const Generator& at(std::size_t g) const { return gens_.at(g); }
  std::size_t size() const noexcept { return gens_.size(); }

  /// Indices into all() of dispatchable / intermittent units.
  const std::vector<std::size_t>& dispatchable() const noexcept { return dispatchable_; }
  const std::vector<std::size_t>& intermittent() const noexcept { return intermittent_; }

  /// nodes x units incidence for the given unit subset (map m^n).
  Matrix node_map(const std::vector<std::size_t>& units, std::size_t num_nodes) const {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(num_nodes),
                            static_cast<Eigen::Index>(units.size()));
    for (std::size_t k = 0; k < units.size(); ++k) m(gens_[units[k]].node, k) = 1.0;
    return m;
  }

private:
  std::vector<Generator> gens_;
  std::vector<std::size_t> dispatchable_;
  std::vector<std::size_t> intermittent_;
};

/// Nodal demand and intermittent availability per timestep.
/// availability[t] is ordered like GeneratorFleet::intermittent().
struct SeriesData {
  std::vector<std::string> timesteps;
  std::vector<Vector> demand;
  std::vector<Vector> availability;

  std::size_t size() const noexcept { return timesteps.size(); }
};

/// Everything the dispatch models need about one dataset.
struct CaseBundle {
  GridCase grid;
  GeneratorFleet fleet;
  SeriesData series;
};

namespace detail {

inline std::size_t require_node(const GridCase& grid, const csv::Table& table,
                                const csv::Row& row, std::size_t col,
                                const std::string& owner) {
  const std::string& id = table.text(row, col);
  auto n = grid.find_node(id);
  if (!n)
    throw DataError(table.file(), row.line,
                    fmt::format("{} references unknown node '{}'", owner, id));
  return *n;
}

}  // namespace detail

/// Reads nodes.csv, lines.csv, generators.csv, demand.csv and
/// availability.csv from `dir` and validates the result.
inline CaseBundle load_grid_data(const std::filesystem::path& dir) {
  for (const char* name :
       {"nodes.csv", "lines.csv", "generators.csv", "demand.csv", "availability.csv"})
    if (!std::filesystem::exists(dir / name))
      throw DataError(name, 0, fmt::format("required file missing in '{}'", dir.string()));

  // nodes
  auto nodes_csv = csv::Table::read(dir / "nodes.csv");
  std::vector<Node> nodes;
  std::vector<std::string> zones;
  std::optional<std::size_t> slack;
  {
    auto c_id = nodes_csv.column("node_id");
    auto c_zone = nodes_csv.column("zone_id");
    auto c_slack = nodes_csv.column("slack");
    std::set<std::string> seen;
    for (const auto& row : nodes_csv.rows()) {
      const auto& id = nodes_csv.text(row, c_id);
      if (!seen.insert(id).second)
        throw DataError(nodes_csv.file(), row.line, fmt::format("duplicate node '{}'", id));
      const auto& zone = nodes_csv.text(row, c_zone);
      auto zit = std::find(zones.begin(), zones.end(), zone);
      std::size_t zi = static_cast<std::size_t>(zit - zones.begin());
      if (zit == zones.end()) zones.push_back(zone);
      double flag = nodes_csv.number(row, c_slack);
      if (flag != 0.0 && flag != 1.0)
        throw DataError(nodes_csv.file(), row.line, "slack must be 0 or 1");
      if (flag == 1.0) {
        if (slack) throw DataError(nodes_csv.file(), row.line, "more than one slack node");
        slack = nodes.size();
      }
      nodes.push_back({id, zi});
    }
    if (nodes.empty()) throw DataError(nodes_csv.file(), 0, "no nodes defined");
    if (!slack) throw DataError(nodes_csv.file(), 0, "no slack node designated");
  }

  // lines
  auto lines_csv = csv::Table::read(dir / "lines.csv");
  std::vector<Line> lines;
  {
    auto c_id = lines_csv.column("line_id");
    auto c_from = lines_csv.column("from");
    auto c_to = lines_csv.column("to");
    auto c_x = lines_csv.column("reactance_pu");
    auto c_cap = lines_csv.column("capacity_mw");
    std::map<std::string, std::size_t> index;
    for (std::size_t n = 0; n < nodes.size(); ++n) index[nodes[n].id] = n;
    for (const auto& row : lines_csv.rows()) {
      Line l;
      l.id = lines_csv.text(row, c_id);
      for (auto [col, dst] : {std::pair{c_from, &l.from}, std::pair{c_to, &l.to}}) {
        auto it = index.find(lines_csv.text(row, col));
        if (it == index.end())
          throw DataError(lines_csv.file(), row.line,
                          fmt::format("line '{}' references unknown node '{}'", l.id,
                                      lines_csv.text(row, col)));
        *dst = it->second;
      }
      l.reactance = lines_csv.number(row, c_x);
      l.capacity = lines_csv.number(row, c_cap);
      if (!(l.reactance > 0.0))
        throw DataError(lines_csv.file(), row.line,
                        fmt::format("line '{}' reactance must be > 0", l.id));
      if (!(l.capacity > 0.0))
        throw DataError(lines_csv.file(), row.line,
                        fmt::format("line '{}' capacity must be > 0", l.id));
      if (l.from == l.to)
        throw DataError(lines_csv.file(), row.line,
                        fmt::format("line '{}' connects a node to itself", l.id));
      lines.push_back(l);
    }
  }

  GridCase grid = [&] {
    try {
      return GridCase::create(nodes, lines, zones, *slack);
    } catch (const StructuralError& e) {
      throw DataError(lines_csv.file(), 0, e.what());
    }
  }();

  // generators
  auto gens_csv = csv::Table::read(dir / "generators.csv");
  std::vector<Generator> gens;
  std::map<std::string, std::size_t> gen_index;
  {
    auto c_id = gens_csv.column("gen_id");
    auto c_node = gens_csv.column("node_id");
    auto c_kind = gens_csv.column("kind");
    auto c_cap = gens_csv.column("capacity_mw");
    auto c_cost = gens_csv.column("cost_per_mwh");
    for (const auto& row : gens_csv.rows()) {
      Generator g;
      g.id = gens_csv.text(row, c_id);
      if (!gen_index.emplace(g.id, gens.size()).second)
        throw DataError(gens_csv.file(), row.line, fmt::format("duplicate generator '{}'", g.id));
      g.node = detail::require_node(grid, gens_csv, row, c_node, "generator '" + g.id + "'");
      const auto& kind = gens_csv.text(row, c_kind);
      if (kind == "dispatchable")
        g.kind = GeneratorKind::dispatchable;
      else if (kind == "intermittent")
        g.kind = GeneratorKind::intermittent;
      else
        throw DataError(gens_csv.file(), row.line,
                        fmt::format("generator '{}' has unknown kind '{}'", g.id, kind));
      g.capacity = gens_csv.number(row, c_cap);
      g.cost = gens_csv.number(row, c_cost);
      if (g.capacity < 0.0)
        throw DataError(gens_csv.file(), row.line,
                        fmt::format("generator '{}' capacity must be >= 0", g.id));
      if (g.kind == GeneratorKind::intermittent && g.cost != 0.0)
        throw DataError(gens_csv.file(), row.line,
                        fmt::format("intermittent generator '{}' must have zero cost", g.id));
      gens.push_back(g);
    }
  }
  GeneratorFleet fleet(std::move(gens));

  // demand
  SeriesData series;
  std::map<std::string, std::size_t> t_index;
  auto demand_csv = csv::Table::read(dir / "demand.csv");
  {
    auto c_t = demand_csv.column("timestep");
    auto c_node = demand_csv.column("node_id");
    auto c_mw = demand_csv.column("mw");
    std::vector<std::vector<bool>> filled;
    for (const auto& row : demand_csv.rows()) {
      const auto& t = demand_csv.text(row, c_t);
      auto [it, inserted] = t_index.emplace(t, series.timesteps.size());
      if (inserted) {
        series.timesteps.push_back(t);
        series.demand.push_back(Vector::Zero(static_cast<Eigen::Index>(grid.num_nodes())));
        filled.emplace_back(grid.num_nodes(), false);
      }
      auto n = detail::require_node(grid, demand_csv, row, c_node, "demand row");
      double mw = demand_csv.number(row, c_mw);
      if (mw < 0.0) throw DataError(demand_csv.file(), row.line, "demand must be >= 0");
      if (filled[it->second][n])
        throw DataError(demand_csv.file(), row.line,
                        fmt::format("duplicate demand for node '{}' at timestep '{}'",
                                    grid.node(n).id, t));
      filled[it->second][n] = true;
      series.demand[it->second][static_cast<Eigen::Index>(n)] = mw;
    }
    for (std::size_t t = 0; t < filled.size(); ++t)
      for (std::size_t n = 0; n < grid.num_nodes(); ++n)
        if (!filled[t][n])
          throw DataError(demand_csv.file(), 0,
                          fmt::format("incomplete timeseries: no demand for node '{}' at "
                                      "timestep '{}'",
                                      grid.node(n).id, series.timesteps[t]));
  }

  // availability
  auto avail_csv = csv::Table::read(dir / "availability.csv");
  {
    auto c_t = avail_csv.column("timestep");
    auto c_gen = avail_csv.column("gen_id");
    auto c_mw = avail_csv.column("mw");
    const auto& ren = fleet.intermittent();
    std::map<std::size_t, std::size_t> slot;  // fleet index -> position in ren
    for (std::size_t k = 0; k < ren.size(); ++k) slot[ren[k]] = k;
    series.availability.assign(series.size(), Vector::Zero(static_cast<Eigen::Index>(ren.size())));
    std::vector<std::vector<bool>> filled(series.size(), std::vector<bool>(ren.size(), false));
    for (const auto& row : avail_csv.rows()) {
      const auto& t = avail_csv.text(row, c_t);
      auto tit = t_index.find(t);
      if (tit == t_index.end())
        throw DataError(avail_csv.file(), row.line,
                        fmt::format("timestep '{}' not present in demand.csv", t));
      const auto& gid = avail_csv.text(row, c_gen);
      auto git = gen_index.find(gid);
      if (git == gen_index.end())
        throw DataError(avail_csv.file(), row.line,
                        fmt::format("availability references unknown generator '{}'", gid));
      auto sit = slot.find(git->second);
      if (sit == slot.end())
        throw DataError(avail_csv.file(), row.line,
                        fmt::format("generator '{}' is not intermittent", gid));
      double mw = avail_csv.number(row, c_mw);
      double cap = fleet.at(git->second).capacity;
      if (mw < 0.0 || mw > cap + 1e-9)
        throw DataError(avail_csv.file(), row.line,
                        fmt::format("availability {} of '{}' outside [0, {}]", mw, gid, cap));
      if (filled[tit->second][sit->second])
        throw DataError(avail_csv.file(), row.line,
                        fmt::format("duplicate availability for '{}' at timestep '{}'", gid, t));
      filled[tit->second][sit->second] = true;
      series.availability[tit->second][static_cast<Eigen::Index>(sit->second)] = mw;
    }
    for (std::size_t t = 0; t < series.size(); ++t)
      for (std::size_t k = 0; k < ren.size(); ++k)
        if (!filled[t][k])
          throw DataError(avail_csv.file(), 0,
                          fmt::format("incomplete timeseries: no availability for '{}' at "
                                      "timestep '{}'",
                                      fleet.at(ren[k]).id, series.timesteps[t]));
  }

  return {std::move(grid), std::move(fleet), std::move(series)};
}

// ---------------------------------------------------------------------------
// Sensitivities
// ---------------------------------------------------------------------------

/// Line flows per unit nodal injection (lines x nodes), single slack.
struct PtdfMatrix {
  Matrix values;
  std::size_t slack = 0;

  Vector flows(const Vector& injections) const { return values * injections; }
};

/// Line outage distribution factors (monitored line x outaged line).
struct LodfMatrix {
  Matrix values;
  std::vector<bool> bridge;  // per outaged line: removal islands the network

  bool valid(std::size_t outage) const { return !bridge.at(outage); }
};

/// Branch-node incidence (lines x nodes): +1 at `from`, -1 at `to`.
inline Matrix incidence(const GridCase& grid) {
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(grid.num_lines()),
                          static_cast<Eigen::Index>(grid.num_nodes()));
  for (std::size_t j = 0; j < grid.num_lines(); ++j) {
    a(j, grid.line(j).from) = 1.0;
    a(j, grid.line(j).to) = -1.0;
  }
  return a;
}

inline PtdfMatrix build_ptdf(const GridCase& grid) {
  const auto n = static_cast<Eigen::Index>(grid.num_nodes());
  const auto l = static_cast<Eigen::Index>(grid.num_lines());
  const auto slack = static_cast<Eigen::Index>(grid.slack());
  Matrix a = incidence(grid);
  Vector b(l);
  for (Eigen::Index j = 0; j < l; ++j) b[j] = 1.0 / grid.line(static_cast<std::size_t>(j)).reactance;

  // Drop the slack column and solve the reduced susceptance system.
  Matrix a_red(l, n - 1);
  for (Eigen::Index c = 0, k = 0; c < n; ++c)
    if (c != slack) a_red.col(k++) = a.col(c);
  Matrix bf = b.asDiagonal() * a_red;  // branch susceptance x incidence
  Matrix bbus = a_red.transpose() * bf;

  PtdfMatrix ptdf;
  ptdf.slack = grid.slack();
  ptdf.values = Matrix::Zero(l, n);
  if (n == 1) return ptdf;
  Eigen::LDLT<Matrix> ldlt(bbus);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * ldlt.vectorD().maxCoeff())
    throw StructuralError("reduced susceptance matrix is singular (disconnected network?)");
  Matrix red = bf * ldlt.solve(Matrix::Identity(n - 1, n - 1));
  for (Eigen::Index c = 0, k = 0; c < n; ++c)
    if (c != slack) ptdf.values.col(c) = red.col(k++);
  return ptdf;
}

inline PtdfMatrix build_ptdf(const GridCase& grid, std::size_t slack) {
  return build_ptdf(grid.with_slack(slack));
}

/// Denominators with |1 - self sensitivity| below this mark a bridge line.
inline constexpr double kBridgeTolerance = 1e-8;

inline LodfMatrix build_lodf(const GridCase& grid, const PtdfMatrix& ptdf) {
  const auto l = static_cast<Eigen::Index>(grid.num_lines());
  // Flow on line j per unit transfer along line k's endpoints.
  Matrix ptdf_ll = ptdf.values * incidence(grid).transpose();
  LodfMatrix lodf;
  lodf.values = Matrix::Zero(l, l);
  lodf.bridge.assign(static_cast<std::size_t>(l), false);
  for (Eigen::Index k = 0; k < l; ++k) {
    double denom = 1.0 - ptdf_ll(k, k);
    if (std::abs(denom) < kBridgeTolerance) {
      lodf.bridge[static_cast<std::size_t>(k)] = true;
      lodf.values.col(k).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    lodf.values.col(k) = ptdf_ll.col(k) / denom;
    lodf.values(k, k) = -1.0;
  }
  return lodf;
}

// ---------------------------------------------------------------------------
// CNEC selection
// ---------------------------------------------------------------------------

/// A monitored line, optionally under a single-line outage, with its
/// effective nodal PTDF row (base row plus LODF-weighted outage row).
struct Cnec {
  std::size_t line = 0;
  std::optional<std::size_t> outage;
  RowVector ptdf;
  double capacity = 0.0;
};

struct CnecSet {
  std::vector<Cnec> entries;
  std::string screening_gsk = "uniform";  // nodal participation used for z2z screening

  std::size_t size() const noexcept { return entries.size(); }

  /// Effective PTDF rows stacked (CNEC x nodes).
  Matrix ptdf() const {
    if (entries.empty()) return Matrix(0, 0);
    Matrix m(static_cast<Eigen::Index>(entries.size()), entries.front().ptdf.size());
    for (std::size_t i = 0; i < entries.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = entries[i].ptdf;
    return m;
  }

  Vector capacities() const {
    Vector c(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) c[static_cast<Eigen::Index>(i)] = entries[i].capacity;
    return c;
  }

  std::string id(const GridCase& grid, std::size_t i) const {
    const Cnec& c = entries.at(i);
    if (!c.outage) return grid.line(c.line).id;
    return grid.line(c.line).id + "__" + grid.line(*c.outage).id;
  }

  std::string contingency_id(const GridCase& grid, std::size_t i) const {
    const Cnec& c = entries.at(i);
    return c.outage ? grid.line(*c.outage).id : std::string("none");
  }
};

struct CnecOptions {
  double z2z_threshold = 0.05;
  double outage_sensitivity = 0.2;
  bool cross_border_only = false;
};

/// Zone-to-zone PTDF spread of each line under uniform nodal participation
/// within every zone: max over zone pairs of |PTDF_{j,z} - PTDF_{j,z'}|.
inline Vector zone_to_zone_ptdf(const GridCase& grid, const PtdfMatrix& ptdf) {
  Matrix gsk = Matrix::Zero(static_cast<Eigen::Index>(grid.num_nodes()),
                            static_cast<Eigen::Index>(grid.num_zones()));
  std::vector<double> count(grid.num_zones(), 0.0);
  for (const auto& n : grid.nodes()) count[n.zone] += 1.0;
  for (std::size_t n = 0; n < grid.num_nodes(); ++n)
    gsk(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(grid.zone_of(n))) =
        1.0 / count[grid.zone_of(n)];
  Matrix zonal = ptdf.values * gsk;
  Vector spread(zonal.rows());
  for (Eigen::Index j = 0; j < zonal.rows(); ++j)
    spread[j] = zonal.row(j).maxCoeff() - zonal.row(j).minCoeff();
  return spread;
}

/// Threshold comparisons are strict, with this slack against round-off.
inline constexpr double kSelectionTolerance = 1e-9;

inline CnecSet select_cnecs(const GridCase& grid, const PtdfMatrix& ptdf,
                            const LodfMatrix& lodf, const CnecOptions& opt) {
  for (double v : {opt.z2z_threshold, opt.outage_sensitivity})
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("CNEC thresholds must lie in [0, 1]");
  Vector spread = zone_to_zone_ptdf(grid, ptdf);
  CnecSet set;
  for (std::size_t j = 0; j < grid.num_lines(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    bool selected = grid.is_cross_border(j) ||
                    (!opt.cross_border_only && spread[jj] > opt.z2z_threshold + kSelectionTolerance);
    if (!selected) continue;
    const double cap = grid.line(j).capacity;
    set.entries.push_back({j, std::nullopt, ptdf.values.row(jj), cap});
    for (std::size_t k = 0; k < grid.num_lines(); ++k) {
      if (k == j || !lodf.valid(k)) continue;
      const double factor = lodf.values(jj, static_cast<Eigen::Index>(k));
      if (std::abs(factor) <= opt.outage_sensitivity + kSelectionTolerance) continue;
      RowVector row = ptdf.values.row(jj) + factor * ptdf.values.row(static_cast<Eigen::Index>(k));
      set.entries.push_back({j, k, std::move(row), cap});
    }
  }
  return set;
}

}  // namespace fbmc

#endif  // FBMC_GRID_HPP
