#ifndef FBMC_FB_PARAMS_HPP
#define FBMC_FB_PARAMS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fbmc/core/csv.hpp"
#include "fbmc/core/error.hpp"
#include "fbmc/core/types.hpp"
#include "fbmc/geometry.hpp"
#include "fbmc/grid.hpp"
#include "fbmc/results.hpp"

namespace fbmc {

// ---------------------------------------------------------------------------
// Generation shift keys
// ---------------------------------------------------------------------------

/// Nodal participation of each zone (nodes x zones). Columns sum to one.
struct Gsk {
  Matrix weights;
  std::size_t timestep = 0;
  std::vector<std::string> warnings;
};

inline constexpr double kOnlineTolerance = 1e-3;  // MW

/// Pro-rata GSK: each node's share of the online dispatchable capacity of its
/// zone. Zones without online capacity fall back to installed dispatchable
/// capacity, and zones without any dispatchable unit to uniform node weights.
inline Gsk gsk_pro_rata(const GridCase& grid, const GeneratorFleet& fleet,
                        const DispatchResult& basecase, std::size_t t,
                        double online_tolerance = kOnlineTolerance) {
  if (t >= basecase.size())
    throw Error(fmt::format("basecase has no timestep {}", t));
  const auto nodes = static_cast<Eigen::Index>(grid.num_nodes());
  const auto zones = static_cast<Eigen::Index>(grid.num_zones());
  const Vector& g = basecase.steps[t].generation;
  Matrix online = Matrix::Zero(nodes, zones);
  Matrix installed = Matrix::Zero(nodes, zones);
  for (std::size_t k : fleet.dispatchable()) {
    const auto& gen = fleet.at(k);
    const auto n = static_cast<Eigen::Index>(gen.node);
    const auto z = static_cast<Eigen::Index>(grid.zone_of(gen.node));
    installed(n, z) += gen.capacity;
    if (g[static_cast<Eigen::Index>(k)] > online_tolerance) online(n, z) += gen.capacity;
  }
  Gsk gsk{Matrix::Zero(nodes, zones), t, {}};
  for (Eigen::Index z = 0; z < zones; ++z) {
    const auto& zone = grid.zones()[static_cast<std::size_t>(z)];
    if (online.col(z).sum() > 0.0) {
      gsk.weights.col(z) = online.col(z) / online.col(z).sum();
      continue;
    }
    if (installed.col(z).sum() > 0.0) {
      gsk.weights.col(z) = installed.col(z) / installed.col(z).sum();
      gsk.warnings.push_back(fmt::format(
          "t={}: zone {} has no online dispatchable capacity; using installed capacity", t, zone));
      continue;
    }
    double count = 0.0;
    for (Eigen::Index n = 0; n < nodes; ++n)
      if (grid.zone_of(static_cast<std::size_t>(n)) == static_cast<std::size_t>(z)) count += 1.0;
    for (Eigen::Index n = 0; n < nodes; ++n)
      if (grid.zone_of(static_cast<std::size_t>(n)) == static_cast<std::size_t>(z))
        gsk.weights(n, z) = 1.0 / count;
    gsk.warnings.push_back(fmt::format(
        "t={}: zone {} has no dispatchable capacity; using uniform node weights", t, zone));
  }
  return gsk;
}

// ---------------------------------------------------------------------------
// Zonal PTDF, reference flow, RAM
// ---------------------------------------------------------------------------

inline Matrix zonal_ptdf(const CnecSet& cnecs, const Gsk& gsk) {
  if (cnecs.size() == 0) return Matrix(0, gsk.weights.cols());
  Matrix p = cnecs.ptdf();
  if (p.cols() != gsk.weights.rows())
    throw Error("CNEC PTDF and GSK dimensions do not conform");
  return p * gsk.weights;
}

inline Vector reference_flow(const Vector& f_bc, const Matrix& ptdf_z, const Vector& np_bc) {
  return f_bc - ptdf_z * np_bc;
}

inline Vector compute_ram(const Vector& capacity, const Vector& frm, const Vector& fav,
                          const Vector& f_ref, double minram) {
  if (!(minram >= 0.0 && minram <= 1.0)) throw ConfigError("minram fraction must lie in [0, 1]");
  if ((frm.array() < 0.0).any()) throw ConfigError("FRM must be nonnegative");
  Vector ram(capacity.size());
  for (Eigen::Index j = 0; j < capacity.size(); ++j)
    ram[j] = std::max(minram * capacity[j], capacity[j] - (frm[j] + fav[j]) - f_ref[j]);
  return ram;
}

inline Vector compute_ram(const CnecSet& cnecs, const Vector& frm, const Vector& fav,
                          const Vector& f_ref, double minram) {
  return compute_ram(cnecs.capacities(), frm, fav, f_ref, minram);
}

// ---------------------------------------------------------------------------
// Flow-based parameters
// ---------------------------------------------------------------------------

/// Parameters of one timestep. Every CNEC contributes two directional rows,
/// row 2i for the positive and row 2i+1 for the negative flow direction.
struct FbTimestep {
  Matrix ptdf_z;  // CNEC x zones, positive direction
  Vector f_bc;
  Vector f_ref;
  Vector frm;
  Vector fav;
  Vector ram_pos;
  Vector ram_neg;

  /// Directional rows: A np <= b.
  Matrix rows() const {
    Matrix a(2 * ptdf_z.rows(), ptdf_z.cols());
    for (Eigen::Index i = 0; i < ptdf_z.rows(); ++i) {
      a.row(2 * i) = ptdf_z.row(i);
      a.row(2 * i + 1) = -ptdf_z.row(i);
    }
    return a;
  }
  Vector limits() const {
    Vector b(2 * ram_pos.size());
    for (Eigen::Index i = 0; i < ram_pos.size(); ++i) {
      b[2 * i] = ram_pos[i];
      b[2 * i + 1] = ram_neg[i];
    }
    return b;
  }
};

struct FbParameters {
  CnecSet cnecs;
  std::vector<std::string> zones;
  std::vector<std::string> cnec_ids;
  std::vector<std::string> contingency_ids;
  double minram = 0.0;
  std::vector<FbTimestep> steps;
  std::vector<Gsk> gsks;

  std::size_t size() const noexcept { return steps.size(); }
};

struct FbOptions {
  double minram = 0.2;
  std::map<std::string, double> fav;  // per CNEC id, MW; absent = 0
  double online_tolerance = kOnlineTolerance;
};

namespace detail {

inline void fill_ram(FbTimestep& s, const Vector& capacity, double minram) {
  s.ram_pos = compute_ram(capacity, s.frm, s.fav, s.f_ref, minram);
  s.ram_neg = compute_ram(capacity, s.frm, s.fav, Vector(-s.f_ref), minram);
}

}  // namespace detail

/// Derives GSK, zonal PTDF, reference flows and RAM for every timestep of the
/// basecase. FRM is zero here; probabilistic margins come from `with_frm`.
inline FbParameters build_fb_parameters(const CaseBundle& bundle, const CnecSet& cnecs,
                                        const DispatchResult& basecase, const FbOptions& opt) {
  const GridCase& grid = bundle.grid;
  FbParameters fbp;
  fbp.cnecs = cnecs;
  fbp.zones = grid.zones();
  fbp.minram = opt.minram;
  for (std::size_t i = 0; i < cnecs.size(); ++i) {
    fbp.cnec_ids.push_back(cnecs.id(grid, i));
    fbp.contingency_ids.push_back(cnecs.contingency_id(grid, i));
  }
  for (const auto& [id, value] : opt.fav)
    if (std::find(fbp.cnec_ids.begin(), fbp.cnec_ids.end(), id) == fbp.cnec_ids.end())
      throw ConfigError(fmt::format("FAV given for unknown CNEC '{}'", id));
  const auto m = static_cast<Eigen::Index>(cnecs.size());
  Vector fav = Vector::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    auto it = opt.fav.find(fbp.cnec_ids[static_cast<std::size_t>(i)]);
    if (it != opt.fav.end()) fav[i] = it->second;
  }
  const Matrix nodal = cnecs.ptdf();
  const Vector capacity = cnecs.capacities();
  const Matrix zinc = grid.zone_incidence();
  for (std::size_t t = 0; t < basecase.size(); ++t) {
    Gsk gsk = gsk_pro_rata(grid, bundle.fleet, basecase, t, opt.online_tolerance);
    FbTimestep s;
    s.ptdf_z = zonal_ptdf(cnecs, gsk);
    const Vector& inj = basecase.steps[t].injections;
    s.f_bc = m > 0 ? Vector(nodal * inj) : Vector(0);
    Vector np = zinc * inj;
    s.f_ref = reference_flow(s.f_bc, s.ptdf_z, np);
    s.frm = Vector::Zero(m);
    s.fav = fav;
    detail::fill_ram(s, capacity, opt.minram);
    fbp.steps.push_back(std::move(s));
    fbp.gsks.push_back(std::move(gsk));
  }
  return fbp;
}

/// Copy of `fbp` with the given per-timestep FRM vectors and RAM recomputed.
inline FbParameters with_frm(const FbParameters& fbp, const std::vector<Vector>& frm) {
  if (frm.size() != fbp.size()) throw Error("FRM horizon does not match parameters");
  FbParameters out = fbp;
  const Vector capacity = fbp.cnecs.capacities();
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (frm[t].size() != capacity.size()) throw Error("FRM length does not match CNEC count");
    out.steps[t].frm = frm[t];
    detail::fill_ram(out.steps[t], capacity, fbp.minram);
  }
  return out;
}

inline std::string export_fb_parameters(const FbParameters& fbp,
                                        const std::vector<std::string>& timesteps) {
  std::vector<std::string> header{"timestep", "cnec_id", "contingency_id", "direction"};
  for (const auto& z : fbp.zones) header.push_back(z);
  for (const char* c : {"ram_mw", "f_ref_mw", "frm_mw", "fav_mw"}) header.emplace_back(c);
  csv::Writer w(header);
  for (std::size_t t = 0; t < fbp.size(); ++t) {
    const auto& s = fbp.steps[t];
    for (Eigen::Index i = 0; i < s.ptdf_z.rows(); ++i)
      for (int dir : {1, -1}) {
        std::vector<std::string> row{timesteps.at(t), fbp.cnec_ids[static_cast<std::size_t>(i)],
                                     fbp.contingency_ids[static_cast<std::size_t>(i)],
                                     dir > 0 ? "+" : "-"};
        for (Eigen::Index z = 0; z < s.ptdf_z.cols(); ++z) row.push_back(csv::num(dir * s.ptdf_z(i, z)));
        row.push_back(csv::num(dir > 0 ? s.ram_pos[i] : s.ram_neg[i]));
        row.push_back(csv::num(dir * s.f_ref[i]));
        row.push_back(csv::num(s.frm[i]));
        row.push_back(csv::num(s.fav[i]));
        w.row(row);
      }
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// Domain slices
// ---------------------------------------------------------------------------

/// Exchange z -> z' along one slice axis.
struct SliceAxis {
  std::size_t from = 0;
  std::size_t to = 0;
};

struct LabeledHalfplane {
  geometry::Halfplane plane;
  std::string label;
};

struct DomainSlice {
  std::string x_label;
  std::string y_label;
  std::vector<LabeledHalfplane> halfplanes;
  geometry::Polygon vertices;
  bool truncated = false;
  std::optional<geometry::Point> market_point;
  double bound = 0.0;
};

inline constexpr double kDefaultSliceBound = 10000.0;  // MW

/// Restricts the directional CNEC rows to the plane
/// np = fixed_np + x (e_from - e_to) + y (e_from' - e_to').
/// `margin` (per CNEC) is subtracted from both directional RAMs when given.
inline DomainSlice fb_domain_slice(const FbParameters& fbp, std::size_t t, SliceAxis xa,
                                   SliceAxis ya, const Vector& fixed_np,
                                   const std::optional<Vector>& margin = std::nullopt,
                                   double bound = kDefaultSliceBound) {
  if (t >= fbp.size()) throw Error(fmt::format("no flow-based parameters for timestep {}", t));
  const auto zones = static_cast<Eigen::Index>(fbp.zones.size());
  for (auto a : {xa, ya})
    if (a.from == a.to || a.from >= fbp.zones.size() || a.to >= fbp.zones.size())
      throw ConfigError("slice axes need two distinct known zones");
  if (xa.from == ya.from && xa.to == ya.to) throw ConfigError("slice axes must differ");
  if (fixed_np.size() != zones) throw ConfigError("fixed net-position vector has wrong length");
  const auto& s = fbp.steps[t];
  Vector dx = Vector::Zero(zones), dy = Vector::Zero(zones);
  dx[static_cast<Eigen::Index>(xa.from)] += 1.0;
  dx[static_cast<Eigen::Index>(xa.to)] -= 1.0;
  dy[static_cast<Eigen::Index>(ya.from)] += 1.0;
  dy[static_cast<Eigen::Index>(ya.to)] -= 1.0;
  DomainSlice out;
  out.x_label = fbp.zones[xa.from] + "->" + fbp.zones[xa.to];
  out.y_label = fbp.zones[ya.from] + "->" + fbp.zones[ya.to];
  out.bound = bound;
  for (Eigen::Index i = 0; i < s.ptdf_z.rows(); ++i) {
    const double m = margin ? (*margin)[i] : 0.0;
    for (int dir : {1, -1}) {
      RowVector row = dir * s.ptdf_z.row(i);
      double ram = (dir > 0 ? s.ram_pos[i] : s.ram_neg[i]) - m;
      geometry::Halfplane hp{row.dot(dx), row.dot(dy), ram - row.dot(fixed_np)};
      std::string label = fbp.cnec_ids[static_cast<std::size_t>(i)] + (dir > 0 ? " (+)" : " (-)");
      out.halfplanes.push_back({hp, std::move(label)});
    }
  }
  std::vector<geometry::Halfplane> planes;
  for (const auto& h : out.halfplanes) planes.push_back(h.plane);
  out.vertices = geometry::intersect(geometry::box(-bound, bound), planes);
  for (const auto& v : out.vertices)
    if (std::abs(std::abs(v.x) - bound) < 1e-6 || std::abs(std::abs(v.y) - bound) < 1e-6)
      out.truncated = true;
  return out;
}

inline std::string slice_halfplanes_csv(const DomainSlice& s) {
  csv::Writer w({"label", "a_x", "a_y", "b"});
  for (const auto& h : s.halfplanes)
    w.row({h.label, csv::num(h.plane.ax), csv::num(h.plane.ay), csv::num(h.plane.b)});
  return w.str();
}

inline std::string slice_vertices_csv(const DomainSlice& s) {
  csv::Writer w({"x", "y"});
  for (const auto& v : s.vertices) w.row({csv::num(v.x), csv::num(v.y)});
  return w.str();
}

/// Minimal SVG of one or more slice polygons drawn on shared axes.
inline std::string slice_svg(const std::vector<std::pair<DomainSlice, std::string>>& layers) {
  double lo = 0.0, hi = 0.0;
  for (const auto& [s, colour] : layers) {
    for (const auto& v : s.vertices) {
      lo = std::min({lo, v.x, v.y});
      hi = std::max({hi, v.x, v.y});
    }
    if (s.market_point) {
      lo = std::min({lo, s.market_point->x, s.market_point->y});
      hi = std::max({hi, s.market_point->x, s.market_point->y});
    }
  }
  double pad = 0.05 * std::max(hi - lo, 1.0);
  lo -= pad;
  hi += pad;
  const double size = 480.0;
  auto sx = [&](double x) { return (x - lo) / (hi - lo) * size; };
  auto sy = [&](double y) { return size - (y - lo) / (hi - lo) * size; };
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
      size);
  svg += fmt::format("<line x1=\"{}\" y1=\"0\" x2=\"{}\" y2=\"{}\" stroke=\"#999\"/>\n", sx(0), sx(0), size);
  svg += fmt::format("<line x1=\"0\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999\"/>\n", sy(0), size, sy(0));
  for (const auto& [s, colour] : layers) {
    std::string pts;
    for (const auto& v : s.vertices) pts += fmt::format("{:.3f},{:.3f} ", sx(v.x), sy(v.y));
    svg += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.35\" stroke=\"{}\"/>\n",
                       pts, colour, colour);
    if (s.market_point)
      svg += fmt::format("<circle cx=\"{:.3f}\" cy=\"{:.3f}\" r=\"4\" fill=\"black\"/>\n",
                         sx(s.market_point->x), sy(s.market_point->y));
  }
  if (!layers.empty()) {
    const auto& s = layers.front().first;
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n", size - 80, sy(0) - 4, s.x_label);
    svg += fmt::format("<text x=\"{}\" y=\"12\" font-size=\"12\">{}</text>\n", sx(0) + 4, s.y_label);
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace fbmc

#endif  // FBMC_FB_PARAMS_HPP
