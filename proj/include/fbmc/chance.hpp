#ifndef FBMC_CHANCE_HPP
#define FBMC_CHANCE_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "fbmc/conic.hpp"
#include "fbmc/core/error.hpp"
#include "fbmc/core/parallel.hpp"
#include "fbmc/dispatch.hpp"

namespace fbmc {

/// Phi^{-1}(1 - eps) for the standard normal distribution.
inline double quantile_std_normal(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("risk level must lie in (0, 1)");
  if (eps == 0.5) return 0.0;
  return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<>(), eps));
}

inline constexpr double kEigenClip = -1e-10;

/// Square-root factor F with F F' = sigma, dropping null directions.
/// Eigenvalues in [kEigenClip * scale, 0] are treated as zero; anything more
/// negative means the matrix is not positive semidefinite.
inline Matrix psd_factor(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw ConfigError("covariance must be square");
  if (sigma.size() == 0) return Matrix(0, 0);
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + sigma.cwiseAbs().maxCoeff()))
    throw ConfigError("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  const Vector& lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < kEigenClip * scale)
      throw ConfigError(fmt::format("covariance is not positive semidefinite (eigenvalue {})", lambda[i]));
    if (lambda[i] > 1e-12 * scale) keep.push_back(i);
  }
  Matrix f(sigma.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
    f.col(static_cast<Eigen::Index>(c)) =
        eig.eigenvectors().col(keep[c]) * std::sqrt(lambda[keep[c]]);
  return f;
}

/// Gaussian forecast errors of the intermittent units, per timestep.
struct UncertaintyModel {
  double epsilon = 0.05;
  std::vector<Matrix> covariance;  // |R| x |R|, MW^2
  std::vector<Matrix> factor;      // |R| x rank
  std::vector<double> aggregate_std;  // S_t = sqrt(e' Sigma e)

  std::size_t size() const noexcept { return covariance.size(); }

  static UncertaintyModel from_covariance(std::vector<Matrix> cov, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
    UncertaintyModel u;
    u.epsilon = epsilon;
    for (auto& s : cov) {
      u.factor.push_back(psd_factor(s));
      u.aggregate_std.push_back(std::sqrt(std::max(0.0, s.sum())));
      u.covariance.push_back(std::move(s));
    }
    return u;
  }
};

/// Standard deviation of unit g = relative_std * r_g, with constant pairwise
/// correlation rho.
inline UncertaintyModel build_covariance(const SeriesData& series, double relative_std,
                                         double rho = 0.0, double epsilon = 0.05) {
  if (relative_std < 0.0) throw ConfigError("relative standard deviation must be nonnegative");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("correlation must lie in [0, 1)");
  std::vector<Matrix> cov;
  for (const Vector& r : series.availability) {
    Vector sd = relative_std * r;
    Matrix s = sd * sd.transpose() * rho;
    s.diagonal() = sd.array().square();
    cov.push_back(std::move(s));
  }
  return UncertaintyModel::from_covariance(std::move(cov), epsilon);
}

/// Either optimized participation factors or fixed ones per timestep.
struct AlphaMode {
  std::optional<std::vector<Vector>> fixed;

  static AlphaMode optimized() { return {}; }
  static AlphaMode fixed_values(std::vector<Vector> alpha) { return {std::move(alpha)}; }
};

struct CcDispatchResult {
  DispatchResult dispatch;
  std::vector<Vector> alpha;     // per timestep, fleet.dispatchable() order
  std::vector<Vector> flow_std;  // T per CNEC, MW
  std::vector<Vector> margin;    // z * T per CNEC, MW
  double z = 0.0;
  double epsilon = 0.0;
};

namespace detail {

/// Zone sensitivity of CNEC i to each intermittent (a) and dispatchable (b) unit.
inline std::pair<Vector, Vector> unit_sensitivities(const FbTimestep& s, Eigen::Index i,
                                                    const CaseBundle& b) {
  const auto& fleet = b.fleet;
  Vector a(static_cast<Eigen::Index>(fleet.intermittent().size()));
  for (std::size_t r = 0; r < fleet.intermittent().size(); ++r)
    a[static_cast<Eigen::Index>(r)] =
        s.ptdf_z(i, static_cast<Eigen::Index>(b.grid.zone_of(fleet.at(fleet.intermittent()[r]).node)));
  Vector bb(static_cast<Eigen::Index>(fleet.dispatchable().size()));
  for (std::size_t k = 0; k < fleet.dispatchable().size(); ++k)
    bb[static_cast<Eigen::Index>(k)] =
        s.ptdf_z(i, static_cast<Eigen::Index>(b.grid.zone_of(fleet.at(fleet.dispatchable()[k]).node)));
  return {a, bb};
}

}  // namespace detail

/// Standard deviation of every CNEC flow for the given participation factors:
/// || F' (a_i - (b_i' alpha) e) ||.
inline Vector cnec_flow_std(const FbTimestep& s, const CaseBundle& b, const Matrix& factor,
                            const Vector& alpha) {
  Vector out = Vector::Zero(s.ptdf_z.rows());
  if (factor.cols() == 0) return out;
  for (Eigen::Index i = 0; i < s.ptdf_z.rows(); ++i) {
    auto [a, bb] = detail::unit_sensitivities(s, i, b);
    Vector v = a - Vector::Constant(a.size(), bb.dot(alpha));
    out[i] = (factor.transpose() * v).norm();
  }
  return out;
}

/// Zonal market clearing with chance constraints on generator limits and
/// flow-based CNEC rows, in second-order cone form.
inline CcDispatchResult solve_cc_ed(const EdProblem& problem, const UncertaintyModel& unc,
                                    const AlphaMode& mode = AlphaMode::optimized()) {
  detail::validate(problem);
  const auto* fb = std::get_if<network::FlowBased>(&problem.network);
  if (!fb) throw ConfigError("chance-constrained clearing needs a flow-based representation");
  const CaseBundle& b = problem.bundle;
  const auto& fleet = b.fleet;
  const std::size_t horizon = b.series.size();
  if (unc.size() != horizon) throw ConfigError("uncertainty model does not cover the horizon");
  for (const auto& s : unc.covariance)
    if (s.rows() != static_cast<Eigen::Index>(fleet.intermittent().size()))
      throw ConfigError("covariance dimension does not match the intermittent fleet");
  if (fleet.dispatchable().empty()) throw ConfigError("no dispatchable unit can balance deviations");
  if (mode.fixed) {
    if (mode.fixed->size() != horizon) throw ConfigError("fixed alpha does not cover the horizon");
    for (const auto& a : *mode.fixed)
      if (a.size() != static_cast<Eigen::Index>(fleet.dispatchable().size()) ||
          (a.array() < 0.0).any() || std::abs(a.sum() - 1.0) > 1e-9)
        throw ConfigError("fixed alpha must be nonnegative and sum to one");
  }
  const double z = quantile_std_normal(unc.epsilon);
  const PtdfMatrix ptdf = build_ptdf(b.grid);
  const FbParameters& fbp = fb->params;

  CcDispatchResult res;
  res.z = z;
  res.epsilon = unc.epsilon;
  res.dispatch.representation = "flow_based_cc";
  res.dispatch.steps.resize(horizon);
  res.alpha.resize(horizon);
  res.flow_std.resize(horizon);
  res.margin.resize(horizon);
  parallel_for(horizon, problem.options.threads, [&](std::size_t t) {
    conic::Model m;
    auto mm = detail::build_market(m, b, t, problem.options, nullptr);
    const auto& s = fbp.steps[t];
    const Matrix& f = unc.factor[t];
    const double S = unc.aggregate_std[t];
    const std::size_t nd = fleet.dispatchable().size();

    std::vector<conic::LinExpr> alpha(nd);
    if (mode.fixed) {
      for (std::size_t k = 0; k < nd; ++k) alpha[k] = conic::LinExpr((*mode.fixed)[t][static_cast<Eigen::Index>(k)]);
    } else {
      conic::LinExpr sum;
      for (std::size_t k = 0; k < nd; ++k) {
        auto v = m.add_var(0.0, conic::kInf, "alpha " + fleet.at(fleet.dispatchable()[k]).id);
        alpha[k] = conic::LinExpr(v);
        sum += conic::LinExpr(v);
      }
      m.add_eq(sum, 1.0, fmt::format("t{} alpha sum", t));
    }
    if (S > 0.0) {
      for (std::size_t k = 0; k < nd; ++k) {
        const auto& g = fleet.at(fleet.dispatchable()[k]);
        m.add_le(mm.gen[k] + (z * S) * alpha[k], g.capacity, fmt::format("t{} {} upward reserve", t, g.id));
        m.add_ge(mm.gen[k] - (z * S) * alpha[k], 0.0, fmt::format("t{} {} downward reserve", t, g.id));
      }
    }

    auto flows = detail::cnec_flows(s, mm.net_position);
    for (std::size_t i = 0; i < flows.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      conic::LinExpr spread;  // z * T_i
      if (f.cols() > 0) {
        auto [a, bb] = detail::unit_sensitivities(s, ii, b);
        conic::LinExpr response;  // b_i' alpha
        for (std::size_t k = 0; k < nd; ++k)
          if (bb[static_cast<Eigen::Index>(k)] != 0.0) response += bb[static_cast<Eigen::Index>(k)] * alpha[k];
        Vector fa = f.transpose() * a;
        Vector fe = f.colwise().sum().transpose();
        std::vector<conic::LinExpr> parts;
        for (Eigen::Index c = 0; c < f.cols(); ++c) parts.push_back(fa[c] - fe[c] * response);
        if (mode.fixed) {
          double tv = 0.0;
          for (const auto& p : parts) tv += p.constant() * p.constant();
          spread = conic::LinExpr(z * std::sqrt(tv));
        } else {
          auto tvar = m.add_var(0.0, conic::kInf, "std " + fbp.cnec_ids[i]);
          m.add_soc(conic::LinExpr(tvar), std::move(parts), fmt::format("t{} std {}", t, fbp.cnec_ids[i]));
          spread = z * tvar;
        }
      }
      m.add_le(flows[i] + spread, s.ram_pos[ii], fmt::format("t{} cnec {} (+)", t, fbp.cnec_ids[i]));
      m.add_le(spread - flows[i], s.ram_neg[ii], fmt::format("t{} cnec {} (-)", t, fbp.cnec_ids[i]));
    }
    m.minimize(mm.generation_cost + mm.curtailment_cost + mm.exchange_cost);
    auto sol = m.solve();
    detail::check_status(sol, t, "chance-constrained clearing");
    res.dispatch.steps[t] = detail::extract(sol, mm, b, ptdf, t);
    Vector al(static_cast<Eigen::Index>(nd));
    for (std::size_t k = 0; k < nd; ++k) al[static_cast<Eigen::Index>(k)] = sol.value(alpha[k]);
    if (!mode.fixed) {
      // Remove interior-point residue so the factors are exactly a partition.
      al = al.cwiseMax(0.0);
      al /= al.sum();
    }
    res.alpha[t] = al;
    res.flow_std[t] = cnec_flow_std(s, b, f, al);
    res.margin[t] = z * res.flow_std[t];
  });
  return res;
}

/// Probabilistic reliability margins z * T per timestep and CNEC.
inline std::vector<Vector> endogenous_frm(const CcDispatchResult& result) {
  return result.margin;
}

}  // namespace fbmc

#endif  // FBMC_CHANCE_HPP
