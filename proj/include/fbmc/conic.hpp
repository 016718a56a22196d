#ifndef FBMC_CONIC_HPP
#define FBMC_CONIC_HPP

// Linear / second-order-cone programs behind one small modelling interface.
//
//   minimize    c'x
//   subject to  A x  = b
//               G x + s = h,   s in K = R+^l x Q^{q_1} x ... x Q^{q_k}
//
// solved by a dense primal-dual interior-point method on the homogeneous
// self-dual embedding with Nesterov-Todd scaling and Mehrotra correction.
// Problems in this library are small per timestep, so the KKT system is
// assembled densely and factored with partial-pivoting LU plus iterative
// refinement against the unregularised matrix.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "fbmc/core/error.hpp"
#include "fbmc/core/types.hpp"

namespace fbmc::conic {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Var {
  int index = -1;
};

/// Affine expression sum_i a_i x_i + constant.
class LinExpr {
public:
  LinExpr() = default;
  LinExpr(double constant) : constant_(constant) {}  // NOLINT(implicit)
  LinExpr(Var v, double coef = 1.0) { add(v, coef); }  // NOLINT(implicit)

  LinExpr& add(Var v, double coef) {
    if (coef != 0.0) terms_.emplace_back(v.index, coef);
    return *this;
  }
  LinExpr& operator+=(const LinExpr& o) {
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    constant_ += o.constant_;
    return *this;
  }
  LinExpr& operator-=(const LinExpr& o) { return *this += o * -1.0; }
  LinExpr operator*(double k) const {
    LinExpr e = *this;
    for (auto& t : e.terms_) t.second *= k;
    e.constant_ *= k;
    return e;
  }

  double constant() const noexcept { return constant_; }
  const std::vector<std::pair<int, double>>& terms() const noexcept { return terms_; }

  double value(const Vector& x) const {
    double v = constant_;
    for (auto [i, a] : terms_) v += a * x[i];
    return v;
  }

private:
  std::vector<std::pair<int, double>> terms_;
  double constant_ = 0.0;
};

inline LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
inline LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
inline LinExpr operator*(double k, const LinExpr& e) { return e * k; }
inline LinExpr operator*(double k, Var v) { return LinExpr(v, k); }
inline LinExpr operator+(Var a, Var b) { return LinExpr(a) + LinExpr(b); }
inline LinExpr operator-(Var a, Var b) { return LinExpr(a) - LinExpr(b); }
inline LinExpr operator+(Var a, double k) { return LinExpr(a) + LinExpr(k); }
inline LinExpr operator-(Var a, double k) { return LinExpr(a) - LinExpr(k); }

enum class Status { optimal, infeasible, unbounded, failed };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::failed: return "failed";
  }
  return "unknown";
}

struct Settings {
  double feastol = 1e-9;
  double abstol = 1e-8;
  double reltol = 1e-10;
  // Accepted when the iteration stalls before reaching the tolerances above.
  double feastol_inaccurate = 1e-6;
  double reltol_inaccurate = 1e-6;
  int max_iterations = 120;
  double step_fraction = 0.99;
  double regularization = 1e-9;  // static, absolute
  int refinement_steps = 10;
};

struct Solution {
  Status status = Status::failed;
  bool reduced_accuracy = false;
  Vector x;
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  // Labels of constraints carrying the infeasibility certificate, heaviest first.
  std::vector<std::string> certificate;

  double value(Var v) const { return x[v.index]; }
  double value(const LinExpr& e) const { return e.value(x); }
};

/// Standard-form data; exposed for tests and diagnostics.
struct ConeProblem {
  Vector c;
  Matrix A;
  Vector b;
  Matrix G;
  Vector h;
  int linear = 0;               // leading rows of G in the nonnegative orthant
  std::vector<int> soc;         // sizes of the trailing second-order cones
  std::vector<std::string> eq_labels;
  std::vector<std::string> ineq_labels;  // one per row of G
};

namespace detail {

/// Cone bookkeeping and the Jordan-algebra operations the method needs.
class Cones {
public:
  Cones(int linear, std::vector<int> soc) : linear_(linear), soc_(std::move(soc)) {
    int off = linear_;
    for (int q : soc_) {
      offsets_.push_back(off);
      off += q;
    }
    dim_ = off;
  }

  int dim() const noexcept { return dim_; }
  int degree() const noexcept { return linear_ + static_cast<int>(soc_.size()); }

  Vector identity() const {
    Vector e = Vector::Zero(dim_);
    e.head(linear_).setOnes();
    for (int off : offsets_) e[off] = 1.0;
    return e;
  }

  /// Smallest a with u + a*e in the cone (may be negative).
  double min_shift(const Vector& u) const {
    double a = -kInf;
    for (int i = 0; i < linear_; ++i) a = std::max(a, -u[i]);
    for (std::size_t k = 0; k < soc_.size(); ++k) {
      int off = offsets_[k], q = soc_[k];
      a = std::max(a, u.segment(off + 1, q - 1).norm() - u[off]);
    }
    return a == -kInf ? -1.0 : a;
  }

  /// Largest step a >= 0 with u + a*du in the cone (kInf if unbounded).
  double max_step(const Vector& u, const Vector& du) const {
    double a = kInf;
    for (int i = 0; i < linear_; ++i)
      if (du[i] < 0.0) a = std::min(a, -u[i] / du[i]);
    for (std::size_t k = 0; k < soc_.size(); ++k) {
      int off = offsets_[k], q = soc_[k];
      double u0 = u[off], d0 = du[off];
      auto u1 = u.segment(off + 1, q - 1);
      auto d1 = du.segment(off + 1, q - 1);
      double qa = d0 * d0 - d1.squaredNorm();
      double qb = 2.0 * (u0 * d0 - u1.dot(d1));
      double qc = std::max(u0 * u0 - u1.squaredNorm(), 0.0);
      a = std::min(a, smallest_positive_root(qa, qb, qc));
      if (d0 < 0.0) a = std::min(a, -u0 / d0);
    }
    return a;
  }

  /// Jordan product u o v.
  Vector product(const Vector& u, const Vector& v) const {
    Vector w(dim_);
    w.head(linear_) = u.head(linear_).cwiseProduct(v.head(linear_));
    for (std::size_t k = 0; k < soc_.size(); ++k) {
      int off = offsets_[k], q = soc_[k];
      w[off] = u.segment(off, q).dot(v.segment(off, q));
      w.segment(off + 1, q - 1) =
          u[off] * v.segment(off + 1, q - 1) + v[off] * u.segment(off + 1, q - 1);
    }
    return w;
  }

  /// Solves lambda o v = u for v.
  Vector divide(const Vector& lambda, const Vector& u) const {
    Vector v(dim_);
    v.head(linear_) = u.head(linear_).cwiseQuotient(lambda.head(linear_));
    for (std::size_t k = 0; k < soc_.size(); ++k) {
      int off = offsets_[k], q = soc_[k];
      double l0 = lambda[off];
      auto l1 = lambda.segment(off + 1, q - 1);
      double u0 = u[off];
      auto u1 = u.segment(off + 1, q - 1);
      double det = l0 * l0 - l1.squaredNorm();
      double v0 = (l0 * u0 - l1.dot(u1)) / det;
      v[off] = v0;
      v.segment(off + 1, q - 1) = (u1 - v0 * l1) / l0;
    }
    return v;
  }

  int linear() const noexcept { return linear_; }
  const std::vector<int>& soc() const noexcept { return soc_; }
  const std::vector<int>& offsets() const noexcept { return offsets_; }

private:
  static double smallest_positive_root(double a, double b, double c) {
    const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
    if (std::abs(a) <= 1e-14 * scale) {
      if (b < 0.0) return -c / b;
      return kInf;
    }
    double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return kInf;
    double sq = std::sqrt(disc);
    double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
    double best = kInf;
    for (double r : {q / a, q != 0.0 ? c / q : kInf})
      if (r > 0.0) best = std::min(best, r);
    return best;
  }

  int linear_;
  std::vector<int> soc_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

/// Nesterov-Todd scaling W (symmetric, block diagonal) with W z = W^{-1} s.
class Scaling {
public:
  Scaling(const Cones& cones, const Vector& s, const Vector& z) : cones_(&cones) {
    const int l = cones.linear();
    diag_ = (s.head(l).cwiseQuotient(z.head(l))).cwiseSqrt();
    for (std::size_t k = 0; k < cones.soc().size(); ++k) {
      int off = cones.offsets()[k], q = cones.soc()[k];
      Vector sk = s.segment(off, q), zk = z.segment(off, q);
      double sres = std::max(sk[0] * sk[0] - sk.tail(q - 1).squaredNorm(), 1e-300);
      double zres = std::max(zk[0] * zk[0] - zk.tail(q - 1).squaredNorm(), 1e-300);
      Vector sn = sk / std::sqrt(sres), zn = zk / std::sqrt(zres);
      double gamma = std::sqrt(std::max((1.0 + sn.dot(zn)) / 2.0, 1e-300));
      Vector w(q);
      w[0] = (sn[0] + zn[0]) / (2.0 * gamma);
      w.tail(q - 1) = (sn.tail(q - 1) - zn.tail(q - 1)) / (2.0 * gamma);
      double eta = std::pow(sres / zres, 0.25);
      Matrix blk(q, q);
      blk(0, 0) = w[0];
      blk.block(0, 1, 1, q - 1) = w.tail(q - 1).transpose();
      blk.block(1, 0, q - 1, 1) = w.tail(q - 1);
      blk.block(1, 1, q - 1, q - 1) =
          Matrix::Identity(q - 1, q - 1) + w.tail(q - 1) * w.tail(q - 1).transpose() / (1.0 + w[0]);
      Matrix inv = blk;
      inv.block(0, 1, 1, q - 1) *= -1.0;
      inv.block(1, 0, q - 1, 1) *= -1.0;
      blocks_.push_back(eta * blk);
      inverses_.push_back(inv / eta);
    }
  }

  Vector apply(const Vector& v) const { return apply_impl(v, false); }
  Vector apply_inverse(const Vector& v) const { return apply_impl(v, true); }

  /// Adds -W^2 into the (dim x dim) block of `kkt` starting at (row, row).
  void subtract_square(Matrix& kkt, Eigen::Index row) const {
    const int l = cones_->linear();
    for (int i = 0; i < l; ++i) kkt(row + i, row + i) -= diag_[i] * diag_[i];
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      int off = cones_->offsets()[k], q = cones_->soc()[k];
      kkt.block(row + off, row + off, q, q) -= blocks_[k] * blocks_[k];
    }
  }

  Vector square(const Vector& v) const { return apply(apply(v)); }

private:
  Vector apply_impl(const Vector& v, bool inverse) const {
    const int l = cones_->linear();
    Vector out(v.size());
    if (inverse)
      out.head(l) = v.head(l).cwiseQuotient(diag_);
    else
      out.head(l) = v.head(l).cwiseProduct(diag_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      int off = cones_->offsets()[k], q = cones_->soc()[k];
      out.segment(off, q) = (inverse ? inverses_[k] : blocks_[k]) * v.segment(off, q);
    }
    return out;
  }

  const Cones* cones_;
  Vector diag_;
  std::vector<Matrix> blocks_;
  std::vector<Matrix> inverses_;
};

/// Removes linearly dependent equality rows. Returns false if the dropped
/// rows are inconsistent with the kept ones; `bad_row` then names one.
inline bool reduce_equalities(Matrix& A, Vector& b, std::vector<std::string>& labels,
                              std::string& bad_row) {
  if (A.rows() == 0) return true;
  Matrix ab(A.rows(), A.cols() + 1);
  ab << A, b;
  Eigen::ColPivHouseholderQR<Matrix> qr(A.transpose());
  double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  qr.setThreshold(1e-10 * scale / std::max(1.0, std::sqrt(static_cast<double>(A.cols()))));
  const Eigen::Index rank = qr.rank();
  if (rank == A.rows()) return true;
  std::vector<Eigen::Index> keep, drop;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = 0; i < A.rows(); ++i) (i < rank ? keep : drop).push_back(perm[i]);
  std::sort(keep.begin(), keep.end());
  Matrix ak(static_cast<Eigen::Index>(keep.size()), A.cols());
  Vector bk(static_cast<Eigen::Index>(keep.size()));
  std::vector<std::string> lk;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    ak.row(static_cast<Eigen::Index>(i)) = A.row(keep[i]);
    bk[static_cast<Eigen::Index>(i)] = b[keep[i]];
    lk.push_back(labels[static_cast<std::size_t>(keep[i])]);
  }
  // Each dropped row must be the same combination of kept rows in b as in A.
  Eigen::ColPivHouseholderQR<Matrix> kqr(ak.transpose());
  for (Eigen::Index r : drop) {
    Vector w = kqr.solve(Vector(A.row(r).transpose()));
    double bscale = std::max(1.0, std::abs(b[r]) + bk.cwiseAbs().maxCoeff());
    if (std::abs(w.dot(bk) - b[r]) > 1e-8 * bscale) {
      bad_row = labels[static_cast<std::size_t>(r)];
      return false;
    }
  }
  A = std::move(ak);
  b = std::move(bk);
  labels = std::move(lk);
  return true;
}

}  // namespace detail

/// Primal-dual interior-point solve of a standard-form cone program.
inline Solution solve(ConeProblem prob, const Settings& set = {}) {
  using detail::Cones;
  using detail::Scaling;
  Solution sol;
  const Eigen::Index n = prob.c.size();
  {
    std::string bad;
    if (!detail::reduce_equalities(prob.A, prob.b, prob.eq_labels, bad)) {
      sol.status = Status::infeasible;
      sol.certificate = {bad};
      return sol;
    }
  }
  const Eigen::Index p = prob.A.rows();
  const Eigen::Index m = prob.G.rows();
  Cones cones(prob.linear, prob.soc);
  if (cones.dim() != m) throw SolverError("cone dimensions do not match G");
  const Matrix& A = prob.A;
  const Matrix& G = prob.G;
  const Vector& b = prob.b;
  const Vector& h = prob.h;
  const Vector& c = prob.c;
  const Eigen::Index N = n + p + m;

  Matrix kkt(N, N);
  auto assemble = [&](const Scaling* w) {
    kkt.setZero();
    kkt.block(0, n, n, p) = A.transpose();
    kkt.block(0, n + p, n, m) = G.transpose();
    kkt.block(n, 0, p, n) = A;
    kkt.block(n + p, 0, m, n) = G;
    if (w) {
      w->subtract_square(kkt, n + p);
    } else {
      kkt.block(n + p, n + p, m, m) -= Matrix::Identity(m, m);
    }
  };
  Eigen::PartialPivLU<Matrix> lu;
  auto factor = [&] {
    Matrix reg = kkt;
    const double d = set.regularization;
    for (Eigen::Index i = 0; i < n; ++i) reg(i, i) += d;
    for (Eigen::Index i = n; i < N; ++i) reg(i, i) -= d;
    lu.compute(reg);
  };
  auto kkt_solve = [&](const Vector& rhs) {
    Vector x = lu.solve(rhs);
    for (int it = 0; it < set.refinement_steps; ++it) {
      Vector r = rhs - kkt * x;
      if (r.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      x += lu.solve(r);
    }
    return x;
  };

  // Initial point: least-norm primal slack and dual multiplier, shifted inside.
  assemble(nullptr);
  factor();
  Vector rhs(N);
  rhs << Vector::Zero(n), b, h;
  Vector sol0 = kkt_solve(rhs);
  Vector x = sol0.head(n);
  Vector s = -sol0.tail(m);
  rhs << -c, Vector::Zero(p), Vector::Zero(m);
  Vector sol1 = kkt_solve(rhs);
  Vector y = sol1.segment(n, p);
  Vector z = sol1.tail(m);
  const Vector e = cones.identity();
  if (m > 0) {
    double ap = cones.min_shift(s);
    if (ap >= 0.0) s += (1.0 + ap) * e;
    double ad = cones.min_shift(z);
    if (ad >= 0.0) z += (1.0 + ad) * e;
  }
  double tau = 1.0, kappa = 1.0;

  const double nb = std::max(1.0, b.norm()), nh = std::max(1.0, h.norm()),
               nc = std::max(1.0, c.norm());
  const double degree = cones.degree() + 1.0;

  struct Best {
    Vector x;
    double tau = 1.0;
    double pres = kInf, dres = kInf, relgap = kInf, gap = kInf;
  } best;

  auto finish = [&](Status status, const Vector& xs, double ts) {
    sol.status = status;
    sol.x = xs / ts;
    sol.objective = c.dot(sol.x);
    return sol;
  };

  for (int iter = 0; iter <= set.max_iterations; ++iter) {
    sol.iterations = iter;
    // Residuals of the embedding.
    Vector rx = -(A.transpose() * y + G.transpose() * z + c * tau);
    Vector ry = A * x - b * tau;
    Vector rz = s + G * x - h * tau;
    double cx = c.dot(x), by = b.dot(y), hz = h.dot(z);
    double rt = kappa + cx + by + hz;

    double pres = std::max(ry.norm() / tau / nb, (G * x + s - h * tau).norm() / tau / nh);
    double dres = (A.transpose() * y + G.transpose() * z + c * tau).norm() / tau / nc;
    double pcost = cx / tau, dcost = -(by + hz) / tau;
    double gap = (m > 0 ? s.dot(z) : 0.0) / (tau * tau);
    double relgap = gap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.gap = gap;

    if (pres < best.pres * 10.0 && dres < best.dres * 10.0 &&
        std::max({pres, dres, relgap}) < std::max({best.pres, best.dres, best.relgap})) {
      best = {x, tau, pres, dres, relgap, gap};
    }
    if (pres < set.feastol && dres < set.feastol &&
        (gap < set.abstol || relgap < set.reltol))
      return finish(Status::optimal, x, tau);

    // Infeasibility certificates.
    if (by + hz < 0.0) {
      double pinf = (A.transpose() * y + G.transpose() * z).norm() / -(by + hz);
      if (pinf < set.feastol && kappa > tau) {
        sol.status = Status::infeasible;
        std::vector<std::pair<double, std::string>> weight;
        double total = -(by + hz);
        for (Eigen::Index i = 0; i < m; ++i)
          weight.emplace_back(std::abs(z[i] * h[i]) / total, prob.ineq_labels[static_cast<std::size_t>(i)]);
        for (Eigen::Index i = 0; i < p; ++i)
          weight.emplace_back(std::abs(y[i] * b[i]) / total, prob.eq_labels[static_cast<std::size_t>(i)]);
        std::sort(weight.begin(), weight.end(),
                  [](const auto& a, const auto& b2) { return a.first > b2.first; });
        for (const auto& [wgt, label] : weight)
          if (wgt > 1e-3 && sol.certificate.size() < 8) sol.certificate.push_back(label);
        return sol;
      }
    }
    if (cx < 0.0) {
      double dinf = std::max((A * x).norm(), (G * x + s).norm()) / -cx;
      if (dinf < set.feastol && kappa > tau) {
        sol.status = Status::unbounded;
        return sol;
      }
    }
    if (iter == set.max_iterations) break;

    const double mu = ((m > 0 ? s.dot(z) : 0.0) + tau * kappa) / degree;
    Scaling W(cones, s, z);
    Vector lambda = W.apply(z);
    assemble(&W);
    factor();

    rhs << -c, b, h;
    Vector u1 = kkt_solve(rhs);
    Vector x1 = u1.head(n), y1 = u1.segment(n, p), z1 = u1.tail(m);
    const double denom = c.dot(x1) + b.dot(y1) + h.dot(z1) - kappa / tau;

    // Search direction for complementarity target (ds, dk) and residual
    // reduction factor `keep` (= 1 - sigma).
    auto direction = [&](const Vector& ds, double dk, double keep, Vector& dx, Vector& dy,
                         Vector& dz, Vector& dsl, double& dtau, double& dkap) {
      Vector wds = W.apply(cones.divide(lambda, ds));  // W^T (lambda \ ds)
      Vector r(N);
      r << keep * rx, -keep * ry, -keep * rz + wds;
      Vector u2 = kkt_solve(r);
      Vector x2 = u2.head(n), y2 = u2.segment(n, p), z2 = u2.tail(m);
      dtau = (-keep * rt + dk / tau - (c.dot(x2) + b.dot(y2) + h.dot(z2))) / denom;
      dx = x2 + dtau * x1;
      dy = y2 + dtau * y1;
      dz = z2 + dtau * z1;
      dsl = -wds - W.square(dz);
      dkap = -(dk + kappa * dtau) / tau;
    };
    auto step_length = [&](const Vector& dsl, const Vector& dz, double dtau, double dkap) {
      double a = kInf;
      if (m > 0) a = std::min(cones.max_step(s, dsl), cones.max_step(z, dz));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkap < 0.0) a = std::min(a, -kappa / dkap);
      return a;
    };

    Vector dx, dy, dz, dsl;
    double dtau = 0.0, dkap = 0.0;
    // Predictor.
    Vector ds_aff = cones.product(lambda, lambda);
    direction(ds_aff, kappa * tau, 1.0, dx, dy, dz, dsl, dtau, dkap);
    double a_aff = std::min(1.0, step_length(dsl, dz, dtau, dkap));
    double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 1e-6, 1.0);
    // Corrector with Mehrotra's second-order term.
    Vector corr = cones.product(W.apply_inverse(dsl), W.apply(dz));
    Vector ds_cc = ds_aff + corr - sigma * mu * e;
    double dk_cc = kappa * tau + dkap * dtau - sigma * mu;
    direction(ds_cc, dk_cc, 1.0 - sigma, dx, dy, dz, dsl, dtau, dkap);
    double alpha = std::min(1.0, set.step_fraction * step_length(dsl, dz, dtau, dkap));
    if (!(alpha > 1e-12)) break;

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * dsl;
    tau += alpha * dtau;
    kappa += alpha * dkap;
    if (!(tau > 0.0) || !std::isfinite(tau) || !x.allFinite()) break;
  }

  if (best.pres < set.feastol_inaccurate && best.dres < set.feastol_inaccurate &&
      best.relgap < set.reltol_inaccurate) {
    sol.reduced_accuracy = true;
    return finish(Status::optimal, best.x, best.tau);
  }
  sol.status = Status::failed;
  return sol;
}

/// Incremental model builder producing a ConeProblem.
class Model {
public:
  Var add_var(double lb = -kInf, double ub = kInf, std::string name = {}) {
    Var v{static_cast<int>(lower_.size())};
    lower_.push_back(lb);
    upper_.push_back(ub);
    names_.push_back(name.empty() ? fmt::format("x{}", v.index) : std::move(name));
    return v;
  }

  int num_vars() const noexcept { return static_cast<int>(lower_.size()); }

  /// expr <= rhs
  void add_le(const LinExpr& expr, double rhs, std::string label) {
    linear_.push_back({expr, rhs - expr.constant(), std::move(label)});
  }
  /// expr >= rhs
  void add_ge(const LinExpr& expr, double rhs, std::string label) {
    add_le(expr * -1.0, -rhs, std::move(label));
  }
  /// expr == rhs
  void add_eq(const LinExpr& expr, double rhs, std::string label) {
    equal_.push_back({expr, rhs - expr.constant(), std::move(label)});
  }
  /// || parts ||_2 <= bound
  void add_soc(const LinExpr& bound, std::vector<LinExpr> parts, std::string label) {
    soc_.push_back({bound, std::move(parts), std::move(label)});
  }

  void minimize(LinExpr objective) { objective_ = std::move(objective); }

  ConeProblem standard_form() const {
    const int n = num_vars();
    ConeProblem p;
    p.c = Vector::Zero(n);
    for (auto [i, a] : objective_.terms()) p.c[i] += a;

    // Variables with equal bounds become equality rows: a pair of opposing
    // inequalities would leave the cone without a strictly interior point.
    std::vector<int> fixed;
    std::vector<std::pair<int, double>> bound_rows;  // (var, +1 upper / -1 lower)
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (std::isfinite(lower_[k]) && lower_[k] == upper_[k]) {
        fixed.push_back(i);
        continue;
      }
      if (std::isfinite(lower_[k])) bound_rows.emplace_back(i, -1.0);
      if (std::isfinite(upper_[k])) bound_rows.emplace_back(i, 1.0);
    }
    const auto eq_rows = static_cast<Eigen::Index>(equal_.size() + fixed.size());
    p.A = Matrix::Zero(eq_rows, n);
    p.b.resize(eq_rows);
    for (std::size_t r = 0; r < equal_.size(); ++r) {
      for (auto [i, a] : equal_[r].expr.terms()) p.A(static_cast<Eigen::Index>(r), i) += a;
      p.b[static_cast<Eigen::Index>(r)] = equal_[r].rhs;
      p.eq_labels.push_back(equal_[r].label);
    }
    for (std::size_t f = 0; f < fixed.size(); ++f) {
      const auto r = static_cast<Eigen::Index>(equal_.size() + f);
      const auto k = static_cast<std::size_t>(fixed[f]);
      p.A(r, fixed[f]) = 1.0;
      p.b[r] = lower_[k];
      p.eq_labels.push_back(names_[k] + " fixed");
    }

    int rows = static_cast<int>(linear_.size() + bound_rows.size());
    for (const auto& q : soc_) rows += 1 + static_cast<int>(q.parts.size());
    p.G = Matrix::Zero(rows, n);
    p.h = Vector::Zero(rows);
    int r = 0;
    for (const auto& row : linear_) {
      for (auto [i, a] : row.expr.terms()) p.G(r, i) += a;
      p.h[r++] = row.rhs;
      p.ineq_labels.push_back(row.label);
    }
    for (auto [i, sign] : bound_rows) {
      auto k = static_cast<std::size_t>(i);
      p.G(r, i) = sign;
      p.h[r++] = sign > 0 ? upper_[k] : -lower_[k];
      p.ineq_labels.push_back(names_[k] + (sign > 0 ? " upper bound" : " lower bound"));
    }
    p.linear = r;
    for (const auto& q : soc_) {
      auto put = [&](const LinExpr& e) {
        for (auto [i, a] : e.terms()) p.G(r, i) -= a;
        p.h[r++] = e.constant();
        p.ineq_labels.push_back(q.label);
      };
      put(q.bound);
      for (const auto& part : q.parts) put(part);
      p.soc.push_back(1 + static_cast<int>(q.parts.size()));
    }
    return p;
  }

  Solution solve(const Settings& set = {}) const {
    Solution sol = conic::solve(standard_form(), set);
    if (sol.status == Status::optimal) sol.objective += objective_.constant();
    return sol;
  }

private:
  struct Row {
    LinExpr expr;
    double rhs;
    std::string label;
  };
  struct Soc {
    LinExpr bound;
    std::vector<LinExpr> parts;
    std::string label;
  };
  std::vector<double> lower_, upper_;
  std::vector<std::string> names_;
  std::vector<Row> linear_;
  std::vector<Row> equal_;
  std::vector<Soc> soc_;
  LinExpr objective_;
};

}  // namespace fbmc::conic

#endif  // FBMC_CONIC_HPP
