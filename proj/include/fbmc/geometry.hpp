#ifndef FBMC_GEOMETRY_HPP
#define FBMC_GEOMETRY_HPP

#include <cmath>
#include <vector>

namespace fbmc::geometry {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// a_x * x + a_y * y <= b
struct Halfplane {
  double ax = 0.0;
  double ay = 0.0;
  double b = 0.0;

  double excess(const Point& p) const { return ax * p.x + ay * p.y - b; }
};

/// Counter-clockwise convex polygon.
using Polygon = std::vector<Point>;

inline Polygon box(double lo, double hi) { return {{lo, lo}, {hi, lo}, {hi, hi}, {lo, hi}}; }

/// Intersection of a convex polygon with one halfplane (Sutherland-Hodgman
/// against a single edge). The result stays convex and counter-clockwise.
inline Polygon clip(const Polygon& poly, const Halfplane& hp) {
  Polygon out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  const double norm = std::hypot(hp.ax, hp.ay);
  if (norm == 0.0) return hp.b >= 0.0 ? poly : Polygon{};
  const double tol = 1e-12 * (1.0 + std::abs(hp.b));
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % n];
    double ep = hp.excess(p), eq = hp.excess(q);
    bool pin = ep <= tol, qin = eq <= tol;
    if (pin) out.push_back(p);
    if (pin != qin) {
      double t = ep / (ep - eq);
      out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
    }
  }
  // Collapse consecutive duplicates produced by vertices on the boundary.
  Polygon clean;
  for (const auto& p : out)
    if (clean.empty() || std::hypot(p.x - clean.back().x, p.y - clean.back().y) > 1e-9)
      clean.push_back(p);
  while (clean.size() > 1 &&
         std::hypot(clean.front().x - clean.back().x, clean.front().y - clean.back().y) <= 1e-9)
    clean.pop_back();
  if (clean.size() < 3) return {};
  return clean;
}

inline Polygon intersect(Polygon poly, const std::vector<Halfplane>& planes) {
  for (const auto& hp : planes) {
    poly = clip(poly, hp);
    if (poly.empty()) break;
  }
  return poly;
}

/// True if p lies in the convex polygon up to `tol` (distance units).
inline bool contains(const Polygon& poly, const Point& p, double tol) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    double ex = b.x - a.x, ey = b.y - a.y;
    double len = std::hypot(ex, ey);
    if (len == 0.0) continue;
    double cross = (ex * (p.y - a.y) - ey * (p.x - a.x)) / len;
    if (cross < -tol) return false;
  }
  return true;
}

inline double area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

}  // namespace fbmc::geometry

#endif  // FBMC_GEOMETRY_HPP
