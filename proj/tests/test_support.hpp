#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "swinemap/filters.hpp"
#include "swinemap/geometry.hpp"

namespace swinemap::testing {

inline Ring rect_ring(double x0, double y0, double w, double h) {
  return Ring({{x0, y0}, {x0 + w, y0}, {x0 + w, y0 + h}, {x0, y0 + h}});
}

inline Ring oriented_rect(Point c, double length, double width, double angle) {
  const Point u{std::cos(angle), std::sin(angle)};
  const Point n{-u.y, u.x};
  const Point hu = u * (length / 2), hn = n * (width / 2);
  return Ring({c - hu - hn, c + hu - hn, c + hu + hn, c - hu + hn});
}

/// Star-shaped polygon around `c`: sorted random angles, random radii.
inline Ring random_star(std::mt19937_64& rng, int n, Point c = {}, double r_lo = 5, double r_hi = 20) {
  std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> rad(r_lo, r_hi);
  std::vector<double> a(n);
  for (auto& v : a) v = ang(rng);
  std::sort(a.begin(), a.end());
  std::vector<Point> pts;
  for (double t : a) {
    const double r = rad(rng);
    pts.push_back({c.x + r * std::cos(t), c.y + r * std::sin(t)});
  }
  return Ring(pts);
}

/// Convex polygon: sorted random angles on a random rotated ellipse.
inline Ring random_convex(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> axis(3.0, 60.0);
  std::uniform_real_distribution<double> off(-1000.0, 1000.0);
  const double a = axis(rng), b = axis(rng), rot = ang(rng);
  const Point c{off(rng), off(rng)};
  std::vector<double> t(n);
  for (auto& v : t) v = ang(rng);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  std::vector<Point> pts;
  for (double s : t) {
    const double x = a * std::cos(s), y = b * std::sin(s);
    pts.push_back({c.x + x * std::cos(rot) - y * std::sin(rot), c.y + x * std::sin(rot) + y * std::cos(rot)});
  }
  return Ring(pts);
}

/// Axis-aligned bounding-box area of `pts` after rotating by -theta.
inline double rotated_bbox_area(const std::vector<Point>& pts, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& p : pts) {
    const double x = c * p.x + s * p.y, y = -s * p.x + c * p.y;
    x0 = std::min(x0, x); x1 = std::max(x1, x);
    y0 = std::min(y0, y); y1 = std::max(y1, y);
  }
  return (x1 - x0) * (y1 - y0);
}

/// Rotated rectangles scattered over a square, dense enough to overlap often.
inline std::vector<Candidate> random_candidates(std::mt19937_64& rng, int n, double extent = 1500.0) {
  std::uniform_real_distribution<double> pos(0, extent), side(8, 90), ang(0, std::numbers::pi);
  std::bernoulli_distribution axis(0.5);
  std::vector<Candidate> out;
  for (int i = 0; i < n; ++i) {
    const Point c{std::round(pos(rng)), std::round(pos(rng))};
    const double l = std::round(side(rng)), w = std::round(side(rng));
    out.push_back({i * 3 + 7, axis(rng) ? rect_ring(c.x, c.y, l, w) : oriented_rect(c, l, w, ang(rng))});
  }
  return out;
}

inline std::vector<TaggedFootprint> random_buildings(std::mt19937_64& rng, int n, double extent = 1500.0) {
  static const char* tags[] = {"school", "church", "warehouse", "industrial", "yes", "farm", "sty",
                               "house", "Barn", "yes;industrial", "commercial", "farm_auxiliary"};
  std::uniform_real_distribution<double> pos(0, extent), side(5, 60);
  std::uniform_int_distribution<int> pick(0, 11);
  std::vector<TaggedFootprint> out;
  for (int i = 0; i < n; ++i) out.push_back({rect_ring(pos(rng), pos(rng), side(rng), side(rng)), tags[pick(rng)]});
  return out;
}

inline std::vector<TaggedRoad> random_roads(std::mt19937_64& rng, int n, double extent = 1500.0) {
  static const char* tags[] = {"motorway", "primary_link", "service", "residential", "trunk", "Secondary"};
  std::uniform_real_distribution<double> pos(0, extent), step(-300, 300);
  std::uniform_int_distribution<int> pick(0, 5), len(2, 5);
  std::vector<TaggedRoad> out;
  for (int i = 0; i < n; ++i) {
    TaggedRoad r{{{pos(rng), pos(rng)}}, tags[pick(rng)]};
    const int k = len(rng);
    for (int j = 1; j < k; ++j) r.line.push_back({r.line.back().x + step(rng), r.line.back().y + step(rng)});
    out.push_back(std::move(r));
  }
  return out;
}

/// Area of the intersection of two convex CCW polygons (Sutherland-Hodgman).
inline double convex_intersection_area(const std::vector<Point>& subject, const std::vector<Point>& clip) {
  std::vector<Point> out = subject;
  for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    const Point a = clip[i], b = clip[(i + 1) % clip.size()];
    auto side = [&](Point p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); };
    std::vector<Point> in;
    in.swap(out);
    for (std::size_t j = 0; j < in.size(); ++j) {
      const Point p = in[j], q = in[(j + 1) % in.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const double t = sp / (sp - sq);
        out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
      }
    }
  }
  double a = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Point p = out[i], q = out[(i + 1) % out.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2;
}

inline std::vector<Point> ccw(const Ring& r) {
  std::vector<Point> v = r.vertices();
  double a = 0;
  for (std::size_t i = 0; i < v.size(); ++i) a += v[i].x * v[(i + 1) % v.size()].y - v[(i + 1) % v.size()].x * v[i].y;
  if (a < 0) std::reverse(v.begin(), v.end());
  return v;
}

/// Separating-axis test for closed convex point sets (a segment is a 2-gon).
inline bool convex_sets_touch(const std::vector<Point>& a, const std::vector<Point>& b) {
  auto separated_on = [&](const std::vector<Point>& poly) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Point e = poly[(i + 1) % poly.size()] - poly[i];
      const Point n{-e.y, e.x};
      if (n.x == 0 && n.y == 0) continue;
      double a0 = 1e300, a1 = -1e300, b0 = 1e300, b1 = -1e300;
      for (auto p : a) { const double d = p.x * n.x + p.y * n.y; a0 = std::min(a0, d); a1 = std::max(a1, d); }
      for (auto p : b) { const double d = p.x * n.x + p.y * n.y; b0 = std::min(b0, d); b1 = std::max(b1, d); }
      const double scale = std::hypot(n.x, n.y) * 1e-9;
      if (a1 < b0 - scale || b1 < a0 - scale) return true;
    }
    return false;
  };
  return !separated_on(a) && !separated_on(b);
}

}  // namespace swinemap::testing
