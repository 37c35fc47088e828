#include "swinemap/geometry.hpp"

#include <cmath>
#include <numbers>

#include "swinemap/error.hpp"

namespace swinemap {

namespace {

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool on_segment_collinear(Point p, const Segment& s) {
  return std::min(s.a.x, s.b.x) <= p.x && p.x <= std::max(s.a.x, s.b.x) &&
         std::min(s.a.y, s.b.y) <= p.y && p.y <= std::max(s.a.y, s.b.y);
}

constexpr double kBoundaryTol = 1e-9;

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

BBox bbox_of(std::span<const Point> pts) {
  BBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& p : pts) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

Ring::Ring(std::vector<Point> vertices) {
  for (const auto& p : vertices) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw Error(ErrorCode::InvalidGeometry, "non-finite ring coordinate");
  }
  vertices_.reserve(vertices.size());
  for (const auto& p : vertices) {
    if (vertices_.empty() || !(vertices_.back() == p)) vertices_.push_back(p);
  }
  while (vertices_.size() > 1 && vertices_.front() == vertices_.back()) vertices_.pop_back();
  if (vertices_.size() < 3)
    throw Error(ErrorCode::InvalidGeometry, "ring needs at least 3 distinct vertices");
}

Ring Ring::translated(Point offset) const {
  std::vector<Point> out;
  out.reserve(vertices_.size());
  for (const auto& p : vertices_) out.push_back(p + offset);
  return Ring(std::move(out));
}

Ring Ring::rotated(double radians, Point about) const {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  std::vector<Point> out;
  out.reserve(vertices_.size());
  for (const auto& p : vertices_) {
    const Point d = p - about;
    out.push_back({about.x + c * d.x - s * d.y, about.y + s * d.x + c * d.y});
  }
  return Ring(std::move(out));
}

double signed_area(const Ring& ring) {
  // Shoelace relative to the first vertex keeps large projected coordinates
  // from cancelling.
  const auto& v = ring.vertices();
  const Point o = v[0];
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) sum += cross(o, v[i], v[i + 1]);
  return 0.5 * sum;
}

double polygon_area(const Ring& ring) {
  const double a = std::abs(signed_area(ring));
  const BBox b = ring.bbox();
  const double scale = std::max(b.max_x - b.min_x, b.max_y - b.min_y);
  if (!(a > 1e-12 * scale * scale) || a == 0.0)
    throw Error(ErrorCode::DegenerateGeometry, "ring encloses zero area");
  return a;
}

Point centroid(const Ring& ring) {
  const auto& v = ring.vertices();
  const Point o = v[0];
  double a2 = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const Point p = v[i] - o;
    const Point q = v[i + 1] - o;
    const double c = p.x * q.y - q.x * p.y;
    a2 += c;
    cx += (p.x + q.x) * c;
    cy += (p.y + q.y) * c;
  }
  polygon_area(ring);  // validates
  return {o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)};
}

std::vector<Point> convex_hull(std::span<const Point> pts) {
  std::vector<Point> p(pts.begin(), pts.end());
  std::sort(p.begin(), p.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) return p;
  std::vector<Point> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

std::vector<Point> MinAreaRect::corners() const {
  const Point u{std::cos(angle), std::sin(angle)};
  const Point n{-u.y, u.x};
  const Point hu = u * (length / 2);
  const Point hn = n * (width / 2);
  return {center - hu - hn, center + hu - hn, center + hu + hn, center - hu + hn};
}

MinAreaRect min_area_rect(const Ring& ring) {
  polygon_area(ring);
  const auto hull = convex_hull(ring.vertices());
  const std::size_t h = hull.size();
  if (h < 3) throw Error(ErrorCode::DegenerateGeometry, "collinear ring");

  auto dot = [](Point a, Point b) { return a.x * b.x + a.y * b.y; };

  // Calipers: for each hull edge keep pointers to the extreme vertices along
  // the edge direction (max, min) and along its inward normal (max).
  std::size_t i_max_u = 0, i_min_u = 0, i_max_n = 0;
  double best_area = std::numeric_limits<double>::infinity();
  MinAreaRect best;
  for (std::size_t e = 0; e < h; ++e) {
    const Point a = hull[e];
    const Point d = hull[(e + 1) % h] - a;
    const double len = std::hypot(d.x, d.y);
    const Point u{d.x / len, d.y / len};
    const Point n{-u.y, u.x};
    auto pu = [&](std::size_t k) { return dot(hull[k % h] - a, u); };
    auto pn = [&](std::size_t k) { return dot(hull[k % h] - a, n); };
    if (e == 0) {
      for (std::size_t k = 1; k < h; ++k) {
        if (pu(k) > pu(i_max_u)) i_max_u = k;
        if (pu(k) < pu(i_min_u)) i_min_u = k;
        if (pn(k) > pn(i_max_n)) i_max_n = k;
      }
    } else {
      for (std::size_t step = 0; step < h && pu(i_max_u + 1) > pu(i_max_u); ++step)
        i_max_u = (i_max_u + 1) % h;
      for (std::size_t step = 0; step < h && pn(i_max_n + 1) > pn(i_max_n); ++step)
        i_max_n = (i_max_n + 1) % h;
      for (std::size_t step = 0; step < h && pu(i_min_u + 1) < pu(i_min_u); ++step)
        i_min_u = (i_min_u + 1) % h;
    }
    const double u_lo = pu(i_min_u), u_hi = pu(i_max_u);
    const double n_hi = pn(i_max_n);
    const double area = (u_hi - u_lo) * n_hi;
    if (area < best_area) {
      best_area = area;
      const double along = u_hi - u_lo;
      MinAreaRect r;
      r.center = a + u * ((u_lo + u_hi) / 2) + n * (n_hi / 2);
      const Point long_dir = along >= n_hi ? u : n;
      r.length = std::max(along, n_hi);
      r.width = std::min(along, n_hi);
      double ang = std::atan2(long_dir.y, long_dir.x);
      if (ang < 0) ang += std::numbers::pi;
      if (ang >= std::numbers::pi) ang -= std::numbers::pi;
      r.angle = ang;
      best = r;
    }
  }
  return best;
}

double point_segment_distance(Point p, const Segment& s) {
  const Point d = s.b - s.a;
  const double l2 = d.x * d.x + d.y * d.y;
  if (l2 == 0.0) return distance(p, s.a);
  double t = ((p.x - s.a.x) * d.x + (p.y - s.a.y) * d.y) / l2;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, s.a + d * t);
}

bool segments_intersect(const Segment& s, const Segment& t) {
  const int o1 = sign(cross(s.a, s.b, t.a));
  const int o2 = sign(cross(s.a, s.b, t.b));
  const int o3 = sign(cross(t.a, t.b, s.a));
  const int o4 = sign(cross(t.a, t.b, s.b));
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment_collinear(t.a, s)) return true;
  if (o2 == 0 && on_segment_collinear(t.b, s)) return true;
  if (o3 == 0 && on_segment_collinear(s.a, t)) return true;
  if (o4 == 0 && on_segment_collinear(s.b, t)) return true;
  return false;
}

bool segments_cross_properly(const Segment& s, const Segment& t) {
  const int o1 = sign(cross(s.a, s.b, t.a));
  const int o2 = sign(cross(s.a, s.b, t.b));
  const int o3 = sign(cross(t.a, t.b, s.a));
  const int o4 = sign(cross(t.a, t.b, s.b));
  return o1 * o2 < 0 && o3 * o4 < 0;
}

Location locate(Point p, const Ring& ring) {
  const auto& v = ring.vertices();
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if (point_segment_distance(p, {v[j], v[i]}) <= kBoundaryTol) return Location::Boundary;
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      const double x_cross = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside ? Location::Inside : Location::Outside;
}

namespace {

bool any_probe_inside(const Ring& probe_src, const Ring& target) {
  const auto& v = probe_src.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point a = v[i];
    const Point b = v[(i + 1) % v.size()];
    if (contains_strictly(target, a)) return true;
    if (contains_strictly(target, (a + b) * 0.5)) return true;
  }
  const Point c = centroid(probe_src);
  return contains_strictly(probe_src, c) && contains_strictly(target, c);
}

}  // namespace

bool rings_overlap(const Ring& a, const Ring& b) {
  if (!a.bbox().intersects(b.bbox())) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if (segments_cross_properly(a.edge(i), b.edge(j))) return true;
  return any_probe_inside(a, b) || any_probe_inside(b, a);
}

bool rings_intersect(const Ring& a, const Ring& b) {
  if (!a.bbox().intersects(b.bbox())) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if (segments_intersect(a.edge(i), b.edge(j))) return true;
  return locate(a[0], b) != Location::Outside || locate(b[0], a) != Location::Outside;
}

bool polyline_intersects_ring(std::span<const Point> line, const Ring& ring) {
  if (line.empty()) return false;
  const BBox rb = ring.bbox();
  if (!bbox_of(line).intersects(rb)) return false;
  for (std::size_t k = 0; k + 1 < line.size(); ++k) {
    const Segment s{line[k], line[k + 1]};
    if (!bbox_of(std::span<const Point>(&line[k], 2)).intersects(rb)) continue;
    for (std::size_t i = 0; i < ring.size(); ++i)
      if (segments_intersect(s, ring.edge(i))) return true;
  }
  return locate(line[0], ring) != Location::Outside;
}

// ---------------------------------------------------------------------------
// SpatialIndex

SpatialIndex::SpatialIndex(double cell_size) : cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw Error(ErrorCode::InvalidInput, "cell size must be positive");
}

std::int64_t SpatialIndex::cell_of(double v) const {
  return static_cast<std::int64_t>(std::floor(v / cell_size_));
}

void SpatialIndex::insert(std::int64_t id, const BBox& box) {
  boxes_[id] = box;
  const auto x0 = cell_of(box.min_x), x1 = cell_of(box.max_x);
  const auto y0 = cell_of(box.min_y), y1 = cell_of(box.max_y);
  if (max_cx_ < min_cx_) {
    min_cx_ = x0; max_cx_ = x1; min_cy_ = y0; max_cy_ = y1;
  } else {
    min_cx_ = std::min(min_cx_, x0); max_cx_ = std::max(max_cx_, x1);
    min_cy_ = std::min(min_cy_, y0); max_cy_ = std::max(max_cy_, y1);
  }
  for (auto cy = y0; cy <= y1; ++cy)
    for (auto cx = x0; cx <= x1; ++cx) cells_[{cx, cy}].push_back(id);
}

std::vector<std::int64_t> SpatialIndex::query(const BBox& window) const {
  std::vector<std::int64_t> out;
  if (boxes_.empty()) return out;
  const auto x0 = std::max(cell_of(window.min_x), min_cx_);
  const auto x1 = std::min(cell_of(window.max_x), max_cx_);
  const auto y0 = std::max(cell_of(window.min_y), min_cy_);
  const auto y1 = std::min(cell_of(window.max_y), max_cy_);
  for (auto cy = y0; cy <= y1; ++cy)
    for (auto cx = x0; cx <= x1; ++cx) {
      auto it = cells_.find({cx, cy});
      if (it != cells_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::int64_t> SpatialIndex::query_exact(const BBox& window) const {
  auto ids = query(window);
  std::erase_if(ids, [&](std::int64_t id) { return !boxes_.at(id).intersects(window); });
  return ids;
}

RoadNetwork::RoadNetwork(std::vector<Segment> segs, double cell_size) : index(cell_size) {
  // Long segments are split so each occupies a handful of cells.
  for (const auto& s : segs) {
    const double len = distance(s.a, s.b);
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / cell_size)));
    for (int k = 0; k < pieces; ++k) {
      const Point p = s.a + (s.b - s.a) * (static_cast<double>(k) / pieces);
      const Point q = k + 1 == pieces ? s.b : s.a + (s.b - s.a) * (static_cast<double>(k + 1) / pieces);
      segments.push_back({p, q});
    }
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Point pts[2] = {segments[i].a, segments[i].b};
    index.insert(static_cast<std::int64_t>(i), bbox_of(pts));
  }
}

double nearest_road_distance(Point p, const RoadNetwork& roads) {
  if (roads.empty()) throw Error(ErrorCode::NoRoads, "road set is empty");
  auto [id, d] = roads.index.nearest(
      p, [&](std::int64_t i) { return point_segment_distance(p, roads.segments[i]); });
  return d;
}

double nearest_road_distance(const Ring& ring, const RoadNetwork& roads) {
  return nearest_road_distance(centroid(ring), roads);
}

std::vector<double> pairwise_centroid_distances(std::span<const Ring> rings) {
  if (rings.size() < 2)
    throw Error(ErrorCode::InsufficientBarns, "need at least two rings for pairwise distances");
  std::vector<Point> c;
  c.reserve(rings.size());
  for (const auto& r : rings) c.push_back(centroid(r));
  std::vector<double> out;
  out.reserve(c.size() * (c.size() - 1) / 2);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) out.push_back(distance(c[i], c[j]));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace swinemap
