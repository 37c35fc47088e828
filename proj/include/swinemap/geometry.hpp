#pragma once

// Planar geometry in projected meter coordinates. All distances are
// Euclidean; inputs are expected in a metric CRS.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace swinemap {

struct Point {
  double x = 0.0;  // easting
  double y = 0.0;  // northing

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }

double distance(Point a, Point b);

struct Segment {
  Point a;
  Point b;
};

struct BBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool intersects(const BBox& o) const {
    return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
  }
  BBox expanded(double margin) const {
    return {min_x - margin, min_y - margin, max_x + margin, max_y + margin};
  }
};

BBox bbox_of(std::span<const Point> pts);

/// Closed polygon boundary. Closure is implicit: the first vertex is never
/// repeated at the end, and no two consecutive vertices coincide.
class Ring {
 public:
  Ring() = default;

  /// Normalizes the vertex list (drops an explicit closing vertex and
  /// consecutive duplicates). Throws InvalidGeometry when fewer than three
  /// vertices remain or a coordinate is not finite.
  explicit Ring(std::vector<Point> vertices);

  const std::vector<Point>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  const Point& operator[](std::size_t i) const { return vertices_[i]; }
  Segment edge(std::size_t i) const {
    return {vertices_[i], vertices_[(i + 1) % vertices_.size()]};
  }
  BBox bbox() const { return bbox_of(vertices_); }

  Ring translated(Point offset) const;
  Ring rotated(double radians, Point about = {}) const;

  friend bool operator==(const Ring&, const Ring&) = default;

 private:
  std::vector<Point> vertices_;
};

/// Shoelace sum; positive for counter-clockwise rings.
double signed_area(const Ring& ring);

/// Absolute enclosed area in m². Throws DegenerateGeometry for zero area.
double polygon_area(const Ring& ring);

/// Area-weighted centroid. Throws DegenerateGeometry for zero area.
Point centroid(const Ring& ring);

/// Convex hull, counter-clockwise, without collinear points.
std::vector<Point> convex_hull(std::span<const Point> pts);

struct MinAreaRect {
  double length = 0.0;  // longer side
  double width = 0.0;   // shorter side
  double angle = 0.0;   // direction of the long side, radians in [0, pi)
  Point center;

  double area() const { return length * width; }
  /// Normalized to length / width, so always >= 1.
  double aspect_ratio() const { return length / width; }
  std::vector<Point> corners() const;
};

/// Minimum-area enclosing rectangle by rotating calipers over the hull.
MinAreaRect min_area_rect(const Ring& ring);

double point_segment_distance(Point p, const Segment& s);

/// True when the closed segments share at least one point.
bool segments_intersect(const Segment& s, const Segment& t);

/// True when the open segments cross at a single interior point of both.
bool segments_cross_properly(const Segment& s, const Segment& t);

enum class Location { Outside, Boundary, Inside };

Location locate(Point p, const Ring& ring);
inline bool contains_strictly(const Ring& ring, Point p) {
  return locate(p, ring) == Location::Inside;
}

/// Interior intersection. Shared boundary alone does not count. Detected by
/// proper edge crossings plus interior probing of vertices, edge midpoints
/// and centroids, which is exact for rectilinear pixel-traced rings.
bool rings_overlap(const Ring& a, const Ring& b);

/// Closed-set intersection (touching counts).
bool rings_intersect(const Ring& a, const Ring& b);

/// Polyline touches, crosses, or lies inside the ring.
bool polyline_intersects_ring(std::span<const Point> line, const Ring& ring);

/// Uniform-grid bucket index over bounding boxes. Built once, then queried
/// read-only.
class SpatialIndex {
 public:
  explicit SpatialIndex(double cell_size = 250.0);

  void insert(std::int64_t id, const BBox& box);

  /// Ids whose boxes share at least one grid cell with `window`, each
  /// reported once, ascending. A superset of the exact box hits.
  std::vector<std::int64_t> query(const BBox& window) const;

  /// Ids whose boxes intersect `window` exactly.
  std::vector<std::int64_t> query_exact(const BBox& window) const;

  /// Nearest item to `p` under `dist` (exact distance from p to item `id`).
  /// `dist` must never be smaller than the distance from p to the item's
  /// box. Returns {-1, +inf} on an empty index.
  template <typename DistFn>
  std::pair<std::int64_t, double> nearest(Point p, DistFn&& dist) const;

  double cell_size() const { return cell_size_; }
  std::size_t size() const { return boxes_.size(); }
  const BBox& box(std::int64_t id) const { return boxes_.at(id); }

 private:
  struct CellKey {
    std::int64_t cx;
    std::int64_t cy;
    friend bool operator==(const CellKey&, const CellKey&) = default;
  };
  struct CellHash {
    std::size_t operator()(const CellKey& k) const noexcept {
      return std::hash<std::int64_t>{}(k.cx * 73856093LL ^ k.cy * 19349663LL);
    }
  };

  std::int64_t cell_of(double v) const;

  double cell_size_;
  std::unordered_map<CellKey, std::vector<std::int64_t>, CellHash> cells_;
  std::unordered_map<std::int64_t, BBox> boxes_;
  std::int64_t min_cx_ = 0, max_cx_ = -1, min_cy_ = 0, max_cy_ = -1;
};

struct RoadNetwork {
  std::vector<Segment> segments;
  SpatialIndex index;

  explicit RoadNetwork(std::vector<Segment> segs, double cell_size = 250.0);
  bool empty() const { return segments.empty(); }
};

/// Distance from the ring centroid to the nearest road segment. Throws
/// NoRoads on an empty network.
double nearest_road_distance(const Ring& ring, const RoadNetwork& roads);
double nearest_road_distance(Point p, const RoadNetwork& roads);

/// All n(n-1)/2 centroid distances, ascending. Throws InsufficientBarns for
/// fewer than two rings.
std::vector<double> pairwise_centroid_distances(std::span<const Ring> rings);

// ---------------------------------------------------------------------------

template <typename DistFn>
std::pair<std::int64_t, double> SpatialIndex::nearest(Point p, DistFn&& dist) const {
  std::int64_t best_id = -1;
  double best = std::numeric_limits<double>::infinity();
  if (boxes_.empty()) return {best_id, best};

  const std::int64_t pcx = cell_of(p.x);
  const std::int64_t pcy = cell_of(p.y);
  // Chebyshev rings of cells around the query cell. Every cell on ring r+1 is
  // at least r * cell_size away from p.
  std::unordered_set<std::int64_t> seen;
  auto visit = [&](std::int64_t cx, std::int64_t cy) {
    auto it = cells_.find({cx, cy});
    if (it == cells_.end()) return;
    for (auto id : it->second) {
      if (!seen.insert(id).second) continue;
      const double d = dist(id);
      if (d < best || (d == best && id < best_id)) {
        best = d;
        best_id = id;
      }
    }
  };
  const std::int64_t r0 = std::max<std::int64_t>(
      {0, min_cx_ - pcx, pcx - max_cx_, min_cy_ - pcy, pcy - max_cy_});
  for (std::int64_t r = r0;; ++r) {
    if (best_id >= 0 && best < static_cast<double>(r - 1) * cell_size_) break;
    const std::int64_t y_lo = std::max(pcy - r, min_cy_);
    const std::int64_t y_hi = std::min(pcy + r, max_cy_);
    for (std::int64_t cy = y_lo; cy <= y_hi; ++cy) {
      if (cy == pcy - r || cy == pcy + r) {
        const std::int64_t x_lo = std::max(pcx - r, min_cx_);
        const std::int64_t x_hi = std::min(pcx + r, max_cx_);
        for (std::int64_t cx = x_lo; cx <= x_hi; ++cx) visit(cx, cy);
      } else {
        if (pcx - r >= min_cx_) visit(pcx - r, cy);
        if (r > 0 && pcx + r <= max_cx_) visit(pcx + r, cy);
      }
    }
    const bool covers_all = pcx - r <= min_cx_ && pcx + r >= max_cx_ && pcy - r <= min_cy_ &&
                            pcy + r >= max_cy_;
    if (covers_all) break;
  }
  return {best_id, best};
}

}  // namespace swinemap
