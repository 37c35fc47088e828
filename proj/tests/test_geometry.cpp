#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "swinemap/error.hpp"
#include "swinemap/geometry.hpp"
#include "test_support.hpp"

using namespace swinemap;
using swinemap::testing::oriented_rect;
using swinemap::testing::random_convex;
using swinemap::testing::random_star;
using swinemap::testing::rect_ring;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("ring normalization and validation") {
  Ring r({{0, 0}, {1, 0}, {1, 0}, {1, 1}, {0, 0}});
  CHECK(r.size() == 3);
  CHECK(code_of([] { Ring({{0, 0}, {1, 1}}); }) == ErrorCode::InvalidGeometry);
  CHECK(code_of([] { Ring({{0, 0}, {1, NAN}, {2, 2}}); }) == ErrorCode::InvalidGeometry);
}

TEST_CASE("polygon_area") {
  CHECK(polygon_area(rect_ring(0, 0, 1, 1)) == doctest::Approx(1.0));
  CHECK(polygon_area(rect_ring(100, 200, 20, 50)) == doctest::Approx(1000.0));
  CHECK(code_of([] { polygon_area(Ring({{0, 0}, {1, 1}, {2, 2}})); }) == ErrorCode::DegenerateGeometry);

  SUBCASE("random star 12-gon equals fan triangulation from its kernel") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 50; ++k) {
      const Point c{123.0, -45.0};
      Ring r = random_star(rng, 12, c);
      double fan = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        const Point a = r[i] - c, b = r[(i + 1) % r.size()] - c;
        fan += 0.5 * std::abs(a.x * b.y - a.y * b.x);
      }
      CHECK(polygon_area(r) == doctest::Approx(fan).epsilon(1e-12));
    }
  }

  SUBCASE("translation and rotation invariance") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 100; ++k) {
      Ring r = random_star(rng, 9);
      const double a = polygon_area(r);
      CHECK(std::abs(polygon_area(r.translated({5e5, 4e6})) - a) / a < 1e-9);
      CHECK(std::abs(polygon_area(r.rotated(0.7, {3, 4})) - a) / a < 1e-9);
    }
  }
}

TEST_CASE("centroid") {
  const Point c = centroid(rect_ring(0, 0, 1, 1));
  CHECK(c.x == doctest::Approx(0.5));
  CHECK(c.y == doctest::Approx(0.5));

  std::mt19937_64 rng(3);
  Ring r = random_star(rng, 10);
  const Point c0 = centroid(r);
  const Point c1 = centroid(r.translated({1000, -250}));
  CHECK(c1.x == doctest::Approx(c0.x + 1000));
  CHECK(c1.y == doctest::Approx(c0.y - 250));

  SUBCASE("L shape matches a dense rasterized center of mass") {
    Ring l({{0, 0}, {30, 0}, {30, 10}, {10, 10}, {10, 40}, {0, 40}});
    const double step = 0.01;
    double sx = 0, sy = 0, n = 0;
    for (double y = step / 2; y < 40; y += step)
      for (double x = step / 2; x < 30; x += step)
        if (contains_strictly(l, {x, y})) { sx += x; sy += y; n += 1; }
    const Point lc = centroid(l);
    CHECK(std::abs(lc.x - sx / n) < 0.01);
    CHECK(std::abs(lc.y - sy / n) < 0.01);
  }
}

TEST_CASE("min_area_rect") {
  const auto m = min_area_rect(rect_ring(0, 0, 20, 50));
  CHECK(m.length == doctest::Approx(50));
  CHECK(m.width == doctest::Approx(20));
  CHECK(m.aspect_ratio() == doctest::Approx(2.5));
  CHECK(m.angle == doctest::Approx(std::numbers::pi / 2));

  const auto rot = min_area_rect(rect_ring(0, 0, 20, 50).rotated(std::numbers::pi / 6));
  CHECK(rot.length == doctest::Approx(50));
  CHECK(rot.width == doctest::Approx(20));
  CHECK(rot.aspect_ratio() == doctest::Approx(2.5));
  CHECK(rot.angle == doctest::Approx(std::numbers::pi / 2 + std::numbers::pi / 6));

  SUBCASE("random convex polygons match a sweep over hull-edge angles") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 200; ++k) {
      Ring r = random_convex(rng, 5 + static_cast<int>(rng() % 20));
      const auto& v = r.vertices();
      double best = 1e300;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Point d = v[(i + 1) % v.size()] - v[i];
        best = std::min(best, swinemap::testing::rotated_bbox_area(v, std::atan2(d.y, d.x)));
      }
      const auto m2 = min_area_rect(r);
      CHECK(std::abs(m2.area() - best) <= 1e-6 * std::max(1.0, best));
    }
  }

  SUBCASE("rectangle encloses the ring and dominates its area") {
    std::mt19937_64 rng(9);
    for (int k = 0; k < 200; ++k) {
      Ring r = random_star(rng, 4 + static_cast<int>(rng() % 12), {50, 50});
      const auto m3 = min_area_rect(r);
      CHECK(m3.length >= m3.width);
      CHECK(m3.width > 0);
      CHECK(m3.aspect_ratio() >= 1.0);
      CHECK(m3.area() >= polygon_area(r) * (1 - 1e-12));
      const Point u{std::cos(m3.angle), std::sin(m3.angle)};
      for (const auto& p : r.vertices()) {
        const Point d = p - m3.center;
        CHECK(std::abs(d.x * u.x + d.y * u.y) <= m3.length / 2 + 1e-6);
        CHECK(std::abs(-d.x * u.y + d.y * u.x) <= m3.width / 2 + 1e-6);
      }
    }
  }

  SUBCASE("rectangles achieve equality") {
    auto r = oriented_rect({10, 20}, 40, 15, 0.3);
    CHECK(min_area_rect(r).area() == doctest::Approx(polygon_area(r)));
  }

  CHECK(code_of([] { min_area_rect(Ring({{0, 0}, {1, 0}, {2, 0}})); }) == ErrorCode::DegenerateGeometry);
}

TEST_CASE("nearest_road_distance") {
  RoadNetwork roads(std::vector<Segment>{{{3, -10}, {3, 10}}});
  CHECK(nearest_road_distance(rect_ring(-1, -1, 2, 2), roads) == doctest::Approx(3.0));
  RoadNetwork through(std::vector<Segment>{{{-5, 0}, {5, 0}}});
  CHECK(nearest_road_distance(rect_ring(-1, -1, 2, 2), through) == doctest::Approx(0.0));
  RoadNetwork none(std::vector<Segment>{});
  CHECK(code_of([&] { nearest_road_distance(rect_ring(0, 0, 1, 1), none); }) == ErrorCode::NoRoads);

  SUBCASE("200 random segments match an exhaustive scan") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> pos(0, 20000), len(-800, 800);
    std::vector<Segment> segs;
    for (int i = 0; i < 200; ++i) {
      const Point a{pos(rng), pos(rng)};
      segs.push_back({a, {a.x + len(rng), a.y + len(rng)}});
    }
    RoadNetwork net(segs);
    for (int q = 0; q < 300; ++q) {
      const Point p{pos(rng) * 1.2 - 2000, pos(rng) * 1.2 - 2000};
      double best = 1e300;
      for (const auto& s : segs) best = std::min(best, point_segment_distance(p, s));
      CHECK(nearest_road_distance(p, net) == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("pairwise_centroid_distances") {
  std::vector<Ring> rings{rect_ring(-1, -1, 2, 2), rect_ring(29, -1, 2, 2), rect_ring(69, -1, 2, 2)};
  auto d = pairwise_centroid_distances(rings);
  REQUIRE(d.size() == 3);
  CHECK(d[0] == doctest::Approx(30));
  CHECK(d[1] == doctest::Approx(40));
  CHECK(d[2] == doctest::Approx(70));
  CHECK(pairwise_centroid_distances(std::span(rings).first(2)).size() == 1);
  CHECK(code_of([&] { pairwise_centroid_distances(std::span(rings).first(1)); }) ==
        ErrorCode::InsufficientBarns);

  std::mt19937_64 rng(4);
  std::vector<Ring> many;
  for (int i = 0; i < 10; ++i) many.push_back(random_star(rng, 6, {double(rng() % 1000), double(rng() % 1000)}));
  std::vector<double> oracle;
  for (std::size_t i = 0; i < many.size(); ++i)
    for (std::size_t j = i + 1; j < many.size(); ++j) {
      const Point a = centroid(many[i]), b = centroid(many[j]);
      oracle.push_back(std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)));
    }
  std::sort(oracle.begin(), oracle.end());
  auto got = pairwise_centroid_distances(many);
  REQUIRE(got.size() == 45);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(oracle[i]));
}

TEST_CASE("spatial index window and nearest queries") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> pos(-5000, 5000), ext(1, 400);
  SpatialIndex idx(250);
  std::vector<BBox> boxes;
  for (int i = 0; i < 500; ++i) {
    const double x = pos(rng), y = pos(rng);
    boxes.push_back({x, y, x + ext(rng), y + ext(rng)});
    idx.insert(i, boxes.back());
  }
  for (int q = 0; q < 200; ++q) {
    const double x = pos(rng), y = pos(rng);
    const BBox w{x, y, x + ext(rng) * 3, y + ext(rng) * 3};
    const auto hits = idx.query(w);
    const auto exact = idx.query_exact(w);
    for (int i = 0; i < 500; ++i) {
      const bool truth = boxes[i].intersects(w);
      const bool in_hits = std::binary_search(hits.begin(), hits.end(), i);
      const bool in_exact = std::binary_search(exact.begin(), exact.end(), i);
      if (truth) CHECK(in_hits);
      CHECK(in_exact == truth);
    }
    const Point p{pos(rng) * 1.5, pos(rng) * 1.5};
    auto box_dist = [&](std::int64_t id) {
      const auto& b = boxes[id];
      const double dx = std::max({b.min_x - p.x, 0.0, p.x - b.max_x});
      const double dy = std::max({b.min_y - p.y, 0.0, p.y - b.max_y});
      return std::hypot(dx, dy);
    };
    std::int64_t best_id = -1;
    double best = 1e300;
    for (int i = 0; i < 500; ++i)
      if (box_dist(i) < best) { best = box_dist(i); best_id = i; }
    auto [nid, nd] = idx.nearest(p, box_dist);
    CHECK(nd == best);
    CHECK(nid == best_id);
  }
}

TEST_CASE("ring overlap and intersection predicates") {
  auto a = rect_ring(0, 0, 10, 10);
  CHECK(rings_overlap(a, rect_ring(0, 0, 10, 10)));
  CHECK_FALSE(rings_overlap(a, rect_ring(10, 0, 10, 10)));  // shared edge only
  CHECK(rings_intersect(a, rect_ring(10, 0, 10, 10)));
  CHECK(rings_overlap(a, rect_ring(5, 0, 10, 10)));
  CHECK(rings_overlap(a, rect_ring(2, 2, 3, 3)));  // containment
  CHECK(rings_overlap(rect_ring(-5, 4, 20, 2), rect_ring(4, -5, 2, 20)));  // cross
  CHECK_FALSE(rings_intersect(a, rect_ring(20, 20, 5, 5)));
  const Point line[] = {{-5, 5}, {15, 5}};
  CHECK(polyline_intersects_ring(line, a));
  const Point inner[] = {{2, 2}, {3, 3}};
  CHECK(polyline_intersects_ring(inner, a));
  const Point miss[] = {{-5, 15}, {15, 15}};
  CHECK_FALSE(polyline_intersects_ring(miss, a));
}
