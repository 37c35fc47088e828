#include <cmath>
#include <random>

#include "doctest.h"
#include "swinemap/error.hpp"
#include "swinemap/features.hpp"
#include "test_support.hpp"

using namespace swinemap;
using swinemap::testing::rect_ring;

namespace {

const std::vector<std::pair<int, std::string>> kLegend{
    {11, "Open Water"}, {21, "Developed, Open Space"}, {41, "Deciduous Forest"}, {81, "Pasture/Hay"}, {82, "Cultivated Crops"}};

LandCover uniform_lc(float code, std::size_t n = 400, double px = 30.0) {
  Raster r(n, n, GeoTransform{{0, n * px}, px}, code);
  r.kind = ValueKind::Category;
  return LandCover(r, kLegend);
}

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

TEST_CASE("legend parsing and validation") {
  auto leg = parse_legend("code,name\n82,Cultivated Crops\n# comment\n11, Open Water\n");
  REQUIRE(leg.size() == 2);
  CHECK(leg[1] == std::pair<int, std::string>{11, "Open Water"});
  Raster r(2, 1, GeoTransform{{0, 0}, 30}, 82.0f);
  r.values[1] = 55.0f;
  CHECK(code_of([&] { LandCover(r, leg); }) == ErrorCode::FormatError);
  r.values[1] = kNoData;
  LandCover ok(r, leg);
  CHECK(ok.class_names()[0] == "Open Water");
}

TEST_CASE("landcover_proportions") {
  auto lc = uniform_lc(82);
  auto p = landcover_proportions({6000, 6000}, 500, lc);
  CHECK(p[4] == 1.0);
  CHECK(landcover_proportions({6000, 6000}, 1000, lc) == p);

  SUBCASE("half plane") {
    Raster r(400, 400, GeoTransform{{0, 400.0}, 1.0});
    for (std::size_t row = 0; row < 400; ++row)
      for (std::size_t col = 0; col < 400; ++col) r.at(col, row) = col < 200 ? 41.0f : 82.0f;
    LandCover hp(r, kLegend);
    auto q = landcover_proportions({200.0, 200.0}, 100.0, hp);
    const double tol = 2.0 / std::sqrt(3.14159 * 100 * 100);
    CHECK(std::abs(q[2] - 0.5) <= tol);
    CHECK(std::abs(q[4] - 0.5) <= tol);
    CHECK(q[2] + q[4] == doctest::Approx(1.0));
  }

  SUBCASE("random raster matches naive enumeration") {
    std::mt19937_64 rng(2);
    Raster r(120, 90, GeoTransform{{1000.0, 5000.0}, 30.0});
    std::uniform_int_distribution<int> pick(0, 5);
    for (auto& v : r.values) {
      const int k = pick(rng);
      v = k == 5 ? kNoData : static_cast<float>(kLegend[k].first);
    }
    LandCover rl(r, kLegend);
    std::uniform_real_distribution<double> ux(1000, 1000 + 3600), uy(5000 - 2700, 5000);
    std::uniform_real_distribution<double> ur(40, 900);
    for (int k = 0; k < 100; ++k) {
      const Point c{ux(rng), uy(rng)};
      const double rad = ur(rng);
      std::vector<double> cnt(5, 0);
      double total = 0, nod = 0;
      // Enumerate a generous window including off-raster pixels.
      for (long row = -40; row < 130; ++row)
        for (long col = -40; col < 160; ++col) {
          const double x = 1000 + (col + 0.5) * 30, y = 5000 - (row + 0.5) * 30;
          if ((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) > rad * rad) continue;
          total += 1;
          if (row < 0 || col < 0 || row >= 90 || col >= 120) { nod += 1; continue; }
          const float v = r.at(col, row);
          if (std::isnan(v)) { nod += 1; continue; }
          for (int i = 0; i < 5; ++i)
            if (kLegend[i].first == static_cast<int>(v)) cnt[i] += 1;
        }
      if (total == 0 || nod > 0.5 * total || total == nod) {
        CHECK(code_of([&] { landcover_proportions(c, rad, rl); }) == ErrorCode::OutOfCoverage);
        continue;
      }
      auto got = landcover_proportions(c, rad, rl);
      double sum = 0;
      for (int i = 0; i < 5; ++i) {
        CHECK(got[i] == doctest::Approx(cnt[i] / (total - nod)).epsilon(1e-12));
        sum += got[i];
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }

  CHECK(code_of([&] { landcover_proportions({-1e6, -1e6}, 500, lc); }) == ErrorCode::OutOfCoverage);
  CHECK(code_of([&] { landcover_proportions({6000, 6000}, 0, lc); }) == ErrorCode::InvalidInput);
}

TEST_CASE("barn_features") {
  auto lc = uniform_lc(82);
  RoadNetwork roads(std::vector<Segment>{{{5000, 0}, {5000, 12000}}});
  auto ring = rect_ring(5980, 5980, 40, 40);
  auto f = barn_features(ring, roads, lc, kDefaultBufferRadii);
  CHECK(f.area_m2 == doctest::Approx(1600));
  CHECK(f.aspect_ratio == doctest::Approx(1.0));
  CHECK(f.road_distance_m == doctest::Approx(1000.0));
  REQUIRE(f.lc.size() == 15);
  for (int r = 0; r < 3; ++r) CHECK(f.lc[r * 5 + 4] == 1.0);

  auto cols = barn_columns(lc, kDefaultBufferRadii);
  REQUIRE(cols.size() == to_row(f).size());
  CHECK(cols[4] == "road_distance_m");
  CHECK(cols[5] == "lc_open_water_500");
  CHECK(cols[6] == "lc_developed_open_space_500");
  CHECK(cols.back() == "lc_cultivated_crops_5000");

  SUBCASE("geometric fields depend only on the ring") {
    auto rotated = ring.rotated(0.4, {6000, 6000});
    RoadNetwork far(std::vector<Segment>{{{0, 0}, {1, 1}}});
    auto g = barn_features(rotated, far, uniform_lc(41), kDefaultBufferRadii);
    CHECK(g.area_m2 == doctest::Approx(f.area_m2));
    CHECK(g.length_m == doctest::Approx(f.length_m));
    CHECK(g.width_m == doctest::Approx(f.width_m));
  }

  SUBCASE("hand-assembled oracle vector") {
    auto r2 = rect_ring(3000, 3000, 20, 80);
    auto v = to_row(barn_features(r2, roads, lc, std::vector<double>{500}));
    const std::vector<double> want{1600, 80, 20, 4, 1990, 0, 0, 0, 0, 1};
    REQUIRE(v.size() == want.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == doctest::Approx(want[i]));
  }
}

TEST_CASE("farm_features") {
  BarnFeatures a{800, 40, 20, 2, 100, {}}, b{1200, 60, 20, 3, 50, {}};
  auto one = farm_features(std::vector{a});
  CHECK(one.mean_area_m2 == 800);
  CHECK(one.std_area_m2 == 0);
  CHECK(one.std_aspect == 0);
  CHECK(one.n_barns == 1);
  auto two = farm_features(std::vector{a, b});
  CHECK(two.mean_area_m2 == 1000);
  CHECK(two.std_area_m2 == 200);
  CHECK(two.total_area_m2 == 2000);
  CHECK(code_of([] { farm_features(std::vector<BarnFeatures>{}); }) == ErrorCode::EmptyFarm);
  CHECK(farm_columns().size() == to_row(two).size());

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(100, 3000);
  std::vector<BarnFeatures> bs;
  for (int i = 0; i < 9; ++i) {
    const double w = u(rng) / 50, l = w * (1 + u(rng) / 1000);
    bs.push_back({w * l, l, w, l / w, u(rng), {}});
  }
  auto f = farm_features(bs);
  double m = 0;
  for (auto& x : bs) m += x.length_m;
  m /= 9;
  double v = 0;
  for (auto& x : bs) v += (x.length_m - m) * (x.length_m - m);
  CHECK(f.mean_length_m == doctest::Approx(m));
  CHECK(f.std_length_m == doctest::Approx(std::sqrt(v / 9)));
  std::reverse(bs.begin(), bs.end());
  auto g = farm_features(bs);
  CHECK(g.mean_length_m == doctest::Approx(f.mean_length_m));
  CHECK(g.std_aspect == doctest::Approx(f.std_aspect));
}

TEST_CASE("feature table CSV round trip") {
  FeatureTable t;
  t.columns = {"a", "b"};
  t.add(3, {0.1, 1e-300});
  t.add(7, {-2.5, 123456789.125});
  CHECK(code_of([&] { t.add(9, {1}); }) == ErrorCode::SchemaMismatch);
  auto back = parse_feature_csv(to_csv(t));
  CHECK(back.columns == t.columns);
  CHECK(back.ids == t.ids);
  CHECK(back.rows == t.rows);
  CHECK(schema_hash(t.columns) != schema_hash(std::vector<std::string>{"a", "c"}));
  CHECK(schema_hash(std::vector<std::string>{"ab", "c"}) != schema_hash(std::vector<std::string>{"a", "bc"}));
}
