#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <queue>
#include <random>
#include <set>

#include "swinemap/error.hpp"
#include "swinemap/filters.hpp"
#include "swinemap/geometry.hpp"
#include "oracles.hpp"

using namespace swinemap;
using namespace swinemap::testing;

namespace {

void check_partition(const std::vector<Candidate>& in, const FilterOutcome& out) {
  std::multiset<std::int64_t> all;
  for (const auto& c : out.kept) all.insert(c.id);
  for (const auto& r : out.removed) all.insert(r.id);
  std::multiset<std::int64_t> want;
  for (const auto& c : in) want.insert(c.id);
  CHECK(all == want);
}

}  // namespace

TEST_CASE("identical squares collapse to one") {
  std::vector<Candidate> c{{5, rect_ring(0, 0, 30, 30)}, {2, rect_ring(0, 0, 30, 30)}};
  const auto out = dedup_overlaps(c);
  REQUIRE(out.kept.size() == 1);
  CHECK(out.kept[0].id == 2);
  REQUIRE(out.removed.size() == 1);
  CHECK(out.removed[0].reason == "overlaps 2");
  CHECK(out.removed[0].stage == "dedup");
}

TEST_CASE("overlap chain keeps one survivor") {
  std::vector<Candidate> c{{1, rect_ring(0, 0, 30, 30)}, {2, rect_ring(20, 0, 40, 30)}, {3, rect_ring(50, 0, 30, 30)}};
  CHECK(!interiors_overlap(c[0].ring, c[2].ring));
  const auto out = dedup_overlaps(c);
  REQUIRE(out.kept.size() == 1);
  CHECK(out.kept[0].id == 2);
}

TEST_CASE("shared edge is not overlap") {
  std::vector<Candidate> c{{1, rect_ring(0, 0, 30, 30)}, {2, rect_ring(30, 0, 30, 30)}, {3, rect_ring(30, 30, 5, 5)}};
  CHECK(dedup_overlaps(c).kept.size() == 3);
}

TEST_CASE("containment counts as overlap") {
  std::vector<Candidate> c{{1, rect_ring(10, 10, 5, 5)}, {2, rect_ring(0, 0, 40, 40)}};
  const auto out = dedup_overlaps(c);
  REQUIRE(out.kept.size() == 1);
  CHECK(out.kept[0].id == 2);
}

TEST_CASE("dedup matches brute-force components on random sets") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    const auto cands = random_candidates(rng, 10 + trial % 60, 400 + 10 * trial);
    const auto out = dedup_overlaps(cands);
    check_partition(cands, out);
    CHECK(ids_of(out.kept) == dedup_oracle(cands));
    for (std::size_t i = 0; i < out.kept.size(); ++i)
      for (std::size_t j = i + 1; j < out.kept.size(); ++j) CHECK(!interiors_overlap(out.kept[i].ring, out.kept[j].ring));
    const auto again = dedup_overlaps(out.kept);
    CHECK(again.removed.empty());
  }
}

TEST_CASE("size filter bounds are inclusive") {
  std::vector<Candidate> c{{1, rect_ring(0, 0, 20, 20)},    // 400
                           {2, rect_ring(0, 0, 20, 25)},    // 500
                           {3, rect_ring(0, 0, 50, 100)},   // 5000
                           {4, rect_ring(0, 0, 50, 100.02)}};
  const auto out = size_filter(c, 500, 5000);
  CHECK(ids_of(out.kept) == std::set<std::int64_t>{2, 3});
  REQUIRE(out.removed.size() == 2);
  CHECK(out.removed[0].reason == "area 400 below 500");
  CHECK(out.removed[1].reason.find("above 5000") != std::string::npos);
  CHECK_THROWS_AS(size_filter(c, 10, 5), Error);
  try {
    size_filter(c, 10, 5);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidBounds);
  }
}

TEST_CASE("size filter equals predicate scan") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cands = random_candidates(rng, 80);
    const double lo = 200 + trial * 5, hi = lo + 2500;
    const auto out = size_filter(cands, lo, hi);
    check_partition(cands, out);
    std::set<std::int64_t> want;
    for (const auto& c : cands) {
      // Shoelace with the vertices directly, independent of the library area.
      const auto v = c.ring.vertices();
      double a = 0;
      for (std::size_t i = 0; i < v.size(); ++i) a += v[i].x * v[(i + 1) % v.size()].y - v[(i + 1) % v.size()].x * v[i].y;
      a = std::abs(a) / 2;
      // Rounding in the two area routes can differ right at a bound.
      if (std::abs(a - lo) < 1e-6 || std::abs(a - hi) < 1e-6) {
        if (polygon_area(c.ring) >= lo && polygon_area(c.ring) <= hi) want.insert(c.id);
        continue;
      }
      if (a >= lo && a <= hi) want.insert(c.id);
    }
    CHECK(ids_of(out.kept) == want);
    CHECK(size_filter(out.kept, lo, hi).removed.empty());
  }
}

TEST_CASE("quantile bounds") {
  std::vector<double> a;
  for (int i = 0; i <= 100; ++i) a.push_back(i * 10.0);
  const auto [lo, hi] = quantile_bounds(a, 0.1, 0.9);
  CHECK(lo == doctest::Approx(100));
  CHECK(hi == doctest::Approx(900));
  CHECK_THROWS_AS(quantile_bounds(a, 0.9, 0.1), Error);
}

TEST_CASE("tag rules from spec examples") {
  const auto rules = FilterRules::defaults();
  const Candidate c{1, rect_ring(0, 0, 40, 20)};
  std::vector<Candidate> cs{c};
  SUBCASE("warehouse removes") {
    std::vector<TaggedFootprint> b{{rect_ring(10, 5, 10, 10), "warehouse"}};
    const auto out = tag_filter(cs, b, {}, rules);
    REQUIRE(out.removed.size() == 1);
    CHECK(out.removed[0].reason == "building:warehouse");
  }
  SUBCASE("retain beats exclude") {
    std::vector<TaggedFootprint> b{{rect_ring(10, 5, 10, 10), "industrial"}, {rect_ring(30, 5, 5, 5), "sty"}};
    CHECK(tag_filter(cs, b, {}, rules).kept.size() == 1);
  }
  SUBCASE("multi-valued tag with a retained value") {
    std::vector<TaggedFootprint> b{{rect_ring(10, 5, 10, 10), "Industrial; Barn"}};
    CHECK(tag_filter(cs, b, {}, rules).kept.size() == 1);
  }
  SUBCASE("link road removes") {
    std::vector<TaggedRoad> r{{{{-10, 10}, {50, 10}}, "motorway_link"}};
    const auto out = tag_filter(cs, {}, r, rules);
    REQUIRE(out.removed.size() == 1);
    CHECK(out.removed[0].reason == "road:motorway_link");
  }
  SUBCASE("road touching a corner removes") {
    std::vector<TaggedRoad> r{{{{40, 20}, {60, 40}}, "trunk"}};
    CHECK(tag_filter(cs, {}, r, rules).removed.size() == 1);
  }
  SUBCASE("minor road keeps") {
    std::vector<TaggedRoad> r{{{{-10, 10}, {50, 10}}, "residential"}};
    CHECK(tag_filter(cs, {}, r, rules).kept.size() == 1);
  }
  SUBCASE("road removes despite retained building") {
    std::vector<TaggedFootprint> b{{rect_ring(10, 5, 10, 10), "barn"}};
    std::vector<TaggedRoad> r{{{{-10, 10}, {50, 10}}, "primary"}};
    CHECK(tag_filter(cs, b, r, rules).removed.size() == 1);
  }
  SUBCASE("polygon inside a building footprint") {
    std::vector<TaggedFootprint> b{{rect_ring(-10, -10, 100, 100), "church"}};
    CHECK(tag_filter(cs, b, {}, rules).removed.size() == 1);
  }
}

TEST_CASE("tag filter equals brute-force scan") {
  std::mt19937_64 rng(23);
  const auto rules = FilterRules::defaults();
  for (int trial = 0; trial < 60; ++trial) {
    const auto cands = random_candidates(rng, 40);
    const auto b = random_buildings(rng, 80);
    const auto r = random_roads(rng, 6);
    const auto out = tag_filter(cands, b, r, rules);
    check_partition(cands, out);
    CHECK(ids_of(out.kept) == tag_oracle(cands, b, r, rules));
    CHECK(tag_filter(out.kept, b, r, rules).removed.empty());
  }
}

TEST_CASE("rules parsing") {
  const auto r = parse_rules("# comment\nexclude_building_tags = School, church\nretain_building_tags = sty\n"
                             "remove_road_tags = motorway\n");
  CHECK(r.exclude_building_tags == std::set<std::string>{"church", "school"});
  CHECK(parse_rules(format_rules(r)).exclude_building_tags == r.exclude_building_tags);
  CHECK_THROWS_AS(parse_rules("exclude_building_tags = sty\nretain_building_tags = sty\n"), Error);
  CHECK_THROWS_AS(parse_rules("nonsense line\n"), Error);
  CHECK_THROWS_AS(parse_rules("other_key = a\n"), Error);
  const auto file = load_rules(std::filesystem::path(SWINEMAP_DATA_DIR) / "filter_rules.txt");
  CHECK(file.remove_road_tags == FilterRules::defaults().remove_road_tags);
  CHECK(file.retain_building_tags == FilterRules::defaults().retain_building_tags);
}

TEST_CASE("removal report") {
  std::vector<Removal> r{{3, "tag", "building:school"}, {4, "size", "area 1, x"}};
  CHECK(removal_report_csv(r) == "id,stage,reason\n3,tag,building:school\n4,size,\"area 1, x\"\n");
}
