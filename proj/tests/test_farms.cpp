#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "swinemap/error.hpp"
#include "swinemap/farms.hpp"
#include "swinemap/metrics.hpp"
#include "swinemap/textio.hpp"
#include "oracles.hpp"

using namespace swinemap;
using namespace swinemap::testing;

namespace {

Candidate square_at(std::int64_t id, double cx, double cy, double side = 20) {
  return {id, rect_ring(cx - side / 2, cy - side / 2, side, side)};
}

FarmFeatures synthetic_farm(std::mt19937_64& rng, int n_barns, double median_area, double aspect) {
  std::lognormal_distribution<double> area(std::log(median_area), 0.15);
  std::vector<BarnFeatures> b;
  for (int i = 0; i < n_barns; ++i) {
    BarnFeatures f;
    f.area_m2 = area(rng);
    f.width_m = std::sqrt(f.area_m2 / aspect);
    f.length_m = f.area_m2 / f.width_m;
    f.aspect_ratio = f.length_m / f.width_m;
    b.push_back(f);
  }
  return farm_features(b);
}

struct TypeProfile {
  int barns_lo, barns_hi;
  double median_area, aspect, pigs_per_m2;
};
const std::array<TypeProfile, 4> kProfiles{{{2, 6, 1800, 4.0, 0.35},
                                            {1, 3, 900, 3.0, 1.2},
                                            {2, 8, 1100, 6.0, 0.75},
                                            {1, 1, 250, 2.0, 0.12}}};

}  // namespace

TEST_CASE("grouping examples") {
  CHECK(group_farms(std::vector<Candidate>{square_at(1, 0, 0), square_at(2, 300, 0)}).size() == 1);
  CHECK(group_farms(std::vector<Candidate>{square_at(1, 0, 0), square_at(2, 600, 0)}).size() == 2);
  const auto chain = group_farms(std::vector<Candidate>{square_at(9, 800, 0), square_at(4, 0, 0), square_at(6, 400, 0)});
  REQUIRE(chain.size() == 1);
  CHECK(chain[0].id == 4);
  CHECK(chain[0].barn_ids == std::vector<std::int64_t>{4, 6, 9});
  CHECK(chain[0].centroid.x == doctest::Approx(400));
  // Exactly the link distance merges, on and off the axis.
  CHECK(group_farms(std::vector<Candidate>{square_at(1, 0, 0), square_at(2, 500, 0)}).size() == 1);
  CHECK(group_farms(std::vector<Candidate>{square_at(1, 0, 0), square_at(2, 300, 400)}).size() == 1);
  CHECK(group_farms(std::vector<Candidate>{square_at(1, 0, 0), square_at(2, 500.001, 0)}).size() == 2);
  CHECK_THROWS_AS(group_farms(std::vector<Candidate>{}), Error);
}

TEST_CASE("grid grouping equals pairwise linking") {
  std::mt19937_64 rng(3);
  for (int scene = 0; scene < 120; ++scene) {
    std::uniform_real_distribution<double> pos(-3000, 3000);
    std::vector<Candidate> barns;
    const int n = 5 + scene % 70;
    for (int i = 0; i < n; ++i) barns.push_back(square_at(i * 5 + 1, std::round(pos(rng) / 50) * 50, std::round(pos(rng) / 50) * 50));
    const auto farms = group_farms(barns);
    CHECK(as_sets(farms) == brute_groups(barns, 500));
    std::size_t total = 0;
    for (std::size_t i = 0; i < farms.size(); ++i) {
      total += farms[i].barn_ids.size();
      if (i) CHECK(farms[i - 1].id < farms[i].id);
    }
    CHECK(total == barns.size());
  }
}

TEST_CASE("intra-barn distances") {
  const std::vector<Ring> two{rect_ring(0, 0, 10, 10), rect_ring(67, 0, 10, 10)};
  const auto s2 = intra_barn_stats(two);
  CHECK(s2.median == doctest::Approx(67));
  CHECK(s2.max == doctest::Approx(67));
  const std::vector<Ring> three{rect_ring(0, 0, 10, 10), rect_ring(30, 0, 10, 10), rect_ring(70, 0, 10, 10)};
  const auto s3 = intra_barn_stats(three);
  CHECK(s3.median == doctest::Approx(40));
  CHECK(s3.q1 == doctest::Approx(35));
  CHECK(s3.q3 == doctest::Approx(55));
  CHECK(s3.max == doctest::Approx(70));
  CHECK_THROWS_AS(intra_barn_stats(std::vector<Ring>{two[0]}), Error);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(0, 800);
  for (int t = 0; t < 30; ++t) {
    std::vector<Ring> rs;
    for (int i = 0; i < 2 + t % 9; ++i) rs.push_back(rect_ring(pos(rng), pos(rng), 12, 40));
    std::vector<double> d;
    for (std::size_t i = 0; i < rs.size(); ++i)
      for (std::size_t j = i + 1; j < rs.size(); ++j) {
        const auto a = rs[i].vertices()[0], b = rs[j].vertices()[0];
        d.push_back(std::hypot(a.x - b.x, a.y - b.y));
      }
    std::sort(d.begin(), d.end());
    const double pos_mid = 0.5 * static_cast<double>(d.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos_mid));
    const double med = d[lo] + (pos_mid - static_cast<double>(lo)) * (d[std::min(lo + 1, d.size() - 1)] - d[lo]);
    const auto s = intra_barn_stats(rs);
    CHECK(s.median == doctest::Approx(med).epsilon(1e-9));
    CHECK(s.max == doctest::Approx(d.back()).epsilon(1e-9));
  }
}

TEST_CASE("label reclassification") {
  CHECK(reclassify_label("GDU") == ProductionType::Sow);
  CHECK(reclassify_label("Wean to Finish") == ProductionType::Finisher);
  CHECK(reclassify_label("Boar stud") == ProductionType::BoarStud);
  CHECK(reclassify_label("  nursery ") == ProductionType::Nursery);
  CHECK(reclassify_label("GDU NURSERY") == ProductionType::Sow);
  CHECK_THROWS_AS(reclassify_label("Feedlot"), Error);
  try {
    reclassify_label("Feedlot");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownLabel);
  }
  const auto shipped = LabelTable::load(std::filesystem::path(SWINEMAP_DATA_DIR) / "production_types.csv");
  CHECK(shipped.entries() == LabelTable::builtin().entries());
  CHECK(shipped.entries().size() == 20);
  CHECK_THROWS_AS(LabelTable::parse("raw_label,production_type\nx,sow\nX,nursery\n"), Error);
  CHECK_THROWS_AS(LabelTable::parse("raw_label,production_type\nx,cattle\n"), Error);
}

TEST_CASE("type classification on separated profiles") {
  std::mt19937_64 rng(17);
  Dataset d;
  d.columns = farm_columns();
  d.n_classes = 4;
  for (int i = 0; i < 320; ++i) {
    const int k = i % 4;
    const auto& p = kProfiles[k];
    std::uniform_int_distribution<int> nb(p.barns_lo, p.barns_hi);
    d.add(to_row(synthetic_farm(rng, nb(rng), p.median_area, p.aspect)), k);
  }
  const auto model = fit_forest(d, Task::Classifier, ForestParams{}, 5);
  int correct = 0;
  for (int i = 0; i < 200; ++i) {
    const int k = i % 4;
    const auto& p = kProfiles[k];
    std::uniform_int_distribution<int> nb(p.barns_lo, p.barns_hi);
    const auto pred = classify_type(synthetic_farm(rng, nb(rng), p.median_area, p.aspect), model);
    CHECK(std::accumulate(pred.probs.begin(), pred.probs.end(), 0.0) == doctest::Approx(1.0));
    const auto top = std::max_element(pred.probs.begin(), pred.probs.end()) - pred.probs.begin();
    CHECK(static_cast<int>(pred.type) == top);
    correct += static_cast<int>(pred.type) == k;
  }
  CHECK(correct >= 190);

  // A farm in the middle of a pure training region.
  const auto finisher = classify_type(synthetic_farm(rng, 5, 1100, 6.0), model);
  CHECK(finisher.type == ProductionType::Finisher);
  CHECK(finisher.probs[2] >= 0.9);
  const auto stud = classify_type(synthetic_farm(rng, 1, 250, 2.0), model);
  CHECK(stud.type == ProductionType::BoarStud);

  Dataset wrong = d;
  wrong.columns[0] = "barn_count";
  CHECK_THROWS_AS(classify_type(FarmFeatures{}, fit_forest(wrong, Task::Classifier, {.n_trees = 3}, 1)), Error);
}

TEST_CASE("type ties go to the earlier class") {
  // Two identical rows with different labels give a 50/50 leaf.
  Dataset d;
  d.columns = farm_columns();
  d.n_classes = 4;
  const auto row = to_row(FarmFeatures{2, 2000, 1000, 0, 3, 0, 20, 0, 60, 0});
  d.add(row, 2);
  d.add(row, 1);
  auto m = fit_forest(d, Task::Classifier, {.n_trees = 1}, 0);
  // Force an even split in the single leaf regardless of the bootstrap draw.
  m.trees[0].value.assign(m.trees[0].value.size(), 0.0);
  m.trees[0].value[1] = m.trees[0].value[2] = 0.5;
  const auto p = classify_type(FarmFeatures{2, 2000, 1000, 0, 3, 0, 20, 0, 60, 0}, m);
  CHECK(p.type == ProductionType::Nursery);
}

TEST_CASE("population regression") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> noise(1.0, 0.05);
  Dataset d;
  d.columns = population_columns();
  std::vector<std::pair<FarmFeatures, ProductionType>> held;
  std::vector<double> held_y;
  double max_target = 0;
  for (int i = 0; i < 600; ++i) {
    const int k = i % 4;
    const auto& p = kProfiles[k];
    std::uniform_int_distribution<int> nb(p.barns_lo, p.barns_hi);
    const auto f = synthetic_farm(rng, nb(rng), p.median_area, p.aspect);
    const double y = p.pigs_per_m2 * f.total_area_m2 * noise(rng);
    if (i < 400) {
      d.add(population_row(f, kProductionTypes[k]), y);
      max_target = std::max(max_target, y);
    } else {
      held.emplace_back(f, kProductionTypes[k]);
      held_y.push_back(y);
    }
  }
  const auto model = fit_forest(d, Task::Regressor, {.n_trees = 100, .max_features = MaxFeatures::All}, 3);
  std::vector<double> pred;
  for (const auto& [f, t] : held) {
    pred.push_back(predict_population(f, t, model));
    CHECK(pred.back() >= 0);
    CHECK(pred.back() <= max_target + 1e-9);
  }
  CHECK(metrics::r2(pred, held_y) >= 0.9);

  FarmFeatures empty = held[0].first;
  empty.total_area_m2 = 0;
  CHECK_THROWS_AS(predict_population(empty, ProductionType::Sow, model), Error);
}

TEST_CASE("single tree reproduces a pure leaf") {
  Dataset d;
  d.columns = population_columns();
  const FarmFeatures a{3, 3000, 1000, 10, 4, 0.1, 16, 1, 63, 2};
  const FarmFeatures b{1, 400, 400, 0, 2, 0, 14, 0, 28, 0};
  d.add(population_row(a, ProductionType::Finisher), 2400);
  d.add(population_row(b, ProductionType::BoarStud), 60);
  const auto m = fit_forest(d, Task::Regressor, {.n_trees = 1, .max_features = MaxFeatures::All}, 4);
  const double pa = predict_population(a, ProductionType::Finisher, m);
  CHECK((pa == 2400 || pa == 60));
  // With a bootstrap containing both rows the leaves are pure.
  const auto boot = bootstrap_indices(2, 4, 0);
  if (std::set<std::size_t>(boot.begin(), boot.end()).size() == 2) CHECK(pa == 2400);
}

TEST_CASE("benchmark report") {
  std::vector<Farm> farms;
  auto farm = [](std::string state, double pop, std::size_t barns) {
    Farm f;
    f.state = std::move(state);
    f.population = pop;
    f.barn_ids.resize(barns);
    return f;
  };
  farms.push_back(farm("IA", 20e6, 4));
  farms.push_back(farm("IA", 7.4e6, 2));
  farms.push_back(farm("MN", 1e6, 1));
  std::map<std::string, ReferenceCounts> ref{{"IA", {5419, 24.6e6}}, {"SC", {370, 0.01e6}}};
  const auto rows = benchmark_report(farms, ref);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].state == "IA");
  CHECK(rows[0].farms == 2);
  CHECK(rows[0].barns == 6);
  CHECK(metrics::format_percent_cell(*rows[0].percent_diff) == "+11%");
  CHECK(rows[1].state == "MN");
  CHECK(!rows[1].percent_diff);
  CHECK(rows[2].state == "SC");
  CHECK(rows[2].farms == 0);
  CHECK(rows[2].population == 0);
  CHECK(rows[3].state == "total");
  CHECK(rows[3].population == doctest::Approx(28.4e6));
  CHECK(!rows[3].reference_population);

  auto shuffled = farms;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(benchmark_csv(benchmark_report(shuffled, ref)) == benchmark_csv(rows));
  const auto csv = benchmark_csv(rows);
  CHECK(csv.find("IA,6,2,5419,27400000,24600000,27.4 M,+11%") != std::string::npos);
  CHECK(csv.find("MN,1,1,,1000000,,1.0 M,") != std::string::npos);
  CHECK(format_millions(2.86e6) == "2.9 M");
}

TEST_CASE("type distribution") {
  std::vector<Farm> farms(5);
  const ProductionType t[5] = {ProductionType::Sow, ProductionType::Sow, ProductionType::Finisher,
                               ProductionType::BoarStud, ProductionType::Nursery};
  for (int i = 0; i < 5; ++i) {
    farms[i].state = i < 4 ? "NC" : "VA";
    farms[i].type = t[i];
  }
  const auto rows = type_distribution(farms);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].percent[0] == doctest::Approx(50));
  CHECK(rows[0].percent[2] == doctest::Approx(25));
  CHECK(type_distribution_csv(rows) ==
        "state,farms,pct_sow,pct_nursery,pct_finisher,pct_boar_stud\nNC,4,50.0,0.0,25.0,25.0\nVA,1,0.0,100.0,0.0,0.0\n");
}
