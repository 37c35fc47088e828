#include "swinemap/farms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "swinemap/error.hpp"
#include "swinemap/metrics.hpp"
#include "swinemap/textio.hpp"

namespace swinemap {

std::string_view to_string(ProductionType t) {
  switch (t) {
    case ProductionType::Sow: return "sow";
    case ProductionType::Nursery: return "nursery";
    case ProductionType::Finisher: return "finisher";
    case ProductionType::BoarStud: return "boar_stud";
  }
  return "?";
}

ProductionType parse_production_type(std::string_view s) {
  const auto t = to_lower(trim(s));
  for (auto p : kProductionTypes)
    if (to_string(p) == t) return p;
  throw Error(ErrorCode::UnknownLabel, "unknown production type '" + std::string(s) + "'");
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct CellHash {
  std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& c) const {
    return std::hash<std::int64_t>()(c.first * 73856093LL) ^ std::hash<std::int64_t>()(c.second * 19349663LL);
  }
};

}  // namespace

std::vector<Farm> group_farms(std::span<const Candidate> barns, double link_distance) {
  if (barns.empty()) throw Error(ErrorCode::InvalidInput, "no barns to group");
  if (!(link_distance > 0)) throw Error(ErrorCode::InvalidInput, "link distance must be positive");
  const std::size_t n = barns.size();
  std::vector<Point> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = centroid(barns[i].ring);

  // Cells as wide as the link distance: linked barns sit in adjacent cells.
  using Cell = std::pair<std::int64_t, std::int64_t>;
  auto cell_of = [&](Point p) {
    return Cell{static_cast<std::int64_t>(std::floor(p.x / link_distance)),
                static_cast<std::int64_t>(std::floor(p.y / link_distance))};
  };
  std::unordered_map<Cell, std::vector<std::size_t>, CellHash> grid;
  for (std::size_t i = 0; i < n; ++i) grid[cell_of(c[i])].push_back(i);

  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = cell_of(c[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = grid.find({cx + dx, cy + dy});
        if (it == grid.end()) continue;
        for (auto j : it->second)
          if (j > i && distance(c[i], c[j]) <= link_distance) uf.unite(i, j);
      }
  }

  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[uf.find(i)].push_back(i);
  std::vector<Farm> farms;
  for (const auto& [root, idx] : members) {
    Farm f;
    Point sum{};
    for (auto i : idx) {
      f.barn_ids.push_back(barns[i].id);
      sum = sum + c[i];
    }
    std::sort(f.barn_ids.begin(), f.barn_ids.end());
    f.id = f.barn_ids.front();
    f.centroid = sum * (1.0 / static_cast<double>(idx.size()));
    farms.push_back(std::move(f));
  }
  std::sort(farms.begin(), farms.end(), [](const Farm& a, const Farm& b) { return a.id < b.id; });
  return farms;
}

IntraBarnStats intra_barn_stats(std::span<const Ring> barns) {
  if (barns.size() < 2) throw Error(ErrorCode::InsufficientBarns, "intra-barn distance needs at least two barns");
  const auto d = pairwise_centroid_distances(barns);
  const double qs[3] = {0.25, 0.5, 0.75};
  const auto q = metrics::quantiles(d, qs);
  return {q[1], q[0], q[2], *std::max_element(d.begin(), d.end())};
}

namespace {

const char* const kLabelTable =
      "raw_label,production_type\n"
      "GDU,sow\nDeveloper,sow\nGilt Finishing,sow\nGilt Isolation,sow\nIsolation,sow\nGilt Growout,sow\n"
      "Sow; Finishing,sow\nGilt,sow\nGilt Breeder,sow\nIsolation; Sow,sow\nGDU Finisher,sow\nGDU Nursery,sow\n"
      "Nursery,nursery\n"
      "Wean to Finish,finisher\nFarrow to Finish,finisher\nResearch,finisher\nNursery; Finisher,finisher\n"
      "Finish,finisher\n"
      "Boar,boar_stud\nBoar stud,boar_stud\n";

}  // namespace

LabelTable LabelTable::builtin() { return parse(kLabelTable); }

std::vector<std::pair<std::string, ProductionType>> builtin_label_rows() {
  const auto t = parse_csv(kLabelTable);
  std::vector<std::pair<std::string, ProductionType>> out;
  for (const auto& row : t.rows) out.emplace_back(row[0], parse_production_type(row[1]));
  return out;
}

LabelTable LabelTable::parse(std::string_view csv) {
  const auto t = parse_csv(csv);
  const auto raw = t.column("raw_label"), type = t.column("production_type");
  LabelTable out;
  for (const auto& row : t.rows) {
    if (row.size() <= std::max(raw, type)) throw Error(ErrorCode::FormatError, "short row in label table");
    auto key = to_lower(trim(row[raw]));
    const auto value = parse_production_type(row[type]);
    auto [it, inserted] = out.map_.emplace(key, value);
    if (!inserted && it->second != value)
      throw Error(ErrorCode::FormatError, "label '" + key + "' mapped to two types");
  }
  return out;
}

LabelTable LabelTable::load(const std::filesystem::path& path) { return parse(read_text(path)); }

ProductionType LabelTable::lookup(std::string_view raw) const {
  auto it = map_.find(to_lower(trim(raw)));
  if (it == map_.end()) throw Error(ErrorCode::UnknownLabel, "no production type for '" + std::string(raw) + "'");
  return it->second;
}

ProductionType reclassify_label(std::string_view raw) {
  static const LabelTable table = LabelTable::builtin();
  return table.lookup(raw);
}

TypePrediction classify_type(const FarmFeatures& f, const ForestModel& model) {
  const auto cols = farm_columns();
  model.check_schema(cols);
  if (model.task != Task::Classifier || model.n_classes != 4)
    throw Error(ErrorCode::SchemaMismatch, "type model must be a four-class classifier");
  const auto row = to_row(f);
  TypePrediction p{ProductionType::Sow, model.predict_proba(row)};
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.probs.size(); ++k)
    if (p.probs[k] > p.probs[best]) best = k;
  p.type = kProductionTypes[best];
  return p;
}

std::vector<std::string> population_columns() {
  auto cols = farm_columns();
  for (auto t : kProductionTypes) cols.push_back("type_" + std::string(to_string(t)));
  return cols;
}

std::vector<double> population_row(const FarmFeatures& f, ProductionType t) {
  auto row = to_row(f);
  for (auto k : kProductionTypes) row.push_back(k == t ? 1.0 : 0.0);
  return row;
}

double predict_population(const FarmFeatures& f, ProductionType t, const ForestModel& model) {
  if (!(f.total_area_m2 > 0)) throw Error(ErrorCode::InvalidInput, "farm area must be positive");
  model.check_schema(population_columns());
  if (model.task != Task::Regressor) throw Error(ErrorCode::SchemaMismatch, "population model must be a regressor");
  return std::max(0.0, model.predict_value(population_row(f, t)));
}

std::vector<BenchmarkRow> benchmark_report(std::span<const Farm> farms,
                                           const std::map<std::string, ReferenceCounts>& reference) {
  std::map<std::string, BenchmarkRow> by_state;
  for (const auto& [state, ref] : reference) by_state[state].state = state;
  for (const auto& f : farms) {
    auto& r = by_state[f.state];
    r.state = f.state;
    r.farms += 1;
    r.barns += f.barn_ids.size();
    r.population += f.population.value_or(0.0);
  }
  std::vector<BenchmarkRow> out;
  BenchmarkRow total;
  total.state = "total";
  double ref_farms = 0, ref_pop = 0;
  bool all_farms = true, all_pop = true;
  for (auto& [state, r] : by_state) {
    auto it = reference.find(state);
    if (it != reference.end()) {
      r.reference_farms = it->second.farms;
      r.reference_population = it->second.population;
    }
    if (r.reference_population && *r.reference_population > 0)
      r.percent_diff = metrics::percent_difference(r.population, *r.reference_population);
    total.barns += r.barns;
    total.farms += r.farms;
    total.population += r.population;
    if (r.reference_farms) ref_farms += *r.reference_farms; else all_farms = false;
    if (r.reference_population) ref_pop += *r.reference_population; else all_pop = false;
    out.push_back(r);
  }
  if (all_farms && !out.empty()) total.reference_farms = ref_farms;
  if (all_pop && !out.empty()) {
    total.reference_population = ref_pop;
    if (ref_pop > 0) total.percent_diff = metrics::percent_difference(total.population, ref_pop);
  }
  out.push_back(total);
  return out;
}

std::string format_millions(double pigs) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f M", std::round(pigs / 1e5) / 10.0);
  return buf;
}

std::string benchmark_csv(std::span<const BenchmarkRow> rows) {
  std::ostringstream os;
  os << "state,barns,farms,reference_farms,capacity,reference_population,capacity_m,pct_diff\n";
  auto count = [](double v) { return v == std::round(v) ? std::to_string(std::llround(v)) : format_number(v); };
  auto opt = [&](const std::optional<double>& v) { return v ? count(*v) : std::string(); };
  for (const auto& r : rows)
    os << csv_escape(r.state) << ',' << r.barns << ',' << r.farms << ',' << opt(r.reference_farms) << ','
       << count(std::round(r.population)) << ',' << opt(r.reference_population) << ','
       << format_millions(r.population) << ','
       << (r.percent_diff ? metrics::format_percent_cell(*r.percent_diff) : std::string()) << '\n';
  return os.str();
}

std::vector<TypeShare> type_distribution(std::span<const Farm> farms) {
  std::map<std::string, std::array<std::size_t, 4>> counts;
  for (const auto& f : farms)
    if (f.type) counts[f.state][static_cast<std::size_t>(*f.type)] += 1;
  std::vector<TypeShare> out;
  for (const auto& [state, c] : counts) {
    TypeShare s;
    s.state = state;
    for (auto v : c) s.farms += v;
    for (std::size_t k = 0; k < 4; ++k) s.percent[k] = 100.0 * static_cast<double>(c[k]) / static_cast<double>(s.farms);
    out.push_back(s);
  }
  return out;
}

std::string type_distribution_csv(std::span<const TypeShare> rows) {
  std::ostringstream os;
  os << "state,farms";
  for (auto t : kProductionTypes) os << ",pct_" << to_string(t);
  os << '\n';
  char buf[32];
  for (const auto& r : rows) {
    os << csv_escape(r.state) << ',' << r.farms;
    for (double p : r.percent) {
      std::snprintf(buf, sizeof buf, "%.1f", p);
      os << ',' << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace swinemap
