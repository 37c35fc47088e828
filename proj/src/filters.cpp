#include "swinemap/filters.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "swinemap/error.hpp"
#include "swinemap/metrics.hpp"
#include "swinemap/textio.hpp"

namespace swinemap {

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

double index_cell(std::span<const Candidate> cands) {
  double span = 0;
  for (const auto& c : cands) {
    const auto b = c.ring.bbox();
    span = std::max({span, b.max_x - b.min_x, b.max_y - b.min_y});
  }
  return std::max(span, 1.0) * 2;
}

}  // namespace

FilterOutcome dedup_overlaps(std::span<const Candidate> cands) {
  FilterOutcome out;
  const std::size_t n = cands.size();
  if (n == 0) return out;
  SpatialIndex idx(index_cell(cands));
  for (std::size_t i = 0; i < n; ++i) idx.insert(static_cast<std::int64_t>(i), cands[i].ring.bbox());
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i)
    for (auto j : idx.query_exact(cands[i].ring.bbox())) {
      const auto u = static_cast<std::size_t>(j);
      if (u <= i || uf.find(u) == uf.find(i)) continue;
      if (rings_overlap(cands[i].ring, cands[u].ring)) uf.unite(i, u);
    }
  std::vector<double> area(n);
  for (std::size_t i = 0; i < n; ++i) area[i] = polygon_area(cands[i].ring);
  std::vector<std::size_t> winner(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& w = winner[uf.find(i)];
    if (w == n || area[i] > area[w] || (area[i] == area[w] && cands[i].id < cands[w].id)) w = i;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t w = winner[uf.find(i)];
    if (w == i) out.kept.push_back(cands[i]);
    else out.removed.push_back({cands[i].id, "dedup", "overlaps " + std::to_string(cands[w].id)});
  }
  return out;
}

FilterOutcome size_filter(std::span<const Candidate> cands, double lo, double hi) {
  if (!(lo <= hi)) throw Error(ErrorCode::InvalidBounds, "size bounds [" + format_number(lo) + ", " + format_number(hi) + "]");
  FilterOutcome out;
  for (const auto& c : cands) {
    const double a = polygon_area(c.ring);
    if (a < lo) out.removed.push_back({c.id, "size", "area " + format_number(a) + " below " + format_number(lo)});
    else if (a > hi) out.removed.push_back({c.id, "size", "area " + format_number(a) + " above " + format_number(hi)});
    else out.kept.push_back(c);
  }
  return out;
}

std::pair<double, double> quantile_bounds(std::span<const double> reference_areas, double q_lo, double q_hi) {
  if (!(q_lo <= q_hi)) throw Error(ErrorCode::InvalidBounds, "quantile bounds out of order");
  const double qs[2] = {q_lo, q_hi};
  const auto v = metrics::quantiles(reference_areas, qs);
  return {v[0], v[1]};
}

FilterRules FilterRules::defaults() {
  FilterRules r;
  r.exclude_building_tags = {"school", "church", "warehouse", "industrial"};
  r.retain_building_tags = {"yes", "farm_auxiliary", "farm", "barn", "sty"};
  r.remove_road_tags = {"motorway", "trunk", "primary", "motorway_link", "trunk_link", "primary_link"};
  return r;
}

void FilterRules::validate() const {
  for (const auto& t : exclude_building_tags)
    if (retain_building_tags.count(t)) throw Error(ErrorCode::ConfigError, "tag '" + t + "' is both excluded and retained");
}

std::vector<std::string> tag_values(std::string_view tag) {
  std::vector<std::string> out;
  for (const auto& part : split(tag, ';')) {
    auto t = to_lower(trim(part));
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

FilterRules parse_rules(std::string_view text) {
  FilterRules r;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError, "rules line " + std::to_string(line_no) + " has no '='");
    const auto key = to_lower(trim(line.substr(0, eq)));
    std::set<std::string>* target = nullptr;
    if (key == "exclude_building_tags") target = &r.exclude_building_tags;
    else if (key == "retain_building_tags") target = &r.retain_building_tags;
    else if (key == "remove_road_tags") target = &r.remove_road_tags;
    else throw Error(ErrorCode::ConfigError, "unknown rules key '" + key + "'");
    for (const auto& v : split(line.substr(eq + 1), ',')) {
      auto t = to_lower(trim(v));
      if (!t.empty()) target->insert(std::move(t));
    }
  }
  r.validate();
  return r;
}

FilterRules load_rules(const std::filesystem::path& path) { return parse_rules(read_text(path)); }

std::string format_rules(const FilterRules& r) {
  auto join = [](const std::set<std::string>& s) {
    std::string out;
    for (const auto& t : s) out += (out.empty() ? "" : ", ") + t;
    return out;
  };
  return "exclude_building_tags = " + join(r.exclude_building_tags) + "\nretain_building_tags = " +
         join(r.retain_building_tags) + "\nremove_road_tags = " + join(r.remove_road_tags) + "\n";
}

FilterOutcome tag_filter(std::span<const Candidate> cands, std::span<const TaggedFootprint> buildings,
                         std::span<const TaggedRoad> roads, const FilterRules& rules) {
  rules.validate();
  auto matches = [](std::string_view tag, const std::set<std::string>& set) -> std::string {
    for (const auto& v : tag_values(tag))
      if (set.count(v)) return v;
    return {};
  };
  // Only buildings and roads that can affect the outcome are indexed.
  std::vector<std::size_t> relevant_b, relevant_r;
  for (std::size_t i = 0; i < buildings.size(); ++i)
    if (!matches(buildings[i].tag, rules.exclude_building_tags).empty() ||
        !matches(buildings[i].tag, rules.retain_building_tags).empty())
      relevant_b.push_back(i);
  for (std::size_t i = 0; i < roads.size(); ++i)
    if (roads[i].line.size() >= 2 && !matches(roads[i].tag, rules.remove_road_tags).empty()) relevant_r.push_back(i);

  SpatialIndex bidx(250.0), ridx(250.0);
  for (auto i : relevant_b) bidx.insert(static_cast<std::int64_t>(i), buildings[i].ring.bbox());
  // Long roads are indexed per segment so bounding boxes stay small.
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  for (auto i : relevant_r) {
    const auto& l = roads[i].line;
    for (std::size_t s = 0; s + 1 < l.size(); ++s) {
      const Point seg[2] = {l[s], l[s + 1]};
      ridx.insert(static_cast<std::int64_t>(segments.size()), bbox_of(seg));
      segments.emplace_back(i, s);
    }
  }

  FilterOutcome out;
  for (const auto& c : cands) {
    const BBox box = c.ring.bbox();
    std::string excluded_by, road_hit;
    bool retained = false;
    for (auto bi : bidx.query_exact(box)) {
      const auto& b = buildings[static_cast<std::size_t>(bi)];
      if (!rings_intersect(c.ring, b.ring)) continue;
      if (!matches(b.tag, rules.retain_building_tags).empty()) retained = true;
      const auto ex = matches(b.tag, rules.exclude_building_tags);
      if (!ex.empty() && (excluded_by.empty() || ex < excluded_by)) excluded_by = ex;
    }
    for (auto si : ridx.query_exact(box)) {
      const auto [ri, s] = segments[static_cast<std::size_t>(si)];
      const auto& r = roads[ri];
      if (!polyline_intersects_ring(std::span<const Point>(&r.line[s], 2), c.ring)) continue;
      const auto t = matches(r.tag, rules.remove_road_tags);
      if (road_hit.empty() || t < road_hit) road_hit = t;
    }
    if (!road_hit.empty()) out.removed.push_back({c.id, "tag", "road:" + road_hit});
    else if (!excluded_by.empty() && !retained) out.removed.push_back({c.id, "tag", "building:" + excluded_by});
    else out.kept.push_back(c);
  }
  return out;
}

std::string removal_report_csv(std::span<const Removal> removed) {
  std::ostringstream os;
  os << "id,stage,reason\n";
  for (const auto& r : removed) os << r.id << ',' << csv_escape(r.stage) << ',' << csv_escape(r.reason) << '\n';
  return os.str();
}

}  // namespace swinemap
