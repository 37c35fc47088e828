#include "swinemap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "swinemap/error.hpp"
#include "swinemap/io.hpp"
#include "swinemap/textio.hpp"

namespace swinemap {

using nlohmann::json;

std::string_view to_string(DistractorKind k) {
  switch (k) {
    case DistractorKind::Warehouse: return "warehouse";
    case DistractorKind::House: return "house";
    case DistractorKind::Parking: return "parking";
  }
  return "?";
}

DistractorKind parse_distractor_kind(std::string_view s) {
  for (auto k : {DistractorKind::Warehouse, DistractorKind::House, DistractorKind::Parking})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::FormatError, "unknown distractor kind '" + std::string(s) + "'");
}

NoiseModel NoiseModel::none() {
  NoiseModel n;
  n.blur_radius = 0;
  n.dilation_px = 0;
  n.fp_blobs_per_km2 = 0;
  n.pixel_sd = 0;
  n.background = 0;
  n.capacity_log_sd = 0;
  return n;
}

std::array<BarnShape, 4> SceneSpec::default_shapes() {
  // Medians and spreads follow the reported per-type barn statistics;
  // capacity densities are synthetic.
  return {{{1255, 0.77, 2.12, 0.54, 4.0, 0.9},
           {615, 0.48, 1.56, 0.5, 1.0, 2.2},
           {828, 0.39, 2.44, 0.55, 1.2, 1.4},
           {521, 0.62, 1.80, 0.6, 0.8, 0.25}}};
}

std::size_t SceneSpec::grid_width() const { return static_cast<std::size_t>(std::llround(width_m / pixel_size)); }
std::size_t SceneSpec::grid_height() const { return static_cast<std::size_t>(std::llround(height_m / pixel_size)); }
GeoTransform SceneSpec::geo() const { return {{origin.x, origin.y + height_m}, pixel_size}; }
BBox SceneSpec::extent() const { return {origin.x, origin.y, origin.x + width_m, origin.y + height_m}; }

void SceneSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidInput, "scene spec: " + m); };
  if (!(pixel_size > 0) || !(width_m > 0) || !(height_m > 0)) fail("extent and pixel size must be positive");
  if (std::abs(width_m / pixel_size - std::round(width_m / pixel_size)) > 1e-9 ||
      std::abs(height_m / pixel_size - std::round(height_m / pixel_size)) > 1e-9)
    fail("extent must be a whole number of pixels");
  if (!(landcover_pixel > 0) || landcover_margin < 0) fail("land-cover grid");
  int farms = 0;
  for (int n : farms_per_type) {
    if (n < 0) fail("negative farm count");
    farms += n;
  }
  for (int n : distractors)
    if (n < 0) fail("negative distractor count");
  if (total_barns != 0 && total_barns < farms) fail("fewer barns than farms");
  if (total_barns != 0 && total_barns > farms * max_barns_per_farm) fail("more barns than farms can hold");
  if (max_barns_per_farm < 1) fail("max_barns_per_farm");
  if (!(barn_gap_min > 0) || barn_gap_max < barn_gap_min) fail("barn gap range");
  if (!(farm_radius > 0) || !(link_distance > 0) || 2 * farm_radius >= link_distance)
    fail("farm radius must be below half the link distance");
  if (states.empty()) fail("at least one state");
  for (const auto& s : shapes)
    if (!(s.median_area_m2 > 0) || !(s.median_aspect > 0) || s.area_log_sd < 0 || s.aspect_log_sd < 0 ||
        s.extra_barns_mean < 0 || s.pigs_per_m2 < 0)
      fail("barn shape parameters");
  const auto& n = noise;
  if (n.blur_radius < 0 || n.dilation_px < 0 || n.fp_blobs_per_km2 < 0 || n.pixel_sd < 0 || n.capacity_log_sd < 0)
    fail("noise parameters");
  if (n.background < 0 || n.background > 1 || n.barn_probability < 0 || n.barn_probability > 1)
    fail("probabilities must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// Spec serialization

namespace {

json shape_json(const BarnShape& s) {
  return {{"median_area_m2", s.median_area_m2}, {"area_log_sd", s.area_log_sd},
          {"median_aspect", s.median_aspect},   {"aspect_log_sd", s.aspect_log_sd},
          {"extra_barns_mean", s.extra_barns_mean}, {"pigs_per_m2", s.pigs_per_m2}};
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("scene key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw Error(ErrorCode::ConfigError, "unknown key '" + k + "' in " + where);
  }
}

}  // namespace

json to_json(const SceneSpec& s) {
  json shapes = json::object();
  for (auto t : kProductionTypes) shapes[std::string(to_string(t))] = shape_json(s.shapes[static_cast<int>(t)]);
  json farms = json::object();
  for (auto t : kProductionTypes) farms[std::string(to_string(t))] = s.farms_per_type[static_cast<int>(t)];
  const auto& n = s.noise;
  return {{"width_m", s.width_m},
          {"height_m", s.height_m},
          {"origin", {s.origin.x, s.origin.y}},
          {"pixel_size", s.pixel_size},
          {"landcover_pixel", s.landcover_pixel},
          {"landcover_margin", s.landcover_margin},
          {"farms_per_type", farms},
          {"shapes", shapes},
          {"total_barns", s.total_barns},
          {"max_barns_per_farm", s.max_barns_per_farm},
          {"barn_gap_min", s.barn_gap_min},
          {"barn_gap_max", s.barn_gap_max},
          {"farm_radius", s.farm_radius},
          {"link_distance", s.link_distance},
          {"road_clearance", s.road_clearance},
          {"distractors", {{"warehouse", s.distractors[0]}, {"house", s.distractors[1]}, {"parking", s.distractors[2]}}},
          {"road_km_per_km2", s.road_km_per_km2},
          {"towns_per_km2", s.towns_per_km2},
          {"town_radius_min", s.town_radius_min},
          {"town_radius_max", s.town_radius_max},
          {"patch_km2", s.patch_km2},
          {"barn_tag_rate", s.barn_tag_rate},
          {"distractor_tag_rate", s.distractor_tag_rate},
          {"states", s.states},
          {"noise",
           {{"blur_radius", n.blur_radius},
            {"dilation_px", n.dilation_px},
            {"fp_blobs_per_km2", n.fp_blobs_per_km2},
            {"pixel_sd", n.pixel_sd},
            {"background", n.background},
            {"barn_probability", n.barn_probability},
            {"capacity_log_sd", n.capacity_log_sd}}},
          {"seed", s.seed}};
}

SceneSpec scene_spec_from_json(const json& j) {
  reject_unknown(j,
                 {"width_m", "height_m", "origin", "pixel_size", "landcover_pixel", "landcover_margin",
                  "farms_per_type", "shapes", "total_barns", "max_barns_per_farm", "barn_gap_min", "barn_gap_max",
                  "farm_radius", "link_distance", "road_clearance", "distractors", "road_km_per_km2",
                  "towns_per_km2", "town_radius_min", "town_radius_max", "patch_km2", "barn_tag_rate",
                  "distractor_tag_rate", "states", "noise", "seed"},
                 "scene spec");
  SceneSpec s;
  take(j, "width_m", s.width_m);
  take(j, "height_m", s.height_m);
  if (j.contains("origin")) {
    std::vector<double> o;
    take(j, "origin", o);
    if (o.size() != 2) throw Error(ErrorCode::ConfigError, "origin must be [x, y]");
    s.origin = {o[0], o[1]};
  }
  take(j, "pixel_size", s.pixel_size);
  take(j, "landcover_pixel", s.landcover_pixel);
  take(j, "landcover_margin", s.landcover_margin);
  if (j.contains("farms_per_type")) {
    const auto& f = j["farms_per_type"];
    reject_unknown(f, {"sow", "nursery", "finisher", "boar_stud"}, "farms_per_type");
    for (auto t : kProductionTypes) take(f, std::string(to_string(t)).c_str(), s.farms_per_type[static_cast<int>(t)]);
  }
  if (j.contains("shapes")) {
    const auto& sh = j["shapes"];
    reject_unknown(sh, {"sow", "nursery", "finisher", "boar_stud"}, "shapes");
    for (auto t : kProductionTypes) {
      const std::string name(to_string(t));
      if (!sh.contains(name)) continue;
      const auto& o = sh[name];
      reject_unknown(o, {"median_area_m2", "area_log_sd", "median_aspect", "aspect_log_sd", "extra_barns_mean",
                         "pigs_per_m2"},
                     "shapes." + name);
      auto& b = s.shapes[static_cast<int>(t)];
      take(o, "median_area_m2", b.median_area_m2);
      take(o, "area_log_sd", b.area_log_sd);
      take(o, "median_aspect", b.median_aspect);
      take(o, "aspect_log_sd", b.aspect_log_sd);
      take(o, "extra_barns_mean", b.extra_barns_mean);
      take(o, "pigs_per_m2", b.pigs_per_m2);
    }
  }
  take(j, "total_barns", s.total_barns);
  take(j, "max_barns_per_farm", s.max_barns_per_farm);
  take(j, "barn_gap_min", s.barn_gap_min);
  take(j, "barn_gap_max", s.barn_gap_max);
  take(j, "farm_radius", s.farm_radius);
  take(j, "link_distance", s.link_distance);
  take(j, "road_clearance", s.road_clearance);
  if (j.contains("distractors")) {
    const auto& d = j["distractors"];
    reject_unknown(d, {"warehouse", "house", "parking"}, "distractors");
    take(d, "warehouse", s.distractors[0]);
    take(d, "house", s.distractors[1]);
    take(d, "parking", s.distractors[2]);
  }
  take(j, "road_km_per_km2", s.road_km_per_km2);
  take(j, "towns_per_km2", s.towns_per_km2);
  take(j, "town_radius_min", s.town_radius_min);
  take(j, "town_radius_max", s.town_radius_max);
  take(j, "patch_km2", s.patch_km2);
  take(j, "barn_tag_rate", s.barn_tag_rate);
  take(j, "distractor_tag_rate", s.distractor_tag_rate);
  take(j, "states", s.states);
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    reject_unknown(n, {"blur_radius", "dilation_px", "fp_blobs_per_km2", "pixel_sd", "background", "barn_probability",
                       "capacity_log_sd"},
                   "noise");
    take(n, "blur_radius", s.noise.blur_radius);
    take(n, "dilation_px", s.noise.dilation_px);
    take(n, "fp_blobs_per_km2", s.noise.fp_blobs_per_km2);
    take(n, "pixel_sd", s.noise.pixel_sd);
    take(n, "background", s.noise.background);
    take(n, "barn_probability", s.noise.barn_probability);
    take(n, "capacity_log_sd", s.noise.capacity_log_sd);
  }
  take(j, "seed", s.seed);
  return s;
}

std::vector<std::pair<int, std::string>> synthetic_legend() {
  return {{11, "Open Water"},
          {21, "Developed Open Space"},
          {22, "Developed Low Intensity"},
          {23, "Developed Medium Intensity"},
          {24, "Developed High Intensity"},
          {41, "Deciduous Forest"},
          {71, "Grassland"},
          {81, "Pasture Hay"},
          {82, "Cultivated Crops"},
          {90, "Woody Wetlands"}};
}

RoadNetwork GroundTruth::road_network() const {
  std::vector<Segment> segs;
  for (const auto& r : roads)
    for (std::size_t i = 0; i + 1 < r.line.size(); ++i) segs.push_back({r.line[i], r.line[i + 1]});
  return RoadNetwork(std::move(segs));
}

LandCover GroundTruth::land_cover() const { return LandCover(landcover, legend); }

std::string GroundTruth::state_of(Point p) const {
  const double band = spec.width_m / static_cast<double>(spec.states.size());
  const auto i = std::clamp<long long>(static_cast<long long>(std::floor((p.x - spec.origin.x) / band)), 0,
                                       static_cast<long long>(spec.states.size()) - 1);
  return spec.states[static_cast<std::size_t>(i)];
}

// ---------------------------------------------------------------------------
// Generation

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double lognormal(Rng& rng, double median, double log_sd) {
  if (log_sd == 0) return median;
  return std::lognormal_distribution<double>(std::log(median), log_sd)(rng);
}

template <typename T>
const T& weighted_pick(Rng& rng, const std::vector<std::pair<T, double>>& options) {
  std::vector<double> w;
  for (const auto& o : options) w.push_back(o.second);
  std::discrete_distribution<std::size_t> d(w.begin(), w.end());
  return options[d(rng)].first;
}

Ring oriented_rect(Point c, double length, double width, double angle) {
  const Point u{std::cos(angle), std::sin(angle)};
  const Point n{-u.y, u.x};
  const Point hu = u * (length / 2), hn = n * (width / 2);
  return Ring({c - hu - hn, c + hu - hn, c + hu + hn, c - hu + hn});
}

/// Zero when the closed rings touch, else the smallest vertex-edge distance.
double ring_distance(const Ring& a, const Ring& b) {
  if (rings_intersect(a, b)) return 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      d = std::min(d, point_segment_distance(a[i], b.edge(j)));
      d = std::min(d, point_segment_distance(b[j], a.edge(i)));
    }
  return d;
}

double ring_segment_distance(const Ring& r, const Segment& s) {
  for (std::size_t i = 0; i < r.size(); ++i)
    if (segments_intersect(r.edge(i), s)) return 0;
  if (locate(s.a, r) != Location::Outside) return 0;
  double d = std::min(point_segment_distance(s.a, r.edge(0)), point_segment_distance(s.b, r.edge(0)));
  for (std::size_t i = 0; i < r.size(); ++i) {
    d = std::min({d, point_segment_distance(r[i], s), point_segment_distance(s.a, r.edge(i)),
                  point_segment_distance(s.b, r.edge(i))});
  }
  return d;
}

BBox grown(BBox b, double m) { return {b.min_x - m, b.min_y - m, b.max_x + m, b.max_y + m}; }

struct Town {
  Point center;
  double radius;
};

class Generator {
 public:
  explicit Generator(const SceneSpec& s) : spec_(s), rng_(s.seed) { gt_.spec = s; }

  GroundTruth run() {
    spec_.validate();
    make_roads();
    make_landcover();
    place_farms();
    place_distractors();
    place_blobs();
    assign_tags();
    render();
    return std::move(gt_);
  }

 private:
  double area_km2() const { return spec_.width_m * spec_.height_m / 1e6; }
  BBox ext() const { return spec_.extent(); }

  Point point_on_line(const std::vector<Point>& line) {
    const auto k = std::uniform_int_distribution<std::size_t>(0, line.size() - 2)(rng_);
    const double t = uniform(rng_, 0, 1);
    return line[k] + (line[k + 1] - line[k]) * t;
  }

  void make_roads() {
    const BBox e = ext();
    const double mean_len = (spec_.width_m + spec_.height_m) / 2 / 1000;
    const int n_roads = spec_.road_km_per_km2 > 0
                            ? std::max(1, static_cast<int>(std::lround(spec_.road_km_per_km2 * area_km2() / mean_len)))
                            : 0;
    const std::vector<std::pair<std::string, double>> tags{{"motorway", 0.1},    {"trunk", 0.05},
                                                           {"primary", 0.15},    {"secondary", 0.2},
                                                           {"tertiary", 0.15},   {"residential", 0.2},
                                                           {"service", 0.15}};
    std::normal_distribution<double> jitter(0, 150);
    for (int i = 0; i < n_roads; ++i) {
      TaggedRoad r;
      r.tag = weighted_pick(rng_, tags);
      const bool horizontal = i % 2 == 0;
      const double span = horizontal ? spec_.width_m : spec_.height_m;
      const int steps = std::max(2, static_cast<int>(std::ceil((span + 200) / 2000)));
      double off = horizontal ? uniform(rng_, e.min_y + 0.05 * spec_.height_m, e.max_y - 0.05 * spec_.height_m)
                              : uniform(rng_, e.min_x + 0.05 * spec_.width_m, e.max_x - 0.05 * spec_.width_m);
      for (int k = 0; k <= steps; ++k) {
        const double along = (horizontal ? e.min_x : e.min_y) - 100 + (span + 200) * k / steps;
        if (k > 0) off += jitter(rng_);
        off = horizontal ? std::clamp(off, e.min_y, e.max_y) : std::clamp(off, e.min_x, e.max_x);
        r.line.push_back(horizontal ? Point{along, off} : Point{off, along});
      }
      gt_.roads.push_back(std::move(r));
    }
    const int n_towns = static_cast<int>(std::lround(spec_.towns_per_km2 * area_km2()));
    for (int i = 0; i < n_towns && !gt_.roads.empty(); ++i) {
      const auto ri = std::uniform_int_distribution<std::size_t>(0, gt_.roads.size() - 1)(rng_);
      Town t{point_on_line(gt_.roads[ri].line), uniform(rng_, spec_.town_radius_min, spec_.town_radius_max)};
      t.center.x = std::clamp(t.center.x, e.min_x, e.max_x);
      t.center.y = std::clamp(t.center.y, e.min_y, e.max_y);
      towns_.push_back(t);
      // Street grid clipped to the town disc.
      for (double d = -t.radius + 125; d < t.radius; d += 250) {
        const double half = std::sqrt(t.radius * t.radius - d * d);
        gt_.roads.push_back({{{t.center.x - half, t.center.y + d}, {t.center.x + half, t.center.y + d}}, "residential"});
        gt_.roads.push_back({{{t.center.x + d, t.center.y - half}, {t.center.x + d, t.center.y + half}}, "residential"});
      }
    }
    std::vector<Segment> segs;
    for (const auto& r : gt_.roads)
      for (std::size_t i = 0; i + 1 < r.line.size(); ++i) segs.push_back({r.line[i], r.line[i + 1]});
    roads_ = std::make_unique<RoadNetwork>(std::move(segs));
  }

  double road_distance(const Ring& r) const {
    if (roads_->empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    const BBox b = r.bbox();
    // Search windows grow until a segment is found.
    for (double m = 100; m < 1e7; m *= 4) {
      for (auto id : roads_->index.query_exact(grown(b, m)))
        best = std::min(best, ring_segment_distance(r, roads_->segments[static_cast<std::size_t>(id)]));
      if (best <= m) return best;
    }
    return best;
  }

  void make_landcover() {
    gt_.legend = synthetic_legend();
    const double lp = spec_.landcover_pixel, m = spec_.landcover_margin;
    const auto w = static_cast<std::size_t>(std::ceil((spec_.width_m + 2 * m) / lp));
    const auto h = static_cast<std::size_t>(std::ceil((spec_.height_m + 2 * m) / lp));
    const GeoTransform geo{{spec_.origin.x - m, spec_.origin.y + spec_.height_m + m}, lp};
    Raster lc(w, h, geo, 0.0f);
    lc.kind = ValueKind::Category;

    // Voronoi patches of natural and agricultural classes.
    const std::vector<std::pair<int, double>> classes{{82, 0.45}, {81, 0.2}, {41, 0.18},
                                                      {71, 0.07}, {90, 0.06}, {11, 0.04}};
    const double total_km2 = (spec_.width_m + 2 * m) * (spec_.height_m + 2 * m) / 1e6;
    const int n_seeds = std::max(1, static_cast<int>(std::lround(total_km2 / spec_.patch_km2)));
    struct Seed {
      Point p;
      int code;
    };
    std::vector<Seed> seeds;
    const BBox le = lc.extent();
    for (int i = 0; i < n_seeds; ++i)
      seeds.push_back({{uniform(rng_, le.min_x, le.max_x), uniform(rng_, le.min_y, le.max_y)}, weighted_pick(rng_, classes)});
    const double bucket = std::sqrt(spec_.patch_km2) * 1000;
    const auto bw = static_cast<std::int64_t>(std::ceil((le.max_x - le.min_x) / bucket)) + 1;
    const auto bh = static_cast<std::int64_t>(std::ceil((le.max_y - le.min_y) / bucket)) + 1;
    std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(bw * bh));
    auto bucket_of = [&](Point p) {
      return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>((p.x - le.min_x) / bucket),
                                                    static_cast<std::int64_t>((p.y - le.min_y) / bucket)};
    };
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const auto [bx, by] = bucket_of(seeds[i].p);
      buckets[static_cast<std::size_t>(by * bw + bx)].push_back(i);
    }
    for (std::size_t row = 0; row < h; ++row)
      for (std::size_t col = 0; col < w; ++col) {
        const Point c = geo.pixel_center(col, row);
        const auto [bx, by] = bucket_of(c);
        double best = std::numeric_limits<double>::infinity();
        int code = 82;
        for (std::int64_t r = 0; r < std::max(bw, bh); ++r) {
          if (std::isfinite(best) && (static_cast<double>(r) - 1) * bucket > best) break;
          for (std::int64_t y = by - r; y <= by + r; ++y)
            for (std::int64_t x = bx - r; x <= bx + r; ++x) {
              if (std::max(std::abs(x - bx), std::abs(y - by)) != r) continue;
              if (x < 0 || y < 0 || x >= bw || y >= bh) continue;
              for (auto i : buckets[static_cast<std::size_t>(y * bw + x)]) {
                const double d = distance(c, seeds[i].p);
                if (d < best || (d == best && seeds[i].code < code)) {
                  best = d;
                  code = seeds[i].code;
                }
              }
            }
        }
        lc.at(col, row) = static_cast<float>(code);
      }

    // Developed strips along roads, then town cores.
    auto mark = [&](Point p, double radius, int code) {
      const auto c0 = static_cast<std::int64_t>(std::floor((p.x - radius - geo.origin.x) / lp));
      const auto c1 = static_cast<std::int64_t>(std::floor((p.x + radius - geo.origin.x) / lp));
      const auto r0 = static_cast<std::int64_t>(std::floor((geo.origin.y - p.y - radius) / lp));
      const auto r1 = static_cast<std::int64_t>(std::floor((geo.origin.y - p.y + radius) / lp));
      for (auto r = std::max<std::int64_t>(r0, 0); r <= std::min<std::int64_t>(r1, static_cast<std::int64_t>(h) - 1); ++r)
        for (auto c = std::max<std::int64_t>(c0, 0); c <= std::min<std::int64_t>(c1, static_cast<std::int64_t>(w) - 1); ++c)
          if (distance(geo.pixel_center(static_cast<std::size_t>(c), static_cast<std::size_t>(r)), p) <= radius)
            lc.at(static_cast<std::size_t>(c), static_cast<std::size_t>(r)) = static_cast<float>(code);
    };
    for (const auto& s : roads_->segments) {
      const double len = distance(s.a, s.b);
      const int steps = std::max(1, static_cast<int>(std::ceil(len / 10)));
      for (int k = 0; k <= steps; ++k) mark(s.a + (s.b - s.a) * (static_cast<double>(k) / steps), 45, 21);
    }
    for (const auto& t : towns_) {
      mark(t.center, t.radius, 22);
      mark(t.center, 0.55 * t.radius, 23);
      mark(t.center, 0.25 * t.radius, 24);
    }
    gt_.landcover = std::move(lc);
  }

  int landcover_at(Point p) const {
    const auto& lc = gt_.landcover;
    const double col = (p.x - lc.geo.origin.x) / lc.geo.pixel_size;
    const double row = (lc.geo.origin.y - p.y) / lc.geo.pixel_size;
    if (col < 0 || row < 0 || col >= static_cast<double>(lc.width) || row >= static_cast<double>(lc.height)) return 0;
    return static_cast<int>(lc.at(static_cast<std::size_t>(col), static_cast<std::size_t>(row)));
  }

  /// Length and width from the type's area and aspect distributions.
  std::pair<double, double> barn_dims(ProductionType t) {
    const auto& s = spec_.shapes[static_cast<int>(t)];
    const double area = std::clamp(lognormal(rng_, s.median_area_m2, s.area_log_sd), 60.0, 20000.0);
    double aspect = lognormal(rng_, s.median_aspect, s.aspect_log_sd);
    if (aspect < 1) aspect = 1 / aspect;
    aspect = std::min(aspect, 8.0);
    const double length = std::sqrt(area * aspect);
    return {length, area / length};
  }

  std::vector<int> barn_counts(const std::vector<ProductionType>& types) {
    std::vector<int> counts(types.size(), 1);
    if (spec_.total_barns == 0) {
      for (std::size_t i = 0; i < types.size(); ++i) {
        const double mean = spec_.shapes[static_cast<int>(types[i])].extra_barns_mean;
        const int extra = mean > 0 ? std::poisson_distribution<int>(mean)(rng_) : 0;
        counts[i] = std::min(spec_.max_barns_per_farm, 1 + extra);
      }
      return counts;
    }
    for (int left = spec_.total_barns - static_cast<int>(types.size()); left > 0; --left) {
      std::vector<double> w(types.size());
      double sum = 0;
      for (std::size_t i = 0; i < types.size(); ++i) {
        w[i] = counts[i] < spec_.max_barns_per_farm ? spec_.shapes[static_cast<int>(types[i])].extra_barns_mean + 0.05 : 0;
        sum += w[i];
      }
      if (sum == 0) throw Error(ErrorCode::PlacementOverflow, "cannot distribute the requested barns");
      counts[std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng_)] += 1;
    }
    return counts;
  }

  bool far_from_towns(Point p, double margin) const {
    for (const auto& t : towns_)
      if (distance(p, t.center) <= t.radius + margin) return false;
    return true;
  }

  void place_farms() {
    std::vector<ProductionType> types;
    for (auto t : kProductionTypes)
      for (int i = 0; i < spec_.farms_per_type[static_cast<int>(t)]; ++i) types.push_back(t);
    std::shuffle(types.begin(), types.end(), rng_);
    const auto counts = barn_counts(types);
    const auto labels = builtin_label_rows();

    const BBox e = ext();
    const double inset = spec_.farm_radius + 60;
    if (e.max_x - e.min_x <= 2 * inset || e.max_y - e.min_y <= 2 * inset) {
      if (!types.empty()) throw Error(ErrorCode::PlacementOverflow, "extent too small for any farm");
      return;
    }
    const double spacing = 2 * spec_.link_distance;
    SpatialIndex centers(spacing);
    std::vector<Point> center_list;
    SpatialIndex barn_index(250.0);
    std::int64_t next_barn = 1;
    const std::size_t max_attempts = 2000 + 500 * types.size();
    std::size_t attempts = 0;

    for (std::size_t fi = 0; fi < types.size(); ++fi) {
      const ProductionType type = types[fi];
      bool placed = false;
      while (!placed) {
        if (++attempts > max_attempts)
          throw Error(ErrorCode::PlacementOverflow, "placed " + std::to_string(fi) + " of " +
                                                        std::to_string(types.size()) + " farms");
        const Point c{uniform(rng_, e.min_x + inset, e.max_x - inset), uniform(rng_, e.min_y + inset, e.max_y - inset)};
        const int code = landcover_at(c);
        if (code != 81 && code != 82) continue;
        if (!far_from_towns(c, 600)) continue;
        bool crowded = false;
        for (auto id : centers.query({c.x - spacing, c.y - spacing, c.x + spacing, c.y + spacing}))
          crowded = crowded || distance(center_list[static_cast<std::size_t>(id)], c) <= spacing;
        if (crowded) continue;

        const double angle = uniform(rng_, 0, std::numbers::pi);
        std::vector<Ring> rings;
        std::vector<std::pair<double, double>> dims;
        for (int b = 0; b < counts[fi]; ++b) {
          bool ok = false;
          for (int tries = 0; tries < 200 && !ok; ++tries) {
            const auto [l, w] = barn_dims(type);
            Point bc = c;
            if (!rings.empty()) {
              // Next to a random earlier barn, side by side or end to end.
              const auto k = std::uniform_int_distribution<std::size_t>(0, rings.size() - 1)(rng_);
              const Point kc = centroid(rings[k]);
              const auto [kl, kw] = dims[k];
              const Point u{std::cos(angle), std::sin(angle)}, n{-u.y, u.x};
              const double gap = uniform(rng_, spec_.barn_gap_min, spec_.barn_gap_max);
              const double sign = uniform(rng_, 0, 1) < 0.5 ? -1 : 1;
              if (uniform(rng_, 0, 1) < 0.7)
                bc = kc + n * (sign * (kw / 2 + w / 2 + gap)) + u * uniform(rng_, -0.3 * kl, 0.3 * kl);
              else
                bc = kc + u * (sign * (kl / 2 + l / 2 + gap)) + n * uniform(rng_, -0.3 * kw, 0.3 * kw);
            }
            const Ring r = oriented_rect(bc, l, w, angle);
            if (distance(bc, c) > spec_.farm_radius) continue;
            bool clear = true;
            for (const auto& o : rings) clear = clear && ring_distance(r, o) >= spec_.barn_gap_min;
            if (!clear || road_distance(r) < spec_.road_clearance) continue;
            rings.push_back(r);
            dims.emplace_back(l, w);
            ok = true;
          }
          if (!ok) break;
        }
        if (rings.size() != static_cast<std::size_t>(counts[fi])) continue;

        PlantedFarm f;
        f.id = static_cast<std::int64_t>(gt_.farms.size()) + 1;
        f.type = type;
        std::vector<std::string> raw;
        for (const auto& [label, t] : labels)
          if (t == type) raw.push_back(label);
        f.raw_label = raw[std::uniform_int_distribution<std::size_t>(0, raw.size() - 1)(rng_)];
        f.center = c;
        f.state = gt_.state_of(c);
        for (auto& r : rings) {
          PlantedBarn b{next_barn++, f.id, type, std::move(r)};
          f.barn_ids.push_back(b.id);
          f.total_area_m2 += polygon_area(b.ring);
          barn_index.insert(b.id, b.ring.bbox());
          gt_.barns.push_back(std::move(b));
        }
        const double noise = spec_.noise.capacity_log_sd > 0
                                 ? std::exp(std::normal_distribution<double>(0, spec_.noise.capacity_log_sd)(rng_))
                                 : 1.0;
        f.capacity = spec_.shapes[static_cast<int>(type)].pigs_per_m2 * f.total_area_m2 * noise;
        centers.insert(static_cast<std::int64_t>(center_list.size()), BBox{c.x, c.y, c.x, c.y});
        center_list.push_back(c);
        gt_.farms.push_back(std::move(f));
        placed = true;
      }
    }
    barn_index_ = std::move(barn_index);
  }

  bool clear_of_barns(const Ring& r, double margin) const {
    for (auto id : barn_index_.query_exact(grown(r.bbox(), margin)))
      if (ring_distance(r, gt_.barns[static_cast<std::size_t>(id - 1)].ring) < margin) return false;
    return true;
  }

  void place_distractors() {
    struct KindShape {
      double median_area, area_sd, lo, hi, median_aspect, aspect_sd;
    };
    const KindShape shapes[3] = {{4500, 0.5, 1500, 20000, 1.8, 0.3},
                                 {220, 0.3, 80, 600, 1.4, 0.2},
                                 {2500, 0.5, 600, 9000, 1.6, 0.35}};
    SpatialIndex placed(250.0);
    const BBox e = ext();
    const double inset = 150;
    for (int k = 0; k < 3; ++k) {
      const auto kind = static_cast<DistractorKind>(k);
      for (int i = 0; i < spec_.distractors[static_cast<std::size_t>(k)]; ++i) {
        bool ok = false;
        for (int tries = 0; tries < 500 && !ok; ++tries) {
          Point c;
          // Crowded towns spill over to roadsides.
          if (!towns_.empty() && tries < 250) {
            const auto& t = towns_[std::uniform_int_distribution<std::size_t>(0, towns_.size() - 1)(rng_)];
            const double r = t.radius * std::sqrt(uniform(rng_, 0, 1)), a = uniform(rng_, 0, 2 * std::numbers::pi);
            c = {t.center.x + r * std::cos(a), t.center.y + r * std::sin(a)};
          } else if (!gt_.roads.empty()) {
            const auto& road = gt_.roads[std::uniform_int_distribution<std::size_t>(0, gt_.roads.size() - 1)(rng_)];
            const auto s = std::uniform_int_distribution<std::size_t>(0, road.line.size() - 2)(rng_);
            const Point a = road.line[s], b = road.line[s + 1];
            const Point along = a + (b - a) * uniform(rng_, 0, 1);
            const double len = distance(a, b);
            const Point n{-(b.y - a.y) / len, (b.x - a.x) / len};
            c = along + n * (uniform(rng_, 0, 1) < 0.5 ? -1 : 1) * uniform(rng_, 20, 150);
          } else {
            c = {uniform(rng_, e.min_x, e.max_x), uniform(rng_, e.min_y, e.max_y)};
          }
          if (c.x < e.min_x + inset || c.x > e.max_x - inset || c.y < e.min_y + inset || c.y > e.max_y - inset) continue;
          const auto& s = shapes[k];
          const double area = std::clamp(lognormal(rng_, s.median_area, s.area_sd), s.lo, s.hi);
          double aspect = lognormal(rng_, s.median_aspect, s.aspect_sd);
          if (aspect < 1) aspect = 1 / aspect;
          const double l = std::sqrt(area * aspect), w = area / l;
          const Ring r = oriented_rect(c, l, w, uniform(rng_, 0, std::numbers::pi));
          if (road_distance(r) < 8 || !clear_of_barns(r, 30)) continue;
          bool clear = true;
          for (auto id : placed.query_exact(grown(r.bbox(), 6)))
            clear = clear && ring_distance(r, gt_.distractors[static_cast<std::size_t>(id)].ring) >= 6;
          if (!clear) continue;
          placed.insert(static_cast<std::int64_t>(gt_.distractors.size()), r.bbox());
          gt_.distractors.push_back({static_cast<std::int64_t>(gt_.distractors.size()) + 1, kind, r});
          ok = true;
        }
        if (!ok)
          throw Error(ErrorCode::PlacementOverflow, "no room for " + std::string(to_string(kind)) + " distractors");
      }
    }
  }

  void place_blobs() {
    const int n = static_cast<int>(std::lround(spec_.noise.fp_blobs_per_km2 * area_km2()));
    const BBox e = ext();
    const double inset = 100;
    for (int i = 0; i < n; ++i) {
      bool ok = false;
      for (int tries = 0; tries < 500 && !ok; ++tries) {
        // Segmenter false positives concentrate on built-up land: half fall
        // in towns, a quarter along roads, the rest anywhere.
        const double context = uniform(rng_, 0, 1);
        Point c{uniform(rng_, e.min_x + inset, e.max_x - inset), uniform(rng_, e.min_y + inset, e.max_y - inset)};
        if (context < 0.5 && !towns_.empty()) {
          const auto& t = towns_[std::uniform_int_distribution<std::size_t>(0, towns_.size() - 1)(rng_)];
          const double r = t.radius * std::sqrt(uniform(rng_, 0, 1)), a = uniform(rng_, 0, 2 * std::numbers::pi);
          c = {t.center.x + r * std::cos(a), t.center.y + r * std::sin(a)};
        } else if (context < 0.75 && !gt_.roads.empty()) {
          const auto& road = gt_.roads[std::uniform_int_distribution<std::size_t>(0, gt_.roads.size() - 1)(rng_)];
          const auto s = std::uniform_int_distribution<std::size_t>(0, road.line.size() - 2)(rng_);
          const Point a = road.line[s], b = road.line[s + 1];
          const double len = distance(a, b);
          const Point n{-(b.y - a.y) / len, (b.x - a.x) / len};
          c = a + (b - a) * uniform(rng_, 0, 1) + n * (uniform(rng_, 0, 1) < 0.5 ? -1 : 1) * uniform(rng_, 15, 200);
        }
        if (c.x < e.min_x + inset || c.x > e.max_x - inset || c.y < e.min_y + inset || c.y > e.max_y - inset) continue;
        // Log-uniform equivalent radius between about 3 and 100 m.
        const double radius = std::exp(uniform(rng_, std::log(3.0), std::log(100.0)));
        const int k = std::uniform_int_distribution<int>(8, 14)(rng_);
        std::vector<double> ang(static_cast<std::size_t>(k));
        for (auto& a : ang) a = uniform(rng_, 0, 2 * std::numbers::pi);
        std::sort(ang.begin(), ang.end());
        std::vector<Point> pts;
        for (double a : ang) {
          const double r = radius * uniform(rng_, 0.7, 1.0);
          pts.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
        }
        Ring ring;
        try {
          ring = Ring(pts);
        } catch (const Error&) {
          continue;
        }
        if (polygon_area(ring) <= 0 || !clear_of_barns(ring, 20)) continue;
        gt_.fp_blobs.push_back(std::move(ring));
        ok = true;
      }
      if (!ok) throw Error(ErrorCode::PlacementOverflow, "no room for false-positive blobs");
    }
  }

  void assign_tags() {
    const std::vector<std::pair<std::string, double>> barn_tags{
        {"barn", 0.35}, {"farm", 0.2}, {"yes", 0.25}, {"farm_auxiliary", 0.1}, {"sty", 0.1}};
    const std::vector<std::pair<std::string, double>> warehouse_tags{
        {"warehouse", 0.4}, {"industrial", 0.3}, {"commercial", 0.2}, {"yes", 0.1}};
    const std::vector<std::pair<std::string, double>> house_tags{{"house", 0.6}, {"residential", 0.2}, {"yes", 0.2}};
    for (const auto& b : gt_.barns)
      if (uniform(rng_, 0, 1) < spec_.barn_tag_rate) gt_.buildings.push_back({b.ring, weighted_pick(rng_, barn_tags)});
    for (const auto& d : gt_.distractors) {
      if (d.kind == DistractorKind::Parking) continue;
      if (uniform(rng_, 0, 1) < spec_.distractor_tag_rate)
        gt_.buildings.push_back(
            {d.ring, weighted_pick(rng_, d.kind == DistractorKind::Warehouse ? warehouse_tags : house_tags)});
    }
  }

  void stamp(std::vector<float>& p, const Ring& r, float value) {
    for (auto [c, row] : rasterize_ring(r, geo_, w_, h_)) {
      float& v = p[row * w_ + c];
      v = std::max(v, value);
    }
  }

  Ring dilated_rect(const Ring& r) const {
    // Rectangles from oriented_rect: grow both sides by the dilation.
    const double d = spec_.noise.dilation_px * spec_.pixel_size;
    if (d == 0) return r;
    const Point c = centroid(r);
    const Point e0 = r[1] - r[0], e1 = r[2] - r[1];
    const double l = std::hypot(e0.x, e0.y), w = std::hypot(e1.x, e1.y);
    return oriented_rect(c, l + 2 * d, w + 2 * d, std::atan2(e0.y, e0.x));
  }

  Ring dilated_blob(const Ring& r) const {
    const double d = spec_.noise.dilation_px * spec_.pixel_size;
    if (d == 0) return r;
    const Point c = centroid(r);
    std::vector<Point> pts;
    for (const auto& p : r.vertices()) {
      const Point v = p - c;
      const double len = std::hypot(v.x, v.y);
      pts.push_back(len > 0 ? c + v * ((len + d) / len) : p);
    }
    return Ring(pts);
  }

  void render() {
    w_ = spec_.grid_width();
    h_ = spec_.grid_height();
    geo_ = spec_.geo();
    const auto& nm = spec_.noise;
    std::vector<float> p(w_ * h_, 0.0f);
    for (const auto& b : gt_.barns) stamp(p, dilated_rect(b.ring), static_cast<float>(nm.barn_probability));
    const std::pair<double, double> ranges[3] = {{0.75, 0.95}, {0.72, 0.9}, {0.72, 0.88}};
    for (const auto& d : gt_.distractors) {
      const auto [lo, hi] = ranges[static_cast<int>(d.kind)];
      stamp(p, dilated_rect(d.ring), static_cast<float>(uniform(rng_, lo, hi)));
    }
    for (const auto& b : gt_.fp_blobs) stamp(p, dilated_blob(b), static_cast<float>(uniform(rng_, 0.72, 0.98)));
    if (nm.blur_radius > 0) box_blur(p, nm.blur_radius);
    if (nm.pixel_sd > 0 || nm.background > 0) {
      Rng noise_rng(spec_.seed ^ 0x9e3779b97f4a7c15ULL);
      std::normal_distribution<float> g(0.0f, static_cast<float>(nm.pixel_sd));
      const auto bg = static_cast<float>(nm.background);
      for (auto& v : p) v = std::clamp(v + bg + (nm.pixel_sd > 0 ? g(noise_rng) : 0.0f), 0.0f, 1.0f);
    }
    gt_.probability = Raster::from_values(w_, h_, geo_, std::move(p));
    gt_.truth = BinaryMask(w_, h_, geo_, 0);
    for (const auto& b : gt_.barns)
      for (auto [c, row] : rasterize_ring(b.ring, geo_, w_, h_)) gt_.truth.at(c, row) = 1;
  }

  void box_blur(std::vector<float>& p, int radius) const {
    std::vector<float> tmp(p.size());
    const auto r = static_cast<std::ptrdiff_t>(radius);
    const auto W = static_cast<std::ptrdiff_t>(w_), H = static_cast<std::ptrdiff_t>(h_);
    std::vector<double> line;
    auto pass = [&](const std::vector<float>& src, std::vector<float>& dst, bool horizontal) {
      const std::ptrdiff_t n = horizontal ? W : H, lines = horizontal ? H : W;
      line.assign(static_cast<std::size_t>(n) + 1, 0.0);
      for (std::ptrdiff_t l = 0; l < lines; ++l) {
        auto idx = [&](std::ptrdiff_t i) { return static_cast<std::size_t>(horizontal ? l * W + i : i * W + l); };
        for (std::ptrdiff_t i = 0; i < n; ++i) line[static_cast<std::size_t>(i) + 1] = line[static_cast<std::size_t>(i)] + src[idx(i)];
        for (std::ptrdiff_t i = 0; i < n; ++i) {
          const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, i - r), b = std::min(n - 1, i + r);
          dst[idx(i)] = static_cast<float>((line[static_cast<std::size_t>(b) + 1] - line[static_cast<std::size_t>(a)]) /
                                           static_cast<double>(b - a + 1));
        }
      }
    };
    pass(p, tmp, true);
    pass(tmp, p, false);
  }

  SceneSpec spec_;
  Rng rng_;
  GroundTruth gt_;
  std::vector<Town> towns_;
  std::unique_ptr<RoadNetwork> roads_;
  SpatialIndex barn_index_{250.0};
  std::size_t w_ = 0, h_ = 0;
  GeoTransform geo_;
};

}  // namespace

GroundTruth generate_scene(const SceneSpec& spec) { return Generator(spec).run(); }

// ---------------------------------------------------------------------------
// Export / import

namespace {

std::string join_ids(const std::vector<std::int64_t>& ids) {
  std::string s;
  for (auto id : ids) s += (s.empty() ? "" : ";") + std::to_string(id);
  return s;
}

Raster mask_raster(const BinaryMask& m) {
  Raster r(m.width, m.height, m.geo, 0.0f);
  r.kind = ValueKind::Category;
  for (std::size_t i = 0; i < m.size(); ++i) r.values[i] = m.values[i];
  return r;
}

}  // namespace

void export_scene(const GroundTruth& gt, const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, "output directory does not exist: " + dir.string());
  write_bgrd(gt.probability, dir / "probability.bgrd");
  write_bgrd(mask_raster(gt.truth), dir / "truth.bgrd");
  write_bgrd(gt.landcover, dir / "landcover.bgrd");
  std::string legend = "code,name\n";
  for (const auto& [code, name] : gt.legend) legend += std::to_string(code) + "," + csv_escape(name) + "\n";
  write_text_atomic(dir / "landcover_legend.csv", legend);

  VectorCollection barns, distractors, blobs, roads, buildings;
  for (const auto& b : gt.barns)
    barns.features.push_back(polygon_feature(b.ring, {{"id", b.id}, {"farm_id", b.farm_id}, {"type", to_string(b.type)}}));
  for (const auto& d : gt.distractors)
    distractors.features.push_back(polygon_feature(d.ring, {{"id", d.id}, {"kind", to_string(d.kind)}}));
  for (std::size_t i = 0; i < gt.fp_blobs.size(); ++i)
    blobs.features.push_back(polygon_feature(gt.fp_blobs[i], {{"id", i + 1}}));
  for (const auto& r : gt.roads) roads.features.push_back(line_feature(r.line, {{"tag", r.tag}}));
  for (const auto& b : gt.buildings) buildings.features.push_back(polygon_feature(b.ring, {{"tag", b.tag}}));
  write_geojson(barns, dir / "barns.geojson");
  write_geojson(distractors, dir / "distractors.geojson");
  write_geojson(blobs, dir / "blobs.geojson");
  write_geojson(roads, dir / "roads.geojson");
  write_geojson(buildings, dir / "buildings.geojson");

  std::ostringstream farms;
  farms << "farm_id,type,raw_label,state,center_x,center_y,n_barns,total_area_m2,capacity,barn_ids\n";
  for (const auto& f : gt.farms)
    farms << f.id << ',' << to_string(f.type) << ',' << csv_escape(f.raw_label) << ',' << csv_escape(f.state) << ','
          << format_number(f.center.x) << ',' << format_number(f.center.y) << ',' << f.barn_ids.size() << ','
          << format_number(f.total_area_m2) << ',' << format_number(f.capacity) << ',' << join_ids(f.barn_ids) << '\n';
  write_text_atomic(dir / "farms.csv", farms.str());

  VectorCollection regions;
  const auto& sp = gt.spec;
  const double band = sp.width_m / static_cast<double>(sp.states.size());
  for (std::size_t i = 0; i < sp.states.size(); ++i) {
    const double x0 = sp.origin.x + band * static_cast<double>(i);
    regions.features.push_back(polygon_feature(
        Ring({{x0, sp.origin.y}, {x0 + band, sp.origin.y}, {x0 + band, sp.origin.y + sp.height_m}, {x0, sp.origin.y + sp.height_m}}),
        {{"state", sp.states[i]}}));
  }
  write_geojson(regions, dir / "regions.geojson");

  std::map<std::string, std::pair<std::size_t, double>> per_state;
  for (const auto& s : sp.states) per_state[s] = {0, 0.0};
  for (const auto& f : gt.farms) {
    per_state[f.state].first += 1;
    per_state[f.state].second += f.capacity;
  }
  std::string counts = "state,farms,population\n";
  for (const auto& [s, v] : per_state)
    counts += csv_escape(s) + "," + std::to_string(v.first) + "," + format_number(v.second) + "\n";
  write_text_atomic(dir / "reference_counts.csv", counts);
  write_text_atomic(dir / "scene.json", to_json(gt.spec).dump(2) + "\n");
}

GroundTruth import_scene(const std::filesystem::path& dir) {
  GroundTruth gt;
  try {
    gt.spec = scene_spec_from_json(json::parse(read_text(dir / "scene.json")));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("scene.json: ") + e.what());
  }
  gt.probability = read_bgrd(dir / "probability.bgrd");
  const Raster truth = read_bgrd(dir / "truth.bgrd");
  gt.truth = BinaryMask(truth.width, truth.height, truth.geo, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) gt.truth.values[i] = truth.values[i] > 0 ? 1 : 0;
  gt.landcover = read_bgrd(dir / "landcover.bgrd");
  gt.legend = parse_legend(read_text(dir / "landcover_legend.csv"));

  for (const auto& f : read_geojson(dir / "barns.geojson").features)
    gt.barns.push_back({f.properties.at("id").get<std::int64_t>(), f.properties.at("farm_id").get<std::int64_t>(),
                        parse_production_type(f.properties.at("type").get<std::string>()), f.ring()});
  for (const auto& f : read_geojson(dir / "distractors.geojson").features)
    gt.distractors.push_back({f.properties.at("id").get<std::int64_t>(),
                              parse_distractor_kind(f.properties.at("kind").get<std::string>()), f.ring()});
  for (const auto& f : read_geojson(dir / "blobs.geojson").features) gt.fp_blobs.push_back(f.ring());
  for (const auto& f : read_geojson(dir / "roads.geojson").features)
    gt.roads.push_back({f.coords, f.properties.value("tag", "")});
  for (const auto& f : read_geojson(dir / "buildings.geojson").features)
    gt.buildings.push_back({f.ring(), f.properties.value("tag", "")});

  const auto t = read_csv(dir / "farms.csv");
  const auto c_id = t.column("farm_id"), c_type = t.column("type"), c_raw = t.column("raw_label"),
             c_state = t.column("state"), c_x = t.column("center_x"), c_y = t.column("center_y"),
             c_area = t.column("total_area_m2"), c_cap = t.column("capacity"), c_barns = t.column("barn_ids");
  for (const auto& row : t.rows) {
    PlantedFarm f;
    f.id = static_cast<std::int64_t>(parse_number(row.at(c_id)));
    f.type = parse_production_type(row.at(c_type));
    f.raw_label = row.at(c_raw);
    f.state = row.at(c_state);
    f.center = {parse_number(row.at(c_x)), parse_number(row.at(c_y))};
    f.total_area_m2 = parse_number(row.at(c_area));
    f.capacity = parse_number(row.at(c_cap));
    for (const auto& id : split(row.at(c_barns), ';'))
      if (!trim(id).empty()) f.barn_ids.push_back(static_cast<std::int64_t>(parse_number(id)));
    gt.farms.push_back(std::move(f));
  }
  return gt;
}

}  // namespace swinemap
