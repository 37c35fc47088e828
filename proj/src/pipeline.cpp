#include "swinemap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "swinemap/error.hpp"
#include "swinemap/parallel.hpp"
#include "swinemap/textio.hpp"

namespace swinemap {

using nlohmann::json;

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  if (!seed) fail("seed is required");
  if (!(threshold >= 0 && threshold <= 1)) fail("threshold must lie in [0, 1]");
  if (buffer_radii.empty()) fail("at least one buffer radius");
  for (double r : buffer_radii)
    if (!(r > 0)) fail("buffer radii must be positive");
  if (!(block_size > 0)) fail("block size must be positive");
  if (folds < 2) fail("at least two folds");
  if (!(link_distance > 0)) fail("link distance must be positive");
  if (size_min && size_max && *size_min > *size_max) fail("size_min exceeds size_max");
  if (!(size_q_lo >= 0 && size_q_lo <= size_q_hi && size_q_hi <= 1)) fail("size quantiles out of order");
  if (grid.size() == 0) fail("empty hyper-parameter grid");
  if (!(tile_size > 0)) fail("tile size must be positive");
}

namespace {

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorCode::ConfigError, std::string(what) + " path is not set");
  if (!fs::exists(p)) throw Error(ErrorCode::ConfigError, std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorCode::ConfigError, std::string(what) + " directory is not set");
  if (!fs::is_directory(p)) throw Error(ErrorCode::ConfigError, std::string(what) + " directory not found: " + p.string());
}

/// Runs one stage, prefixing failures with its name. Error codes are kept so
/// configuration problems stay distinguishable from stage failures.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + name + ": " + e.detail());
  }
}

std::string csv_number(double v) { return format_number(v); }

}  // namespace

// ---------------------------------------------------------------------------
// Stage report

bool StageReport::monotone() const {
  for (const auto& r : rows)
    if (r.after_vote > r.predicted || r.after_geometric > r.after_vote || r.after_tag > r.after_geometric) return false;
  return true;
}

std::string stage_report_csv(const StageReport& r) {
  std::ostringstream os;
  os << "state,predicted,after_vote,after_geometric,after_tag\n";
  for (const auto& c : r.rows)
    os << csv_escape(c.state) << ',' << c.predicted << ',' << c.after_vote << ',' << c.after_geometric << ','
       << c.after_tag << '\n';
  return os.str();
}

StageReport parse_stage_report_csv(std::string_view text) {
  const auto t = parse_csv(text);
  StageReport r;
  const auto s = t.column("state"), p = t.column("predicted"), v = t.column("after_vote"),
             g = t.column("after_geometric"), a = t.column("after_tag");
  auto count = [](const std::string& x) { return static_cast<std::size_t>(parse_number(x)); };
  for (const auto& row : t.rows) r.rows.push_back({row.at(s), count(row.at(p)), count(row.at(v)), count(row.at(g)), count(row.at(a))});
  return r;
}

namespace {

StageReport build_stage_report(const std::vector<Candidate>& predicted, const std::set<std::int64_t>& voted,
                               const std::set<std::int64_t>& geometric, const std::set<std::int64_t>& tagged,
                               const std::map<std::int64_t, std::string>& state_of) {
  std::map<std::string, StageCounts> by_state;
  StageCounts total{"total"};
  for (const auto& c : predicted) {
    auto& s = by_state[state_of.at(c.id)];
    s.state = state_of.at(c.id);
    for (auto* row : {&s, &total}) {
      row->predicted += 1;
      row->after_vote += voted.count(c.id);
      row->after_geometric += geometric.count(c.id);
      row->after_tag += tagged.count(c.id);
    }
  }
  StageReport r;
  for (auto& [k, v] : by_state) r.rows.push_back(v);
  r.rows.push_back(total);
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Inputs

std::string SceneInputs::state_of(Point p) const {
  for (const auto& [ring, state] : regions)
    if (locate(p, ring) != Location::Outside) return state;
  return default_state;
}

SceneInputs load_scene_inputs(const PipelineConfig& cfg) {
  require_file(cfg.landcover, "land cover raster");
  require_file(cfg.landcover_legend, "land cover legend");
  require_file(cfg.roads, "roads");
  if (!cfg.buildings.empty()) require_file(cfg.buildings, "buildings");
  if (!cfg.regions.empty()) require_file(cfg.regions, "regions");

  std::vector<TaggedRoad> roads;
  std::vector<Segment> segs;
  for (const auto& f : read_geojson(cfg.roads).features) {
    if (f.kind != GeometryKind::LineString) throw Error(ErrorCode::FormatError, "roads must be LineStrings");
    roads.push_back({f.coords, f.properties.value("tag", "")});
    for (std::size_t i = 0; i + 1 < f.coords.size(); ++i) segs.push_back({f.coords[i], f.coords[i + 1]});
  }
  std::vector<TaggedFootprint> buildings;
  if (!cfg.buildings.empty())
    for (const auto& f : read_geojson(cfg.buildings).features) {
      if (f.kind != GeometryKind::Polygon) throw Error(ErrorCode::FormatError, "buildings must be Polygons");
      buildings.push_back({f.ring(), f.properties.value("tag", "")});
    }
  std::vector<std::pair<Ring, std::string>> regions;
  if (!cfg.regions.empty())
    for (const auto& f : read_geojson(cfg.regions).features) {
      if (f.kind != GeometryKind::Polygon) throw Error(ErrorCode::FormatError, "regions must be Polygons");
      regions.emplace_back(f.ring(), f.properties.value("state", cfg.default_state));
    }
  return SceneInputs{load_landcover(cfg.landcover, cfg.landcover_legend),
                     RoadNetwork(std::move(segs)),
                     std::move(roads),
                     std::move(buildings),
                     std::move(regions),
                     cfg.default_state};
}

std::vector<Candidate> extract_candidates(const std::vector<Raster>& probability, double threshold_value) {
  std::vector<Candidate> out;
  std::int64_t next = 1;
  for (const auto& p : probability) {
    const auto labels = connected_components(threshold(p, threshold_value), Connectivity::Eight);
    for (auto& c : polygonize(labels, Connectivity::Eight)) out.push_back({next++, std::move(c.ring)});
  }
  return out;
}

namespace {

BarnFeatures barn_from_row(std::span<const double> row) {
  BarnFeatures f;
  f.area_m2 = row[0];
  f.length_m = row[1];
  f.width_m = row[2];
  f.aspect_ratio = row[3];
  f.road_distance_m = row[4];
  f.lc.assign(row.begin() + 5, row.end());
  return f;
}

}  // namespace

FeatureTable candidate_features(const std::vector<Candidate>& cands, const SceneInputs& in,
                                std::span<const double> radii, std::vector<Removal>& dropped) {
  std::vector<std::optional<std::vector<double>>> rows(cands.size());
  std::vector<std::string> reasons(cands.size());
  parallel_for(cands.size(), [&](std::size_t i) {
    try {
      rows[i] = to_row(barn_features(cands[i].ring, in.road_network, in.landcover, radii));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutOfCoverage) throw;
      reasons[i] = "out of land-cover coverage";
    }
  });
  FeatureTable t;
  t.columns = barn_columns(in.landcover, radii);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (rows[i]) t.add(cands[i].id, std::move(*rows[i]));
    else dropped.push_back({cands[i].id, "features", reasons[i]});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Reference layers

std::vector<ReferenceBarn> load_reference_barns(const fs::path& path) {
  require_file(path, "reference barns");
  std::vector<ReferenceBarn> out;
  for (const auto& f : read_geojson(path).features) {
    if (f.kind != GeometryKind::Polygon) throw Error(ErrorCode::FormatError, "reference barns must be Polygons");
    if (!f.properties.contains("id") || !f.properties.contains("farm_id"))
      throw Error(ErrorCode::FormatError, "reference barns need id and farm_id properties");
    out.push_back({f.properties["id"].get<std::int64_t>(), f.properties["farm_id"].get<std::int64_t>(), f.ring()});
  }
  return out;
}

std::vector<ReferenceFarm> load_reference_farms(const fs::path& path) {
  require_file(path, "reference farms");
  const auto t = read_csv(path);
  const auto id = t.column("farm_id"), raw = t.column("raw_label"), cap = t.column("capacity");
  std::vector<ReferenceFarm> out;
  for (const auto& row : t.rows)
    out.push_back({static_cast<std::int64_t>(parse_number(row.at(id))), row.at(raw), parse_number(row.at(cap))});
  return out;
}

std::map<std::string, ReferenceCounts> load_reference_counts(const fs::path& path) {
  require_file(path, "reference counts");
  const auto t = read_csv(path);
  const auto s = t.column("state"), f = t.column("farms"), p = t.column("population");
  std::map<std::string, ReferenceCounts> out;
  auto opt = [](const std::string& v) -> std::optional<double> {
    if (trim(v).empty()) return std::nullopt;
    return parse_number(v);
  };
  for (const auto& row : t.rows) out[row.at(s)] = {opt(row.at(f)), opt(row.at(p))};
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> match_to_reference(const std::vector<Candidate>& cands,
                                                                    const std::vector<Ring>& reference) {
  SpatialIndex idx(250.0);
  for (std::size_t i = 0; i < cands.size(); ++i) idx.insert(static_cast<std::int64_t>(i), cands[i].ring.bbox());
  struct Pair {
    double d;
    std::size_t c, r;
  };
  std::vector<Pair> pairs;
  for (std::size_t r = 0; r < reference.size(); ++r) {
    const Point rc = centroid(reference[r]);
    for (auto ci : idx.query_exact({rc.x, rc.y, rc.x, rc.y})) {
      const auto c = static_cast<std::size_t>(ci);
      if (locate(rc, cands[c].ring) == Location::Outside) continue;
      pairs.push_back({distance(rc, centroid(cands[c].ring)), c, r});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.d, a.c, a.r) < std::tie(b.d, b.c, b.r);
  });
  std::vector<char> used_c(cands.size(), 0), used_r(reference.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& p : pairs) {
    if (used_c[p.c] || used_r[p.r]) continue;
    used_c[p.c] = used_r[p.r] = 1;
    out.emplace_back(p.c, p.r);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<LabelRecord> labels_from_reference(const std::vector<Candidate>& cands, const std::vector<Ring>& reference,
                                               const std::string& annotator) {
  std::vector<char> matched(cands.size(), 0);
  for (auto [c, r] : match_to_reference(cands, reference)) matched[c] = 1;
  std::vector<LabelRecord> out;
  for (std::size_t i = 0; i < cands.size(); ++i)
    out.push_back({cands[i].id, matched[i] ? Label::Barn : Label::FalsePositive, annotator, ""});
  return out;
}

LabelCounts label_counts(const fs::path& labels) {
  LabelCounts c;
  for (const auto& [id, l] : active_labels(read_labels(labels))) (l == Label::Barn ? c.barn : c.false_positive) += 1;
  return c;
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<Raster> load_probability(const PipelineConfig& cfg) {
  if (cfg.probability.empty()) throw Error(ErrorCode::ConfigError, "no probability rasters given");
  std::vector<Raster> out;
  for (const auto& p : cfg.probability) {
    require_file(p, "probability raster");
    out.push_back(read_bgrd(p));
  }
  return out;
}

std::vector<ForestParams> grid_points(const HyperGrid& g) {
  std::vector<ForestParams> out;
  for (int n : g.n_trees)
    for (int d : g.max_depth)
      for (int s : g.min_split)
        for (int l : g.min_leaf)
          for (auto m : g.max_features) out.push_back({n, d, s, l, m});
  return out;
}

/// Config with the best mean CV score over used folds; ties to fewer trees,
/// then shallower depth (0 = unlimited counts as deepest).
ForestParams best_mean_config(const CvResult& cv, const HyperGrid& grid, const std::string& label) {
  std::set<int> used;
  for (const auto& f : cv.folds)
    if (!f.skipped) used.insert(f.fold);
  const auto points = grid_points(grid);
  std::optional<ForestParams> best;
  double best_score = -std::numeric_limits<double>::infinity();
  auto depth_key = [](int d) { return d == 0 ? std::numeric_limits<int>::max() : d; };
  for (const auto& p : points) {
    const std::string key = (label.empty() ? "" : label + ";") + p.describe();
    double sum = 0;
    int n = 0;
    for (const auto& r : cv.rows)
      if (r.config == key && used.count(r.fold)) {
        sum += cv.task == Task::Classifier ? r.scores.f1 : r.scores.r2;
        ++n;
      }
    if (n == 0) continue;
    const double score = sum / n;
    const bool better = !best || score > best_score ||
                        (score == best_score && (p.n_trees < best->n_trees ||
                                                 (p.n_trees == best->n_trees && depth_key(p.max_depth) < depth_key(best->max_depth))));
    if (better) {
      best = p;
      best_score = score;
    }
  }
  if (!best) throw Error(ErrorCode::InsufficientBlocks, "every fold was skipped");
  return *best;
}

std::string folds_csv(const CvResult& cv) {
  std::ostringstream os;
  os << "fold,skipped,reason,best_config,accuracy,precision,recall,f1,r2,rmse\n";
  for (const auto& f : cv.folds) {
    os << f.fold << ',' << (f.skipped ? 1 : 0) << ',' << csv_escape(f.skip_reason) << ','
       << csv_escape(f.skipped ? "" : f.best.describe());
    const auto& s = f.test;
    for (double v : {s.accuracy, s.precision, s.recall, s.f1, s.r2, s.rmse}) os << ',' << (f.skipped ? "" : csv_number(v));
    os << '\n';
  }
  return os.str();
}

std::string importance_csv(const std::vector<std::pair<std::string, const ForestModel*>>& models) {
  std::ostringstream os;
  os << "model,feature,importance\n";
  for (const auto& [name, m] : models) {
    const auto imp = m->importance();
    for (std::size_t i = 0; i < imp.size(); ++i)
      os << csv_escape(name) << ',' << csv_escape(m->columns[i]) << ',' << csv_number(imp[i]) << '\n';
  }
  return os.str();
}

void prepare_model_dir(const PipelineConfig& cfg) {
  if (cfg.model_dir.empty()) throw Error(ErrorCode::ConfigError, "model directory is not set");
  fs::create_directories(cfg.model_dir);
}

struct FarmRows {
  Dataset type_data, pop_data;
  std::vector<std::int64_t> farm_ids;
};

FarmRows reference_farm_rows(const PipelineConfig& cfg) {
  const auto barns = load_reference_barns(cfg.reference_barns);
  const auto farms = load_reference_farms(cfg.reference_farms);
  const auto in = load_scene_inputs(cfg);
  std::vector<std::optional<BarnFeatures>> feats(barns.size());
  parallel_for(barns.size(), [&](std::size_t i) {
    try {
      feats[i] = barn_features(barns[i].ring, in.road_network, in.landcover, cfg.buffer_radii);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutOfCoverage) throw;
    }
  });
  std::map<std::int64_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < barns.size(); ++i) members[barns[i].farm_id].push_back(i);
  FarmRows out;
  out.type_data.columns = farm_columns();
  out.type_data.n_classes = 4;
  out.pop_data.columns = population_columns();
  for (const auto& f : farms) {
    auto it = members.find(f.id);
    if (it == members.end()) continue;
    std::vector<BarnFeatures> bf;
    Point c{};
    bool covered = true;
    for (auto i : it->second) {
      covered = covered && feats[i].has_value();
      if (feats[i]) bf.push_back(*feats[i]);
      c = c + centroid(barns[i].ring);
    }
    if (!covered) continue;
    c = c * (1.0 / static_cast<double>(it->second.size()));
    const auto ff = farm_features(bf);
    const auto type = reclassify_label(f.raw_label);
    out.type_data.add(to_row(ff), static_cast<double>(type), c);
    out.pop_data.add(population_row(ff, type), f.capacity, c);
    out.farm_ids.push_back(f.id);
  }
  return out;
}

TrainReport train_final(const PipelineConfig& cfg, const Dataset& d, Task task, std::uint64_t offset,
                        const std::string& name) {
  const auto seed = cfg.stage_seed(offset);
  TrainReport rep;
  rep.rows = d.rows();
  if (task == Task::Classifier) {
    rep.class_counts.assign(static_cast<std::size_t>(d.n_classes), 0);
    for (double y : d.y) rep.class_counts[static_cast<std::size_t>(y)] += 1;
  }
  const auto blocks = spatial_blocks(d.locations, cfg.block_size, cfg.folds, seed);
  rep.cv = grid_search_cv(d, task, blocks, cfg.grid, seed, name);
  rep.final_params = best_mean_config(rep.cv, cfg.grid, name);
  const auto model = fit_forest(d, task, rep.final_params, seed);
  save_model(model, cfg.model_dir / (name + ".model"));
  write_text_atomic(cfg.model_dir / (name + "_cv.csv"), cv_rows_csv(rep.cv));
  write_text_atomic(cfg.model_dir / (name + "_folds.csv"), folds_csv(rep.cv));
  std::vector<std::pair<std::string, const ForestModel*>> models{{name, &model}};
  for (const auto& f : rep.cv.folds)
    if (!f.skipped) models.emplace_back(name + "_fold_" + std::to_string(f.fold), &f.model);
  write_text_atomic(cfg.model_dir / (name + "_importance.csv"), importance_csv(models));
  return rep;
}

}  // namespace

TrainReport cmd_train_filter(const PipelineConfig& cfg) {
  cfg.validate();
  require_file(cfg.labels, "labels");
  prepare_model_dir(cfg);
  const auto probability = stage("load", [&] { return load_probability(cfg); });
  const auto in = stage("load", [&] { return load_scene_inputs(cfg); });
  const auto cands = stage("candidates", [&] { return extract_candidates(probability, cfg.threshold); });
  std::vector<Removal> dropped;
  const auto table = stage("features", [&] { return candidate_features(cands, in, cfg.buffer_radii, dropped); });
  const auto labels = active_labels(read_labels(cfg.labels));

  std::map<std::int64_t, Point> where;
  for (const auto& c : cands) where[c.id] = centroid(c.ring);
  Dataset d;
  d.columns = table.columns;
  d.n_classes = 2;
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto it = labels.find(table.ids[i]);
    if (it == labels.end()) continue;
    d.add(table.rows[i], it->second == Label::Barn ? 1.0 : 0.0, where.at(table.ids[i]));
  }
  TrainReport rep;
  rep.rows = d.rows();
  rep.class_counts = {0, 0};
  for (double y : d.y) rep.class_counts[static_cast<std::size_t>(y)] += 1;
  const auto need = static_cast<std::size_t>(cfg.folds);
  if (rep.class_counts[0] < need || rep.class_counts[1] < need)
    throw Error(ErrorCode::MissingClass, "insufficient labels: barn=" + std::to_string(rep.class_counts[1]) +
                                             " false_positive=" + std::to_string(rep.class_counts[0]) +
                                             "; need at least " + std::to_string(need) + " of each");

  const auto seed = cfg.stage_seed(kFilterSeedOffset);
  const auto blocks = stage("folds", [&] { return spatial_blocks(d.locations, cfg.block_size, cfg.folds, seed); });
  rep.cv = stage("grid search", [&] { return grid_search_cv(d, Task::Classifier, blocks, cfg.grid, seed, "filter"); });
  rep.final_params = best_mean_config(rep.cv, cfg.grid, "filter");

  // Stale fold models from an earlier run must not join the vote.
  for (const auto& e : fs::directory_iterator(cfg.model_dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("filter_fold_", 0) == 0 && e.path().extension() == ".model") fs::remove(e.path());
  }
  std::vector<std::pair<std::string, const ForestModel*>> models;
  for (const auto& f : rep.cv.folds) {
    if (f.skipped) continue;
    const std::string name = "filter_fold_" + std::to_string(f.fold);
    save_model(f.model, cfg.model_dir / (name + ".model"));
    models.emplace_back(name, &f.model);
  }
  write_text_atomic(cfg.model_dir / "filter_cv.csv", cv_rows_csv(rep.cv));
  write_text_atomic(cfg.model_dir / "filter_folds.csv", folds_csv(rep.cv));
  write_text_atomic(cfg.model_dir / "filter_importance.csv", importance_csv(models));
  return rep;
}

TrainReport cmd_train_type(const PipelineConfig& cfg) {
  cfg.validate();
  prepare_model_dir(cfg);
  const auto rows = stage("reference farms", [&] { return reference_farm_rows(cfg); });
  return stage("type model", [&] { return train_final(cfg, rows.type_data, Task::Classifier, kTypeSeedOffset, "type"); });
}

TrainReport cmd_train_pop(const PipelineConfig& cfg) {
  cfg.validate();
  prepare_model_dir(cfg);
  const auto rows = stage("reference farms", [&] { return reference_farm_rows(cfg); });
  return stage("population model",
               [&] { return train_final(cfg, rows.pop_data, Task::Regressor, kPopulationSeedOffset, "population"); });
}

// ---------------------------------------------------------------------------
// Run

namespace {

std::vector<ForestModel> load_filter_models(const fs::path& dir) {
  require_dir(dir, "model");
  std::vector<std::pair<int, fs::path>> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("filter_fold_", 0) == 0 && e.path().extension() == ".model")
      found.emplace_back(std::stoi(name.substr(12)), e.path());
  }
  if (found.empty()) throw Error(ErrorCode::ConfigError, "no filter_fold_<k>.model files in " + dir.string());
  std::sort(found.begin(), found.end());
  std::vector<ForestModel> out;
  for (const auto& [k, p] : found) out.push_back(load_model(p));
  return out;
}

json farm_properties(const Farm& f) {
  json p = {{"id", f.id}, {"n_barns", f.barn_ids.size()}, {"barn_ids", f.barn_ids}, {"state", f.state}};
  p["type"] = f.type ? json(std::string(to_string(*f.type))) : json(nullptr);
  p["type_probs"] = f.type_probs;
  p["population"] = f.population ? json(*f.population) : json(nullptr);
  return p;
}

Farm farm_from_properties(const json& p) {
  Farm f;
  f.id = p.at("id").get<std::int64_t>();
  f.barn_ids = p.at("barn_ids").get<std::vector<std::int64_t>>();
  f.state = p.value("state", "");
  if (p.contains("type") && p["type"].is_string()) f.type = parse_production_type(p["type"].get<std::string>());
  if (p.contains("type_probs") && p["type_probs"].is_array()) f.type_probs = p["type_probs"].get<std::vector<double>>();
  if (p.contains("population") && p["population"].is_number()) f.population = p["population"].get<double>();
  return f;
}

Ring farm_outline(const Farm& f, const std::map<std::int64_t, const Ring*>& rings) {
  std::vector<Point> pts;
  for (auto id : f.barn_ids)
    for (const auto& v : rings.at(id)->vertices()) pts.push_back(v);
  auto hull = convex_hull(pts);
  if (hull.size() < 3) return *rings.at(f.barn_ids.front());
  return Ring(std::move(hull));
}

std::pair<double, double> size_bounds(const PipelineConfig& cfg) {
  if (cfg.size_min && cfg.size_max) return {*cfg.size_min, *cfg.size_max};
  if (cfg.reference_barns.empty())
    throw Error(ErrorCode::ConfigError, "size bounds need size_min/size_max or reference barns");
  std::vector<double> areas;
  for (const auto& b : load_reference_barns(cfg.reference_barns)) areas.push_back(polygon_area(b.ring));
  auto [lo, hi] = quantile_bounds(areas, cfg.size_q_lo, cfg.size_q_hi);
  if (cfg.size_min) lo = *cfg.size_min;
  if (cfg.size_max) hi = *cfg.size_max;
  return {lo, hi};
}

std::vector<Candidate> read_candidates(const fs::path& path) {
  std::vector<Candidate> out;
  for (const auto& f : read_geojson(path).features) out.push_back({f.properties.at("id").get<std::int64_t>(), f.ring()});
  return out;
}

std::pair<std::vector<Candidate>, FeatureTable> write_candidates(const PipelineConfig& cfg, const SceneInputs& in,
                                                                 const std::vector<Raster>& probability,
                                                                 std::vector<Removal>& removed) {
  auto cands = stage("candidates", [&] { return extract_candidates(probability, cfg.threshold); });
  VectorCollection vc;
  for (const auto& c : cands)
    vc.features.push_back(polygon_feature(
        c.ring, {{"id", c.id}, {"area_m2", polygon_area(c.ring)}, {"state", in.state_of(centroid(c.ring))}}));
  write_geojson(vc, cfg.out_dir / "candidates.geojson");
  auto table = stage("features", [&] { return candidate_features(cands, in, cfg.buffer_radii, removed); });
  write_text_atomic(cfg.out_dir / "features.csv", to_csv(table));
  return {std::move(cands), std::move(table)};
}

}  // namespace

std::size_t cmd_candidates(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.out_dir.empty()) throw Error(ErrorCode::ConfigError, "output directory is not set");
  const auto in = stage("load", [&] { return load_scene_inputs(cfg); });
  const auto probability = stage("load", [&] { return load_probability(cfg); });
  fs::create_directories(cfg.out_dir);
  std::vector<Removal> dropped;
  return write_candidates(cfg, in, probability, dropped).first.size();
}

RunResult cmd_run(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.out_dir.empty()) throw Error(ErrorCode::ConfigError, "output directory is not set");
  const auto filter_models = stage("load", [&] { return load_filter_models(cfg.model_dir); });
  const auto rules = stage("load", [&] { return cfg.rules.empty() ? FilterRules::defaults() : load_rules(cfg.rules); });
  const auto in = stage("load", [&] { return load_scene_inputs(cfg); });
  const auto probability = stage("load", [&] { return load_probability(cfg); });
  const auto bounds = stage("load", [&] { return size_bounds(cfg); });
  std::optional<ForestModel> type_model, pop_model;
  if (fs::exists(cfg.model_dir / "type.model")) type_model = load_model(cfg.model_dir / "type.model");
  if (fs::exists(cfg.model_dir / "population.model")) pop_model = load_model(cfg.model_dir / "population.model");
  std::map<std::string, ReferenceCounts> reference;
  if (!cfg.reference_counts.empty()) reference = load_reference_counts(cfg.reference_counts);

  fs::create_directories(cfg.out_dir);
  const auto marker = cfg.out_dir / "INCOMPLETE";
  write_text_atomic(marker, "run in progress or failed\n");
  const auto& out = cfg.out_dir;

  std::vector<Removal> removed;
  const auto [cands, table] = write_candidates(cfg, in, probability, removed);
  std::map<std::int64_t, std::string> state_of;
  for (const auto& c : cands) state_of[c.id] = in.state_of(centroid(c.ring));
  std::map<std::int64_t, std::size_t> row_of;
  for (std::size_t i = 0; i < table.size(); ++i) row_of[table.ids[i]] = i;

  // Forest vote.
  std::set<std::int64_t> voted;
  std::vector<Candidate> after_vote;
  stage("vote", [&] {
    for (const auto& m : filter_models) m.check_schema(table.columns);
    std::ostringstream os;
    os << "id";
    for (std::size_t k = 0; k < filter_models.size(); ++k) os << ",p_model_" << (k + 1);
    os << ",votes,retained\n";
    std::vector<std::vector<double>> probs(table.size());
    parallel_for(table.size(), [&](std::size_t i) {
      for (const auto& m : filter_models) probs[i].push_back(m.predict_positive(table.rows[i]));
    });
    for (const auto& c : cands) {
      auto it = row_of.find(c.id);
      if (it == row_of.end()) continue;
      const auto& p = probs[it->second];
      const bool keep = vote_filter(p);
      os << c.id;
      for (double v : p) os << ',' << csv_number(v);
      os << ',' << std::count_if(p.begin(), p.end(), [](double v) { return v >= 0.5; }) << ',' << (keep ? 1 : 0) << '\n';
      if (keep) {
        voted.insert(c.id);
        after_vote.push_back(c);
      } else {
        removed.push_back({c.id, "vote", "rejected by forest vote"});
      }
    }
    write_text_atomic(out / "votes.csv", os.str());
    return 0;
  });

  // Geometric filters.
  const auto geometric = stage("geometric", [&] {
    auto d = dedup_overlaps(after_vote);
    auto s = size_filter(d.kept, bounds.first, bounds.second);
    removed.insert(removed.end(), d.removed.begin(), d.removed.end());
    removed.insert(removed.end(), s.removed.begin(), s.removed.end());
    return s.kept;
  });
  std::set<std::int64_t> geometric_ids;
  for (const auto& c : geometric) geometric_ids.insert(c.id);

  // Tag filter.
  const auto kept = stage("tags", [&] {
    auto t = tag_filter(geometric, in.buildings, in.roads, rules);
    removed.insert(removed.end(), t.removed.begin(), t.removed.end());
    return t.kept;
  });
  std::set<std::int64_t> kept_ids;
  for (const auto& c : kept) kept_ids.insert(c.id);
  write_text_atomic(out / "removals.csv", removal_report_csv(removed));

  RunResult result;
  result.kept = kept;
  result.report = build_stage_report(cands, voted, geometric_ids, kept_ids, state_of);
  write_text_atomic(out / "stage_report.csv", stage_report_csv(result.report));

  // Farms.
  std::vector<Farm> farms;
  if (!kept.empty()) {
    farms = stage("farms", [&] { return group_farms(kept, cfg.link_distance); });
    std::map<std::int64_t, const Ring*> rings;
    for (const auto& c : kept) rings[c.id] = &c.ring;
    stage("farms", [&] {
      parallel_for(farms.size(), [&](std::size_t i) {
        auto& f = farms[i];
        std::vector<BarnFeatures> bf;
        for (auto id : f.barn_ids) bf.push_back(barn_from_row(table.rows[row_of.at(id)]));
        f.features = farm_features(bf);
        f.state = in.state_of(f.centroid);
        if (type_model) {
          auto p = classify_type(f.features, *type_model);
          f.type = p.type;
          f.type_probs = std::move(p.probs);
        }
        if (type_model && pop_model) f.population = std::round(predict_population(f.features, *f.type, *pop_model));
      });
      return 0;
    });
    VectorCollection farm_vc, barn_vc;
    FeatureTable farm_table;
    farm_table.columns = farm_columns();
    std::map<std::int64_t, std::int64_t> farm_of;
    for (const auto& f : farms) {
      farm_vc.features.push_back(polygon_feature(farm_outline(f, rings), farm_properties(f)));
      farm_table.add(f.id, to_row(f.features));
      for (auto id : f.barn_ids) farm_of[id] = f.id;
    }
    for (const auto& c : kept)
      barn_vc.features.push_back(polygon_feature(
          c.ring, {{"id", c.id}, {"farm_id", farm_of.at(c.id)}, {"state", state_of.at(c.id)}, {"area_m2", polygon_area(c.ring)}}));
    write_geojson(farm_vc, out / "farms.geojson");
    write_geojson(barn_vc, out / "barns.geojson");
    write_text_atomic(out / "farm_features.csv", to_csv(farm_table));
  } else {
    write_geojson({}, out / "farms.geojson");
    write_geojson({}, out / "barns.geojson");
    FeatureTable empty;
    empty.columns = farm_columns();
    write_text_atomic(out / "farm_features.csv", to_csv(empty));
  }
  write_text_atomic(out / "benchmark.csv", benchmark_csv(benchmark_report(farms, reference)));
  write_text_atomic(out / "type_distribution.csv", type_distribution_csv(type_distribution(farms)));
  result.farms = std::move(farms);
  fs::remove(marker);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation and reports

double EvalResult::value(const std::string& metric) const {
  for (const auto& r : rows)
    if (r.metric == metric) return r.value;
  throw Error(ErrorCode::InvalidInput, "no metric named " + metric);
}

namespace {

std::vector<Farm> read_farms(const fs::path& path) {
  std::vector<Farm> out;
  for (const auto& f : read_geojson(path).features) out.push_back(farm_from_properties(f.properties));
  return out;
}

void require_run(const PipelineConfig& cfg) {
  require_dir(cfg.out_dir, "output");
  if (fs::exists(cfg.out_dir / "INCOMPLETE"))
    throw Error(ErrorCode::ConfigError, "run in " + cfg.out_dir.string() + " did not finish");
}

}  // namespace

EvalResult cmd_eval(const PipelineConfig& cfg) {
  cfg.validate();
  require_run(cfg);
  EvalResult res;
  auto add = [&](std::string name, double v, std::optional<double> lo = {}, std::optional<double> hi = {}) {
    res.rows.push_back({std::move(name), v, lo, hi});
  };

  // Pixel metrics and the threshold sweep.
  if (!cfg.truth_mask.empty()) {
    stage("segmentation", [&] {
      require_file(cfg.truth_mask, "truth mask");
      const auto probability = load_probability(cfg);
      const Raster t = read_bgrd(cfg.truth_mask);
      const auto& p = probability.front();
      if (!t.same_shape(p)) throw Error(ErrorCode::ShapeMismatch, "truth mask and probability raster differ in shape");
      BinaryMask truth(t.width, t.height, t.geo, 0);
      for (std::size_t i = 0; i < t.size(); ++i) truth.values[i] = t.values[i] > 0.5f ? 1 : 0;
      const auto c = metrics::confusion(threshold(p, cfg.threshold), truth, &p);
      const auto m = metrics::seg_metrics(c);
      add("pixel_accuracy", m.accuracy);
      add("pixel_precision", m.precision);
      add("pixel_recall", m.recall);
      add("pixel_specificity", m.specificity);
      add("pixel_iou", m.iou);
      add("pixel_f1", m.f1);
      add("pixel_f2", m.f2);
      const double px = p.geo.pixel_size;
      const double tile_m = std::max(1.0, std::round(cfg.tile_size / px)) * px;
      const auto ptiles = tile(p, tile_m), ttiles = tile(t, tile_m);
      std::vector<std::pair<Raster, BinaryMask>> pairs;
      for (std::size_t i = 0; i < ptiles.size(); ++i) {
        BinaryMask tm(ttiles[i].width, ttiles[i].height, ttiles[i].geo, 0);
        for (std::size_t k = 0; k < tm.size(); ++k) tm.values[k] = ttiles[i].values[k] > 0.5f ? 1 : 0;
        pairs.emplace_back(ptiles[i], std::move(tm));
      }
      const auto th = metrics::default_sweep_thresholds();
      const auto sweep = metrics::threshold_sweep(pairs, th);
      std::ostringstream os;
      os << "threshold,mean_iou\n";
      for (std::size_t i = 0; i < sweep.thresholds.size(); ++i)
        os << csv_number(sweep.thresholds[i]) << ',' << csv_number(sweep.mean_iou[i]) << '\n';
      write_text_atomic(cfg.out_dir / "sweep.csv", os.str());
      add("sweep_best_threshold", sweep.best_threshold);
      return 0;
    });
  }

  // Barn detection against reference footprints.
  const auto ref_barns = stage("barns", [&] { return load_reference_barns(cfg.reference_barns); });
  std::vector<Ring> ref_rings;
  for (const auto& b : ref_barns) ref_rings.push_back(b.ring);
  const auto cands = read_candidates(cfg.out_dir / "candidates.geojson");
  const auto kept = read_candidates(cfg.out_dir / "barns.geojson");
  const auto raw_match = match_to_reference(cands, ref_rings);
  const auto kept_match = match_to_reference(kept, ref_rings);
  const double n_ref = static_cast<double>(ref_rings.size());
  add("reference_barns", n_ref);
  add("candidates", static_cast<double>(cands.size()));
  add("kept_barns", static_cast<double>(kept.size()));
  add("candidate_recall", n_ref > 0 ? static_cast<double>(raw_match.size()) / n_ref : 0);
  add("barn_recall", n_ref > 0 ? static_cast<double>(kept_match.size()) / n_ref : 0);
  add("barn_precision", kept.empty() ? 0 : static_cast<double>(kept_match.size()) / static_cast<double>(kept.size()));

  // Farm type and capacity against reference farms.
  if (!cfg.reference_farms.empty()) {
    stage("farms", [&] {
      const auto ref_farms = load_reference_farms(cfg.reference_farms);
      std::map<std::int64_t, const ReferenceFarm*> ref_by_id;
      for (const auto& f : ref_farms) ref_by_id[f.id] = &f;
      std::map<std::int64_t, std::int64_t> ref_farm_of_kept;  // kept barn id -> reference farm id
      for (auto [c, r] : kept_match) ref_farm_of_kept[kept[c].id] = ref_barns[r].farm_id;
      const auto farms = read_farms(cfg.out_dir / "farms.geojson");
      add("farms", static_cast<double>(farms.size()));
      add("reference_farms", static_cast<double>(ref_farms.size()));

      // Each detected farm maps to the reference farm holding most of its
      // matched barns; a reference farm keeps its best-supported detection.
      struct Link {
        std::size_t support;
        std::int64_t farm;
        std::size_t detected;
      };
      std::vector<Link> links;
      for (std::size_t i = 0; i < farms.size(); ++i) {
        std::map<std::int64_t, std::size_t> votes;
        for (auto id : farms[i].barn_ids) {
          auto it = ref_farm_of_kept.find(id);
          if (it != ref_farm_of_kept.end()) votes[it->second] += 1;
        }
        if (votes.empty()) continue;
        const auto best = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
          return a.second < b.second || (a.second == b.second && a.first > b.first);
        });
        links.push_back({best->second, best->first, i});
      }
      std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
        return std::tie(b.support, a.farm, a.detected) < std::tie(a.support, b.farm, b.detected);
      });
      std::set<std::int64_t> taken;
      std::vector<double> pred, actual;
      std::size_t typed = 0, type_ok = 0;
      for (const auto& l : links) {
        if (!taken.insert(l.farm).second || !ref_by_id.count(l.farm)) continue;
        const auto& f = farms[l.detected];
        const auto& ref = *ref_by_id.at(l.farm);
        if (f.type) {
          ++typed;
          type_ok += *f.type == reclassify_label(ref.raw_label);
        }
        if (f.population) {
          pred.push_back(*f.population);
          actual.push_back(ref.capacity);
        }
      }
      add("matched_farms", static_cast<double>(taken.size()));
      if (typed > 0) add("type_accuracy", static_cast<double>(type_ok) / static_cast<double>(typed));
      if (pred.size() >= 2) {
        add("population_r2", metrics::r2(pred, actual));
        const auto ci = metrics::rmse_with_ci(pred, actual, 0.95, 1000, cfg.stage_seed(kPopulationSeedOffset));
        add("population_rmse", ci.rmse, ci.lo, ci.hi);
        add("population_pearson", metrics::pearson(pred, actual));
        add("population_within_500", metrics::band_accuracy(pred, actual, 500));
        add("population_within_2000", metrics::band_accuracy(pred, actual, 2000));
      }
      return 0;
    });
  }
  // Trained models applied to the reference farms of this scene, with their
  // reference barns and types as inputs.
  const bool has_pop = fs::exists(cfg.model_dir / "population.model");
  const bool has_type = fs::exists(cfg.model_dir / "type.model");
  if (!cfg.reference_farms.empty() && (has_pop || has_type)) {
    stage("reference models", [&] {
      const auto rows = reference_farm_rows(cfg);
      if (has_type) {
        const auto m = load_model(cfg.model_dir / "type.model");
        m.check_schema(rows.type_data.columns);
        std::size_t ok = 0;
        for (std::size_t i = 0; i < rows.type_data.rows(); ++i) {
          const auto p = m.predict_proba(rows.type_data.row(i));
          const auto best = static_cast<double>(std::max_element(p.begin(), p.end()) - p.begin());
          ok += best == rows.type_data.y[i];
        }
        if (rows.type_data.rows() > 0)
          add("reference_type_accuracy", static_cast<double>(ok) / static_cast<double>(rows.type_data.rows()));
      }
      if (has_pop && rows.pop_data.rows() >= 2) {
        const auto m = load_model(cfg.model_dir / "population.model");
        m.check_schema(rows.pop_data.columns);
        std::vector<double> pred;
        for (std::size_t i = 0; i < rows.pop_data.rows(); ++i)
          pred.push_back(std::max(0.0, m.predict_value(rows.pop_data.row(i))));
        const auto& actual = rows.pop_data.y;
        add("reference_population_r2", metrics::r2(pred, actual));
        const auto ci = metrics::rmse_with_ci(pred, actual, 0.95, 1000, cfg.stage_seed(kPopulationSeedOffset));
        add("reference_population_rmse", ci.rmse, ci.lo, ci.hi);
      }
      return 0;
    });
  }
  write_text_atomic(cfg.out_dir / "eval.csv", metrics::to_csv(res.rows));
  return res;
}

void cmd_report(const PipelineConfig& cfg) {
  require_run(cfg);
  const auto farms = read_farms(cfg.out_dir / "farms.geojson");
  std::map<std::string, ReferenceCounts> reference;
  if (!cfg.reference_counts.empty()) reference = load_reference_counts(cfg.reference_counts);
  write_text_atomic(cfg.out_dir / "benchmark.csv", benchmark_csv(benchmark_report(farms, reference)));
  write_text_atomic(cfg.out_dir / "type_distribution.csv", type_distribution_csv(type_distribution(farms)));
}

std::size_t cmd_label_from_reference(const PipelineConfig& cfg) {
  if (cfg.labels.empty()) throw Error(ErrorCode::ConfigError, "labels path is not set");
  if (!fs::exists(cfg.out_dir / "candidates.geojson")) cmd_candidates(cfg);
  const auto cands = read_candidates(cfg.out_dir / "candidates.geojson");
  std::vector<Ring> ref;
  for (const auto& b : load_reference_barns(cfg.reference_barns)) ref.push_back(b.ring);
  std::string text;
  for (const auto& r : labels_from_reference(cands, ref)) text += to_json_line(r) + "\n";
  write_text_atomic(cfg.labels, text);
  return cands.size();
}

}  // namespace swinemap
