#pragma once

// Seeded synthetic scenes: farms of rectangular barns, distractor
// structures, roads, land cover, tags, capacities and a noisy probability
// raster standing in for segmentation output.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "swinemap/farms.hpp"
#include "swinemap/features.hpp"
#include "swinemap/filters.hpp"
#include "swinemap/raster.hpp"

namespace swinemap {

struct BarnShape {
  double median_area_m2 = 800;
  double area_log_sd = 0.4;
  double median_aspect = 2.0;
  double aspect_log_sd = 0.4;
  double extra_barns_mean = 1.0;  // barns per farm beyond the first (Poisson mean / allocation weight)
  double pigs_per_m2 = 1.0;       // capacity density
};

enum class DistractorKind { Warehouse = 0, House = 1, Parking = 2 };
std::string_view to_string(DistractorKind k);
DistractorKind parse_distractor_kind(std::string_view s);

struct NoiseModel {
  int blur_radius = 1;               // box blur half width in pixels
  int dilation_px = 1;               // outward growth of every footprint
  double fp_blobs_per_km2 = 1.0;     // false-positive blob rate
  double pixel_sd = 0.04;            // Gaussian pixel noise
  double background = 0.03;          // mean probability off structures
  double barn_probability = 0.95;    // stamped value on barn footprints
  double capacity_log_sd = 0.1;      // multiplicative capacity noise

  static NoiseModel none();
};

struct SceneSpec {
  double width_m = 6000, height_m = 6000;
  Point origin{400000.0, 3900000.0};  // lower-left corner
  double pixel_size = 3.0;
  double landcover_pixel = 30.0;
  double landcover_margin = 5000.0;
  std::array<int, 4> farms_per_type{4, 3, 6, 2};  // production type order
  std::array<BarnShape, 4> shapes = default_shapes();
  int total_barns = 0;  // 0: per-farm counts drawn from the shapes
  int max_barns_per_farm = 12;
  double barn_gap_min = 12, barn_gap_max = 60;  // meters between neighboring barns
  double farm_radius = 240;                     // barn centroids stay this close to the farm center
  double link_distance = 500;                   // farm centers are more than twice this apart
  double road_clearance = 40;
  std::array<int, 3> distractors{10, 20, 10};   // warehouse, house, parking
  double road_km_per_km2 = 0.3;
  double towns_per_km2 = 1.0 / 60.0;
  double town_radius_min = 600, town_radius_max = 1400;
  double patch_km2 = 2.0;                       // mean land-cover patch size
  double barn_tag_rate = 0.3, distractor_tag_rate = 0.5;
  std::vector<std::string> states{"NC"};        // equal-width bands west to east
  NoiseModel noise;
  std::uint64_t seed = 1;

  static std::array<BarnShape, 4> default_shapes();
  /// Throws InvalidInput on a non-integer grid or out-of-range parameters.
  void validate() const;
  std::size_t grid_width() const;
  std::size_t grid_height() const;
  GeoTransform geo() const;
  BBox extent() const;
};

nlohmann::json to_json(const SceneSpec& s);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
SceneSpec scene_spec_from_json(const nlohmann::json& j);

struct PlantedBarn {
  std::int64_t id = 0;
  std::int64_t farm_id = 0;
  ProductionType type = ProductionType::Sow;
  Ring ring;
};

struct PlantedFarm {
  std::int64_t id = 0;
  ProductionType type = ProductionType::Sow;
  std::string raw_label;
  std::string state;
  Point center;
  std::vector<std::int64_t> barn_ids;
  double total_area_m2 = 0;
  double capacity = 0;
};

struct Distractor {
  std::int64_t id = 0;
  DistractorKind kind = DistractorKind::House;
  Ring ring;
};

struct GroundTruth {
  SceneSpec spec;
  std::vector<PlantedBarn> barns;
  std::vector<PlantedFarm> farms;
  std::vector<Distractor> distractors;
  std::vector<Ring> fp_blobs;
  std::vector<TaggedRoad> roads;
  std::vector<TaggedFootprint> buildings;
  Raster landcover;  // category codes
  std::vector<std::pair<int, std::string>> legend;
  Raster probability;
  BinaryMask truth;

  RoadNetwork road_network() const;
  LandCover land_cover() const;
  std::string state_of(Point p) const;
};

/// Deterministic in the spec. Throws PlacementOverflow when the extent cannot
/// hold the requested farms or structures.
GroundTruth generate_scene(const SceneSpec& spec);

/// Writes probability.bgrd, truth.bgrd, landcover.bgrd, landcover_legend.csv,
/// barns.geojson, farms.csv, distractors.geojson, blobs.geojson,
/// roads.geojson, buildings.geojson and scene.json into an existing
/// directory. Throws IoError before writing anything if `dir` is missing.
void export_scene(const GroundTruth& gt, const std::filesystem::path& dir);
GroundTruth import_scene(const std::filesystem::path& dir);

/// Land-cover legend used by generated scenes.
std::vector<std::pair<int, std::string>> synthetic_legend();

}  // namespace swinemap
