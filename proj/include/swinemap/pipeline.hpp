#pragma once

// Workflow stages behind the command line: candidate extraction, filter
// training and voting, farm aggregation, type and population models,
// evaluation and reports. Every stage reads and writes files so runs can be
// resumed and inspected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swinemap/farms.hpp"
#include "swinemap/features.hpp"
#include "swinemap/filters.hpp"
#include "swinemap/forest.hpp"
#include "swinemap/io.hpp"
#include "swinemap/metrics.hpp"
#include "swinemap/raster.hpp"

namespace swinemap {

namespace fs = std::filesystem;

struct PipelineConfig {
  std::vector<fs::path> probability;  // BGRD probability rasters
  fs::path landcover;                 // BGRD category raster
  fs::path landcover_legend;          // "code,name" CSV
  fs::path roads;                     // LineStrings with a "tag" property
  fs::path buildings;                 // optional; Polygons with a "tag" property
  fs::path regions;                   // optional; Polygons with a "state" property
  std::string default_state = "all";
  fs::path reference_barns;   // Polygons with "id" and "farm_id"
  fs::path reference_farms;   // CSV with farm_id, raw_label, capacity
  fs::path reference_counts;  // CSV with state, farms, population
  fs::path truth_mask;        // optional BGRD 0/1 raster for segmentation metrics
  fs::path labels;            // label log (JSONL)
  fs::path rules;             // optional filter rules file
  fs::path model_dir;
  fs::path out_dir;

  double threshold = 0.7;
  std::vector<double> buffer_radii = kDefaultBufferRadii;
  double block_size = 25000;
  int folds = 5;
  double link_distance = 500;
  std::optional<double> size_min, size_max;  // explicit bounds win over quantiles
  double size_q_lo = 0.1, size_q_hi = 0.9;
  HyperGrid grid;
  double tile_size = 512;  // meters, snapped to whole pixels, for the threshold sweep
  std::optional<std::uint64_t> seed;

  /// Throws ConfigError for out-of-range values or a missing seed.
  void validate() const;
  std::uint64_t stage_seed(std::uint64_t offset) const { return *seed + offset; }
};

/// Stage-specific random streams derive from the config seed by these offsets.
inline constexpr std::uint64_t kFilterSeedOffset = 1000;
inline constexpr std::uint64_t kTypeSeedOffset = 2000;
inline constexpr std::uint64_t kPopulationSeedOffset = 3000;

struct StageCounts {
  std::string state;
  std::size_t predicted = 0;
  std::size_t after_vote = 0;
  std::size_t after_geometric = 0;
  std::size_t after_tag = 0;
};

/// Per-state rows (sorted) followed by a "total" row.
struct StageReport {
  std::vector<StageCounts> rows;
  bool monotone() const;
};
std::string stage_report_csv(const StageReport& r);
StageReport parse_stage_report_csv(std::string_view text);

/// Ancillary layers shared by all stages.
struct SceneInputs {
  LandCover landcover;
  RoadNetwork road_network;
  std::vector<TaggedRoad> roads;
  std::vector<TaggedFootprint> buildings;
  std::vector<std::pair<Ring, std::string>> regions;
  std::string default_state;

  std::string state_of(Point p) const;
};
SceneInputs load_scene_inputs(const PipelineConfig& cfg);

/// Threshold, 8-connected components and boundary tracing over every raster;
/// ids run from 1 in raster then component order.
std::vector<Candidate> extract_candidates(const std::vector<Raster>& probability, double threshold);

/// Feature rows for candidates; those outside land-cover coverage are
/// reported in `dropped` with stage "features".
FeatureTable candidate_features(const std::vector<Candidate>& cands, const SceneInputs& in,
                                std::span<const double> radii, std::vector<Removal>& dropped);

struct ReferenceBarn {
  std::int64_t id = 0;
  std::int64_t farm_id = 0;
  Ring ring;
};
struct ReferenceFarm {
  std::int64_t id = 0;
  std::string raw_label;
  double capacity = 0;
};
std::vector<ReferenceBarn> load_reference_barns(const fs::path& path);
std::vector<ReferenceFarm> load_reference_farms(const fs::path& path);
std::map<std::string, ReferenceCounts> load_reference_counts(const fs::path& path);

/// One-to-one matching: a pair is admissible when the candidate polygon
/// contains the reference centroid; pairs are taken greedily by centroid
/// distance. Returns (candidate index, reference index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> match_to_reference(const std::vector<Candidate>& cands,
                                                                    const std::vector<Ring>& reference);

/// Barn for matched candidates, false_positive for the rest.
std::vector<LabelRecord> labels_from_reference(const std::vector<Candidate>& cands, const std::vector<Ring>& reference,
                                               const std::string& annotator = "reference");

struct TrainReport {
  CvResult cv;
  ForestParams final_params;              // best mean CV config, refit on all rows
  std::vector<std::size_t> class_counts;  // classifier tasks
  std::size_t rows = 0;
};

/// Filter models: one per spatial fold, written as filter_fold_<k>.model,
/// with filter_cv.csv, filter_folds.csv and filter_importance.csv.
TrainReport cmd_train_filter(const PipelineConfig& cfg);
/// Production-type classifier on reference farms: type.model plus reports.
TrainReport cmd_train_type(const PipelineConfig& cfg);
/// Capacity regressor on reference farms: population.model plus reports.
TrainReport cmd_train_pop(const PipelineConfig& cfg);

/// Candidate polygons and their feature rows written to cfg.out_dir
/// (candidates.geojson, features.csv) without any model; returns the count.
std::size_t cmd_candidates(const PipelineConfig& cfg);

struct RunResult {
  StageReport report;
  std::vector<Candidate> kept;
  std::vector<Farm> farms;
};

/// Full detection run into cfg.out_dir. An "INCOMPLETE" marker exists in the
/// output directory until every file has been written.
RunResult cmd_run(const PipelineConfig& cfg);

struct EvalResult {
  std::vector<metrics::MetricRow> rows;
  double value(const std::string& metric) const;
};

/// Scores a finished run against the reference layers; writes eval.csv and,
/// with a truth mask, sweep.csv.
EvalResult cmd_eval(const PipelineConfig& cfg);

/// Benchmark and type-distribution tables from a finished run.
void cmd_report(const PipelineConfig& cfg);

/// Writes reference-derived labels for the candidates in cfg.out_dir into
/// cfg.labels, extracting the candidates first when absent.
std::size_t cmd_label_from_reference(const PipelineConfig& cfg);

/// Summary of the label log against a candidate set.
struct LabelCounts {
  std::size_t barn = 0, false_positive = 0;
};
LabelCounts label_counts(const fs::path& labels);

}  // namespace swinemap
