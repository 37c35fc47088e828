#pragma once

// Predictor vectors for candidate polygons and farms.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "swinemap/geometry.hpp"
#include "swinemap/raster.hpp"

namespace swinemap {

/// Categorical raster plus its legend. Legend entries are kept in ascending
/// code order, which fixes the column order of proportion features.
class LandCover {
 public:
  LandCover(Raster codes, std::vector<std::pair<int, std::string>> legend);

  const Raster& raster() const { return codes_; }
  std::size_t class_count() const { return names_.size(); }
  const std::vector<std::string>& class_names() const { return names_; }
  const std::vector<int>& class_codes() const { return code_list_; }
  /// Legend slot of a code, or -1 for nodata.
  int slot(float code) const;

 private:
  Raster codes_;
  std::vector<int> code_list_;
  std::vector<std::string> names_;
  std::vector<int> slot_of_code_;
};

/// "code,name" per line; an optional "code,name" header is skipped.
std::vector<std::pair<int, std::string>> parse_legend(std::string_view text);
LandCover load_landcover(const std::filesystem::path& raster, const std::filesystem::path& legend);

/// Class fractions (legend order) over pixels whose centers lie within the
/// disc. Pixels off the raster count as nodata; nodata pixels are left out
/// of the denominator. Throws OutOfCoverage when more than half the disc is
/// nodata, InvalidInput for a non-positive radius.
std::vector<double> landcover_proportions(Point center, double radius, const LandCover& lc);

inline const std::vector<double> kDefaultBufferRadii{500.0, 1000.0, 5000.0};

struct BarnFeatures {
  double area_m2 = 0;
  double length_m = 0;
  double width_m = 0;
  double aspect_ratio = 0;
  double road_distance_m = 0;
  /// Radius-major: lc[r * class_count + c].
  std::vector<double> lc;
};

BarnFeatures barn_features(const Ring& ring, const RoadNetwork& roads, const LandCover& lc,
                           std::span<const double> radii);

/// Column names in row order: geometry, road distance, then lc_<class>_<radius>.
std::vector<std::string> barn_columns(const LandCover& lc, std::span<const double> radii);
std::vector<double> to_row(const BarnFeatures& f);

struct FarmFeatures {
  double n_barns = 0;
  double total_area_m2 = 0;
  double mean_area_m2 = 0, std_area_m2 = 0;
  double mean_aspect = 0, std_aspect = 0;
  double mean_width_m = 0, std_width_m = 0;
  double mean_length_m = 0, std_length_m = 0;
};

/// Totals, means and population standard deviations. Throws EmptyFarm.
FarmFeatures farm_features(std::span<const BarnFeatures> barns);

std::vector<std::string> farm_columns();
std::vector<double> to_row(const FarmFeatures& f);

/// Column-name identity used to tie models to feature tables (FNV-1a, 64 bit).
std::uint64_t schema_hash(std::span<const std::string> columns);

/// Named numeric table with one integer id per row.
struct FeatureTable {
  std::vector<std::string> columns;
  std::vector<std::int64_t> ids;
  std::vector<std::vector<double>> rows;

  void add(std::int64_t id, std::vector<double> row);
  std::size_t size() const { return rows.size(); }
};

/// CSV with header "id,<columns...>"; numbers in shortest round-trip form.
std::string to_csv(const FeatureTable& t);
FeatureTable parse_feature_csv(std::string_view text);

}  // namespace swinemap
