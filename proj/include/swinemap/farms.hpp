#pragma once

// Barn-to-farm grouping, farm descriptors, production type and population.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swinemap/features.hpp"
#include "swinemap/filters.hpp"
#include "swinemap/forest.hpp"
#include "swinemap/geometry.hpp"

namespace swinemap {

enum class ProductionType { Sow = 0, Nursery = 1, Finisher = 2, BoarStud = 3 };
inline constexpr std::array<ProductionType, 4> kProductionTypes{ProductionType::Sow, ProductionType::Nursery,
                                                               ProductionType::Finisher, ProductionType::BoarStud};

std::string_view to_string(ProductionType t);
/// Accepts the canonical names ("boar_stud"); throws UnknownLabel.
ProductionType parse_production_type(std::string_view s);

struct Farm {
  std::int64_t id = 0;
  std::vector<std::int64_t> barn_ids;  // ascending
  Point centroid;                      // mean of barn centroids
  FarmFeatures features;
  std::optional<ProductionType> type;
  std::vector<double> type_probs;
  std::optional<double> population;
  std::string state;
};

/// Single-linkage grouping on barn centroids: barns closer than or exactly
/// `link_distance` end up in one farm. Farm id is the lowest member barn id;
/// farms are returned in ascending id order. Throws InvalidInput when empty.
std::vector<Farm> group_farms(std::span<const Candidate> barns, double link_distance = 500.0);

struct IntraBarnStats {
  double median = 0, q1 = 0, q3 = 0, max = 0;
};

/// Quartiles and maximum of pairwise centroid distances. Throws InsufficientBarns.
IntraBarnStats intra_barn_stats(std::span<const Ring> barns);

/// Raw operator labels to production type, case-insensitive.
class LabelTable {
 public:
  /// The reclassification shipped with the tool.
  static LabelTable builtin();
  /// "raw_label,production_type" CSV with header.
  static LabelTable parse(std::string_view csv);
  static LabelTable load(const std::filesystem::path& path);

  /// Throws UnknownLabel.
  ProductionType lookup(std::string_view raw) const;
  const std::map<std::string, ProductionType>& entries() const { return map_; }

 private:
  std::map<std::string, ProductionType> map_;  // lower-cased keys
};

ProductionType reclassify_label(std::string_view raw);

/// The shipped reclassification rows with their original spelling.
std::vector<std::pair<std::string, ProductionType>> builtin_label_rows();

struct TypePrediction {
  ProductionType type;
  std::vector<double> probs;  // in kProductionTypes order
};

/// Argmax of the classifier vote; ties go to the earlier type. Throws SchemaMismatch.
TypePrediction classify_type(const FarmFeatures& f, const ForestModel& model);

/// Farm columns followed by type_sow, type_nursery, type_finisher, type_boar_stud.
std::vector<std::string> population_columns();
std::vector<double> population_row(const FarmFeatures& f, ProductionType t);

/// Forest mean, clamped at zero. Throws InvalidInput for a farm without
/// positive area, SchemaMismatch for a model on other columns.
double predict_population(const FarmFeatures& f, ProductionType t, const ForestModel& model);

struct ReferenceCounts {
  std::optional<double> farms;
  std::optional<double> population;
};

struct BenchmarkRow {
  std::string state;
  std::size_t barns = 0;
  std::size_t farms = 0;
  double population = 0;
  std::optional<double> reference_farms;
  std::optional<double> reference_population;
  std::optional<double> percent_diff;  // population vs reference
};

/// One row per state (union of predicted and reference states, sorted), plus
/// a "total" row. Farms without a predicted population contribute zero.
std::vector<BenchmarkRow> benchmark_report(std::span<const Farm> farms,
                                           const std::map<std::string, ReferenceCounts>& reference);
/// "state,barns,farms,reference_farms,capacity,reference_population,capacity_m,pct_diff";
/// unknown reference cells are blank.
std::string benchmark_csv(std::span<const BenchmarkRow> rows);
/// Millions rounded to the nearest hundred thousand, e.g. "27.4 M".
std::string format_millions(double pigs);

struct TypeShare {
  std::string state;
  std::size_t farms = 0;
  std::array<double, 4> percent{};  // kProductionTypes order
};

/// Percent of classified farms of each type per state.
std::vector<TypeShare> type_distribution(std::span<const Farm> farms);
std::string type_distribution_csv(std::span<const TypeShare> rows);

}  // namespace swinemap
