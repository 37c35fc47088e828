#pragma once

// Candidate pruning after the classifier vote: overlap dedup, size bounds,
// and building/road tag rules.

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "swinemap/geometry.hpp"

namespace swinemap {

struct Candidate {
  std::int64_t id = 0;
  Ring ring;
};

struct Removal {
  std::int64_t id = 0;
  std::string stage;
  std::string reason;
};

/// Partition of the input: `kept` in input order, one removal per other candidate.
struct FilterOutcome {
  std::vector<Candidate> kept;
  std::vector<Removal> removed;
};

/// Clusters candidates whose interiors overlap (transitively) and keeps the
/// largest member of each, ties to the lowest id.
FilterOutcome dedup_overlaps(std::span<const Candidate> cands);

/// Keeps lo <= area <= hi. Throws InvalidBounds when lo > hi.
FilterOutcome size_filter(std::span<const Candidate> cands, double lo, double hi);

/// Bounds from reference areas at quantiles (q_lo, q_hi).
std::pair<double, double> quantile_bounds(std::span<const double> reference_areas, double q_lo, double q_hi);

struct TaggedFootprint {
  Ring ring;
  std::string tag;
};

struct TaggedRoad {
  std::vector<Point> line;
  std::string tag;
};

struct FilterRules {
  std::set<std::string> exclude_building_tags;
  std::set<std::string> retain_building_tags;
  std::set<std::string> remove_road_tags;

  static FilterRules defaults();
  /// Throws ConfigError if a tag is both excluded and retained.
  void validate() const;
};

/// "key = a, b, c" lines with the three list names; '#' starts a comment.
FilterRules parse_rules(std::string_view text);
FilterRules load_rules(const std::filesystem::path& path);
std::string format_rules(const FilterRules& r);

/// Lower-cased, trimmed values of a possibly multi-valued tag ("a;b").
std::vector<std::string> tag_values(std::string_view tag);

/// Removes a candidate touching an excluded building and no retained one,
/// or touching a listed road. Reasons name the offending tag.
FilterOutcome tag_filter(std::span<const Candidate> cands, std::span<const TaggedFootprint> buildings,
                         std::span<const TaggedRoad> roads, const FilterRules& rules);

/// CSV "id,stage,reason".
std::string removal_report_csv(std::span<const Removal> removed);

}  // namespace swinemap
