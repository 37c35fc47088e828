#pragma once

// Vector interchange (a GeoJSON subset in projected meters) and the
// append-only label log.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "swinemap/geometry.hpp"

namespace swinemap {

enum class GeometryKind { Polygon, LineString };

/// Polygon coordinates hold the outer ring without the closing vertex.
struct VectorFeature {
  GeometryKind kind = GeometryKind::Polygon;
  std::vector<Point> coords;
  nlohmann::json properties = nlohmann::json::object();

  Ring ring() const { return Ring(coords); }
};

inline const std::string kCrsNote = "projected coordinates in meters";

struct VectorCollection {
  std::string crs_note = kCrsNote;
  std::vector<VectorFeature> features;
};

/// FeatureCollection of Polygon / LineString features. Polygons with holes,
/// other geometry types and malformed documents raise FormatError.
std::string to_geojson(const VectorCollection& c);
VectorCollection parse_geojson(std::string_view text);
void write_geojson(const VectorCollection& c, const std::filesystem::path& path);
VectorCollection read_geojson(const std::filesystem::path& path);

VectorFeature polygon_feature(const Ring& ring, nlohmann::json properties = nlohmann::json::object());
VectorFeature line_feature(std::vector<Point> line, nlohmann::json properties = nlohmann::json::object());

enum class Label { Barn, FalsePositive };
std::string_view to_string(Label l);
/// "barn" or "false_positive"; throws InvalidInput otherwise.
Label parse_label(std::string_view s);

struct LabelRecord {
  std::int64_t candidate_id = 0;
  Label label = Label::Barn;
  std::string annotator;
  std::string timestamp;  // ISO 8601, UTC
  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

std::string to_json_line(const LabelRecord& r);
LabelRecord parse_label_line(std::string_view line);

/// Appends one line and flushes it to disk before returning.
void append_label(const std::filesystem::path& path, const LabelRecord& r);
/// All records in file order; a missing file is an empty log.
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);
/// The last record per candidate.
std::map<std::int64_t, Label> active_labels(const std::vector<LabelRecord>& records);

std::string utc_timestamp();

}  // namespace swinemap
