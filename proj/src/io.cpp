#include "swinemap/io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include <unistd.h>

#include "swinemap/error.hpp"
#include "swinemap/textio.hpp"

namespace swinemap {

using nlohmann::json;

namespace {

json coords_json(const std::vector<Point>& pts, bool close) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  if (close && !pts.empty()) a.push_back({pts.front().x, pts.front().y});
  return a;
}

std::vector<Point> parse_coords(const json& a) {
  if (!a.is_array()) throw Error(ErrorCode::FormatError, "coordinates must be an array");
  std::vector<Point> out;
  for (const auto& p : a) {
    if (!p.is_array() || p.size() < 2 || !p[0].is_number() || !p[1].is_number())
      throw Error(ErrorCode::FormatError, "coordinate must be [x, y]");
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

}  // namespace

VectorFeature polygon_feature(const Ring& ring, json properties) {
  return {GeometryKind::Polygon, ring.vertices(), std::move(properties)};
}

VectorFeature line_feature(std::vector<Point> line, json properties) {
  return {GeometryKind::LineString, std::move(line), std::move(properties)};
}

std::string to_geojson(const VectorCollection& c) {
  json doc = {{"type", "FeatureCollection"}, {"crs_note", c.crs_note}, {"features", json::array()}};
  for (const auto& f : c.features) {
    json g;
    if (f.kind == GeometryKind::Polygon) {
      g = {{"type", "Polygon"}, {"coordinates", json::array({coords_json(f.coords, true)})}};
    } else {
      g = {{"type", "LineString"}, {"coordinates", coords_json(f.coords, false)}};
    }
    doc["features"].push_back({{"type", "Feature"}, {"geometry", g}, {"properties", f.properties}});
  }
  return doc.dump() + "\n";
}

VectorCollection parse_geojson(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection")
    throw Error(ErrorCode::FormatError, "expected a FeatureCollection");
  VectorCollection c;
  c.crs_note = doc.value("crs_note", "");
  if (!doc.contains("features") || !doc["features"].is_array()) throw Error(ErrorCode::FormatError, "missing features");
  for (const auto& f : doc["features"]) {
    if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object())
      throw Error(ErrorCode::FormatError, "feature without geometry");
    const auto& g = f["geometry"];
    const std::string type = g.value("type", "");
    VectorFeature vf;
    if (f.contains("properties") && f["properties"].is_object()) vf.properties = f["properties"];
    if (!g.contains("coordinates")) throw Error(ErrorCode::FormatError, "geometry without coordinates");
    if (type == "Polygon") {
      const auto& rings = g["coordinates"];
      if (!rings.is_array() || rings.size() != 1)
        throw Error(ErrorCode::FormatError, "polygons must have exactly one ring");
      vf.coords = parse_coords(rings[0]);
      if (vf.coords.size() >= 2 && vf.coords.front() == vf.coords.back()) vf.coords.pop_back();
      if (vf.coords.size() < 3) throw Error(ErrorCode::FormatError, "polygon ring needs three vertices");
    } else if (type == "LineString") {
      vf.kind = GeometryKind::LineString;
      vf.coords = parse_coords(g["coordinates"]);
    } else {
      throw Error(ErrorCode::FormatError, "unsupported geometry type '" + type + "'");
    }
    c.features.push_back(std::move(vf));
  }
  return c;
}

void write_geojson(const VectorCollection& c, const std::filesystem::path& path) {
  write_text_atomic(path, to_geojson(c));
}

VectorCollection read_geojson(const std::filesystem::path& path) { return parse_geojson(read_text(path)); }

std::string_view to_string(Label l) { return l == Label::Barn ? "barn" : "false_positive"; }

Label parse_label(std::string_view s) {
  if (s == "barn") return Label::Barn;
  if (s == "false_positive") return Label::FalsePositive;
  throw Error(ErrorCode::InvalidInput, "label must be 'barn' or 'false_positive', got '" + std::string(s) + "'");
}

std::string to_json_line(const LabelRecord& r) {
  return json{{"candidate_id", r.candidate_id},
              {"label", to_string(r.label)},
              {"annotator", r.annotator},
              {"timestamp", r.timestamp}}
      .dump();
}

LabelRecord parse_label_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("invalid label record: ") + e.what());
  }
  if (!j.is_object() || !j.contains("candidate_id") || !j["candidate_id"].is_number_integer() ||
      !j.contains("label") || !j["label"].is_string())
    throw Error(ErrorCode::FormatError, "label record needs integer candidate_id and string label");
  LabelRecord r;
  r.candidate_id = j["candidate_id"].get<std::int64_t>();
  r.label = parse_label(j["label"].get<std::string>());
  r.annotator = j.value("annotator", "");
  r.timestamp = j.value("timestamp", "");
  return r;
}

void append_label(const std::filesystem::path& path, const LabelRecord& r) {
  const std::string line = to_json_line(r) + "\n";
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for appending");
  const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size() && std::fflush(f) == 0 &&
                  ::fsync(fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  std::vector<LabelRecord> out;
  if (!std::filesystem::exists(path)) return out;
  for (const auto& line : split(read_text(path), '\n'))
    if (!trim(line).empty()) out.push_back(parse_label_line(line));
  return out;
}

std::map<std::int64_t, Label> active_labels(const std::vector<LabelRecord>& records) {
  std::map<std::int64_t, Label> out;
  for (const auto& r : records) out[r.candidate_id] = r.label;
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace swinemap
