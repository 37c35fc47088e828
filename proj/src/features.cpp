#include "swinemap/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "swinemap/error.hpp"
#include "swinemap/textio.hpp"

namespace swinemap {

namespace {

constexpr int kMaxCode = 65535;

std::string column_token(std::string_view name) {
  std::string out;
  for (char c : to_lower(trim(name))) {
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (alnum) out += c;
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::string radius_token(double r) {
  return std::abs(r - std::round(r)) < 1e-9 ? std::to_string(std::llround(r)) : format_number(r);
}

}  // namespace

LandCover::LandCover(Raster codes, std::vector<std::pair<int, std::string>> legend)
    : codes_(std::move(codes)), slot_of_code_(kMaxCode + 1, -1) {
  std::sort(legend.begin(), legend.end());
  for (const auto& [code, name] : legend) {
    if (code < 0 || code >= kMaxCode) throw Error(ErrorCode::FormatError, "legend code out of range");
    if (slot_of_code_[code] >= 0)
      throw Error(ErrorCode::FormatError, "duplicate legend code " + std::to_string(code));
    slot_of_code_[code] = static_cast<int>(names_.size());
    code_list_.push_back(code);
    names_.push_back(name);
  }
  if (names_.empty()) throw Error(ErrorCode::FormatError, "empty land-cover legend");
  for (float v : codes_.values) {
    if (is_nodata(v)) continue;
    const auto c = static_cast<long>(v);
    if (static_cast<float>(c) != v || c < 0 || c >= kMaxCode || slot_of_code_[c] < 0)
      throw Error(ErrorCode::FormatError, "land-cover code " + format_number(v) + " missing from legend");
  }
}

int LandCover::slot(float code) const {
  if (is_nodata(code)) return -1;
  return slot_of_code_[static_cast<std::size_t>(code)];
}

std::vector<std::pair<int, std::string>> parse_legend(std::string_view text) {
  std::vector<std::pair<int, std::string>> out;
  for (const auto& line : split(text, '\n')) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::FormatError, "legend line without comma: " + t);
    const std::string code = trim(t.substr(0, comma));
    if (to_lower(code) == "code") continue;
    const double v = parse_number(code);
    if (v != std::floor(v)) throw Error(ErrorCode::FormatError, "legend code must be an integer: " + code);
    out.emplace_back(static_cast<int>(v), trim(t.substr(comma + 1)));
  }
  return out;
}

LandCover load_landcover(const std::filesystem::path& raster, const std::filesystem::path& legend) {
  return LandCover(read_bgrd(raster), parse_legend(read_text(legend)));
}

std::vector<double> landcover_proportions(Point center, double radius, const LandCover& lc) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidInput, "buffer radius must be positive");
  const Raster& r = lc.raster();
  const double ps = r.geo.pixel_size;
  // Pixel (c, r) center = origin + ((c + .5) ps, -(r + .5) ps).
  const double fc = (center.x - r.geo.origin.x) / ps - 0.5;
  const double fr = (r.geo.origin.y - center.y) / ps - 0.5;
  const double rp = radius / ps;
  const auto r0 = static_cast<long>(std::ceil(fr - rp)), r1 = static_cast<long>(std::floor(fr + rp));
  const double r2 = rp * rp;
  std::vector<double> counts(lc.class_count(), 0.0);
  double inside = 0, nodata = 0;
  for (long row = r0; row <= r1; ++row) {
    const double dy = static_cast<double>(row) - fr;
    const double half = std::sqrt(std::max(0.0, r2 - dy * dy));
    long c0 = static_cast<long>(std::ceil(fc - half)), c1 = static_cast<long>(std::floor(fc + half));
    // Guard against rounding at the rim.
    while (c0 <= c1 && (c0 - fc) * (c0 - fc) + dy * dy > r2) ++c0;
    while (c1 >= c0 && (c1 - fc) * (c1 - fc) + dy * dy > r2) --c1;
    if (c1 < c0) continue;
    const double span_n = static_cast<double>(c1 - c0 + 1);
    inside += span_n;
    if (row < 0 || row >= static_cast<long>(r.height)) {
      nodata += span_n;
      continue;
    }
    const long lo = std::max(c0, 0L), hi = std::min(c1, static_cast<long>(r.width) - 1);
    nodata += static_cast<double>(std::max(0L, lo - c0) + std::max(0L, c1 - hi));
    for (long col = lo; col <= hi; ++col) {
      const int s = lc.slot(r.at(static_cast<std::size_t>(col), static_cast<std::size_t>(row)));
      if (s < 0) nodata += 1;
      else counts[static_cast<std::size_t>(s)] += 1;
    }
  }
  const double valid = inside - nodata;
  if (inside == 0 || valid <= 0 || nodata > 0.5 * inside)
    throw Error(ErrorCode::OutOfCoverage, "buffer of radius " + format_number(radius) + " m at (" +
                                              format_number(center.x) + ", " + format_number(center.y) +
                                              ") is mostly outside land cover");
  for (auto& c : counts) c /= valid;
  return counts;
}

BarnFeatures barn_features(const Ring& ring, const RoadNetwork& roads, const LandCover& lc,
                           std::span<const double> radii) {
  BarnFeatures f;
  f.area_m2 = polygon_area(ring);
  const auto rect = min_area_rect(ring);
  f.length_m = rect.length;
  f.width_m = rect.width;
  f.aspect_ratio = rect.aspect_ratio();
  const Point c = centroid(ring);
  f.road_distance_m = nearest_road_distance(c, roads);
  f.lc.reserve(radii.size() * lc.class_count());
  for (double r : radii) {
    const auto p = landcover_proportions(c, r, lc);
    f.lc.insert(f.lc.end(), p.begin(), p.end());
  }
  return f;
}

std::vector<std::string> barn_columns(const LandCover& lc, std::span<const double> radii) {
  std::vector<std::string> cols{"area_m2", "length_m", "width_m", "aspect_ratio", "road_distance_m"};
  for (double r : radii)
    for (const auto& name : lc.class_names()) cols.push_back("lc_" + column_token(name) + "_" + radius_token(r));
  return cols;
}

std::vector<double> to_row(const BarnFeatures& f) {
  std::vector<double> row{f.area_m2, f.length_m, f.width_m, f.aspect_ratio, f.road_distance_m};
  row.insert(row.end(), f.lc.begin(), f.lc.end());
  return row;
}

FarmFeatures farm_features(std::span<const BarnFeatures> barns) {
  if (barns.empty()) throw Error(ErrorCode::EmptyFarm, "farm has no barns");
  const double n = static_cast<double>(barns.size());
  auto stats = [&](auto field) {
    double s = 0;
    for (const auto& b : barns) s += field(b);
    const double m = s / n;
    double v = 0;
    for (const auto& b : barns) v += (field(b) - m) * (field(b) - m);
    return std::pair{m, std::sqrt(v / n)};
  };
  FarmFeatures f;
  f.n_barns = n;
  std::tie(f.mean_area_m2, f.std_area_m2) = stats([](const BarnFeatures& b) { return b.area_m2; });
  std::tie(f.mean_aspect, f.std_aspect) = stats([](const BarnFeatures& b) { return b.aspect_ratio; });
  std::tie(f.mean_width_m, f.std_width_m) = stats([](const BarnFeatures& b) { return b.width_m; });
  std::tie(f.mean_length_m, f.std_length_m) = stats([](const BarnFeatures& b) { return b.length_m; });
  for (const auto& b : barns) f.total_area_m2 += b.area_m2;
  return f;
}

std::vector<std::string> farm_columns() {
  return {"n_barns",       "total_area_m2", "mean_area_m2",  "std_area_m2",   "mean_aspect",
          "std_aspect",    "mean_width_m",  "std_width_m",   "mean_length_m", "std_length_m"};
}

std::vector<double> to_row(const FarmFeatures& f) {
  return {f.n_barns,      f.total_area_m2, f.mean_area_m2, f.std_area_m2,   f.mean_aspect,
          f.std_aspect,   f.mean_width_m,  f.std_width_m,  f.mean_length_m, f.std_length_m};
}

std::uint64_t schema_hash(std::span<const std::string> columns) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& c : columns) {
    for (unsigned char ch : c) mix(ch);
    mix(0);
  }
  return h;
}

void FeatureTable::add(std::int64_t id, std::vector<double> row) {
  if (row.size() != columns.size())
    throw Error(ErrorCode::SchemaMismatch, "row has " + std::to_string(row.size()) + " values, table has " +
                                               std::to_string(columns.size()) + " columns");
  ids.push_back(id);
  rows.push_back(std::move(row));
}

std::string to_csv(const FeatureTable& t) {
  std::ostringstream os;
  os << "id";
  for (const auto& c : t.columns) os << ',' << csv_escape(c);
  os << '\n';
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    os << t.ids[i];
    for (double v : t.rows[i]) os << ',' << format_number(v);
    os << '\n';
  }
  return os.str();
}

FeatureTable parse_feature_csv(std::string_view text) {
  const auto csv = parse_csv(text);
  if (csv.header.empty() || csv.header[0] != "id") throw Error(ErrorCode::FormatError, "feature CSV must start with id");
  FeatureTable t;
  t.columns.assign(csv.header.begin() + 1, csv.header.end());
  for (const auto& r : csv.rows) {
    std::vector<double> row;
    row.reserve(t.columns.size());
    for (std::size_t i = 1; i < r.size(); ++i) row.push_back(parse_number(r[i]));
    t.add(static_cast<std::int64_t>(parse_number(r[0])), std::move(row));
  }
  return t;
}

}  // namespace swinemap
