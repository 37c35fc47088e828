#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "swinemap/geometry.hpp"

namespace swinemap {

/// North-up georeferencing: `origin` is the top-left corner of pixel (0, 0).
struct GeoTransform {
  Point origin;
  double pixel_size = 1.0;  // meters per pixel

  Point pixel_center(std::size_t col, std::size_t row) const {
    return {origin.x + (static_cast<double>(col) + 0.5) * pixel_size,
            origin.y - (static_cast<double>(row) + 0.5) * pixel_size};
  }
  Point corner(double col, double row) const {
    return {origin.x + col * pixel_size, origin.y - row * pixel_size};
  }
  friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

inline const float kNoData = std::numeric_limits<float>::quiet_NaN();
inline bool is_nodata(float v) { return std::isnan(v); }

enum class ValueKind : std::uint8_t { Real = 0, Category = 1 };

/// Row-major grid with an element type; shared by the real-valued raster,
/// the binary mask and the component label grid.
template <typename T>
struct Grid {
  std::size_t width = 0;
  std::size_t height = 0;
  GeoTransform geo;
  std::vector<T> values;

  Grid() = default;
  Grid(std::size_t w, std::size_t h, GeoTransform g, T fill = T{})
      : width(w), height(h), geo(g), values(w * h, fill) {}

  T& at(std::size_t col, std::size_t row) { return values[row * width + col]; }
  const T& at(std::size_t col, std::size_t row) const { return values[row * width + col]; }
  std::size_t size() const { return values.size(); }
  bool same_shape(std::size_t w, std::size_t h) const { return width == w && height == h; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const { return width == o.width && height == o.height; }
  BBox extent() const {
    return {geo.origin.x, geo.origin.y - static_cast<double>(height) * geo.pixel_size,
            geo.origin.x + static_cast<double>(width) * geo.pixel_size, geo.origin.y};
  }
};

/// Real-valued raster (probabilities, land-cover codes); NaN is nodata.
struct Raster : Grid<float> {
  using Grid<float>::Grid;
  ValueKind kind = ValueKind::Real;

  /// Validates width * height == values.size() and pixel_size > 0.
  static Raster from_values(std::size_t w, std::size_t h, GeoTransform g, std::vector<float> v,
                            ValueKind kind = ValueKind::Real);
};

/// 0 = background, 1 = barn.
using BinaryMask = Grid<std::uint8_t>;

/// 0 = background, components numbered 1..count in row-major first-pixel order.
struct LabelRaster : Grid<std::int32_t> {
  using Grid<std::int32_t>::Grid;
  std::int32_t count = 0;
};

struct ClassWeights {
  double barn = 1.0;
  double background = 1.0;
};

/// Weights reported for the original training corpus (1.15 % barn pixels).
/// Informational; `class_weights` uses the balanced inverse-frequency scheme.
inline constexpr ClassWeights kReportedCorpusWeights{15.35, 0.51};

/// Row-major list of non-overlapping tiles of `tile_meters` covering `r`;
/// edge tiles are padded with nodata. Throws InvalidTileSize unless
/// tile_meters is a positive multiple of the pixel size.
std::vector<Raster> tile(const Raster& r, double tile_meters);

/// Sub-window copy; parts outside `r` are nodata.
Raster crop(const Raster& r, std::ptrdiff_t col0, std::ptrdiff_t row0, std::size_t w,
            std::size_t h);

/// 1 where value >= t (inclusive); nodata maps to 0. Throws InvalidThreshold
/// for t outside [0, 1].
BinaryMask threshold(const Raster& p, double t);

enum class Connectivity { Four = 4, Eight = 8 };

LabelRaster connected_components(const BinaryMask& m, Connectivity conn = Connectivity::Eight);

struct ComponentRing {
  std::int32_t id = 0;
  std::int64_t pixel_count = 0;
  Ring ring;
};

/// One outer ring per component, traced along pixel edges, in map
/// coordinates, counter-clockwise, with collinear vertices merged.
std::vector<ComponentRing> polygonize(const LabelRaster& l,
                                      Connectivity conn = Connectivity::Eight);

/// Clockwise quarter turns of a square tile. Throws NonSquareTile.
Raster rotate_tile(const Raster& r, int quarter_turns);

/// Balanced inverse-frequency weights w_c = N / (2 N_c) over all masks.
/// Throws MissingClass when either class is absent.
ClassWeights class_weights(std::span<const BinaryMask> masks);

/// Mean over valid pixels of the class-weighted binary cross-entropy, with
/// probabilities clamped to [1e-7, 1 - 1e-7]. Throws ShapeMismatch.
double weighted_bce(const Raster& p, const BinaryMask& truth, const ClassWeights& w);

/// Pixels whose centers lie inside the ring (grid-aligned to `geo`).
std::vector<std::pair<std::size_t, std::size_t>> rasterize_ring(const Ring& ring,
                                                                 const GeoTransform& geo,
                                                                 std::size_t width,
                                                                 std::size_t height);

// "BGRD" binary grid: magic, u32 width, u32 height, f64 origin_x, f64
// origin_y, f64 pixel_size, u8 value kind, row-major payload (f32 for real,
// u16 for category with 65535 as nodata). Little-endian throughout.
void write_bgrd(const Raster& r, const std::filesystem::path& path);
Raster read_bgrd(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_bgrd(const Raster& r);
Raster decode_bgrd(std::span<const std::uint8_t> bytes);

}  // namespace swinemap
