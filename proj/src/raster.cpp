#include "swinemap/raster.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include "swinemap/error.hpp"

namespace swinemap {

Raster Raster::from_values(std::size_t w, std::size_t h, GeoTransform g, std::vector<float> v,
                           ValueKind kind) {
  if (w * h != v.size())
    throw Error(ErrorCode::ShapeMismatch, "width*height does not match value count");
  if (!(g.pixel_size > 0.0)) throw Error(ErrorCode::InvalidInput, "pixel size must be positive");
  Raster r;
  r.width = w;
  r.height = h;
  r.geo = g;
  r.values = std::move(v);
  r.kind = kind;
  return r;
}

Raster crop(const Raster& r, std::ptrdiff_t col0, std::ptrdiff_t row0, std::size_t w,
            std::size_t h) {
  Raster out(w, h, {r.geo.corner(static_cast<double>(col0), static_cast<double>(row0)), r.geo.pixel_size},
             kNoData);
  out.kind = r.kind;
  for (std::size_t row = 0; row < h; ++row) {
    const std::ptrdiff_t sr = row0 + static_cast<std::ptrdiff_t>(row);
    if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(r.height)) continue;
    for (std::size_t col = 0; col < w; ++col) {
      const std::ptrdiff_t sc = col0 + static_cast<std::ptrdiff_t>(col);
      if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(r.width)) continue;
      out.at(col, row) = r.at(static_cast<std::size_t>(sc), static_cast<std::size_t>(sr));
    }
  }
  return out;
}

std::vector<Raster> tile(const Raster& r, double tile_meters) {
  const double px = tile_meters / r.geo.pixel_size;
  const double rounded = std::round(px);
  if (!(tile_meters > 0.0) || rounded < 1.0 || std::abs(px - rounded) > 1e-9 * std::max(1.0, px))
    throw Error(ErrorCode::InvalidTileSize, "tile size must be a positive multiple of the pixel size");
  const auto n = static_cast<std::size_t>(rounded);
  std::vector<Raster> tiles;
  for (std::size_t row = 0; row < r.height; row += n)
    for (std::size_t col = 0; col < r.width; col += n)
      tiles.push_back(crop(r, static_cast<std::ptrdiff_t>(col), static_cast<std::ptrdiff_t>(row), n, n));
  return tiles;
}

BinaryMask threshold(const Raster& p, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidThreshold, "threshold must lie in [0, 1]");
  BinaryMask m(p.width, p.height, p.geo, 0);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const float v = p.values[i];
    m.values[i] = (!is_nodata(v) && static_cast<double>(v) >= t) ? 1 : 0;
  }
  return m;
}

namespace {

struct DisjointSet {
  std::vector<std::int32_t> parent;

  std::int32_t make() {
    parent.push_back(static_cast<std::int32_t>(parent.size()));
    return parent.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;
  }
};

}  // namespace

LabelRaster connected_components(const BinaryMask& m, Connectivity conn) {
  LabelRaster out(m.width, m.height, m.geo, 0);
  const std::size_t w = m.width, h = m.height;
  DisjointSet ds;
  ds.make();  // provisional label 0 is background
  auto& lab = out.values;

  // First pass: provisional labels from already-visited neighbors.
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (!m.at(c, r)) continue;
      std::int32_t n[4];
      int k = 0;
      if (c > 0 && lab[r * w + c - 1]) n[k++] = lab[r * w + c - 1];
      if (r > 0) {
        if (lab[(r - 1) * w + c]) n[k++] = lab[(r - 1) * w + c];
        if (conn == Connectivity::Eight) {
          if (c > 0 && lab[(r - 1) * w + c - 1]) n[k++] = lab[(r - 1) * w + c - 1];
          if (c + 1 < w && lab[(r - 1) * w + c + 1]) n[k++] = lab[(r - 1) * w + c + 1];
        }
      }
      if (k == 0) {
        lab[r * w + c] = ds.make();
      } else {
        std::int32_t lo = n[0];
        for (int i = 1; i < k; ++i) lo = std::min(lo, n[i]);
        for (int i = 0; i < k; ++i) ds.unite(lo, n[i]);
        lab[r * w + c] = lo;
      }
    }
  }

  // Second pass: final ids in row-major order of each component's first pixel.
  std::vector<std::int32_t> final_id(ds.parent.size(), 0);
  std::int32_t next = 0;
  for (auto& v : lab) {
    if (!v) continue;
    const std::int32_t root = ds.find(v);
    if (!final_id[root]) final_id[root] = ++next;
    v = final_id[root];
  }
  out.count = next;
  return out;
}

std::vector<ComponentRing> polygonize(const LabelRaster& l, Connectivity conn) {
  const auto w = static_cast<std::int64_t>(l.width);
  const auto h = static_cast<std::int64_t>(l.height);
  std::vector<std::int64_t> first(static_cast<std::size_t>(l.count) + 1, -1);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(l.count) + 1, 0);
  for (std::int64_t i = 0; i < w * h; ++i) {
    const auto id = l.values[static_cast<std::size_t>(i)];
    if (!id) continue;
    if (first[id] < 0) first[id] = i;
    ++counts[id];
  }

  std::vector<ComponentRing> out;
  out.reserve(static_cast<std::size_t>(l.count));
  for (std::int32_t id = 1; id <= l.count; ++id) {
    if (first[id] < 0) continue;
    auto inside = [&](std::int64_t c, std::int64_t r) {
      return c >= 0 && r >= 0 && c < w && r < h &&
             l.values[static_cast<std::size_t>(r * w + c)] == id;
    };
    // Crack following on pixel corners (screen coordinates, y down) with the
    // component kept on the right-hand side.
    const std::int64_t x0 = first[id] % w, y0 = first[id] / w;
    std::int64_t x = x0, y = y0, dx = 1, dy = 0;
    std::vector<Point> verts;
    verts.push_back(l.geo.corner(static_cast<double>(x0), static_cast<double>(y0)));
    const std::int64_t guard = 4 * (counts[id] + 1) + 8;
    for (std::int64_t steps = 0;; ++steps) {
      if (steps > guard) throw Error(ErrorCode::InvalidGeometry, "boundary trace did not close");
      x += dx;
      y += dy;
      if (x == x0 && y == y0) break;
      // Pixels ahead of the corner, left and right of the heading.
      const std::int64_t rx = -dy, ry = dx;
      const std::int64_t lx = dy, ly = -dx;
      const bool ahead_right = inside(x + (dx + rx - 1) / 2, y + (dy + ry - 1) / 2);
      const bool ahead_left = inside(x + (dx + lx - 1) / 2, y + (dy + ly - 1) / 2);
      std::int64_t ndx = dx, ndy = dy;
      if (ahead_left && ahead_right) {
        ndx = lx; ndy = ly;
      } else if (!ahead_left && !ahead_right) {
        ndx = rx; ndy = ry;
      } else if (ahead_left && !ahead_right) {
        // Diagonal pinch: join through it under 8-connectivity.
        if (conn == Connectivity::Eight) { ndx = lx; ndy = ly; } else { ndx = rx; ndy = ry; }
      }
      if (ndx != dx || ndy != dy) {
        verts.push_back(l.geo.corner(static_cast<double>(x), static_cast<double>(y)));
        dx = ndx;
        dy = ndy;
      }
    }
    // Screen y-down becomes map y-up, which flips orientation: reverse to CCW.
    std::reverse(verts.begin() + 1, verts.end());
    out.push_back({id, counts[id], Ring(std::move(verts))});
  }
  return out;
}

Raster rotate_tile(const Raster& r, int quarter_turns) {
  if (r.width != r.height) throw Error(ErrorCode::NonSquareTile, "rotation requires a square tile");
  const int q = ((quarter_turns % 4) + 4) % 4;
  Raster out = r;
  const std::size_t n = r.width;
  for (int t = 0; t < q; ++t) {
    Raster next = out;
    // Clockwise: new(row, col) = old(n-1-col, row).
    for (std::size_t row = 0; row < n; ++row)
      for (std::size_t col = 0; col < n; ++col) next.at(col, row) = out.at(row, n - 1 - col);
    out = std::move(next);
  }
  return out;
}

ClassWeights class_weights(std::span<const BinaryMask> masks) {
  std::uint64_t barn = 0, total = 0;
  for (const auto& m : masks) {
    for (auto v : m.values) barn += v ? 1 : 0;
    total += m.values.size();
  }
  const std::uint64_t background = total - barn;
  if (barn == 0 || background == 0)
    throw Error(ErrorCode::MissingClass, barn == 0 ? "no barn pixels" : "no background pixels");
  const double n = static_cast<double>(total);
  return {n / (2.0 * static_cast<double>(barn)), n / (2.0 * static_cast<double>(background))};
}

double weighted_bce(const Raster& p, const BinaryMask& truth, const ClassWeights& w) {
  if (!p.same_shape(truth)) throw Error(ErrorCode::ShapeMismatch, "probability and truth shapes differ");
  constexpr double eps = 1e-7;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const float v = p.values[i];
    if (is_nodata(v)) continue;
    const double q = std::clamp(static_cast<double>(v), eps, 1.0 - eps);
    if (truth.values[i]) {
      sum += -w.barn * std::log(q);
    } else {
      sum += -w.background * std::log(1.0 - q);
    }
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyDataset, "no valid pixels");
  return sum / static_cast<double>(n);
}

std::vector<std::pair<std::size_t, std::size_t>> rasterize_ring(const Ring& ring,
                                                                 const GeoTransform& geo,
                                                                 std::size_t width,
                                                                 std::size_t height) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const BBox b = ring.bbox();
  const double ps = geo.pixel_size;
  const auto clampi = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
  };
  const std::size_t c0 = clampi(std::floor((b.min_x - geo.origin.x) / ps), width);
  const std::size_t c1 = clampi(std::ceil((b.max_x - geo.origin.x) / ps), width);
  const std::size_t r0 = clampi(std::floor((geo.origin.y - b.max_y) / ps), height);
  const std::size_t r1 = clampi(std::ceil((geo.origin.y - b.min_y) / ps), height);
  const auto& v = ring.vertices();
  std::vector<double> xs;
  for (std::size_t row = r0; row < r1; ++row) {
    // Scanline at the pixel-center row: collect edge crossings.
    const double yc = geo.origin.y - (static_cast<double>(row) + 0.5) * ps;
    xs.clear();
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
      if ((v[i].y > yc) != (v[j].y > yc))
        xs.push_back(v[j].x + (yc - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      for (std::size_t col = c0; col < c1; ++col) {
        const double xc = geo.origin.x + (static_cast<double>(col) + 0.5) * ps;
        if (xc > xs[k] && xc < xs[k + 1]) out.emplace_back(col, row);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](auto a, auto b) {
    return a.second < b.second || (a.second == b.second && a.first < b.first);
  });
  return out;
}

// ---------------------------------------------------------------------------
// BGRD

namespace {

static_assert(std::endian::native == std::endian::little, "BGRD codec assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(ErrorCode::FormatError, "BGRD stream truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

constexpr std::uint16_t kCategoryNoData = 65535;

}  // namespace

std::vector<std::uint8_t> encode_bgrd(const Raster& r) {
  std::vector<std::uint8_t> out;
  const std::size_t elem = r.kind == ValueKind::Real ? 4 : 2;
  out.reserve(4 + 4 + 4 + 24 + 1 + r.values.size() * elem);
  out.insert(out.end(), {'B', 'G', 'R', 'D'});
  put<std::uint32_t>(out, static_cast<std::uint32_t>(r.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(r.height));
  put<double>(out, r.geo.origin.x);
  put<double>(out, r.geo.origin.y);
  put<double>(out, r.geo.pixel_size);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(r.kind));
  if (r.kind == ValueKind::Real) {
    for (float v : r.values) put<float>(out, v);
  } else {
    for (float v : r.values) {
      if (is_nodata(v)) {
        put<std::uint16_t>(out, kCategoryNoData);
      } else {
        if (v < 0.0f || v >= 65535.0f || v != std::floor(v))
          throw Error(ErrorCode::FormatError, "category value not representable as u16");
        put<std::uint16_t>(out, static_cast<std::uint16_t>(v));
      }
    }
  }
  return out;
}

Raster decode_bgrd(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), "BGRD", 4) != 0)
    throw Error(ErrorCode::FormatError, "missing BGRD magic");
  std::size_t pos = 4;
  const auto w = get<std::uint32_t>(in, pos);
  const auto h = get<std::uint32_t>(in, pos);
  GeoTransform g;
  g.origin.x = get<double>(in, pos);
  g.origin.y = get<double>(in, pos);
  g.pixel_size = get<double>(in, pos);
  const auto kind = get<std::uint8_t>(in, pos);
  if (kind > 1) throw Error(ErrorCode::FormatError, "unknown BGRD value kind");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const std::size_t elem = kind == 0 ? 4 : 2;
  if (in.size() - pos != n * elem) throw Error(ErrorCode::FormatError, "BGRD payload size mismatch");
  std::vector<float> values(n);
  if (kind == 0) {
    std::memcpy(values.data(), in.data() + pos, n * 4);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = get<std::uint16_t>(in, pos);
      values[i] = v == kCategoryNoData ? kNoData : static_cast<float>(v);
    }
  }
  return Raster::from_values(w, h, g, std::move(values), static_cast<ValueKind>(kind));
}

void write_bgrd(const Raster& r, const std::filesystem::path& path) {
  const auto bytes = encode_bgrd(r);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Raster read_bgrd(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_bgrd(bytes);
}

}  // namespace swinemap
