#include "swinemap/review.hpp"

#include <cmath>
#include <mutex>

#include <httplib.h>

#include "swinemap/error.hpp"
#include "swinemap/textio.hpp"

namespace swinemap {

using nlohmann::json;

ReviewService::ReviewService(const PipelineConfig& cfg) : labels_path_(cfg.labels) {
  const auto cand_path = cfg.out_dir / "candidates.geojson";
  if (!fs::exists(cand_path)) throw Error(ErrorCode::ConfigError, "candidates not found: " + cand_path.string());
  if (labels_path_.empty()) throw Error(ErrorCode::ConfigError, "labels path is not set");
  if (cfg.probability.empty()) throw Error(ErrorCode::ConfigError, "no probability raster for chips");
  for (const auto& f : read_geojson(cand_path).features) {
    const auto id = f.properties.at("id").get<std::int64_t>();
    index_[id] = candidates_.size();
    candidates_.push_back({id, f.ring()});
  }
  const auto feat_path = cfg.out_dir / "features.csv";
  if (fs::exists(feat_path)) {
    const auto t = read_csv(feat_path);
    columns_.assign(t.header.begin() + 1, t.header.end());
    for (const auto& row : t.rows) {
      std::vector<double> v;
      for (std::size_t i = 1; i < row.size(); ++i) v.push_back(parse_number(row[i]));
      features_[static_cast<std::int64_t>(parse_number(row.at(0)))] = std::move(v);
    }
  }
  probability_ = read_bgrd(cfg.probability.front());
  active_ = active_labels(read_labels(labels_path_));
}

json ReviewService::chip(const Ring& ring) const {
  const auto& g = probability_.geo;
  const BBox b = ring.bbox();
  const auto col0 = static_cast<std::ptrdiff_t>(std::floor((b.min_x - kChipMargin - g.origin.x) / g.pixel_size));
  const auto row0 = static_cast<std::ptrdiff_t>(std::floor((g.origin.y - b.max_y - kChipMargin) / g.pixel_size));
  const auto col1 = static_cast<std::ptrdiff_t>(std::ceil((b.max_x + kChipMargin - g.origin.x) / g.pixel_size));
  const auto row1 = static_cast<std::ptrdiff_t>(std::ceil((g.origin.y - b.min_y + kChipMargin) / g.pixel_size));
  const auto w = static_cast<std::size_t>(col1 - col0), h = static_cast<std::size_t>(row1 - row0);
  const Raster c = crop(probability_, col0, row0, w, h);
  json values = json::array();
  for (float v : c.values) values.push_back(is_nodata(v) ? json(nullptr) : json(static_cast<double>(v)));
  const Point corner = g.corner(static_cast<double>(col0), static_cast<double>(row0));
  return {{"x0", corner.x}, {"y0", corner.y}, {"pixel_size", g.pixel_size}, {"width", w}, {"height", h},
          {"values", std::move(values)}};
}

json ReviewService::progress_body() const {
  std::size_t labeled = 0;
  for (const auto& [id, l] : active_) labeled += index_.count(id);
  return {{"labeled", labeled}, {"total", candidates_.size()}};
}

ReviewService::Response ReviewService::progress() const {
  std::shared_lock lock(mutex_);
  return {200, progress_body()};
}

ReviewService::Response ReviewService::candidates(std::size_t offset, std::size_t limit) const {
  std::shared_lock lock(mutex_);
  json items = json::array();
  const std::size_t end = std::min(candidates_.size(), offset + std::min(limit, candidates_.size()));
  for (std::size_t i = offset; i < end; ++i) {
    const auto& c = candidates_[i];
    json ring = json::array();
    for (const auto& p : c.ring.vertices()) ring.push_back({p.x, p.y});
    json features = nullptr;
    if (auto it = features_.find(c.id); it != features_.end()) {
      features = json::object();
      for (std::size_t k = 0; k < columns_.size(); ++k) features[columns_[k]] = it->second[k];
    }
    auto lab = active_.find(c.id);
    items.push_back({{"id", c.id},
                     {"ring", std::move(ring)},
                     {"features", std::move(features)},
                     {"label", lab == active_.end() ? json(nullptr) : json(std::string(to_string(lab->second)))},
                     {"chip", chip(c.ring)}});
  }
  return {200, {{"offset", offset}, {"limit", limit}, {"total", candidates_.size()}, {"items", std::move(items)}}};
}

ReviewService::Response ReviewService::post_label(std::string_view body) {
  auto bad = [](const std::string& reason) { return Response{400, {{"error", reason}}}; };
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return bad("body is not valid JSON");
  }
  if (!j.is_object()) return bad("body must be a JSON object");
  if (!j.contains("candidate_id") || !j["candidate_id"].is_number_integer()) return bad("candidate_id must be an integer");
  if (!j.contains("label") || !j["label"].is_string()) return bad("label must be a string");
  Label label;
  try {
    label = parse_label(j["label"].get<std::string>());
  } catch (const Error&) {
    return bad("label must be \"barn\" or \"false_positive\"");
  }
  std::string annotator = "reviewer";
  if (j.contains("annotator")) {
    if (!j["annotator"].is_string()) return bad("annotator must be a string");
    annotator = j["annotator"].get<std::string>();
  }
  const auto id = j["candidate_id"].get<std::int64_t>();
  std::unique_lock lock(mutex_);
  if (!index_.count(id)) return {404, {{"error", "unknown candidate " + std::to_string(id)}}};
  append_label(labels_path_, {id, label, annotator, utc_timestamp()});
  active_[id] = label;
  return {200, progress_body()};
}

// ---------------------------------------------------------------------------

struct ReviewServer::Impl {
  httplib::Server http;
};

namespace {

void reply(httplib::Response& res, const ReviewService::Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json; charset=utf-8");
}

std::optional<std::size_t> query_count(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const auto v = req.get_param_value(key);
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 12) return std::nullopt;
  return static_cast<std::size_t>(std::stoull(v));
}

}  // namespace

ReviewServer::ReviewServer(ReviewService& service) : impl_(std::make_unique<Impl>()) {
  auto& h = impl_->http;
  h.Get("/candidates", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto offset = query_count(req, "offset", 0);
    const auto limit = query_count(req, "limit", 50);
    if (!offset || !limit) return reply(res, {400, {{"error", "offset and limit must be non-negative integers"}}});
    reply(res, service.candidates(*offset, *limit));
  });
  h.Post("/labels", [&service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.post_label(req.body));
  });
  h.Get("/progress", [&service](const httplib::Request&, httplib::Response& res) { reply(res, service.progress()); });
  h.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply(res, {500, {{"error", what}}});
  });
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->http.bind_to_any_port(host);
    if (p < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    return p;
  }
  if (!impl_->http.bind_to_port(host, port))
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void ReviewServer::listen() { impl_->http.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

}  // namespace swinemap
