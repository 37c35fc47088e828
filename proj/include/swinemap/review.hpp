#pragma once

// Local HTTP backend for the candidate review loop: paginated candidates with
// raster chips, label submission and progress.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "swinemap/io.hpp"
#include "swinemap/pipeline.hpp"

namespace swinemap {

inline constexpr double kChipMargin = 30.0;  // meters around the candidate bbox

class ReviewService {
 public:
  struct Response {
    int status = 200;
    nlohmann::json body;
  };

  /// Needs out_dir/candidates.geojson; features.csv next to it is optional.
  /// Chips come from the first probability raster.
  explicit ReviewService(const PipelineConfig& cfg);

  Response candidates(std::size_t offset, std::size_t limit) const;
  /// Body: {"candidate_id": int, "label": "barn" | "false_positive",
  /// "annotator": optional string}. 400 on malformed bodies, 404 on unknown ids.
  Response post_label(std::string_view body);
  Response progress() const;

  /// Probability window around a candidate; nodata becomes null.
  nlohmann::json chip(const Ring& ring) const;
  std::size_t size() const { return candidates_.size(); }

 private:
  nlohmann::json progress_body() const;

  std::vector<Candidate> candidates_;
  std::map<std::int64_t, std::size_t> index_;
  std::vector<std::string> columns_;
  std::map<std::int64_t, std::vector<double>> features_;
  Raster probability_;
  fs::path labels_path_;
  std::map<std::int64_t, Label> active_;
  mutable std::shared_mutex mutex_;
};

/// HTTP front end; reads run concurrently, label writes are serialized and
/// flushed before the response is sent.
class ReviewServer {
 public:
  explicit ReviewServer(ReviewService& service);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds to host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace swinemap
