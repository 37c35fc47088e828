#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace swinemap {

enum class ErrorCode {
  InvalidGeometry,
  DegenerateGeometry,
  NoRoads,
  InsufficientBarns,
  InvalidTileSize,
  InvalidThreshold,
  NonSquareTile,
  MissingClass,
  ShapeMismatch,
  UndefinedMetric,
  EmptyDataset,
  InvalidReference,
  OutOfCoverage,
  EmptyFarm,
  DegenerateTraining,
  SchemaMismatch,
  InsufficientBlocks,
  ModelFormatError,
  InvalidBounds,
  UnknownLabel,
  PlacementOverflow,
  InvalidInput,
  FormatError,
  IoError,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every library failure is reported as this exception; `code()` identifies
/// the failure class, `what()` carries the detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace swinemap
