#include "swinemap/error.hpp"

namespace swinemap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::NoRoads: return "NoRoads";
    case ErrorCode::InsufficientBarns: return "InsufficientBarns";
    case ErrorCode::InvalidTileSize: return "InvalidTileSize";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::NonSquareTile: return "NonSquareTile";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UndefinedMetric: return "UndefinedMetric";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidReference: return "InvalidReference";
    case ErrorCode::OutOfCoverage: return "OutOfCoverage";
    case ErrorCode::EmptyFarm: return "EmptyFarm";
    case ErrorCode::DegenerateTraining: return "DegenerateTraining";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InsufficientBlocks: return "InsufficientBlocks";
    case ErrorCode::ModelFormatError: return "ModelFormatError";
    case ErrorCode::InvalidBounds: return "InvalidBounds";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::PlacementOverflow: return "PlacementOverflow";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace swinemap
