#pragma once

// CART random forest: classification and regression, impurity importances,
// spatial-block folds, grid search and the cross-fold vote.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "swinemap/geometry.hpp"

namespace swinemap {

enum class Task { Classifier, Regressor };
enum class MaxFeatures { Sqrt, Log2, All };

std::string_view to_string(MaxFeatures m);
MaxFeatures parse_max_features(std::string_view s);

struct ForestParams {
  int n_trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_split = 2;
  int min_leaf = 1;
  MaxFeatures max_features = MaxFeatures::Sqrt;

  /// "n_trees=100;max_depth=None;min_split=2;min_leaf=1;max_features=sqrt"
  std::string describe() const;
  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// Row-major feature matrix with named columns. Classifier targets are class
/// indices 0..n_classes-1 stored as doubles.
struct Dataset {
  std::vector<std::string> columns;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<Point> locations;  // optional; empty or one per row
  int n_classes = 0;             // 0 for regression

  std::size_t rows() const { return y.size(); }
  std::size_t cols() const { return columns.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * cols(), cols()}; }
  void add(std::span<const double> features, double target, Point location = {});
  /// Row subset, keeping columns and class count.
  Dataset subset(std::span<const std::size_t> idx) const;
  /// Throws InvalidInput on ragged shapes or non-finite features.
  void validate() const;
};

/// Flattened tree. Splits send value <= threshold left; leaves have feature -1.
struct Tree {
  std::vector<std::int32_t> feature;
  std::vector<double> threshold;
  std::vector<std::int32_t> left, right;
  std::vector<double> n_samples;  // bootstrap-weighted count reaching the node
  std::vector<double> impurity;   // Gini or variance at the node
  std::vector<double> value;      // n_outputs per node
  std::size_t size() const { return feature.size(); }
  int depth() const;
};

class ForestModel {
 public:
  Task task = Task::Classifier;
  int n_classes = 0;
  ForestParams params;
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<Tree> trees;

  int n_outputs() const { return task == Task::Classifier ? n_classes : 1; }
  std::uint64_t schema() const;

  /// Mean of per-tree leaf distributions. Throws SchemaMismatch on row width.
  std::vector<double> predict_proba(std::span<const double> row) const;
  double predict_value(std::span<const double> row) const;
  /// Probability of class 1 for binary classifiers.
  double predict_positive(std::span<const double> row) const;
  int predict_class(std::span<const double> row) const;

  /// Mean decrease in impurity per feature: per-tree normalized, averaged, renormalized.
  std::vector<double> importance() const;

  /// The first n trees as a standalone model.
  ForestModel prefix(std::size_t n) const;

  /// Throws SchemaMismatch unless `cols` equals the training columns.
  void check_schema(std::span<const std::string> cols) const;
};

/// Bootstrap draw of size n for tree `tree` of a forest seeded with `seed`.
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t tree);

/// Throws DegenerateTraining for a single class / constant target / empty set.
ForestModel fit_forest(const Dataset& d, Task task, const ForestParams& p, std::uint64_t seed);

/// Out-of-bag accuracy (classifier) or R² (regressor) on the training data.
double oob_score(const ForestModel& m, const Dataset& d);

struct FoldAssignment {
  int k = 0;
  std::vector<int> fold;  // 1..k per sample
  std::vector<std::pair<std::int64_t, std::int64_t>> block;
};

/// Blocks are floor(x / size), floor(y / size); occupied blocks are shuffled
/// with `seed` and dealt round-robin. Throws InsufficientBlocks.
FoldAssignment spatial_blocks(std::span<const Point> locations, double block_size = 25000.0,
                              int k = 5, std::uint64_t seed = 0);

struct HyperGrid {
  std::vector<int> n_trees{100, 200, 300, 500};
  std::vector<int> max_depth{0, 10, 20, 30};
  std::vector<int> min_split{2, 5, 10};
  std::vector<int> min_leaf{1, 2, 4};
  std::vector<MaxFeatures> max_features{MaxFeatures::Sqrt, MaxFeatures::Log2};

  std::size_t size() const {
    return n_trees.size() * max_depth.size() * min_split.size() * min_leaf.size() * max_features.size();
  }
};

struct ScoreSet {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;  // classification
  double r2 = 0, rmse = 0;                                 // regression
};

/// Binary: positive class 1. Multiclass: macro average. Undefined precision
/// or recall count as 0.
ScoreSet classification_scores(std::span<const int> pred, std::span<const int> truth, int n_classes);

struct CvRow {
  int fold = 0;
  std::string config;
  ScoreSet scores;
};

struct FoldResult {
  int fold = 0;
  bool skipped = false;
  std::string skip_reason;
  ForestParams best;
  ScoreSet test;
  ForestModel model;
  std::vector<std::size_t> test_rows;
};

struct CvResult {
  Task task = Task::Classifier;
  std::vector<CvRow> rows;
  std::vector<FoldResult> folds;
  ScoreSet mean_test;  // over non-skipped folds, best config per fold
  std::size_t used_folds() const;
};

/// For each held-out fold, every grid point is trained on the other folds and
/// scored on it; the best (F1 for classification, R² for regression; ties to
/// fewer trees, then shallower depth) is kept. Folds lacking a class on
/// either side are skipped and reported.
CvResult grid_search_cv(const Dataset& d, Task task, const FoldAssignment& folds, const HyperGrid& grid,
                        std::uint64_t seed, const std::string& config_label = "");

/// Retained iff at least ceil((k + 1) / 2) probabilities are >= 0.5.
bool vote_filter(std::span<const double> per_fold_probs);

std::string cv_rows_csv(const CvResult& r);

std::string serialize_model(const ForestModel& m);
ForestModel deserialize_model(std::string_view text);
void save_model(const ForestModel& m, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

}  // namespace swinemap
