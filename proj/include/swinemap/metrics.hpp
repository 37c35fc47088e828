#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swinemap/raster.hpp"

namespace swinemap::metrics {

struct ConfusionCounts {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  double total() const { return tp + fp + fn + tn; }
};

/// Per-pixel counts. Pixels where `valid` (when given) is nodata are skipped.
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth,
                          const Raster* valid = nullptr);

struct SegMetrics {
  double accuracy = 0, precision = 0, recall = 0, specificity = 0, iou = 0, f1 = 0, f2 = 0;
};

double accuracy(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double specificity(const ConfusionCounts& c);
double iou(const ConfusionCounts& c);
double f1(const ConfusionCounts& c);
double f_beta(const ConfusionCounts& c, double beta);

/// All seven metrics; throws UndefinedMetric naming the first metric whose
/// denominator is zero.
SegMetrics seg_metrics(const ConfusionCounts& c);

/// IoU with the empty-vs-empty case defined as 1.
double tile_iou(const ConfusionCounts& c);

struct SweepResult {
  std::vector<double> thresholds;
  std::vector<double> mean_iou;
  double best_threshold = 0;
};

/// Mean per-pair IoU at each threshold; best is the argmax with ties toward
/// the lowest threshold. Throws EmptyDataset.
SweepResult threshold_sweep(std::span<const std::pair<Raster, BinaryMask>> pairs,
                            std::span<const double> thresholds);

/// 0.1, 0.2, ..., 1.0.
std::vector<double> default_sweep_thresholds();

double r2(std::span<const double> pred, std::span<const double> actual);
double rmse(std::span<const double> pred, std::span<const double> actual);

struct RmseCi {
  double rmse = 0, lo = 0, hi = 0;
};

/// RMSE with a percentile-bootstrap interval over paired residuals.
RmseCi rmse_with_ci(std::span<const double> pred, std::span<const double> actual,
                    double level = 0.95, int resamples = 1000, std::uint64_t seed = 0);

double pearson(std::span<const double> pred, std::span<const double> actual);

/// Fraction of rows with |pred - actual| <= band, optionally restricted to
/// rows whose actual value lies in [actual_lo, actual_hi].
double band_accuracy(std::span<const double> pred, std::span<const double> actual, double band,
                     std::optional<std::pair<double, double>> actual_range = std::nullopt);

/// (predicted - reference) / reference * 100. Throws InvalidReference.
double percent_difference(double predicted, double reference);

/// Signed percent cell with integer rounding, e.g. "+11%".
std::string format_percent_cell(double pct);

/// Linear interpolation between order statistics (position q * (n - 1)).
std::vector<double> quantiles(std::span<const double> values, std::span<const double> qs);
double quantile(std::span<const double> values, double q);

/// Flat report rows: metric,value,lo,hi.
struct MetricRow {
  std::string metric;
  double value = 0;
  std::optional<double> lo, hi;
};
std::string to_csv(std::span<const MetricRow> rows);
std::string to_key_value(std::span<const MetricRow> rows);

}  // namespace swinemap::metrics
