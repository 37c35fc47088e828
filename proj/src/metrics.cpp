#include "swinemap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "swinemap/error.hpp"
#include "swinemap/textio.hpp"

namespace swinemap::metrics {

namespace {

double ratio(double num, double den, const char* name) {
  if (den == 0.0) throw Error(ErrorCode::UndefinedMetric, name);
  return num / den;
}

void check_pair(std::span<const double> pred, std::span<const double> actual, std::size_t min_n) {
  if (pred.size() != actual.size())
    throw Error(ErrorCode::ShapeMismatch, "prediction and actual lengths differ");
  if (pred.size() < min_n) throw Error(ErrorCode::EmptyDataset, "too few observations");
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth, const Raster* valid) {
  if (!pred.same_shape(truth) || (valid && !valid->same_shape(truth)))
    throw Error(ErrorCode::ShapeMismatch, "mask shapes differ");
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (valid && is_nodata(valid->values[i])) continue;
    const bool p = pred.values[i] != 0, t = truth.values[i] != 0;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
    tn += !p && !t;
  }
  return {static_cast<double>(tp), static_cast<double>(fp), static_cast<double>(fn),
          static_cast<double>(tn)};
}

double accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total(), "accuracy"); }
double precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp, "precision"); }
double recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn, "recall"); }
double specificity(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp, "specificity"); }
double iou(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp + c.fn, "iou"); }

double f_beta(const ConfusionCounts& c, double beta) {
  const double p = precision(c), r = recall(c);
  const double b2 = beta * beta;
  return ratio((1.0 + b2) * p * r, b2 * p + r, beta == 1.0 ? "f1" : "f_beta");
}

double f1(const ConfusionCounts& c) { return f_beta(c, 1.0); }

SegMetrics seg_metrics(const ConfusionCounts& c) {
  SegMetrics m;
  m.accuracy = accuracy(c);
  m.precision = precision(c);
  m.recall = recall(c);
  m.specificity = specificity(c);
  m.iou = iou(c);
  m.f1 = f1(c);
  m.f2 = f_beta(c, 2.0);
  return m;
}

double tile_iou(const ConfusionCounts& c) {
  const double den = c.tp + c.fp + c.fn;
  return den == 0.0 ? 1.0 : c.tp / den;
}

std::vector<double> default_sweep_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 10; ++i) t.push_back(i / 10.0);
  return t;
}

SweepResult threshold_sweep(std::span<const std::pair<Raster, BinaryMask>> pairs,
                            std::span<const double> thresholds) {
  if (pairs.empty() || thresholds.empty())
    throw Error(ErrorCode::EmptyDataset, "threshold sweep needs pairs and thresholds");
  SweepResult res;
  res.thresholds.assign(thresholds.begin(), thresholds.end());
  res.mean_iou.assign(thresholds.size(), 0.0);
  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    double sum = 0.0;
    for (const auto& [prob, truth] : pairs) {
      const auto c = confusion(threshold(prob, thresholds[ti]), truth, &prob);
      sum += tile_iou(c);
    }
    res.mean_iou[ti] = sum / static_cast<double>(pairs.size());
  }
  std::size_t best = 0;
  for (std::size_t ti = 1; ti < thresholds.size(); ++ti)
    if (res.mean_iou[ti] > res.mean_iou[best]) best = ti;
  res.best_threshold = res.thresholds[best];
  return res;
}

double r2(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, 2);
  const double m = mean(actual);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - pred[i]) * (actual[i] - pred[i]);
    ss_tot += (actual[i] - m) * (actual[i] - m);
  }
  if (ss_tot == 0.0) throw Error(ErrorCode::UndefinedMetric, "r2 with constant actual values");
  return 1.0 - ss_res / ss_tot;
}

double rmse(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

RmseCi rmse_with_ci(std::span<const double> pred, std::span<const double> actual, double level,
                    int resamples, std::uint64_t seed) {
  check_pair(pred, actual, 2);
  if (!(level > 0.0 && level < 1.0) || resamples < 1)
    throw Error(ErrorCode::InvalidInput, "bootstrap level must be in (0,1) with >= 1 resample");
  RmseCi out;
  out.rmse = rmse(pred, actual);
  const std::size_t n = pred.size();
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (pred[i] - actual[i]) * (pred[i] - actual[i]);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  for (auto& s : stats) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += sq[pick(rng)];
    s = std::sqrt(acc / static_cast<double>(n));
  }
  const double alpha = (1.0 - level) / 2.0;
  out.lo = quantile(stats, alpha);
  out.hi = quantile(stats, 1.0 - alpha);
  return out;
}

double pearson(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, 2);
  const double mp = mean(pred), ma = mean(actual);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sxy += (pred[i] - mp) * (actual[i] - ma);
    sxx += (pred[i] - mp) * (pred[i] - mp);
    syy += (actual[i] - ma) * (actual[i] - ma);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::UndefinedMetric, "pearson of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double band_accuracy(std::span<const double> pred, std::span<const double> actual, double band,
                     std::optional<std::pair<double, double>> actual_range) {
  check_pair(pred, actual, 1);
  if (band < 0.0) throw Error(ErrorCode::InvalidInput, "band must be non-negative");
  std::size_t hit = 0, n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (actual_range && (actual[i] < actual_range->first || actual[i] > actual_range->second)) continue;
    ++n;
    hit += std::abs(pred[i] - actual[i]) <= band;
  }
  if (n == 0) throw Error(ErrorCode::EmptyDataset, "no rows in the requested cohort");
  return static_cast<double>(hit) / static_cast<double>(n);
}

double percent_difference(double predicted, double reference) {
  if (!(reference > 0.0)) throw Error(ErrorCode::InvalidReference, "reference must be positive");
  return (predicted - reference) / reference * 100.0;
}

std::string format_percent_cell(double pct) {
  const long long r = std::llround(pct);
  return (r > 0 ? "+" : "") + std::to_string(r) + "%";
}

double quantile(std::span<const double> values, double q) {
  const double qs[1] = {q};
  return quantiles(values, qs)[0];
}

std::vector<double> quantiles(std::span<const double> values, std::span<const double> qs) {
  if (values.empty()) throw Error(ErrorCode::EmptyDataset, "quantiles of an empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  out.reserve(qs.size());
  for (double q : qs) {
    if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidInput, "quantile outside [0,1]");
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    out.push_back(v[lo] + (v[hi] - v[lo]) * frac);
  }
  return out;
}

std::string to_csv(std::span<const MetricRow> rows) {
  std::ostringstream os;
  os << "metric,value,lo,hi\n";
  for (const auto& r : rows) {
    os << r.metric << ',' << format_number(r.value) << ',';
    if (r.lo) os << format_number(*r.lo);
    os << ',';
    if (r.hi) os << format_number(*r.hi);
    os << '\n';
  }
  return os.str();
}

std::string to_key_value(std::span<const MetricRow> rows) {
  std::ostringstream os;
  for (const auto& r : rows) {
    os << r.metric << " = " << format_number(r.value);
    if (r.lo && r.hi) os << " [" << format_number(*r.lo) << ", " << format_number(*r.hi) << "]";
    os << '\n';
  }
  return os.str();
}

}  // namespace swinemap::metrics
