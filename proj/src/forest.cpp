#include "swinemap/forest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "swinemap/error.hpp"
#include "swinemap/parallel.hpp"
#include "swinemap/features.hpp"
#include "swinemap/metrics.hpp"
#include "swinemap/textio.hpp"

namespace swinemap {

std::string_view to_string(MaxFeatures m) {
  switch (m) {
    case MaxFeatures::Sqrt: return "sqrt";
    case MaxFeatures::Log2: return "log2";
    case MaxFeatures::All: return "all";
  }
  return "?";
}

MaxFeatures parse_max_features(std::string_view s) {
  const auto t = to_lower(trim(s));
  if (t == "sqrt") return MaxFeatures::Sqrt;
  if (t == "log2") return MaxFeatures::Log2;
  if (t == "all" || t == "none") return MaxFeatures::All;
  throw Error(ErrorCode::ConfigError, "unknown max_features '" + std::string(s) + "'");
}

std::string ForestParams::describe() const {
  std::ostringstream os;
  os << "n_trees=" << n_trees << ";max_depth=" << (max_depth == 0 ? std::string("None") : std::to_string(max_depth))
     << ";min_split=" << min_split << ";min_leaf=" << min_leaf << ";max_features=" << to_string(max_features);
  return os.str();
}

void Dataset::add(std::span<const double> features, double target, Point location) {
  if (features.size() != cols())
    throw Error(ErrorCode::SchemaMismatch, "row width " + std::to_string(features.size()) + " != " +
                                               std::to_string(cols()) + " columns");
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(target);
  locations.push_back(location);
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.columns = columns;
  out.n_classes = n_classes;
  out.x.reserve(idx.size() * cols());
  for (std::size_t i : idx) {
    auto r = row(i);
    out.x.insert(out.x.end(), r.begin(), r.end());
    out.y.push_back(y[i]);
    if (!locations.empty()) out.locations.push_back(locations[i]);
  }
  return out;
}

void Dataset::validate() const {
  if (x.size() != y.size() * cols()) throw Error(ErrorCode::InvalidInput, "feature matrix shape mismatch");
  if (!locations.empty() && locations.size() != y.size())
    throw Error(ErrorCode::InvalidInput, "location count differs from row count");
  for (double v : x)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "non-finite feature value");
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "non-finite target");
    if (n_classes > 0 && (v < 0 || v >= n_classes || v != std::floor(v)))
      throw Error(ErrorCode::InvalidInput, "class label outside 0.." + std::to_string(n_classes - 1));
  }
}

int Tree::depth() const {
  if (feature.empty()) return 0;
  std::vector<int> d(size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    best = std::max(best, d[i]);
    if (feature[i] >= 0) {
      d[static_cast<std::size_t>(left[i])] = d[i] + 1;
      d[static_cast<std::size_t>(right[i])] = d[i] + 1;
    }
  }
  return best;
}

namespace {

std::vector<std::size_t> draw_bootstrap(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

std::size_t features_per_split(MaxFeatures m, std::size_t p) {
  double k = static_cast<double>(p);
  if (m == MaxFeatures::Sqrt) k = std::ceil(std::sqrt(static_cast<double>(p)));
  if (m == MaxFeatures::Log2) k = std::ceil(std::log2(static_cast<double>(p)));
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, p);
}

const std::vector<double>& leaf_value(const Tree& t, std::span<const double> row, int n_out,
                                      std::vector<double>& scratch) {
  std::size_t node = 0;
  while (t.feature[node] >= 0)
    node = static_cast<std::size_t>(row[static_cast<std::size_t>(t.feature[node])] <= t.threshold[node]
                                        ? t.left[node]
                                        : t.right[node]);
  scratch.assign(t.value.begin() + static_cast<std::ptrdiff_t>(node * n_out),
                 t.value.begin() + static_cast<std::ptrdiff_t>((node + 1) * n_out));
  return scratch;
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& d, Task task, const ForestParams& p, std::mt19937_64& rng)
      : d_(d), task_(task), k_(task == Task::Classifier ? d.n_classes : 1), p_(p), rng_(rng),
        n_try_(features_per_split(p.max_features, d.cols())), perm_(d.cols()) {}

  Tree build(std::vector<std::size_t> samples) {
    samples_ = std::move(samples);
    grow(0, samples_.size(), 0);
    return std::move(t_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0;
    double proxy = -std::numeric_limits<double>::infinity();
  };

  double target(std::size_t s) const { return d_.y[s]; }
  double xval(std::size_t s, std::size_t f) const { return d_.x[s * d_.cols() + f]; }

  std::int32_t grow(std::size_t b, std::size_t e, int depth) {
    const auto id = static_cast<std::int32_t>(t_.size());
    const double m = static_cast<double>(e - b);
    t_.feature.push_back(-1);
    t_.threshold.push_back(0);
    t_.left.push_back(-1);
    t_.right.push_back(-1);
    t_.n_samples.push_back(m);
    double impurity = 0;
    if (task_ == Task::Classifier) {
      std::vector<double> counts(static_cast<std::size_t>(k_), 0.0);
      for (std::size_t i = b; i < e; ++i) counts[static_cast<std::size_t>(target(samples_[i]))] += 1;
      double sq = 0;
      for (double& c : counts) {
        sq += c * c;
        c /= m;
      }
      impurity = 1.0 - sq / (m * m);
      t_.value.insert(t_.value.end(), counts.begin(), counts.end());
    } else {
      double s = 0, s2 = 0;
      for (std::size_t i = b; i < e; ++i) {
        const double v = target(samples_[i]);
        s += v;
        s2 += v * v;
      }
      const double mean = s / m;
      impurity = std::max(0.0, s2 / m - mean * mean);
      t_.value.push_back(mean);
    }
    t_.impurity.push_back(impurity);

    const bool at_limit = p_.max_depth > 0 && depth >= p_.max_depth;
    if (at_limit || m < p_.min_split || m < 2.0 * p_.min_leaf || impurity <= 1e-12) return id;
    const Split s = best_split(b, e);
    if (s.feature < 0) return id;

    const auto f = static_cast<std::size_t>(s.feature);
    const auto mid = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(b),
                                    samples_.begin() + static_cast<std::ptrdiff_t>(e),
                                    [&](std::size_t smp) { return xval(smp, f) <= s.threshold; });
    const auto cut = static_cast<std::size_t>(mid - samples_.begin());
    t_.feature[static_cast<std::size_t>(id)] = s.feature;
    t_.threshold[static_cast<std::size_t>(id)] = s.threshold;
    const auto l = grow(b, cut, depth + 1);
    const auto r = grow(cut, e, depth + 1);
    t_.left[static_cast<std::size_t>(id)] = l;
    t_.right[static_cast<std::size_t>(id)] = r;
    return id;
  }

  Split best_split(std::size_t b, std::size_t e) {
    Split best;
    const std::size_t p = d_.cols();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    for (std::size_t j = 0; j < p; ++j) {
      // Draw features without replacement; past n_try only while no valid split exists.
      if (j >= n_try_ && best.feature >= 0) break;
      std::uniform_int_distribution<std::size_t> pick(j, p - 1);
      std::swap(perm_[j], perm_[pick(rng_)]);
      scan_feature(perm_[j], b, e, best);
    }
    return best;
  }

  void scan_feature(std::size_t f, std::size_t b, std::size_t e, Split& best) {
    const std::size_t m = e - b;
    buf_.resize(m);
    for (std::size_t i = 0; i < m; ++i) buf_[i] = {xval(samples_[b + i], f), target(samples_[b + i])};
    std::sort(buf_.begin(), buf_.end(), [](const auto& a, const auto& c) { return a.first < c.first; });
    if (buf_.front().first == buf_.back().first) return;
    const auto min_leaf = static_cast<std::size_t>(p_.min_leaf);

    if (task_ == Task::Classifier) {
      left_.assign(static_cast<std::size_t>(k_), 0.0);
      right_.assign(static_cast<std::size_t>(k_), 0.0);
      for (const auto& v : buf_) right_[static_cast<std::size_t>(v.second)] += 1;
      double sq_l = 0, sq_r = 0;
      for (double c : right_) sq_r += c * c;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const auto c = static_cast<std::size_t>(buf_[i].second);
        sq_l += 2 * left_[c] + 1;
        left_[c] += 1;
        sq_r -= 2 * right_[c] - 1;
        right_[c] -= 1;
        const std::size_t nl = i + 1, nr = m - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        if (!(buf_[i + 1].first > buf_[i].first)) continue;
        const double proxy = sq_l / static_cast<double>(nl) + sq_r / static_cast<double>(nr);
        consider(f, i, proxy, best);
      }
    } else {
      double sum_r = 0, sum_l = 0;
      for (const auto& v : buf_) sum_r += v.second;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        sum_l += buf_[i].second;
        sum_r -= buf_[i].second;
        const std::size_t nl = i + 1, nr = m - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        if (!(buf_[i + 1].first > buf_[i].first)) continue;
        const double proxy = sum_l * sum_l / static_cast<double>(nl) + sum_r * sum_r / static_cast<double>(nr);
        consider(f, i, proxy, best);
      }
    }
  }

  void consider(std::size_t f, std::size_t i, double proxy, Split& best) {
    if (!(proxy > best.proxy)) return;
    const double a = buf_[i].first, c = buf_[i + 1].first;
    double thr = a / 2.0 + c / 2.0;
    if (!(thr < c) || !std::isfinite(thr)) thr = a;
    best = {static_cast<int>(f), thr, proxy};
  }

  const Dataset& d_;
  Task task_;
  int k_;
  const ForestParams& p_;
  std::mt19937_64& rng_;
  std::size_t n_try_;
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> samples_;
  std::vector<std::pair<double, double>> buf_;
  std::vector<double> left_, right_;
  Tree t_;
};

void check_trainable(const Dataset& d, Task task) {
  d.validate();
  if (d.rows() == 0 || d.cols() == 0) throw Error(ErrorCode::DegenerateTraining, "empty training set");
  if (task == Task::Classifier) {
    if (d.n_classes < 2) throw Error(ErrorCode::DegenerateTraining, "classifier needs at least two classes");
    std::vector<bool> seen(static_cast<std::size_t>(d.n_classes), false);
    for (double v : d.y) seen[static_cast<std::size_t>(v)] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2)
      throw Error(ErrorCode::DegenerateTraining, "training targets contain a single class");
  } else {
    const auto [lo, hi] = std::minmax_element(d.y.begin(), d.y.end());
    if (*lo == *hi) throw Error(ErrorCode::DegenerateTraining, "regression target is constant");
  }
}

}  // namespace

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t tree) {
  std::mt19937_64 rng(seed + tree);
  return draw_bootstrap(rng, n);
}

ForestModel fit_forest(const Dataset& d, Task task, const ForestParams& p, std::uint64_t seed) {
  check_trainable(d, task);
  if (p.n_trees < 1 || p.min_split < 2 || p.min_leaf < 1 || p.max_depth < 0)
    throw Error(ErrorCode::InvalidInput, "invalid forest parameters: " + p.describe());
  ForestModel m;
  m.task = task;
  m.n_classes = task == Task::Classifier ? d.n_classes : 0;
  m.params = p;
  m.seed = seed;
  m.columns = d.columns;
  m.trees.resize(static_cast<std::size_t>(p.n_trees));
  parallel_for(m.trees.size(), [&](std::size_t t) {
    std::mt19937_64 rng(seed + t);
    auto boot = draw_bootstrap(rng, d.rows());
    TreeBuilder builder(d, task, p, rng);
    m.trees[t] = builder.build(std::move(boot));
  });
  return m;
}

std::uint64_t ForestModel::schema() const { return schema_hash(columns); }

void ForestModel::check_schema(std::span<const std::string> cols) const {
  if (schema_hash(cols) != schema() || cols.size() != columns.size())
    throw Error(ErrorCode::SchemaMismatch, "feature columns differ from the model's training schema");
}

std::vector<double> ForestModel::predict_proba(std::span<const double> row) const {
  if (row.size() != columns.size())
    throw Error(ErrorCode::SchemaMismatch, "row has " + std::to_string(row.size()) + " values, model expects " +
                                               std::to_string(columns.size()));
  if (trees.empty()) throw Error(ErrorCode::ModelFormatError, "model has no trees");
  const int k = n_outputs();
  std::vector<double> acc(static_cast<std::size_t>(k), 0.0), scratch;
  for (const auto& t : trees) {
    const auto& v = leaf_value(t, row, k, scratch);
    for (int i = 0; i < k; ++i) acc[static_cast<std::size_t>(i)] += v[static_cast<std::size_t>(i)];
  }
  for (double& a : acc) a /= static_cast<double>(trees.size());
  return acc;
}

double ForestModel::predict_value(std::span<const double> row) const {
  if (task != Task::Regressor) throw Error(ErrorCode::InvalidInput, "predict_value on a classifier");
  return predict_proba(row)[0];
}

double ForestModel::predict_positive(std::span<const double> row) const {
  if (task != Task::Classifier || n_classes != 2)
    throw Error(ErrorCode::InvalidInput, "predict_positive needs a binary classifier");
  return predict_proba(row)[1];
}

int ForestModel::predict_class(std::span<const double> row) const {
  const auto p = predict_proba(row);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<double> ForestModel::importance() const {
  std::vector<double> total(columns.size(), 0.0), per(columns.size());
  for (const auto& t : trees) {
    std::fill(per.begin(), per.end(), 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t.feature[i] < 0) continue;
      const auto l = static_cast<std::size_t>(t.left[i]), r = static_cast<std::size_t>(t.right[i]);
      const double dec = t.n_samples[i] * t.impurity[i] - t.n_samples[l] * t.impurity[l] -
                         t.n_samples[r] * t.impurity[r];
      per[static_cast<std::size_t>(t.feature[i])] += std::max(0.0, dec);
    }
    const double s = std::accumulate(per.begin(), per.end(), 0.0);
    if (s > 0)
      for (std::size_t f = 0; f < per.size(); ++f) total[f] += per[f] / s;
  }
  const double s = std::accumulate(total.begin(), total.end(), 0.0);
  if (s > 0)
    for (double& v : total) v /= s;
  return total;
}

ForestModel ForestModel::prefix(std::size_t n) const {
  if (n == 0 || n > trees.size()) throw Error(ErrorCode::InvalidInput, "prefix size out of range");
  ForestModel m = *this;
  m.trees.resize(n);
  m.params.n_trees = static_cast<int>(n);
  return m;
}

double oob_score(const ForestModel& m, const Dataset& d) {
  const std::size_t n = d.rows();
  const int k = m.n_outputs();
  std::vector<double> acc(n * static_cast<std::size_t>(k), 0.0);
  std::vector<int> votes(n, 0);
  std::vector<double> scratch;
  std::vector<char> in_bag(n);
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    std::fill(in_bag.begin(), in_bag.end(), 0);
    for (auto i : bootstrap_indices(n, m.seed, t)) in_bag[i] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      const auto& v = leaf_value(m.trees[t], d.row(i), k, scratch);
      for (int c = 0; c < k; ++c) acc[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] += v[static_cast<std::size_t>(c)];
      ++votes[i];
    }
  }
  std::vector<double> pred, actual;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!votes[i]) continue;
    const double* a = acc.data() + i * static_cast<std::size_t>(k);
    if (m.task == Task::Classifier) {
      const auto c = static_cast<double>(std::max_element(a, a + k) - a);
      hit += c == d.y[i];
      pred.push_back(c);
    } else {
      pred.push_back(a[0] / votes[i]);
    }
    actual.push_back(d.y[i]);
  }
  if (pred.empty()) throw Error(ErrorCode::EmptyDataset, "no out-of-bag samples");
  if (m.task == Task::Classifier) return static_cast<double>(hit) / static_cast<double>(pred.size());
  return metrics::r2(pred, actual);
}

FoldAssignment spatial_blocks(std::span<const Point> locations, double block_size, int k, std::uint64_t seed) {
  if (locations.empty()) throw Error(ErrorCode::EmptyDataset, "no sample locations");
  if (!(block_size > 0) || k < 1) throw Error(ErrorCode::InvalidInput, "block size and k must be positive");
  FoldAssignment a;
  a.k = k;
  a.block.reserve(locations.size());
  for (const auto& p : locations)
    a.block.emplace_back(static_cast<std::int64_t>(std::floor(p.x / block_size)),
                         static_cast<std::int64_t>(std::floor(p.y / block_size)));
  std::vector<std::pair<std::int64_t, std::int64_t>> occupied(a.block);
  std::sort(occupied.begin(), occupied.end());
  occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());
  if (static_cast<std::size_t>(k) > occupied.size())
    throw Error(ErrorCode::InsufficientBlocks, std::to_string(k) + " folds but only " +
                                                   std::to_string(occupied.size()) + " occupied blocks");
  std::mt19937_64 rng(seed);
  for (std::size_t i = occupied.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(occupied[i - 1], occupied[pick(rng)]);
  }
  std::map<std::pair<std::int64_t, std::int64_t>, int> fold_of;
  for (std::size_t i = 0; i < occupied.size(); ++i) fold_of[occupied[i]] = static_cast<int>(i % static_cast<std::size_t>(k)) + 1;
  a.fold.reserve(locations.size());
  for (const auto& b : a.block) a.fold.push_back(fold_of[b]);
  return a;
}

ScoreSet classification_scores(std::span<const int> pred, std::span<const int> truth, int n_classes) {
  if (pred.size() != truth.size() || pred.empty())
    throw Error(ErrorCode::ShapeMismatch, "prediction and truth lengths differ or are empty");
  ScoreSet s;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  s.accuracy = static_cast<double>(hit) / static_cast<double>(pred.size());
  auto per_class = [&](int c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      tp += pred[i] == c && truth[i] == c;
      fp += pred[i] == c && truth[i] != c;
      fn += pred[i] != c && truth[i] == c;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    return std::array<double, 3>{p, r, f};
  };
  if (n_classes == 2) {
    const auto v = per_class(1);
    s.precision = v[0];
    s.recall = v[1];
    s.f1 = v[2];
  } else {
    for (int c = 0; c < n_classes; ++c) {
      const auto v = per_class(c);
      s.precision += v[0] / n_classes;
      s.recall += v[1] / n_classes;
      s.f1 += v[2] / n_classes;
    }
  }
  return s;
}

std::size_t CvResult::used_folds() const {
  return static_cast<std::size_t>(std::count_if(folds.begin(), folds.end(), [](const auto& f) { return !f.skipped; }));
}

namespace {

double selection_value(Task task, const ScoreSet& s) { return task == Task::Classifier ? s.f1 : s.r2; }

bool better(Task task, const ScoreSet& s, const ForestParams& p, const ScoreSet& best_s, const ForestParams& best_p) {
  const double a = selection_value(task, s), b = selection_value(task, best_s);
  if (a != b) return a > b;
  if (p.n_trees != best_p.n_trees) return p.n_trees < best_p.n_trees;
  const auto depth_key = [](int d) { return d == 0 ? std::numeric_limits<int>::max() : d; };
  return depth_key(p.max_depth) < depth_key(best_p.max_depth);
}

std::string skip_reason(const Dataset& train, const Dataset& test, Task task) {
  if (train.rows() == 0 || test.rows() == 0) return "empty partition";
  if (task == Task::Classifier) {
    auto classes = [](const Dataset& d) {
      std::vector<double> v(d.y);
      std::sort(v.begin(), v.end());
      return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
    };
    if (classes(train) < 2) return "training partition has a single class";
    if (classes(test) < 2) return "test partition has a single class";
  } else {
    if (test.rows() < 2) return "test partition has fewer than two rows";
    const auto [lo, hi] = std::minmax_element(test.y.begin(), test.y.end());
    if (*lo == *hi) return "test partition has a constant target";
    const auto [tlo, thi] = std::minmax_element(train.y.begin(), train.y.end());
    if (*tlo == *thi) return "training partition has a constant target";
  }
  return {};
}

}  // namespace

CvResult grid_search_cv(const Dataset& d, Task task, const FoldAssignment& folds, const HyperGrid& grid,
                        std::uint64_t seed, const std::string& config_label) {
  d.validate();
  if (folds.fold.size() != d.rows()) throw Error(ErrorCode::InvalidInput, "fold assignment size differs from dataset");
  if (grid.size() == 0) throw Error(ErrorCode::InvalidInput, "empty hyperparameter grid");
  std::vector<int> tree_counts(grid.n_trees);
  std::sort(tree_counts.begin(), tree_counts.end());
  tree_counts.erase(std::unique(tree_counts.begin(), tree_counts.end()), tree_counts.end());
  const int max_trees = tree_counts.back();

  CvResult res;
  res.task = task;
  const int k = task == Task::Classifier ? d.n_classes : 1;
  for (int f = 1; f <= folds.k; ++f) {
    FoldResult fr;
    fr.fold = f;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < d.rows(); ++i) (folds.fold[i] == f ? fr.test_rows : train_idx).push_back(i);
    const Dataset train = d.subset(train_idx), test = d.subset(fr.test_rows);
    fr.skip_reason = skip_reason(train, test, task);
    if (!fr.skip_reason.empty()) {
      fr.skipped = true;
      res.folds.push_back(std::move(fr));
      continue;
    }
    bool have_best = false;
    for (int depth : grid.max_depth)
      for (int split : grid.min_split)
        for (int leaf : grid.min_leaf)
          for (MaxFeatures mf : grid.max_features) {
            ForestParams p{max_trees, depth, split, leaf, mf};
            const ForestModel full = fit_forest(train, task, p, seed);
            // Trees are independent given the seed, so smaller forests are prefixes.
            std::vector<double> acc(test.rows() * static_cast<std::size_t>(k), 0.0), scratch;
            std::size_t done = 0;
            for (int nt : tree_counts) {
              for (; done < static_cast<std::size_t>(nt); ++done)
                for (std::size_t i = 0; i < test.rows(); ++i) {
                  const auto& v = leaf_value(full.trees[done], test.row(i), k, scratch);
                  for (int c = 0; c < k; ++c)
                    acc[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] += v[static_cast<std::size_t>(c)];
                }
              ScoreSet s;
              if (task == Task::Classifier) {
                std::vector<int> pred(test.rows()), truth(test.rows());
                for (std::size_t i = 0; i < test.rows(); ++i) {
                  const double* a = acc.data() + i * static_cast<std::size_t>(k);
                  pred[i] = static_cast<int>(std::max_element(a, a + k) - a);
                  truth[i] = static_cast<int>(test.y[i]);
                }
                s = classification_scores(pred, truth, d.n_classes);
              } else {
                std::vector<double> pred(test.rows());
                for (std::size_t i = 0; i < test.rows(); ++i) pred[i] = acc[i] / nt;
                s.r2 = metrics::r2(pred, test.y);
                s.rmse = metrics::rmse(pred, test.y);
              }
              ForestParams pp = p;
              pp.n_trees = nt;
              res.rows.push_back({f, (config_label.empty() ? "" : config_label + ";") + pp.describe(), s});
              if (!have_best || better(task, s, pp, fr.test, fr.best)) {
                have_best = true;
                fr.best = pp;
                fr.test = s;
                fr.model = full.prefix(static_cast<std::size_t>(nt));
              }
            }
          }
    res.folds.push_back(std::move(fr));
  }
  const double used = static_cast<double>(res.used_folds());
  if (used > 0)
    for (const auto& fr : res.folds) {
      if (fr.skipped) continue;
      res.mean_test.accuracy += fr.test.accuracy / used;
      res.mean_test.precision += fr.test.precision / used;
      res.mean_test.recall += fr.test.recall / used;
      res.mean_test.f1 += fr.test.f1 / used;
      res.mean_test.r2 += fr.test.r2 / used;
      res.mean_test.rmse += fr.test.rmse / used;
    }
  return res;
}

bool vote_filter(std::span<const double> per_fold_probs) {
  if (per_fold_probs.empty()) throw Error(ErrorCode::InvalidInput, "vote needs at least one fold");
  const std::size_t need = (per_fold_probs.size() + 2) / 2;
  const auto yes = static_cast<std::size_t>(
      std::count_if(per_fold_probs.begin(), per_fold_probs.end(), [](double p) { return p >= 0.5; }));
  return yes >= need;
}

std::string cv_rows_csv(const CvResult& r) {
  std::ostringstream os;
  if (r.task == Task::Classifier) {
    os << "fold,config,accuracy,precision,recall,f1\n";
    for (const auto& row : r.rows)
      os << row.fold << ',' << csv_escape(row.config) << ',' << format_number(row.scores.accuracy) << ','
         << format_number(row.scores.precision) << ',' << format_number(row.scores.recall) << ','
         << format_number(row.scores.f1) << '\n';
  } else {
    os << "fold,config,r2,rmse\n";
    for (const auto& row : r.rows)
      os << row.fold << ',' << csv_escape(row.config) << ',' << format_number(row.scores.r2) << ','
         << format_number(row.scores.rmse) << '\n';
  }
  return os.str();
}

namespace {

constexpr std::string_view kMagic = "swinemap-forest";
constexpr int kFormatVersion = 1;

[[noreturn]] void bad(const std::string& why) { throw Error(ErrorCode::ModelFormatError, why); }

class TokenReader {
 public:
  explicit TokenReader(std::string_view text) : text_(text) {}
  std::string_view next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ >= text_.size()) bad("unexpected end of model file");
    const std::size_t b = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(b, pos_ - b);
  }
  void expect(std::string_view word) {
    const auto t = next();
    if (t != word) bad("expected '" + std::string(word) + "', found '" + std::string(t) + "'");
  }
  double number() {
    const auto t = next();
    try {
      return parse_number(t);
    } catch (const Error&) {
      bad("bad number '" + std::string(t) + "'");
    }
  }
  long long integer() {
    const double v = number();
    if (v != std::floor(v)) bad("expected an integer");
    return static_cast<long long>(v);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const ForestModel& m) {
  std::ostringstream os;
  os << kMagic << ' ' << kFormatVersion << '\n';
  os << "task " << (m.task == Task::Classifier ? "classifier" : "regressor") << '\n';
  os << "n_classes " << m.n_classes << '\n';
  os << "schema_hash " << m.schema() << '\n';
  os << "columns " << m.columns.size() << '\n';
  for (const auto& c : m.columns) os << c << '\n';
  os << "params " << m.params.n_trees << ' ' << m.params.max_depth << ' ' << m.params.min_split << ' '
     << m.params.min_leaf << ' ' << to_string(m.params.max_features) << '\n';
  os << "seed " << m.seed << '\n';
  os << "trees " << m.trees.size() << '\n';
  const int k = m.n_outputs();
  for (const auto& t : m.trees) {
    os << "tree " << t.size() << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      os << t.feature[i] << ' ' << format_number(t.threshold[i]) << ' ' << t.left[i] << ' ' << t.right[i] << ' '
         << format_number(t.n_samples[i]) << ' ' << format_number(t.impurity[i]);
      for (int c = 0; c < k; ++c) os << ' ' << format_number(t.value[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)]);
      os << '\n';
    }
  }
  os << "end\n";
  return os.str();
}

ForestModel deserialize_model(std::string_view text) {
  TokenReader in(text);
  in.expect(kMagic);
  if (in.integer() != kFormatVersion) bad("unsupported model format version");
  ForestModel m;
  in.expect("task");
  const auto task = in.next();
  if (task == "classifier") m.task = Task::Classifier;
  else if (task == "regressor") m.task = Task::Regressor;
  else bad("unknown task '" + std::string(task) + "'");
  in.expect("n_classes");
  m.n_classes = static_cast<int>(in.integer());
  in.expect("schema_hash");
  const std::string hash(in.next());
  in.expect("columns");
  const auto n_cols = in.integer();
  if (n_cols < 1 || n_cols > 100000) bad("bad column count");
  for (long long i = 0; i < n_cols; ++i) m.columns.emplace_back(in.next());
  if (std::to_string(m.schema()) != hash) bad("schema hash does not match column list");
  in.expect("params");
  m.params.n_trees = static_cast<int>(in.integer());
  m.params.max_depth = static_cast<int>(in.integer());
  m.params.min_split = static_cast<int>(in.integer());
  m.params.min_leaf = static_cast<int>(in.integer());
  try {
    m.params.max_features = parse_max_features(in.next());
  } catch (const Error& e) {
    bad(e.what());
  }
  in.expect("seed");
  m.seed = std::stoull(std::string(in.next()));
  in.expect("trees");
  const auto n_trees = in.integer();
  if (n_trees < 1) bad("model has no trees");
  if (m.task == Task::Classifier && m.n_classes < 2) bad("classifier with fewer than two classes");
  const int k = m.n_outputs();
  for (long long ti = 0; ti < n_trees; ++ti) {
    in.expect("tree");
    const auto n = in.integer();
    if (n < 1) bad("empty tree");
    Tree t;
    for (long long i = 0; i < n; ++i) {
      t.feature.push_back(static_cast<std::int32_t>(in.integer()));
      t.threshold.push_back(in.number());
      t.left.push_back(static_cast<std::int32_t>(in.integer()));
      t.right.push_back(static_cast<std::int32_t>(in.integer()));
      t.n_samples.push_back(in.number());
      t.impurity.push_back(in.number());
      for (int c = 0; c < k; ++c) t.value.push_back(in.number());
      const auto f = t.feature.back();
      if (f >= n_cols || f < -1) bad("split feature out of range");
      if (f >= 0 && (t.left.back() <= i || t.right.back() <= i || t.left.back() >= n || t.right.back() >= n))
        bad("child index out of range");
    }
    m.trees.push_back(std::move(t));
  }
  in.expect("end");
  return m;
}

void save_model(const ForestModel& m, const std::filesystem::path& path) {
  write_text_atomic(path, serialize_model(m));
}

ForestModel load_model(const std::filesystem::path& path) { return deserialize_model(read_text(path)); }

}  // namespace swinemap
