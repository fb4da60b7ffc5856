#include "latefuse/models/tree.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace latefuse::models {

const std::vector<double>& Tree::leaf_value(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                       : n.right);
  }
  return nodes[i].value;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
    d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

SortedColumns presort(const Dataset& data) {
  SortedColumns s;
  const std::size_t n = data.rows();
  const std::size_t d = data.n_features;
  s.order.resize(d);
  for (std::size_t f = 0; f < d; ++f) {
    auto& o = s.order[f];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      return data.x[a * d + f] < data.x[b * d + f];
    });
  }
  return s;
}

double gini_split_score(std::span<const double> left_counts, double left_total,
                        std::span<const double> right_counts, double right_total) {
  double l = 0.0;
  double r = 0.0;
  for (double c : left_counts) l += c * c;
  for (double c : right_counts) r += c * c;
  return l / left_total + r / right_total;
}

namespace {

// Threshold strictly between two sorted distinct values that still sends
// `a` left and `b` right.
double midpoint(double a, double b) {
  double t = a / 2.0 + b / 2.0;
  if (t >= b || !std::isfinite(t)) t = a;
  return t;
}

// Per-feature sorted row lists where every node owns the same [begin, end)
// range in every list. Splitting a node stably partitions each list.
class NodeColumns {
 public:
  template <typename InSample>
  NodeColumns(const Dataset& data, const SortedColumns& sorted, InSample in_sample)
      : data_(data), cols_(sorted.order.size()), goes_left_(data.rows(), 0) {
    for (std::size_t f = 0; f < cols_.size(); ++f) {
      cols_[f].reserve(sorted.order[f].size());
      for (auto r : sorted.order[f]) {
        if (in_sample(r)) cols_[f].push_back(r);
      }
    }
    scratch_.resize(cols_.empty() ? 0 : cols_[0].size());
  }

  std::size_t size() const { return cols_.empty() ? 0 : cols_[0].size(); }
  std::size_t features() const { return cols_.size(); }

  std::span<const std::uint32_t> range(std::size_t f, std::size_t b, std::size_t e) const {
    return std::span<const std::uint32_t>(cols_[f]).subspan(b, e - b);
  }

  double value(std::uint32_t row, std::size_t f) const {
    return data_.x[row * data_.n_features + f];
  }

  // Returns the number of rows sent left.
  std::size_t split(std::size_t b, std::size_t e, std::size_t feature, double threshold) {
    std::size_t n_left = 0;
    for (auto r : range(feature, b, e)) {
      const bool left = value(r, feature) <= threshold;
      goes_left_[r] = left ? 1 : 0;
      n_left += left ? 1 : 0;
    }
    for (auto& col : cols_) {
      std::size_t li = 0;
      std::size_t ri = n_left;
      for (std::size_t i = b; i < e; ++i) {
        const auto r = col[i];
        scratch_[goes_left_[r] ? li++ : ri++] = r;
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(e - b),
                col.begin() + static_cast<std::ptrdiff_t>(b));
    }
    return n_left;
  }

 private:
  const Dataset& data_;
  std::vector<std::vector<std::uint32_t>> cols_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::uint32_t> scratch_;
};

using Counts = std::array<double, kNumClasses>;

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
};

class ClassTreeBuilder {
 public:
  ClassTreeBuilder(const Dataset& data, const SortedColumns& sorted,
                   std::span<const double> weights, const ClassTreeOptions& options, Rng& rng)
      : data_(data),
        weights_(weights),
        options_(options),
        rng_(rng),
        cols_(data, sorted, [&](std::uint32_t r) { return weights[r] > 0.0; }) {}

  Tree build() {
    if (cols_.size() == 0) throw ContractError("tree fit on an empty sample");
    grow(0, cols_.size(), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::size_t b, std::size_t e, int depth) {
    Counts counts{};
    double total = 0.0;
    for (auto r : cols_.range(0, b, e)) {
      counts[static_cast<std::size_t>(data_.y[r])] += weights_[r];
      total += weights_[r];
    }
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    {
      auto& node = tree_.nodes.back();
      node.value.resize(kNumClasses);
      for (std::size_t k = 0; k < kNumClasses; ++k) node.value[k] = counts[k] / total;
    }

    const int classes_present =
        static_cast<int>(std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }));
    if (depth >= options_.max_depth || classes_present <= 1 ||
        total < 2.0 * options_.min_samples_leaf) {
      return id;
    }

    const SplitChoice best = find_split(b, e, counts, total);
    if (best.feature < 0) return id;

    const std::size_t n_left =
        cols_.split(b, e, static_cast<std::size_t>(best.feature), best.threshold);
    const int left = grow(b, b + n_left, depth + 1);
    const int right = grow(b + n_left, e, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    node.value.clear();
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    const std::size_t d = cols_.features();
    std::vector<std::size_t> f(d);
    std::iota(f.begin(), f.end(), 0);
    const auto m = static_cast<std::size_t>(options_.max_features);
    if (m == 0 || m >= d) return f;
    for (std::size_t i = 0; i < m; ++i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng_, static_cast<std::int64_t>(i),
                                                          static_cast<std::int64_t>(d - 1)));
      std::swap(f[i], f[j]);
    }
    f.resize(m);
    std::sort(f.begin(), f.end());
    return f;
  }

  SplitChoice find_split(std::size_t b, std::size_t e, const Counts& counts, double total) {
    SplitChoice best;
    const double min_leaf = options_.min_samples_leaf;
    for (std::size_t f : candidate_features()) {
      const auto col = cols_.range(f, b, e);
      if (options_.random_thresholds) {
        const double lo = cols_.value(col.front(), f);
        const double hi = cols_.value(col.back(), f);
        if (!(hi > lo)) continue;
        double t = uniform(rng_, lo, hi);
        if (t >= hi) t = lo;
        Counts left{};
        double n_left = 0.0;
        for (auto r : col) {
          if (cols_.value(r, f) > t) break;
          left[static_cast<std::size_t>(data_.y[r])] += weights_[r];
          n_left += weights_[r];
        }
        if (n_left < min_leaf || total - n_left < min_leaf) continue;
        Counts right{};
        for (std::size_t k = 0; k < kNumClasses; ++k) right[k] = counts[k] - left[k];
        const double score = gini_split_score(left, n_left, right, total - n_left);
        if (score > best.score) best = {static_cast<int>(f), t, score};
        continue;
      }

      Counts left{};
      double n_left = 0.0;
      for (std::size_t i = 0; i + 1 < col.size(); ++i) {
        const auto r = col[i];
        left[static_cast<std::size_t>(data_.y[r])] += weights_[r];
        n_left += weights_[r];
        const double v = cols_.value(r, f);
        const double next = cols_.value(col[i + 1], f);
        if (!(next > v)) continue;
        if (n_left < min_leaf) continue;
        if (total - n_left < min_leaf) break;
        Counts right{};
        for (std::size_t k = 0; k < kNumClasses; ++k) right[k] = counts[k] - left[k];
        const double score = gini_split_score(left, n_left, right, total - n_left);
        if (score > best.score) best = {static_cast<int>(f), midpoint(v, next), score};
      }
    }
    return best;
  }

  const Dataset& data_;
  std::span<const double> weights_;
  ClassTreeOptions options_;
  Rng& rng_;
  NodeColumns cols_;
  Tree tree_;
};

// Grown level by level from per-node gradient histograms. Candidates are
// visited per node in (feature, cut) order and replaced only on a strictly
// larger gain.
class GradientTreeBuilder {
 public:
  GradientTreeBuilder(const Dataset& data, const FeatureBins& bins,
                      std::span<const std::uint32_t> rows, std::span<const double> grad,
                      std::span<const double> hess, const GradientTreeOptions& options)
      : data_(data), bins_(bins), rows_(rows), grad_(grad), hess_(hess), options_(options) {
    slot_.assign(data.rows(), 0);
    offset_.push_back(0);
    for (std::size_t f = 0; f < bins.n_features; ++f) offset_.push_back(offset_.back() + bins.bins(f));
  }

  Tree build() {
    std::vector<Open> open(1);
    for (auto r : rows_) {
      open[0].g += grad_[r];
      open[0].h += hess_[r];
    }
    if (rows_.empty()) throw ContractError("gradient tree fit on an empty sample");
    open[0].node = add_leaf(open[0].g, open[0].h);
    active_.assign(rows_.begin(), rows_.end());

    for (int depth = 0; depth < options_.max_depth && !open.empty(); ++depth) {
      find_splits(open);
      open = apply_splits(open);
    }
    return std::move(tree_);
  }

 private:
  struct Open {
    int node = 0;
    double g = 0.0;
    double h = 0.0;
    int feature = -1;
    std::size_t cut = 0;
    double gain = 1e-12;
  };

  int add_leaf(double g, double h) {
    tree_.nodes.emplace_back();
    tree_.nodes.back().value = {newton_leaf_weight(g, h, options_.lambda)};
    return static_cast<int>(tree_.nodes.size() - 1);
  }

  void find_splits(std::vector<Open>& open) {
    const double lambda = options_.lambda;
    const double mcw = options_.min_child_weight;
    const std::size_t d = bins_.n_features;
    const std::size_t width = offset_.back();
    // hist[(slot * width + offset_f + b) * 2 + {0: g, 1: h}]
    hist_.assign(open.size() * width * 2, 0.0);
    for (auto r : active_) {
      double* base = hist_.data() + static_cast<std::size_t>(slot_[r]) * width * 2;
      const std::uint16_t* b = bins_.bin.data() + static_cast<std::size_t>(r) * d;
      const double g = grad_[r];
      const double h = hess_[r];
      for (std::size_t f = 0; f < d; ++f) {
        double* cell = base + (offset_[f] + b[f]) * 2;
        cell[0] += g;
        cell[1] += h;
      }
    }
    for (std::size_t k = 0; k < open.size(); ++k) {
      auto& o = open[k];
      const double parent = o.g * o.g / (o.h + lambda);
      const double* base = hist_.data() + k * width * 2;
      for (std::size_t f = 0; f < d; ++f) {
        double gl = 0.0;
        double hl = 0.0;
        const double* cell = base + offset_[f] * 2;
        for (std::size_t b = 0; b + 1 < bins_.bins(f); ++b) {
          gl += cell[2 * b];
          hl += cell[2 * b + 1];
          const double hr = o.h - hl;
          if (hl < mcw || hr < mcw) continue;
          const double gr = o.g - gl;
          const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
          if (gain > o.gain) {
            o.gain = gain;
            o.feature = static_cast<int>(f);
            o.cut = b;
          }
        }
      }
    }
  }

  std::vector<Open> apply_splits(const std::vector<Open>& open) {
    const std::size_t d = bins_.n_features;
    std::vector<int> first_child(open.size(), -1);
    std::vector<Open> next;
    for (std::size_t k = 0; k < open.size(); ++k) {
      if (open[k].feature < 0) continue;
      first_child[k] = static_cast<int>(next.size());
      next.emplace_back();
      next.emplace_back();
    }
    std::size_t kept = 0;
    for (auto r : active_) {
      const auto k = static_cast<std::size_t>(slot_[r]);
      const int c = first_child[k];
      if (c < 0) continue;
      const auto& o = open[k];
      const auto f = static_cast<std::size_t>(o.feature);
      const bool left = bins_.bin[static_cast<std::size_t>(r) * d + f] <= o.cut;
      slot_[r] = left ? c : c + 1;
      auto& child = next[static_cast<std::size_t>(slot_[r])];
      child.g += grad_[r];
      child.h += hess_[r];
      active_[kept++] = r;
    }
    active_.resize(kept);
    for (std::size_t k = 0; k < open.size(); ++k) {
      const int c = first_child[k];
      if (c < 0) continue;
      auto& left = next[static_cast<std::size_t>(c)];
      auto& right = next[static_cast<std::size_t>(c) + 1];
      left.node = add_leaf(left.g, left.h);
      right.node = add_leaf(right.g, right.h);
      const auto f = static_cast<std::size_t>(open[k].feature);
      auto& node = tree_.nodes[static_cast<std::size_t>(open[k].node)];
      node.feature = open[k].feature;
      node.threshold = bins_.cuts[f][open[k].cut];
      node.left = left.node;
      node.right = right.node;
      node.value.clear();
    }
    return next;
  }

  const Dataset& data_;
  const FeatureBins& bins_;
  std::span<const std::uint32_t> rows_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  GradientTreeOptions options_;
  std::vector<std::size_t> offset_;
  std::vector<int> slot_;  // open-node slot of every active row
  std::vector<std::uint32_t> active_;
  std::vector<double> hist_;
  Tree tree_;
};

}  // namespace

Tree grow_classification_tree(const Dataset& data, const SortedColumns& sorted,
                              std::span<const double> weights, const ClassTreeOptions& options,
                              Rng& rng) {
  if (weights.size() != data.rows()) throw ContractError("one weight per row required");
  ClassTreeBuilder builder(data, sorted, weights, options, rng);
  return builder.build();
}

FeatureBins make_bins(const Dataset& data, const SortedColumns& sorted, int max_bins) {
  if (max_bins < 2 || max_bins > 65536) throw ContractError("max_bins must lie in [2, 65536]");
  const std::size_t n = data.rows();
  const std::size_t d = data.n_features;
  FeatureBins out;
  out.n_features = d;
  out.cuts.resize(d);
  out.bin.resize(n * d);
  for (std::size_t f = 0; f < d; ++f) {
    std::vector<double> v;
    v.reserve(n);
    for (auto r : sorted.order[f]) v.push_back(data.x[r * d + f]);
    auto& cuts = out.cuts[f];
    std::vector<double> distinct = v;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
      for (std::size_t i = 0; i + 1 < distinct.size(); ++i) cuts.push_back(midpoint(distinct[i], distinct[i + 1]));
    } else {
      for (int j = 1; j < max_bins; ++j) {
        const std::size_t rank = static_cast<std::size_t>(j) * n / static_cast<std::size_t>(max_bins);
        const double lo = v[rank - 1];
        const auto hi = std::upper_bound(distinct.begin(), distinct.end(), lo);
        if (hi == distinct.end()) break;
        const double c = midpoint(lo, *hi);
        if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
      }
    }
    for (std::size_t r = 0; r < n; ++r) {
      const double x = data.x[r * d + f];
      out.bin[r * d + f] = static_cast<std::uint16_t>(std::lower_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
    }
  }
  return out;
}

Tree grow_gradient_tree(const Dataset& data, const FeatureBins& bins,
                        std::span<const std::uint32_t> rows, std::span<const double> grad,
                        std::span<const double> hess, const GradientTreeOptions& options) {
  if (grad.size() != data.rows() || hess.size() != data.rows()) {
    throw ContractError("one gradient and hessian per row required");
  }
  if (bins.bin.size() != data.rows() * data.n_features) throw ContractError("bins do not match data");
  for (double v : grad) {
    if (!std::isfinite(v)) throw ContractError("non-finite gradient");
  }
  GradientTreeBuilder builder(data, bins, rows, grad, hess, options);
  return builder.build();
}

}  // namespace latefuse::models
