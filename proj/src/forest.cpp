// Copyright 2026 The rfprox Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rfprox/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "rfprox/parallel.hpp"
#include "rfprox/random.hpp"

namespace rfprox {
namespace {

// Gains at or below this are rounding noise, not a real improvement.
constexpr double kMinGain = 1e-12;

double purity(const std::vector<double>& counts, double n) {
  if (n <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += c * c;
  return s / n;
}

class TreeBuilder {
 public:
  TreeBuilder(const BinaryDataset& data, const TrainConfig& config, int class_count,
              int subset_size, std::uint64_t seed)
      : data_(data),
        config_(config),
        class_count_(class_count),
        subset_size_(subset_size),
        rng_(seed),
        feature_pool_(static_cast<std::size_t>(data.feature_count())),
        on_path_(static_cast<std::size_t>(data.feature_count()), false) {
    std::iota(feature_pool_.begin(), feature_pool_.end(), Index{0});
  }

  DecisionTree build() {
    const Index n = data_.size();
    std::vector<Index> samples(static_cast<std::size_t>(n));
    for (auto& s : samples) s = static_cast<Index>(rng_.below(static_cast<std::uint64_t>(n)));
    grow(samples, 0);
    tree_.leaf_count = next_leaf_;
    return std::move(tree_);
  }

 private:
  std::int32_t make_leaf(std::span<const Index> samples) {
    TreeNode leaf;
    leaf.class_counts.assign(static_cast<std::size_t>(class_count_), 0);
    for (Index s : samples) ++leaf.class_counts[static_cast<std::size_t>(label(s))];
    leaf.majority_class = static_cast<ClassId>(
        std::max_element(leaf.class_counts.begin(), leaf.class_counts.end()) -
        leaf.class_counts.begin());
    leaf.leaf_id = next_leaf_++;
    tree_.nodes.push_back(std::move(leaf));
    return static_cast<std::int32_t>(tree_.nodes.size() - 1);
  }

  ClassId label(Index s) const { return data_.labels[static_cast<std::size_t>(s)]; }

  std::int32_t grow(std::span<Index> samples, int depth) {
    const ClassId first = label(samples.front());
    const bool pure = std::all_of(samples.begin(), samples.end(),
                                  [&](Index s) { return label(s) == first; });
    const bool depth_reached = config_.max_depth && depth >= *config_.max_depth;
    const bool too_small =
        static_cast<Index>(samples.size()) < 2 * Index{config_.min_leaf_size};
    if (pure || depth_reached || too_small) return make_leaf(samples);

    // Partial Fisher-Yates draw of the node's candidate features.
    const auto f_count = feature_pool_.size();
    for (std::size_t i = 0; i < static_cast<std::size_t>(subset_size_); ++i) {
      std::swap(feature_pool_[i], feature_pool_[i + rng_.below(f_count - i)]);
    }
    std::vector<Index> candidates(feature_pool_.begin(),
                                  feature_pool_.begin() + subset_size_);
    std::sort(candidates.begin(), candidates.end());

    const auto split = best_split(samples, data_, candidates, config_.min_leaf_size);
    if (!split) return make_leaf(samples);
    const Index f = split->feature;
    check_invariant(split->gain > 0.0, "accepted split with non-positive gain");
    check_invariant(!on_path_[static_cast<std::size_t>(f)],
                    "feature tested twice on one root-to-leaf path");

    const auto self = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{static_cast<std::int32_t>(f), -1, -1, -1, {}, 0});
    auto mid = std::stable_partition(samples.begin(), samples.end(),
                                     [&](Index s) { return data_.vectors(s, f) == 0; });
    const auto left_size = static_cast<std::size_t>(mid - samples.begin());

    on_path_[static_cast<std::size_t>(f)] = true;
    const auto left = grow(samples.subspan(0, left_size), depth + 1);
    const auto right = grow(samples.subspan(left_size), depth + 1);
    on_path_[static_cast<std::size_t>(f)] = false;

    tree_.nodes[static_cast<std::size_t>(self)].left = left;
    tree_.nodes[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  const BinaryDataset& data_;
  const TrainConfig& config_;
  int class_count_;
  int subset_size_;
  Rng rng_;
  std::vector<Index> feature_pool_;
  std::vector<bool> on_path_;
  DecisionTree tree_;
  LeafId next_leaf_ = 0;
};

void check_dimension(const Forest& forest, const BinaryRef& v) {
  if (v.size() != forest.feature_count) {
    throw InputError("vector has " + std::to_string(v.size()) +
                     " features, model expects " +
                     std::to_string(forest.feature_count));
  }
}

}  // namespace

std::optional<Split> best_split(std::span<const Index> samples,
                                const BinaryDataset& data,
                                std::span<const Index> candidates, int min_leaf_size) {
  if (samples.empty() || candidates.empty()) return std::nullopt;
  const int class_count = data.class_count();
  std::vector<double> parent(static_cast<std::size_t>(class_count), 0.0);
  for (Index s : samples) parent[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(s)])] += 1.0;
  const double n = static_cast<double>(samples.size());
  const double parent_purity = purity(parent, n);

  std::optional<Split> best;
  std::vector<double> right(static_cast<std::size_t>(class_count));
  std::vector<double> left(static_cast<std::size_t>(class_count));
  for (Index f : candidates) {
    std::fill(right.begin(), right.end(), 0.0);
    double n_right = 0.0;
    for (Index s : samples) {
      if (data.vectors(s, f) != 0) {
        right[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(s)])] += 1.0;
        n_right += 1.0;
      }
    }
    const double n_left = n - n_right;
    if (n_left < min_leaf_size || n_right < min_leaf_size) continue;
    for (std::size_t c = 0; c < left.size(); ++c) left[c] = parent[c] - right[c];
    const double gain =
        (purity(left, n_left) + purity(right, n_right) - parent_purity) / n;
    if (gain > kMinGain && (!best || gain > best->gain ||
                            (gain == best->gain && f < best->feature))) {
      best = Split{f, gain};
    }
  }
  return best;
}

Forest train(const BinaryDataset& data, const TrainConfig& config) {
  const Index n = data.size();
  const Index f_count = data.feature_count();
  if (n == 0) throw InputError("cannot train on an empty dataset");
  if (f_count < 1) throw InputError("cannot train without features");
  if (static_cast<Index>(data.labels.size()) != n) {
    throw InputError("label count does not match row count");
  }
  if (config.tree_count < 1) throw InputError("tree_count must be positive");
  if (config.min_leaf_size < 1) throw InputError("min_leaf_size must be positive");
  if (config.max_depth && *config.max_depth < 1) {
    throw InputError("max_depth must be positive");
  }
  const std::set<ClassId> present(data.labels.begin(), data.labels.end());
  if (present.size() < 2) throw InputError("training data must contain at least 2 classes");
  if (*present.begin() < 0) throw InputError("negative class id in training labels");

  int subset = static_cast<int>(std::floor(std::sqrt(static_cast<double>(f_count))));
  if (config.feature_subset_size) {
    subset = *config.feature_subset_size;
    if (subset < 1 || subset > f_count) {
      throw InputError("feature_subset_size must lie in 1.." + std::to_string(f_count));
    }
  }
  subset = std::max(subset, 1);

  Forest forest;
  forest.config = config;
  forest.class_count = std::max(data.class_count(), *present.rbegin() + 1);
  forest.class_names = data.class_names;
  forest.feature_count = f_count;
  forest.train_size = n;
  forest.spec = data.spec;
  forest.trees.resize(static_cast<std::size_t>(config.tree_count));

  parallel_for(forest.trees.size(), config.threads, [&](std::size_t t) {
    TreeBuilder builder(data, config, forest.class_count, subset,
                        derive_seed(config.seed, t));
    forest.trees[t] = builder.build();
  });
  return forest;
}

Prediction predict(const Forest& forest, const BinaryRef& v) {
  check_dimension(forest, v);
  Prediction p;
  p.votes = Eigen::VectorXi::Zero(forest.class_count);
  for (const auto& tree : forest.trees) ++p.votes(tree.leaf_for(v).majority_class);
  p.label = 0;
  for (Index c = 1; c < p.votes.size(); ++c) {
    if (p.votes(c) > p.votes(p.label)) p.label = static_cast<ClassId>(c);
  }
  return p;
}

LeafSignature leaf_signature(const Forest& forest, const BinaryRef& v) {
  check_dimension(forest, v);
  LeafSignature sig(forest.tree_count());
  for (Index t = 0; t < sig.size(); ++t) {
    sig(t) = forest.trees[static_cast<std::size_t>(t)].leaf_for(v).leaf_id;
  }
  return sig;
}

}  // namespace rfprox
