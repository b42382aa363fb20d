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

#ifndef RFPROX_FOREST_HPP_
#define RFPROX_FOREST_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rfprox/dataset.hpp"
#include "rfprox/types.hpp"

namespace rfprox {

// Internal nodes test one binary feature: value 0 goes left, value 1 right.
// Leaves carry a tree-unique id assigned in preorder.
struct TreeNode {
  std::int32_t feature = -1;
  std::int32_t left = -1;
  std::int32_t right = -1;
  LeafId leaf_id = -1;
  std::vector<std::int32_t> class_counts;
  ClassId majority_class = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int leaf_count = 0;

  // Walks from the root using `bit(feature)` for each test and returns the
  // index of the reached leaf node.
  template <typename BitFn>
  std::int32_t descend(BitFn&& bit) const {
    std::int32_t i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = bit(n.feature) ? n.right : n.left;
    }
    return i;
  }

  const TreeNode& leaf_for(const BinaryRef& v) const {
    return nodes[static_cast<std::size_t>(
        descend([&](std::int32_t f) { return v(f) != 0; }))];
  }

  bool operator==(const DecisionTree&) const = default;
};

struct TrainConfig {
  int tree_count = 100;
  // Features drawn per node; unset means floor(sqrt(F)).
  std::optional<int> feature_subset_size;
  // Unset means unlimited depth.
  std::optional<int> max_depth;
  int min_leaf_size = 1;
  std::uint64_t seed = 0;
  // Worker threads for training (0 = hardware concurrency). Does not affect
  // the result and is not serialized.
  unsigned threads = 0;

  bool operator==(const TrainConfig& o) const {
    return tree_count == o.tree_count &&
           feature_subset_size == o.feature_subset_size &&
           max_depth == o.max_depth && min_leaf_size == o.min_leaf_size &&
           seed == o.seed;
  }
};

// Holdout split the model was trained under.
struct HoldoutRecord {
  double fraction = 0.0;
  std::uint64_t seed = 0;
  bool operator==(const HoldoutRecord&) const = default;
};

struct Forest {
  std::vector<DecisionTree> trees;
  TrainConfig config;
  int class_count = 0;
  std::vector<std::string> class_names;
  Index feature_count = 0;
  Index train_size = 0;
  BinarizationSpec spec;
  std::optional<HoldoutRecord> holdout;

  Index tree_count() const { return static_cast<Index>(trees.size()); }
  bool operator==(const Forest&) const = default;
};

// 1 - sum_j (c_j / n)^2. Throws InputError when all counts are zero.
template <typename Derived>
double gini_impurity(const Eigen::DenseBase<Derived>& counts) {
  const Eigen::ArrayXd c = counts.derived().template cast<double>().array();
  const double n = c.sum();
  if (!(n > 0.0)) throw InputError("gini impurity of an empty count vector");
  return 1.0 - (c / n).square().sum();
}

inline double gini_impurity(const std::vector<std::int32_t>& counts) {
  return gini_impurity(Eigen::Map<const Eigen::VectorXi>(
      counts.data(), static_cast<Index>(counts.size())));
}

struct Split {
  Index feature = -1;
  double gain = 0.0;
};

// Best Gini split over `candidates` for the rows `samples` of `data`.
// Candidates that leave a side smaller than `min_leaf_size` are skipped.
// Returns nothing when no candidate has strictly positive gain. Ties go to
// the lowest feature index.
std::optional<Split> best_split(std::span<const Index> samples,
                                const BinaryDataset& data,
                                std::span<const Index> candidates,
                                int min_leaf_size = 1);

// Bagged CART forest. Tree t draws its bootstrap sample and per-node feature
// subsets from the stream derive_seed(seed, t).
Forest train(const BinaryDataset& data, const TrainConfig& config);

struct Prediction {
  ClassId label = 0;
  Eigen::VectorXi votes;
};

Prediction predict(const Forest& forest, const BinaryRef& v);

LeafSignature leaf_signature(const Forest& forest, const BinaryRef& v);

// Model files are JSON with a fixed field order; equal forests serialize to
// equal bytes.
inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const Forest& forest);
Forest model_from_json(const std::string& text);
void save_model(const Forest& forest, const std::filesystem::path& path);
Forest load_model(const std::filesystem::path& path);

}  // namespace rfprox

#endif  // RFPROX_FOREST_HPP_
