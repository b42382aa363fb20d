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

#ifndef RFPROX_PROXIMITY_HPP_
#define RFPROX_PROXIMITY_HPP_

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rfprox/dataset.hpp"
#include "rfprox/forest.hpp"
#include "rfprox/types.hpp"

namespace rfprox {

// Which labels define in-group membership of training instances.
enum class GroupBasis { kPredicted, kTrue };
enum class Group { kIn, kOut };

// Frozen leaf signatures of the training set, one row per instance.
struct ProximityStore {
  SignatureMatrix signatures;
  std::vector<ClassId> predicted_labels;
  std::vector<ClassId> true_labels;
  Index tree_count = 0;
  int class_count = 0;

  Index size() const { return signatures.rows(); }
  const std::vector<ClassId>& labels(GroupBasis basis) const {
    return basis == GroupBasis::kPredicted ? predicted_labels : true_labels;
  }
};

// Proximity distance of every training instance to one query.
using DistanceVector = Eigen::VectorXd;

ProximityStore build_store(const Forest& forest, const BinaryDataset& train,
                           unsigned threads = 0);

// Fraction of trees in which the two signatures share a leaf.
double proximity(const SignatureRef& a, const SignatureRef& b);

// (trees - shared) / trees: the Hamming distance of the signatures scaled
// by the tree count. Every distance in the library goes through this.
inline double distance_from_shared(Index shared, Index tree_count) {
  return static_cast<double>(tree_count - shared) / static_cast<double>(tree_count);
}

// Number of trees each training instance shares with `sig`.
Eigen::VectorXi shared_leaf_counts(const ProximityStore& store, const SignatureRef& sig);

DistanceVector distances_from_shared(const Eigen::Ref<const Eigen::VectorXi>& shared,
                                     Index tree_count);

DistanceVector distance_vector(const ProximityStore& store, const SignatureRef& sig);

// Mean of d_k^2 over the in- or out-group of `target_class`, skipping
// `exclude_index` when set. Throws InputError for an empty group.
double group_mean_sq_distance(const Eigen::Ref<const DistanceVector>& d,
                              const ProximityStore& store, ClassId target_class,
                              Group group, std::optional<Index> exclude_index = {},
                              GroupBasis basis = GroupBasis::kPredicted);

struct OutlierOptions {
  // Flag when score > class mean + sd_multiplier * class sd (population sd).
  double sd_multiplier = 2.0;
  GroupBasis basis = GroupBasis::kPredicted;
  unsigned threads = 0;
};

struct OutlierScores {
  Eigen::VectorXd scores;
  std::vector<bool> flags;
  Eigen::VectorXd class_mean;
  Eigen::VectorXd class_sd;
};

// Score of instance i = its self-excluded in-group mean squared distance.
OutlierScores outlier_scores(const ProximityStore& store,
                             const OutlierOptions& options = {});

// Full N x N proximity distance matrix, row/column order = training order.
Eigen::MatrixXd distance_matrix(const ProximityStore& store, unsigned threads = 0);

}  // namespace rfprox

#endif  // RFPROX_PROXIMITY_HPP_
