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

#ifndef RFPROX_CONTRIBUTION_HPP_
#define RFPROX_CONTRIBUTION_HPP_

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rfprox/forest.hpp"
#include "rfprox/proximity.hpp"
#include "rfprox/types.hpp"

namespace rfprox {

// Copy of v with bit k inverted.
BinaryVector flip(const BinaryRef& v, Index k);

// z_i = -1 when training instance i is in the target class, +1 otherwise.
struct InGroupVector {
  Eigen::VectorXd values;
  ClassId target_class = 0;
};

InGroupVector ingroup_vector(const ProximityStore& store, ClassId target_class,
                             GroupBasis basis = GroupBasis::kPredicted);

// Mean squared proximity distance to the in-group and out-group before and
// after the flip. A field is NaN when its group is empty.
struct Closeness {
  double in_before = 0.0;
  double out_before = 0.0;
  double in_after = 0.0;
  double out_after = 0.0;
  double delta_in = 0.0;
  double delta_out = 0.0;
};

struct FeatureContribution {
  Index feature_index = 0;
  // sum_i z_i * D_i * |D_i| with D = d(v) - d(flip(v, k)). Positive means
  // the original value of k holds v toward the target class.
  double contribution = 0.0;
  Closeness closeness;
  Index changed_tree_count = 0;
};

struct ContributionOptions {
  // Divide contributions by the training size.
  bool normalize = false;
  GroupBasis basis = GroupBasis::kPredicted;
  // Training index of the explained instance, dropped from group means.
  std::optional<Index> exclude_index;
};

FeatureContribution feature_contribution(const Forest& forest,
                                         const ProximityStore& store,
                                         const BinaryRef& v, Index k,
                                         ClassId target_class,
                                         const ContributionOptions& options = {});

struct ExplainOptions {
  // Defaults to the forest's prediction for the instance.
  std::optional<ClassId> target_class;
  ContributionOptions contribution;
  // 1 = sequential, 0 = hardware concurrency. The report does not depend on
  // this.
  unsigned threads = 0;
  std::string model_id;
  std::string instance_id;
};

struct ContributionReport {
  std::string model_id;
  std::string instance_id;
  BinaryVector input;
  ClassId predicted_class = 0;
  ClassId target_class = 0;
  Eigen::VectorXi votes;
  bool normalized = false;
  std::vector<std::string> feature_names;
  std::vector<FeatureContribution> features;

  Index feature_count() const { return static_cast<Index>(features.size()); }
  Eigen::VectorXd contributions() const;
};

ContributionReport explain(const Forest& forest, const ProximityStore& store,
                           const BinaryRef& v, const ExplainOptions& options = {});

// Per-tree features tested along v's root-to-leaf paths, with the inverse
// map from feature to the trees whose path tests it.
struct PathContext {
  BinaryVector v;
  LeafSignature signature;
  std::vector<std::vector<std::int32_t>> path_features;
  std::vector<std::vector<std::int32_t>> trees_by_feature;
};

PathContext build_path_context(const Forest& forest, const BinaryRef& v);

// Signature of flip(v, k), re-descending only the trees whose path for v
// tests k. Throws InputError if `context` was built for a different vector.
LeafSignature fast_leaf_signature(const Forest& forest, const PathContext& context,
                                  const BinaryRef& v, Index k);

// (contribution_wrong_k - contribution_right_k)^2 per feature.
Eigen::VectorXd misclassification_diff(const ContributionReport& report_wrong,
                                       const ContributionReport& report_right);

}  // namespace rfprox

#endif  // RFPROX_CONTRIBUTION_HPP_
