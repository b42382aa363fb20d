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

#include "rfprox/contribution.hpp"

#include <cmath>
#include <limits>
#include <span>

#include "rfprox/parallel.hpp"

namespace rfprox {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_class(const ProximityStore& store, ClassId c) {
  if (c < 0 || c >= store.class_count) {
    throw InputError("unknown class " + std::to_string(c) + " (model has " +
                     std::to_string(store.class_count) + " classes)");
  }
}

// Per tree: training instances grouped by the leaf they reach.
class LeafMembers {
 public:
  LeafMembers(const Forest& forest, const ProximityStore& store) {
    const Index trees = store.tree_count;
    offsets_.resize(static_cast<std::size_t>(trees));
    members_.resize(static_cast<std::size_t>(trees));
    for (Index t = 0; t < trees; ++t) {
      const int leaves = forest.trees[static_cast<std::size_t>(t)].leaf_count;
      auto& offsets = offsets_[static_cast<std::size_t>(t)];
      offsets.assign(static_cast<std::size_t>(leaves) + 1, 0);
      for (Index i = 0; i < store.size(); ++i) {
        const LeafId leaf = store.signatures(i, t);
        check_invariant(leaf >= 0 && leaf < leaves, "leaf id outside tree range");
        ++offsets[static_cast<std::size_t>(leaf) + 1];
      }
      for (std::size_t l = 1; l < offsets.size(); ++l) offsets[l] += offsets[l - 1];
      auto cursor = offsets;
      auto& members = members_[static_cast<std::size_t>(t)];
      members.resize(static_cast<std::size_t>(store.size()));
      for (Index i = 0; i < store.size(); ++i) {
        members[static_cast<std::size_t>(cursor[static_cast<std::size_t>(store.signatures(i, t))]++)] =
            static_cast<std::int32_t>(i);
      }
    }
  }

  std::span<const std::int32_t> of(Index tree, LeafId leaf) const {
    const auto& offsets = offsets_[static_cast<std::size_t>(tree)];
    const auto& members = members_[static_cast<std::size_t>(tree)];
    const auto begin = offsets[static_cast<std::size_t>(leaf)];
    const auto end = offsets[static_cast<std::size_t>(leaf) + 1];
    return std::span<const std::int32_t>(members).subspan(
        static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin));
  }

 private:
  std::vector<std::vector<std::int32_t>> offsets_;
  std::vector<std::vector<std::int32_t>> members_;
};

// State for explaining one instance against one target class. Read-only once
// built; evaluate() may be called from several threads.
class FlipEvaluator {
 public:
  FlipEvaluator(const Forest& forest, const ProximityStore& store, const BinaryRef& v,
                ClassId target, const ContributionOptions& options)
      : forest_(forest),
        store_(store),
        options_(options),
        target_(target),
        context_(build_path_context(forest, v)),
        leaves_(forest, store),
        shared_(shared_leaf_counts(store, context_.signature)),
        d_(distances_from_shared(shared_, store.tree_count)),
        z_(ingroup_vector(store, target, options.basis).values) {
    if (store.tree_count != forest.tree_count()) {
      throw InputError("proximity store was built from a different forest");
    }
    const auto& labels = store.labels(options.basis);
    for (Index i = 0; i < store.size(); ++i) {
      if (options.exclude_index && *options.exclude_index == i) continue;
      (labels[static_cast<std::size_t>(i)] == target ? in_members_ : out_members_) += 1;
    }
    in_before_ = group_mean(d_, Group::kIn);
    out_before_ = group_mean(d_, Group::kOut);
  }

  FeatureContribution evaluate(Index k) const {
    FeatureContribution fc;
    fc.feature_index = k;

    Eigen::VectorXi shared = shared_;
    for (const auto t : context_.trees_by_feature[static_cast<std::size_t>(k)]) {
      const auto& tree = forest_.trees[static_cast<std::size_t>(t)];
      const LeafId before = context_.signature(t);
      const LeafId after = tree.nodes[static_cast<std::size_t>(tree.descend(
                                          [&](std::int32_t f) {
                                            return f == k ? context_.v(f) == 0
                                                          : context_.v(f) != 0;
                                          }))]
                               .leaf_id;
      if (after == before) continue;
      ++fc.changed_tree_count;
      for (auto i : leaves_.of(t, before)) --shared(i);
      for (auto i : leaves_.of(t, after)) ++shared(i);
    }
    const DistanceVector flipped =
        fc.changed_tree_count == 0 ? d_ : distances_from_shared(shared, store_.tree_count);

    double sum = 0.0;
    for (Index i = 0; i < d_.size(); ++i) {
      const double delta = d_(i) - flipped(i);
      sum += z_(i) * delta * std::abs(delta);
    }
    if (options_.normalize) sum /= static_cast<double>(store_.size());
    fc.contribution = sum;

    auto& c = fc.closeness;
    c.in_before = in_before_;
    c.out_before = out_before_;
    c.in_after = group_mean(flipped, Group::kIn);
    c.out_after = group_mean(flipped, Group::kOut);
    c.delta_in = c.in_after - c.in_before;
    c.delta_out = c.out_after - c.out_before;
    return fc;
  }

 private:
  double group_mean(const DistanceVector& d, Group group) const {
    const Index members = group == Group::kIn ? in_members_ : out_members_;
    if (members == 0) return kNaN;
    return group_mean_sq_distance(d, store_, target_, group, options_.exclude_index,
                                  options_.basis);
  }

  const Forest& forest_;
  const ProximityStore& store_;
  ContributionOptions options_;
  ClassId target_;
  PathContext context_;
  LeafMembers leaves_;
  Eigen::VectorXi shared_;
  DistanceVector d_;
  Eigen::VectorXd z_;
  Index in_members_ = 0;
  Index out_members_ = 0;
  double in_before_ = 0.0;
  double out_before_ = 0.0;
};

void check_feature(Index feature_count, Index k) {
  if (k < 0 || k >= feature_count) {
    throw InputError("feature index " + std::to_string(k) + " out of range 0.." +
                     std::to_string(feature_count - 1));
  }
}

}  // namespace

BinaryVector flip(const BinaryRef& v, Index k) {
  check_feature(v.size(), k);
  BinaryVector out = v;
  out(k) = out(k) == 0 ? 1 : 0;
  return out;
}

InGroupVector ingroup_vector(const ProximityStore& store, ClassId target_class,
                             GroupBasis basis) {
  check_class(store, target_class);
  const auto& labels = store.labels(basis);
  InGroupVector z;
  z.target_class = target_class;
  z.values.resize(store.size());
  for (Index i = 0; i < store.size(); ++i) {
    z.values(i) = labels[static_cast<std::size_t>(i)] == target_class ? -1.0 : 1.0;
  }
  return z;
}

FeatureContribution feature_contribution(const Forest& forest,
                                         const ProximityStore& store,
                                         const BinaryRef& v, Index k,
                                         ClassId target_class,
                                         const ContributionOptions& options) {
  if (v.size() != forest.feature_count) {
    throw InputError("vector has " + std::to_string(v.size()) +
                     " features, model expects " + std::to_string(forest.feature_count));
  }
  check_feature(v.size(), k);
  check_class(store, target_class);
  return FlipEvaluator(forest, store, v, target_class, options).evaluate(k);
}

Eigen::VectorXd ContributionReport::contributions() const {
  Eigen::VectorXd out(feature_count());
  for (Index k = 0; k < out.size(); ++k) {
    out(k) = features[static_cast<std::size_t>(k)].contribution;
  }
  return out;
}

ContributionReport explain(const Forest& forest, const ProximityStore& store,
                           const BinaryRef& v, const ExplainOptions& options) {
  const Prediction prediction = predict(forest, v);
  ContributionReport report;
  report.model_id = options.model_id;
  report.instance_id = options.instance_id;
  report.input = v;
  report.predicted_class = prediction.label;
  report.target_class = options.target_class.value_or(prediction.label);
  report.votes = prediction.votes;
  report.normalized = options.contribution.normalize;
  check_class(store, report.target_class);

  const Index f_count = v.size();
  const auto& names = forest.spec.derived_feature_names;
  for (Index k = 0; k < f_count; ++k) {
    report.feature_names.push_back(static_cast<Index>(names.size()) == f_count
                                       ? names[static_cast<std::size_t>(k)]
                                       : "f" + std::to_string(k));
  }
  report.features.resize(static_cast<std::size_t>(f_count));
  if (f_count == 0) return report;

  const FlipEvaluator evaluator(forest, store, v, report.target_class,
                                options.contribution);
  parallel_for(static_cast<std::size_t>(f_count), options.threads, [&](std::size_t k) {
    report.features[k] = evaluator.evaluate(static_cast<Index>(k));
  });
  return report;
}

PathContext build_path_context(const Forest& forest, const BinaryRef& v) {
  if (v.size() != forest.feature_count) {
    throw InputError("vector has " + std::to_string(v.size()) +
                     " features, model expects " + std::to_string(forest.feature_count));
  }
  PathContext ctx;
  ctx.v = v;
  ctx.signature.resize(forest.tree_count());
  ctx.path_features.resize(forest.trees.size());
  ctx.trees_by_feature.resize(static_cast<std::size_t>(v.size()));
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const auto& tree = forest.trees[t];
    auto& path = ctx.path_features[t];
    const auto leaf = tree.descend([&](std::int32_t f) {
      path.push_back(f);
      return v(f) != 0;
    });
    ctx.signature(static_cast<Index>(t)) = tree.nodes[static_cast<std::size_t>(leaf)].leaf_id;
    for (auto f : path) {
      ctx.trees_by_feature[static_cast<std::size_t>(f)].push_back(static_cast<std::int32_t>(t));
    }
  }
  return ctx;
}

LeafSignature fast_leaf_signature(const Forest& forest, const PathContext& context,
                                  const BinaryRef& v, Index k) {
  if (v.size() != context.v.size() || v != context.v) {
    throw InputError("stale path context: built for a different vector");
  }
  check_feature(v.size(), k);
  LeafSignature sig = context.signature;
  for (const auto t : context.trees_by_feature[static_cast<std::size_t>(k)]) {
    const auto& tree = forest.trees[static_cast<std::size_t>(t)];
    const auto leaf = tree.descend([&](std::int32_t f) {
      return f == k ? v(f) == 0 : v(f) != 0;
    });
    sig(t) = tree.nodes[static_cast<std::size_t>(leaf)].leaf_id;
  }
  return sig;
}

Eigen::VectorXd misclassification_diff(const ContributionReport& report_wrong,
                                       const ContributionReport& report_right) {
  if (report_wrong.feature_count() != report_right.feature_count()) {
    throw InputError("reports cover different feature counts");
  }
  if (report_wrong.instance_id != report_right.instance_id ||
      report_wrong.input != report_right.input) {
    throw InputError("reports describe different instances");
  }
  return (report_wrong.contributions() - report_right.contributions()).array().square();
}

}  // namespace rfprox
