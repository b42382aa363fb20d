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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "rfprox/contribution.hpp"
#include "test_util.hpp"

namespace rfprox {
namespace {

using testing::decisive_feature_data;
using testing::random_binary;

struct Fitted {
  BinaryDataset data;
  Forest forest;
  ProximityStore store;
};

Fitted fit(const BinaryDataset& data, TrainConfig cfg) {
  Fitted f;
  f.data = data;
  f.forest = train(data, cfg);
  f.store = build_store(f.forest, data);
  return f;
}

Fitted fit_random(Index rows, Index features, int trees, std::uint64_t seed, int classes = 2) {
  TrainConfig cfg;
  cfg.tree_count = trees;
  cfg.seed = seed;
  return fit(random_binary(rows, features, seed, classes), cfg);
}

BinaryVector random_vector(Rng& rng, Index n) {
  BinaryVector v(n);
  for (Index k = 0; k < n; ++k) v(k) = static_cast<Bit>(rng.below(2));
  return v;
}

// Naive contribution: full signatures, Hamming distances, direct sum.
double naive_contribution(const Fitted& f, const BinaryVector& v, Index k, ClassId target) {
  const LeafSignature a = leaf_signature(f.forest, v);
  BinaryVector w = v;
  w(k) = 1 - w(k);
  const LeafSignature b = leaf_signature(f.forest, w);
  const double trees = static_cast<double>(f.forest.tree_count());
  double sum = 0.0;
  for (Index i = 0; i < f.store.size(); ++i) {
    double da = 0.0;
    double db = 0.0;
    for (Index t = 0; t < a.size(); ++t) {
      da += a(t) != f.store.signatures(i, t);
      db += b(t) != f.store.signatures(i, t);
    }
    const double delta = da / trees - db / trees;
    const double z = f.store.predicted_labels[static_cast<std::size_t>(i)] == target ? -1.0 : 1.0;
    sum += z * delta * std::abs(delta);
  }
  return sum;
}

std::set<std::int32_t> features_used(const Forest& f) {
  std::set<std::int32_t> used;
  for (const auto& t : f.trees) {
    for (const auto& n : t.nodes) {
      if (!n.is_leaf()) used.insert(n.feature);
    }
  }
  return used;
}

TEST_CASE("flip") {
  const BinaryVector v = (BinaryVector(3) << 0, 1, 0).finished();
  CHECK(flip(v, 0) == (BinaryVector(3) << 1, 1, 0).finished());
  CHECK(flip(flip(v, 2), 2) == v);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const BinaryVector r = random_vector(rng, 12);
    const Index k = static_cast<Index>(rng.below(12));
    CHECK((flip(r, k).array() != r.array()).count() == 1);
  }
  CHECK_THROWS_AS(flip(v, 3), InputError);
  CHECK_THROWS_AS(flip(v, -1), InputError);
}

TEST_CASE("ingroup_vector") {
  ProximityStore s;
  s.signatures = SignatureMatrix::Zero(4, 1);
  s.tree_count = 1;
  s.class_count = 3;
  s.predicted_labels = {1, 1, 1, 1};
  s.true_labels = {0, 1, 2, 0};
  CHECK(ingroup_vector(s, 1).values == Eigen::VectorXd::Constant(4, -1.0));
  CHECK(ingroup_vector(s, 0).values == Eigen::VectorXd::Constant(4, 1.0));
  CHECK(ingroup_vector(s, 0, GroupBasis::kTrue).values ==
        (Eigen::VectorXd(4) << -1, 1, 1, -1).finished());
  CHECK(ingroup_vector(s, 2).target_class == 2);
  CHECK_THROWS_AS(ingroup_vector(s, 3), InputError);
}

TEST_CASE("contribution matches the naive oracle") {
  const Fitted f = fit_random(70, 10, 20, 41, 3);
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const BinaryVector v = random_vector(rng, 10);
    const Index k = static_cast<Index>(rng.below(10));
    const ClassId c = static_cast<ClassId>(rng.below(3));
    const FeatureContribution fc = feature_contribution(f.forest, f.store, v, k, c);
    CHECK(fc.feature_index == k);
    CHECK(fc.contribution == doctest::Approx(naive_contribution(f, v, k, c)).epsilon(1e-12));
    const LeafSignature a = leaf_signature(f.forest, v);
    const LeafSignature b = leaf_signature(f.forest, flip(v, k));
    CHECK(fc.changed_tree_count == (a.array() != b.array()).count());
    const Closeness& cl = fc.closeness;
    CHECK(cl.delta_in == cl.in_after - cl.in_before);
    CHECK(cl.delta_out == cl.out_after - cl.out_before);
    const DistanceVector d = distance_vector(f.store, a);
    CHECK(cl.in_before == doctest::Approx(group_mean_sq_distance(d, f.store, c, Group::kIn)));
    CHECK(cl.out_before == doctest::Approx(group_mean_sq_distance(d, f.store, c, Group::kOut)));
    for (double x : {cl.in_before, cl.out_before, cl.in_after, cl.out_after}) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
    CHECK(std::abs(fc.contribution) <= static_cast<double>(f.store.size()));
    ContributionOptions norm;
    norm.normalize = true;
    CHECK(feature_contribution(f.forest, f.store, v, k, c, norm).contribution ==
          doctest::Approx(fc.contribution / 70.0));
  }
}

TEST_CASE("features no tree tests have exactly zero impact") {
  const Fitted f = fit_random(30, 40, 5, 2);
  const auto used = features_used(f.forest);
  REQUIRE(used.size() < 40);
  Rng rng(1);
  const BinaryVector v = random_vector(rng, 40);
  const ContributionReport r = explain(f.forest, f.store, v);
  for (Index k = 0; k < 40; ++k) {
    if (used.count(static_cast<std::int32_t>(k))) continue;
    const auto& fc = r.features[static_cast<std::size_t>(k)];
    CHECK(fc.contribution == 0.0);
    CHECK(fc.changed_tree_count == 0);
    CHECK(fc.closeness.delta_in == 0.0);
    CHECK(fc.closeness.delta_out == 0.0);
  }
}

TEST_CASE("decisive feature dominates on a stump forest") {
  // class = feature 0; every tree is a stump on feature 0.
  TrainConfig cfg;
  cfg.tree_count = 10;
  cfg.max_depth = 1;
  cfg.feature_subset_size = 6;
  const Fitted f = fit(decisive_feature_data(40, 6, 13), cfg);
  REQUIRE(features_used(f.forest) == std::set<std::int32_t>{0});
  for (Index i = 0; i < f.data.size(); ++i) {
    const BinaryVector v = f.data.vectors.row(i);
    const ContributionReport r = explain(f.forest, f.store, v);
    REQUIRE(r.predicted_class == f.data.labels[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd c = r.contributions();
    for (Index k = 0; k < 6; ++k) CHECK(c(k) == naive_contribution(f, v, k, r.target_class));
    CHECK(c(0) > 0.0);
    CHECK(c.tail(5).cwiseAbs().maxCoeff() < std::abs(c(0)));
  }
}

TEST_CASE("antisymmetry when the prediction survives the flip") {
  const Fitted f = fit_random(80, 12, 25, 19, 2);
  Rng rng(4);
  int checked = 0;
  while (checked < 100) {
    const BinaryVector v = random_vector(rng, 12);
    const Index k = static_cast<Index>(rng.below(12));
    const BinaryVector w = flip(v, k);
    const ClassId c = predict(f.forest, v).label;
    if (predict(f.forest, w).label != c) continue;
    const double a = feature_contribution(f.forest, f.store, v, k, c).contribution;
    const double b = feature_contribution(f.forest, f.store, w, k, c).contribution;
    CHECK(a == -b);
    ++checked;
  }
}

TEST_CASE("explain") {
  const Fitted f = fit_random(60, 14, 15, 23, 3);
  Rng rng(12);
  const BinaryVector v = random_vector(rng, 14);
  ExplainOptions seq;
  seq.threads = 1;
  const ContributionReport a = explain(f.forest, f.store, v, seq);
  CHECK(a.feature_count() == 14);
  CHECK(a.target_class == a.predicted_class);
  CHECK(a.votes.sum() == 15);
  CHECK(a.feature_names[3] == "f3");
  ExplainOptions par;
  par.threads = 8;
  par.target_class = a.predicted_class;
  const ContributionReport b = explain(f.forest, f.store, v, par);
  for (Index k = 0; k < 14; ++k) {
    const auto& x = a.features[static_cast<std::size_t>(k)];
    const auto& y = b.features[static_cast<std::size_t>(k)];
    CHECK(x.feature_index == k);
    CHECK(x.contribution == y.contribution);
    CHECK(x.changed_tree_count == y.changed_tree_count);
    CHECK(x.closeness.in_after == y.closeness.in_after);
    CHECK(x.closeness.out_after == y.closeness.out_after);
  }
  CHECK_THROWS_AS(explain(f.forest, f.store, BinaryVector::Zero(13)), InputError);
  ExplainOptions bad;
  bad.target_class = 7;
  CHECK_THROWS_AS(explain(f.forest, f.store, v, bad), InputError);
}

TEST_CASE("empty groups give NaN closeness") {
  // Every training row predicted as class 0.
  BinaryDataset d = random_binary(20, 4, 3, [](const auto&) { return ClassId{0}; });
  d.labels[0] = 1;
  TrainConfig cfg;
  cfg.tree_count = 3;
  cfg.min_leaf_size = 10;
  const Fitted f = fit(d, cfg);
  REQUIRE(std::count(f.store.predicted_labels.begin(), f.store.predicted_labels.end(), 0) ==
          20);
  const FeatureContribution fc =
      feature_contribution(f.forest, f.store, d.vectors.row(1), 0, 0);
  CHECK(std::isnan(fc.closeness.out_before));
  CHECK(std::isnan(fc.closeness.delta_out));
  CHECK_FALSE(std::isnan(fc.closeness.in_before));
}

TEST_CASE("single-leaf forest changes no tree") {
  BinaryDataset d = random_binary(10, 5, 2);
  TrainConfig cfg;
  cfg.tree_count = 4;
  cfg.min_leaf_size = 10;
  const Fitted f = fit(d, cfg);
  for (const auto& t : f.forest.trees) REQUIRE(t.leaf_count == 1);
  const ContributionReport r = explain(f.forest, f.store, d.vectors.row(0));
  Index total = 0;
  for (const auto& fc : r.features) total += fc.changed_tree_count;
  CHECK(total == 0);
  CHECK(r.contributions().isZero(0.0));

  const Fitted g = fit_random(40, 5, 6, 2);
  const ContributionReport rg = explain(g.forest, g.store, g.data.vectors.row(0));
  total = 0;
  for (const auto& fc : rg.features) total += fc.changed_tree_count;
  CHECK(total > 0);
}

TEST_CASE("report length on binarized MNIST") {
  const std::string base = std::string(RFPROX_DATA_DIR) + "/mnist/mnist2500-";
  const BinaryDataset all = load_idx(base + "images-idx3-ubyte", base + "labels-idx1-ubyte");
  std::vector<Index> rows(300);
  std::iota(rows.begin(), rows.end(), Index{0});
  TrainConfig cfg;
  cfg.tree_count = 10;
  const Fitted f = fit(all.subset(rows), cfg);
  const ContributionReport r = explain(f.forest, f.store, all.vectors.row(400));
  CHECK(r.feature_count() == 784);
  CHECK(r.feature_names[181] == all.spec.derived_feature_names[181]);
}

TEST_CASE("fast_leaf_signature equals naive traversal") {
  Rng rng(31);
  for (int forest_seed = 0; forest_seed < 5; ++forest_seed) {
    const Fitted f = fit_random(60, 15, 20, static_cast<std::uint64_t>(forest_seed) + 100, 3);
    std::vector<std::set<std::int32_t>> trees_testing(15);
    for (std::size_t t = 0; t < f.forest.trees.size(); ++t) {
      for (const auto& n : f.forest.trees[t].nodes) {
        if (!n.is_leaf()) trees_testing[static_cast<std::size_t>(n.feature)].insert(static_cast<std::int32_t>(t));
      }
    }
    for (int i = 0; i < 200; ++i) {
      const BinaryVector v = random_vector(rng, 15);
      const PathContext ctx = build_path_context(f.forest, v);
      CHECK(ctx.signature == leaf_signature(f.forest, v));
      for (Index k = 0; k < 15; ++k) {
        CHECK(fast_leaf_signature(f.forest, ctx, v, k) == leaf_signature(f.forest, flip(v, k)));
        const auto& affected = ctx.trees_by_feature[static_cast<std::size_t>(k)];
        CHECK(affected.size() <= trees_testing[static_cast<std::size_t>(k)].size());
        if (affected.empty()) CHECK(fast_leaf_signature(f.forest, ctx, v, k) == ctx.signature);
      }
    }
  }
  const Fitted f = fit_random(20, 6, 4, 1);
  const BinaryVector v = BinaryVector::Zero(6);
  const PathContext ctx = build_path_context(f.forest, v);
  CHECK_THROWS_AS(fast_leaf_signature(f.forest, ctx, flip(v, 2), 1), InputError);
  CHECK_THROWS_AS(fast_leaf_signature(f.forest, ctx, v, 6), InputError);
}

TEST_CASE("misclassification_diff") {
  ContributionReport wrong;
  wrong.instance_id = "test:3";
  wrong.input = BinaryVector::Zero(3);
  wrong.features.resize(3);
  wrong.features[0].contribution = 0.3;
  wrong.features[1].contribution = 1.0;
  wrong.features[2].contribution = -2.0;
  ContributionReport right = wrong;
  CHECK(misclassification_diff(wrong, right).isZero(0.0));
  right.features[0].contribution = -0.1;
  right.features[2].contribution = 1.0;
  const Eigen::VectorXd d = misclassification_diff(wrong, right);
  CHECK(d(0) == doctest::Approx(0.16));
  CHECK(d(1) == 0.0);
  CHECK(d(2) == doctest::Approx(9.0));
  CHECK(misclassification_diff(right, wrong) == d);

  ContributionReport other = right;
  other.instance_id = "test:4";
  CHECK_THROWS_AS(misclassification_diff(wrong, other), InputError);
  other = right;
  other.input(1) = 1;
  CHECK_THROWS_AS(misclassification_diff(wrong, other), InputError);
  other = right;
  other.features.pop_back();
  CHECK_THROWS_AS(misclassification_diff(wrong, other), InputError);
}

}  // namespace
}  // namespace rfprox
