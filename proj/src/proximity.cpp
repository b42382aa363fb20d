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

#include "rfprox/proximity.hpp"

#include <cmath>

#include "rfprox/parallel.hpp"

namespace rfprox {
namespace {

void check_signature(const ProximityStore& store, const SignatureRef& sig) {
  if (sig.size() != store.tree_count) {
    throw InputError("signature has " + std::to_string(sig.size()) +
                     " entries, store expects " + std::to_string(store.tree_count));
  }
}

}  // namespace

ProximityStore build_store(const Forest& forest, const BinaryDataset& train,
                           unsigned threads) {
  if (train.feature_count() != forest.feature_count) {
    throw InputError("training data has " + std::to_string(train.feature_count()) +
                     " features, model expects " + std::to_string(forest.feature_count));
  }
  ProximityStore store;
  store.tree_count = forest.tree_count();
  store.class_count = forest.class_count;
  store.signatures.resize(train.size(), forest.tree_count());
  store.predicted_labels.resize(static_cast<std::size_t>(train.size()));
  store.true_labels = train.labels;
  parallel_for(static_cast<std::size_t>(train.size()), threads, [&](std::size_t i) {
    const auto row = train.vectors.row(static_cast<Index>(i));
    store.signatures.row(static_cast<Index>(i)) = leaf_signature(forest, row);
    store.predicted_labels[i] = predict(forest, row).label;
  });
  return store;
}

double proximity(const SignatureRef& a, const SignatureRef& b) {
  if (a.size() != b.size()) throw InputError("signature length mismatch");
  if (a.size() == 0) throw InputError("proximity of empty signatures");
  return static_cast<double>((a.array() == b.array()).count()) /
         static_cast<double>(a.size());
}

Eigen::VectorXi shared_leaf_counts(const ProximityStore& store, const SignatureRef& sig) {
  check_signature(store, sig);
  Eigen::VectorXi shared(store.size());
  for (Index i = 0; i < store.size(); ++i) {
    shared(i) = static_cast<int>((store.signatures.row(i).array() == sig.array()).count());
  }
  return shared;
}

DistanceVector distances_from_shared(const Eigen::Ref<const Eigen::VectorXi>& shared,
                                     Index tree_count) {
  return shared.unaryExpr([tree_count](int s) {
    return distance_from_shared(s, tree_count);
  });
}

DistanceVector distance_vector(const ProximityStore& store, const SignatureRef& sig) {
  return distances_from_shared(shared_leaf_counts(store, sig), store.tree_count);
}

double group_mean_sq_distance(const Eigen::Ref<const DistanceVector>& d,
                              const ProximityStore& store, ClassId target_class,
                              Group group, std::optional<Index> exclude_index,
                              GroupBasis basis) {
  if (d.size() != store.size()) throw InputError("distance vector length mismatch");
  const auto& labels = store.labels(basis);
  double sum = 0.0;
  Index members = 0;
  for (Index k = 0; k < d.size(); ++k) {
    if (exclude_index && k == *exclude_index) continue;
    const bool in = labels[static_cast<std::size_t>(k)] == target_class;
    if (in != (group == Group::kIn)) continue;
    sum += d(k) * d(k);
    ++members;
  }
  if (members == 0) {
    throw InputError(std::string("empty ") + (group == Group::kIn ? "in" : "out") +
                     "-group for class " + std::to_string(target_class));
  }
  return sum / static_cast<double>(members);
}

OutlierScores outlier_scores(const ProximityStore& store, const OutlierOptions& options) {
  const auto& labels = store.labels(options.basis);
  const Index n = store.size();
  const int classes = store.class_count;
  Eigen::VectorXi members = Eigen::VectorXi::Zero(classes);
  for (auto c : labels) ++members(c);
  for (int c = 0; c < classes; ++c) {
    if (members(c) == 1) {
      throw InputError("class " + std::to_string(c) +
                       " has a single member; outlier scores need at least 2");
    }
  }

  OutlierScores out;
  out.scores.resize(n);
  parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
    const auto row = static_cast<Index>(i);
    const DistanceVector d = distance_vector(store, store.signatures.row(row));
    out.scores(row) = group_mean_sq_distance(d, store, labels[i], Group::kIn, row,
                                             options.basis);
  });

  out.class_mean = Eigen::VectorXd::Zero(classes);
  out.class_sd = Eigen::VectorXd::Zero(classes);
  for (Index i = 0; i < n; ++i) out.class_mean(labels[static_cast<std::size_t>(i)]) += out.scores(i);
  for (int c = 0; c < classes; ++c) {
    if (members(c) > 0) out.class_mean(c) /= members(c);
  }
  for (Index i = 0; i < n; ++i) {
    const auto c = labels[static_cast<std::size_t>(i)];
    out.class_sd(c) += std::pow(out.scores(i) - out.class_mean(c), 2);
  }
  for (int c = 0; c < classes; ++c) {
    if (members(c) > 0) out.class_sd(c) = std::sqrt(out.class_sd(c) / members(c));
  }
  out.flags.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto c = labels[static_cast<std::size_t>(i)];
    out.flags[static_cast<std::size_t>(i)] =
        out.scores(i) > out.class_mean(c) + options.sd_multiplier * out.class_sd(c);
  }
  return out;
}

Eigen::MatrixXd distance_matrix(const ProximityStore& store, unsigned threads) {
  const Index n = store.size();
  Eigen::MatrixXd m(n, n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    m.col(static_cast<Index>(i)) =
        distance_vector(store, store.signatures.row(static_cast<Index>(i)));
  });
  return m;
}

}  // namespace rfprox
