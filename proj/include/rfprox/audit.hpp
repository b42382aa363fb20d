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

#ifndef RFPROX_AUDIT_HPP_
#define RFPROX_AUDIT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rfprox/contribution.hpp"
#include "rfprox/types.hpp"

namespace rfprox {

// kBoth keeps a pair only when both contributions exceed the threshold in
// magnitude; kEither when at least one does.
enum class PairFilter { kBoth, kEither };

struct PairProvenance {
  std::string instance_id;
  Index feature = 0;
  bool operator==(const PairProvenance&) const = default;
};

// Paired contributions of the same (instance, feature) under models A and B.
struct PairedSample {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  std::vector<PairProvenance> provenance;

  Index size() const { return a.size(); }
};

inline constexpr double kDefaultAuditThreshold = 1e-4;

// Reports must list the same instances in the same order over the same
// feature space. Only instances predicted as the high class by at least one
// model contribute pairs.
PairedSample collect_pairs(const std::vector<ContributionReport>& reports_a,
                           const std::vector<ContributionReport>& reports_b,
                           ClassId high_class_a, ClassId high_class_b,
                           double threshold = kDefaultAuditThreshold,
                           PairFilter filter = PairFilter::kBoth);

namespace detail {
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double kendall_tau_b(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
}  // namespace detail

// Mid-ranks (1-based); tied values share the mean of their positions.
Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& values);

// The three correlations take any pair of equally sized Eigen vector
// expressions. They throw InputError for fewer than 2 pairs or a constant
// coordinate.
template <typename DA, typename DB>
double pearson_r(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  return detail::pearson(a.template cast<double>(), b.template cast<double>());
}

template <typename DA, typename DB>
double spearman_rho(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  const Eigen::VectorXd va = a.template cast<double>();
  const Eigen::VectorXd vb = b.template cast<double>();
  if (va.size() != vb.size()) throw InputError("correlation inputs differ in length");
  return detail::pearson(average_ranks(va), average_ranks(vb));
}

// Tie-corrected Kendall tau-b, O(n log n).
template <typename DA, typename DB>
double kendall_tau(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  return detail::kendall_tau_b(a.template cast<double>(), b.template cast<double>());
}

inline double pearson_r(const PairedSample& s) { return pearson_r(s.a, s.b); }
inline double spearman_rho(const PairedSample& s) { return spearman_rho(s.a, s.b); }
inline double kendall_tau(const PairedSample& s) { return kendall_tau(s.a, s.b); }

// Rows: sign of the model A contribution (-, +); columns: sign of model B.
struct ContingencyTable {
  Eigen::Matrix<std::int64_t, 2, 2> counts = Eigen::Matrix<std::int64_t, 2, 2>::Zero();
  std::int64_t total() const { return counts.sum(); }
};

// A component counts as positive when > 0, otherwise negative.
ContingencyTable sign_table(const PairedSample& sample);

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 1;
  Eigen::Matrix2d expected;
  // (O - E) / sqrt(E)
  Eigen::Matrix2d residuals;
};

// Pearson chi-square without continuity correction.
ChiSquareResult chi_square_2x2(const ContingencyTable& table);

struct AuditSummary {
  Index pair_count = 0;
  double threshold = kDefaultAuditThreshold;
  PairFilter filter = PairFilter::kBoth;
  // Unset when undefined for the sample (too few pairs, constant margin).
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::optional<double> kendall;
  ContingencyTable table;
  std::optional<ChiSquareResult> chi_square;
};

AuditSummary summarize_audit(const PairedSample& sample, double threshold,
                             PairFilter filter);

}  // namespace rfprox

#endif  // RFPROX_AUDIT_HPP_
