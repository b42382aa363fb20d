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

#include "rfprox/audit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rfprox {
namespace {

void check_lengths(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InputError("correlation inputs differ in length");
  if (a.size() < 2) throw InputError("correlation needs at least 2 pairs");
}

// Number of tied pairs among runs of equal values in a sorted sequence.
template <typename Equal>
double tied_pairs(Index n, Equal&& equal) {
  double ties = 0.0;
  Index run = 1;
  for (Index i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      ties += 0.5 * static_cast<double>(run) * static_cast<double>(run - 1);
      run = 1;
    }
  }
  return ties;
}

// Merge sort that counts strict inversions.
double count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                        std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0.0;
  const std::size_t mid = lo + (hi - lo) / 2;
  double inversions = count_inversions(v, scratch, lo, mid) +
                      count_inversions(v, scratch, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inversions += static_cast<double>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inversions;
}

}  // namespace

namespace detail {

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  check_lengths(a, b);
  const Eigen::ArrayXd ca = a.array() - a.mean();
  const Eigen::ArrayXd cb = b.array() - b.mean();
  const double saa = ca.square().sum();
  const double sbb = cb.square().sum();
  if (saa == 0.0 || sbb == 0.0) {
    throw InputError("correlation undefined for a constant sequence");
  }
  return std::clamp((ca * cb).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

double kendall_tau_b(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  check_lengths(a, b);
  const Index n = a.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) {
    return a(x) < a(y) || (a(x) == a(y) && b(x) < b(y));
  });
  auto at = [&](Index i) { return order[static_cast<std::size_t>(i)]; };
  const double ties_a = tied_pairs(n, [&](Index i, Index j) { return a(at(i)) == a(at(j)); });
  const double ties_joint = tied_pairs(n, [&](Index i, Index j) {
    return a(at(i)) == a(at(j)) && b(at(i)) == b(at(j));
  });

  std::vector<double> bs(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) bs[static_cast<std::size_t>(i)] = b(at(i));
  std::vector<double> scratch(bs.size());
  const double discordant = count_inversions(bs, scratch, 0, bs.size());
  const double ties_b = tied_pairs(n, [&](Index i, Index j) {
    return bs[static_cast<std::size_t>(i)] == bs[static_cast<std::size_t>(j)];
  });

  const double total = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double denom = std::sqrt((total - ties_a) * (total - ties_b));
  if (denom == 0.0) throw InputError("correlation undefined for a constant sequence");
  const double concordant_minus_discordant =
      total - ties_a - ties_b + ties_joint - 2.0 * discordant;
  return std::clamp(concordant_minus_discordant / denom, -1.0, 1.0);
}

}  // namespace detail

Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const Index n = values.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index x, Index y) { return values(x) < values(y); });
  Eigen::VectorXd ranks(n);
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && values(order[static_cast<std::size_t>(j + 1)]) ==
                            values(order[static_cast<std::size_t>(i)])) {
      ++j;
    }
    const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k) ranks(order[static_cast<std::size_t>(k)]) = mid_rank;
    i = j + 1;
  }
  return ranks;
}

PairedSample collect_pairs(const std::vector<ContributionReport>& reports_a,
                           const std::vector<ContributionReport>& reports_b,
                           ClassId high_class_a, ClassId high_class_b, double threshold,
                           PairFilter filter) {
  if (reports_a.size() != reports_b.size()) {
    throw InputError("report sets cover different numbers of instances");
  }
  std::vector<double> a;
  std::vector<double> b;
  PairedSample sample;
  for (std::size_t r = 0; r < reports_a.size(); ++r) {
    const auto& ra = reports_a[r];
    const auto& rb = reports_b[r];
    if (ra.instance_id != rb.instance_id) {
      throw InputError("instance mismatch at position " + std::to_string(r) + ": '" +
                       ra.instance_id + "' vs '" + rb.instance_id + "'");
    }
    if (ra.feature_count() != rb.feature_count()) {
      throw InputError("reports for '" + ra.instance_id +
                       "' cover different feature counts");
    }
    if (ra.predicted_class != high_class_a && rb.predicted_class != high_class_b) {
      continue;
    }
    for (Index k = 0; k < ra.feature_count(); ++k) {
      const double ca = ra.features[static_cast<std::size_t>(k)].contribution;
      const double cb = rb.features[static_cast<std::size_t>(k)].contribution;
      const bool keep_a = std::abs(ca) > threshold;
      const bool keep_b = std::abs(cb) > threshold;
      if (filter == PairFilter::kBoth ? !(keep_a && keep_b) : !(keep_a || keep_b)) {
        continue;
      }
      a.push_back(ca);
      b.push_back(cb);
      sample.provenance.push_back({ra.instance_id, k});
    }
  }
  sample.a = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Index>(a.size()));
  sample.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Index>(b.size()));
  return sample;
}

ContingencyTable sign_table(const PairedSample& sample) {
  ContingencyTable table;
  for (Index i = 0; i < sample.size(); ++i) {
    ++table.counts(sample.a(i) > 0.0 ? 1 : 0, sample.b(i) > 0.0 ? 1 : 0);
  }
  return table;
}

ChiSquareResult chi_square_2x2(const ContingencyTable& table) {
  const Eigen::Matrix2d observed = table.counts.cast<double>();
  const Eigen::Vector2d rows = observed.rowwise().sum();
  const Eigen::RowVector2d cols = observed.colwise().sum();
  if ((rows.array() <= 0.0).any() || (cols.array() <= 0.0).any()) {
    throw InputError("chi-square undefined: contingency table has a zero margin");
  }
  ChiSquareResult result;
  result.expected = rows * cols / observed.sum();
  result.residuals = ((observed - result.expected).array() /
                      result.expected.array().sqrt()).matrix();
  result.statistic = result.residuals.squaredNorm();
  result.df = 1;
  return result;
}

AuditSummary summarize_audit(const PairedSample& sample, double threshold,
                             PairFilter filter) {
  AuditSummary s;
  s.pair_count = sample.size();
  s.threshold = threshold;
  s.filter = filter;
  auto attempt = [](auto&& fn) -> std::optional<double> {
    try {
      return fn();
    } catch (const InputError&) {
      return std::nullopt;
    }
  };
  s.pearson = attempt([&] { return pearson_r(sample); });
  s.spearman = attempt([&] { return spearman_rho(sample); });
  s.kendall = attempt([&] { return kendall_tau(sample); });
  s.table = sign_table(sample);
  try {
    s.chi_square = chi_square_2x2(s.table);
  } catch (const InputError&) {
    s.chi_square.reset();
  }
  return s;
}

}  // namespace rfprox
