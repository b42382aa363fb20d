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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "rfprox/audit.hpp"
#include "rfprox/cli.hpp"
#include "rfprox/contribution.hpp"
#include "rfprox/dataset.hpp"
#include "rfprox/forest.hpp"
#include "rfprox/proximity.hpp"
#include "test_util.hpp"

namespace rfprox {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;
using testing::random_binary;
using testing::read_file;
using testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "rfprox");
  std::ostringstream o;
  std::ostringstream e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << e.str();
  return code;
}

BinaryVector random_vector(Rng& rng, Index n) {
  BinaryVector v(n);
  for (Index k = 0; k < n; ++k) v(k) = static_cast<Bit>(rng.below(2));
  return v;
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

const std::string kImages = std::string(RFPROX_DATA_DIR) + "/mnist/mnist2500-images-idx3-ubyte";
const std::string kLabels = std::string(RFPROX_DATA_DIR) + "/mnist/mnist2500-labels-idx1-ubyte";

std::vector<std::string> mnist_train_args(const std::string& out) {
  return {"train", "--format", "idx", "--data", kImages, "--labels", kLabels,
          "--trees", "100", "--seed", "2018", "--holdout", "0.2", "--out", out};
}

Outcome chi_square_golden() {
  const auto t0 = Clock::now();
  ContingencyTable t;
  t.counts << 13875, 61634, 25338, 25513;
  const ChiSquareResult r = chi_square_2x2(t);
  const double expect[4] = {-62.43, 41.88, 76.08, -51.04};
  const double got[4] = {r.residuals(0, 0), r.residuals(0, 1), r.residuals(1, 0),
                         r.residuals(1, 1)};
  bool ok = std::abs(r.statistic - 14045.57) <= 5.0 && r.df == 1;
  for (int i = 0; i < 4; ++i) {
    ok = ok && std::abs(got[i] - expect[i]) <= 0.1 && (got[i] > 0) == (expect[i] > 0);
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 1.0;
  return {ok, fmt("statistic=%.4f df=%d residuals=(%.3f, %.3f, %.3f, %.3f) %.4fs",
                  r.statistic, r.df, got[0], got[1], got[2], got[3], secs)};
}

Outcome mnist_desk_scale(const TempDir& dir) {
  const auto t0 = Clock::now();
  const std::string model_dir = (dir / "mnist").string();
  if (run_cli(mnist_train_args(model_dir)) != 0) return {false, "train failed"};
  const json manifest = json::parse(read_file(dir / "mnist/manifest.json"));
  const double acc = manifest["results"]["holdout_accuracy"].get<double>();
  const Index train_size = manifest["results"]["train_size"].get<Index>();

  const Forest forest = load_model(dir / "mnist/model.json");
  const BinaryDataset all = load_idx(kImages, kLabels);
  const auto [train_idx, test_idx] =
      holdout_indices(all.size(), forest.holdout->fraction, forest.holdout->seed);
  Index wrong = -1;
  for (std::size_t i = 0; i < test_idx.size(); ++i) {
    const Index row = test_idx[i];
    if (predict(forest, all.vectors.row(row)).label != all.labels[static_cast<std::size_t>(row)]) {
      wrong = static_cast<Index>(i);
      break;
    }
  }
  if (wrong < 0) return {false, "no misclassified test instance"};
  const std::string diff_dir = (dir / "mnist_diff").string();
  if (run_cli({"diff", "--model", model_dir + "/model.json", "--format", "idx", "--data",
               kImages, "--labels", kLabels, "--subset", "test", "--index",
               std::to_string(wrong), "--grid", "28x28", "--out", diff_dir}) != 0) {
    return {false, "diff failed"};
  }
  bool maps = true;
  for (const char* name : {"wrong/heatmap.pgm", "right/heatmap.pgm", "diff.pgm"}) {
    const std::string pgm = read_file(dir / ("mnist_diff/" + std::string(name)));
    maps = maps && pgm.rfind("P5\n28 28\n255\n", 0) == 0 && pgm.size() == 13 + 784;
  }
  const double secs = seconds_since(t0);
  const bool ok = acc >= 0.80 && maps && secs < 180.0 && train_size == 2000 &&
                  test_idx.size() == 500;
  return {ok, fmt("train=%lld test=%zu holdout_accuracy=%.4f explained test:%lld maps=%s %.1fs",
                  static_cast<long long>(train_size), test_idx.size(), acc,
                  static_cast<long long>(wrong), maps ? "3" : "missing", secs)};
}

Outcome zero_impact() {
  Index checked = 0;
  Index violations = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const BinaryDataset d = random_binary(40, 30, seed + 1000, 2 + static_cast<int>(seed % 3));
    TrainConfig cfg;
    cfg.tree_count = 3 + static_cast<int>(seed % 6);
    cfg.seed = seed;
    const Forest f = train(d, cfg);
    const ProximityStore store = build_store(f, d, 1);
    const auto used = features_used(f);
    Rng rng(seed);
    for (int i = 0; i < 5; ++i) {
      const ContributionReport r = explain(f, store, random_vector(rng, 30));
      for (Index k = 0; k < 30; ++k) {
        if (used.count(static_cast<std::int32_t>(k))) continue;
        const auto& fc = r.features[static_cast<std::size_t>(k)];
        ++checked;
        if (fc.contribution != 0.0 || fc.closeness.delta_in != 0.0 ||
            fc.closeness.delta_out != 0.0 || fc.changed_tree_count != 0) {
          ++violations;
        }
      }
    }
  }
  return {checked > 0 && violations == 0,
          fmt("%lld unused (forest, v, k) checks over 50 forests, %lld nonzero",
              static_cast<long long>(checked), static_cast<long long>(violations))};
}

Outcome fast_path() {
  Index triples = 0;
  Index mismatches = 0;
  Rng rng(404);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index features = 8 + static_cast<Index>(seed % 9);
    const BinaryDataset d = random_binary(60, features, seed + 7, 3);
    TrainConfig cfg;
    cfg.tree_count = 25;
    cfg.seed = seed;
    const Forest f = train(d, cfg);
    for (int i = 0; i < 50; ++i) {
      const BinaryVector v = random_vector(rng, features);
      const PathContext ctx = build_path_context(f, v);
      for (Index k = 0; k < features; ++k) {
        ++triples;
        if (fast_leaf_signature(f, ctx, v, k) != leaf_signature(f, flip(v, k))) ++mismatches;
      }
    }
  }
  return {triples >= 10000 && mismatches == 0,
          fmt("%lld triples, %lld mismatches", static_cast<long long>(triples),
              static_cast<long long>(mismatches))};
}

Outcome metric_suite() {
  Index stores = 0;
  Index failures = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Index n = 10 + static_cast<Index>(seed * 2);
    const BinaryDataset d = random_binary(n, 10, seed + 55, 3);
    TrainConfig cfg;
    cfg.tree_count = 7 + static_cast<int>(seed);
    cfg.seed = seed;
    const Forest f = train(d, cfg);
    const ProximityStore s = build_store(f, d);
    const Eigen::MatrixXd m = distance_matrix(s);
    ++stores;
    const double trees = static_cast<double>(s.tree_count);
    for (Index i = 0; i < n; ++i) {
      if (m(i, i) != 0.0) ++failures;
      for (Index j = 0; j < n; ++j) {
        Index hamming = 0;
        for (Index t = 0; t < s.tree_count; ++t) hamming += s.signatures(i, t) != s.signatures(j, t);
        if (m(i, j) != m(j, i) || m(i, j) < 0.0 || m(i, j) > 1.0 ||
            m(i, j) != static_cast<double>(hamming) / trees) {
          ++failures;
        }
        for (Index k = 0; k < n; ++k) {
          if (m(i, k) > m(i, j) + m(j, k) + 1e-12) ++failures;
        }
      }
    }
  }
  return {failures == 0, fmt("%lld stores of 10..28 instances, %lld violations",
                             static_cast<long long>(stores), static_cast<long long>(failures))};
}

Outcome sign_contract() {
  Index correct = 0;
  Index satisfied = 0;
  double worst_seed = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // feature 0 decides the class, features 1..10 are noise.
    const BinaryDataset d = random_binary(500, 11, seed + 9000, [](const auto& row) {
      return static_cast<ClassId>(row(0));
    });
    TrainConfig cfg;
    cfg.tree_count = 50;
    cfg.seed = seed;
    const Forest f = train(d, cfg);
    const ProximityStore store = build_store(f, d);
    Index seed_correct = 0;
    Index seed_ok = 0;
    for (Index i = 0; i < d.size(); ++i) {
      if (store.predicted_labels[static_cast<std::size_t>(i)] !=
          d.labels[static_cast<std::size_t>(i)]) {
        continue;
      }
      ExplainOptions opts;
      opts.contribution.exclude_index = i;
      const Eigen::VectorXd c = explain(f, store, d.vectors.row(i), opts).contributions();
      ++seed_correct;
      if (c(0) > 0.0 && c.tail(10).cwiseAbs().maxCoeff() < std::abs(c(0))) ++seed_ok;
    }
    correct += seed_correct;
    satisfied += seed_ok;
    worst_seed = std::min(worst_seed, static_cast<double>(seed_ok) / seed_correct);
  }
  const double frac = static_cast<double>(satisfied) / static_cast<double>(correct);
  return {frac >= 0.95, fmt("%lld/%lld correctly classified instances (%.4f), worst seed %.4f",
                            static_cast<long long>(satisfied), static_cast<long long>(correct),
                            frac, worst_seed)};
}

Outcome antisymmetry() {
  const BinaryDataset d = random_binary(120, 14, 31337, 3);
  TrainConfig cfg;
  cfg.tree_count = 40;
  cfg.seed = 8;
  const Forest f = train(d, cfg);
  const ProximityStore store = build_store(f, d);
  Rng rng(17);
  int checked = 0;
  double worst = 0.0;
  while (checked < 1000) {
    const BinaryVector v = random_vector(rng, 14);
    const Index k = static_cast<Index>(rng.below(14));
    const BinaryVector w = flip(v, k);
    const ClassId c = predict(f, v).label;
    if (predict(f, w).label != c) continue;
    const double a = feature_contribution(f, store, v, k, c).contribution;
    const double b = feature_contribution(f, store, w, k, c).contribution;
    worst = std::max(worst, std::abs(a + b));
    ++checked;
  }
  return {worst <= 1e-12, fmt("%d prediction-preserving flips, max |c + c'| = %.3g", checked, worst)};
}

Outcome binarization_anchor() {
  BinarizationSpec spec;
  SourceFeature x;
  x.name = "x";
  x.kind = FeatureKind::kThresholds;
  x.thresholds = {{0.25, Direction::kLessThan},
                  {0.71, Direction::kLessThan},
                  {0.5, Direction::kGreaterThan}};
  spec.features.push_back(x);
  spec.derived_feature_names = {"x<0.25", "x<0.71", "x>0.5"};
  auto bits = [&](double value) {
    const BinaryVector b = apply_binarizer(spec, (Eigen::RowVectorXd(1) << value).finished());
    std::string s;
    for (Index k = 0; k < b.size(); ++k) s += b(k) ? '1' : '0';
    return s;
  };
  const std::string a = bits(0.3);
  const std::string b = bits(0.65);
  return {a == "010" && b == "011", "0.3 -> " + a + ", 0.65 -> " + b};
}

Outcome self_audit(const TempDir& dir) {
  const BinaryDataset d = random_binary(150, 12, 2024, [](const auto& row) {
    return static_cast<ClassId>(row(0) ^ (row(1) & row(2)));
  });
  RawDataset raw;
  raw.rows = d.vectors.cast<double>();
  raw.labels = d.labels;
  raw.class_names = {"0", "1"};
  for (int k = 0; k < 12; ++k) raw.feature_names.push_back("b" + std::to_string(k));
  save_csv(raw, dir / "audit.csv");
  const std::string data = (dir / "audit.csv").string();
  if (run_cli({"train", "--data", data, "--trees", "30", "--seed", "3", "--out",
               (dir / "audit_model").string()}) != 0) {
    return {false, "train failed"};
  }
  const std::string model = (dir / "audit_model/model.json").string();
  if (run_cli({"audit", "--model-a", model, "--model-b", model, "--data", data, "--out",
               (dir / "audit_out").string()}) != 0) {
    return {false, "audit failed"};
  }
  const json a = json::parse(read_file(dir / "audit_out/audit.json"));
  if (a["pearson_r"].is_null() || a["spearman_rho"].is_null() || a["kendall_tau_b"].is_null()) {
    return {false, "undefined correlation"};
  }
  const double r = a["pearson_r"].get<double>();
  const double rho = a["spearman_rho"].get<double>();
  const double tau = a["kendall_tau_b"].get<double>();
  const auto off = a["sign_table"]["counts"][0][1].get<long long>() +
                   a["sign_table"]["counts"][1][0].get<long long>();
  const bool ok = std::abs(r - 1.0) <= 1e-9 && std::abs(rho - 1.0) <= 1e-9 &&
                  std::abs(tau - 1.0) <= 1e-9 && off == 0 && a["pair_count"].get<long long>() > 0;
  return {ok, fmt("pairs=%lld pearson=%.12f spearman=%.12f kendall=%.12f off-diagonal=%lld",
                  a["pair_count"].get<long long>(), r, rho, tau, off)};
}

Outcome train_determinism(const TempDir& dir) {
  if (run_cli(mnist_train_args((dir / "det_a").string())) != 0 ||
      run_cli(mnist_train_args((dir / "det_b").string())) != 0) {
    return {false, "train failed"};
  }
  const std::string a = read_file(dir / "det_a/model.json");
  const std::string b = read_file(dir / "det_b/model.json");
  return {!a.empty() && a == b, fmt("model files of %zu bytes, %s", a.size(),
                                    a == b ? "byte-identical" : "different")};
}

}  // namespace
}  // namespace rfprox

int main() {
  using namespace rfprox;
  TempDir dir("acceptance");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"chi-square golden contingency table", chi_square_golden},
      {"MNIST desk-scale run", [&] { return mnist_desk_scale(dir); }},
      {"zero-impact exactness", zero_impact},
      {"fast-path oracle equivalence", fast_path},
      {"proximity metric suite", metric_suite},
      {"sign contract on a decisive feature", sign_contract},
      {"conditional antisymmetry", antisymmetry},
      {"binarization worked example", binarization_anchor},
      {"self-audit identity", [&] { return self_audit(dir); }},
      {"training determinism", [&] { return train_determinism(dir); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << i + 1 << ". " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
