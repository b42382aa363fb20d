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

#include "rfprox/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace rfprox {
namespace {

using Json = nlohmann::ordered_json;

Json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double number_from(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Json optional_number(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::string bits_to_string(const BinaryVector& v) {
  std::string s(static_cast<std::size_t>(v.size()), '0');
  for (Index k = 0; k < v.size(); ++k) {
    if (v(k) != 0) s[static_cast<std::size_t>(k)] = '1';
  }
  return s;
}

std::uint8_t scale_pixel(double v, HeatmapScale scale, double lo, double hi) {
  if (std::isnan(v)) return 128;
  if (scale == HeatmapScale::kSymmetric) {
    const double m = std::max(std::abs(lo), std::abs(hi));
    if (m == 0.0) return 128;
    if (v >= 0.0) return static_cast<std::uint8_t>(128 + std::lround(127.0 * v / m));
    return static_cast<std::uint8_t>(128 - std::lround(128.0 * -v / m));
  }
  if (hi == lo) return 0;
  return static_cast<std::uint8_t>(std::lround(255.0 * (v - lo) / (hi - lo)));
}

}  // namespace

GridShape parse_grid(std::string_view text) {
  const auto x = text.find_first_of("xX");
  GridShape g;
  if (x == std::string_view::npos) throw InputError("grid must look like RxC");
  const auto r = std::from_chars(text.data(), text.data() + x, g.rows);
  const auto c = std::from_chars(text.data() + x + 1, text.data() + text.size(), g.cols);
  if (r.ec != std::errc() || r.ptr != text.data() + x || c.ec != std::errc() ||
      c.ptr != text.data() + text.size() || g.rows <= 0 || g.cols <= 0) {
    throw InputError("grid must look like RxC with positive R and C, got '" +
                     std::string(text) + "'");
  }
  return g;
}

std::string fixed6(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string report_to_json(const ContributionReport& report) {
  Json j;
  j["model_id"] = report.model_id;
  j["instance_id"] = report.instance_id;
  j["predicted_class"] = report.predicted_class;
  j["target_class"] = report.target_class;
  j["votes"] = std::vector<int>(report.votes.data(), report.votes.data() + report.votes.size());
  j["normalized"] = report.normalized;
  j["input"] = bits_to_string(report.input);
  Json features = Json::array();
  for (const auto& f : report.features) {
    const auto& c = f.closeness;
    Json jf;
    jf["index"] = f.feature_index;
    jf["name"] = report.feature_names.at(static_cast<std::size_t>(f.feature_index));
    jf["contribution"] = number_or_null(f.contribution);
    jf["closeness"] = {{"in_before", number_or_null(c.in_before)},
                       {"out_before", number_or_null(c.out_before)},
                       {"in_after", number_or_null(c.in_after)},
                       {"out_after", number_or_null(c.out_after)},
                       {"delta_in", number_or_null(c.delta_in)},
                       {"delta_out", number_or_null(c.delta_out)}};
    jf["changed_trees"] = f.changed_tree_count;
    features.push_back(std::move(jf));
  }
  j["features"] = std::move(features);
  return j.dump(1) + "\n";
}

ContributionReport report_from_json(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    ContributionReport r;
    r.model_id = j.at("model_id").get<std::string>();
    r.instance_id = j.at("instance_id").get<std::string>();
    r.predicted_class = j.at("predicted_class").get<ClassId>();
    r.target_class = j.at("target_class").get<ClassId>();
    const auto votes = j.at("votes").get<std::vector<int>>();
    r.votes = Eigen::Map<const Eigen::VectorXi>(votes.data(), static_cast<Index>(votes.size()));
    r.normalized = j.at("normalized").get<bool>();
    const auto bits = j.at("input").get<std::string>();
    r.input.resize(static_cast<Index>(bits.size()));
    for (std::size_t k = 0; k < bits.size(); ++k) r.input(static_cast<Index>(k)) = bits[k] == '1';
    for (const auto& jf : j.at("features")) {
      FeatureContribution f;
      f.feature_index = jf.at("index").get<Index>();
      f.contribution = number_from(jf.at("contribution"));
      const auto& jc = jf.at("closeness");
      f.closeness = {number_from(jc.at("in_before")), number_from(jc.at("out_before")),
                     number_from(jc.at("in_after")),  number_from(jc.at("out_after")),
                     number_from(jc.at("delta_in")),  number_from(jc.at("delta_out"))};
      f.changed_tree_count = jf.at("changed_trees").get<Index>();
      r.feature_names.push_back(jf.at("name").get<std::string>());
      r.features.push_back(f);
    }
    return r;
  } catch (const Json::exception& e) {
    throw InputError(std::string("malformed report document: ") + e.what());
  }
}

std::string report_to_csv(const ContributionReport& report) {
  std::ostringstream os;
  os << "feature_index,name,contribution,in_before,out_before,in_after,out_after\n";
  for (const auto& f : report.features) {
    const auto& c = f.closeness;
    os << f.feature_index << ','
       << report.feature_names.at(static_cast<std::size_t>(f.feature_index)) << ','
       << fixed6(f.contribution) << ',' << fixed6(c.in_before) << ','
       << fixed6(c.out_before) << ',' << fixed6(c.in_after) << ','
       << fixed6(c.out_after) << '\n';
  }
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

void export_report_json(const ContributionReport& report, const std::filesystem::path& path) {
  write_text_file(path, report_to_json(report));
}

void export_report_csv(const ContributionReport& report, const std::filesystem::path& path) {
  write_text_file(path, report_to_csv(report));
}

std::string heatmap_pgm(const Eigen::Ref<const Eigen::VectorXd>& values, GridShape shape,
                        HeatmapScale scale) {
  if (shape.rows <= 0 || shape.cols <= 0 || shape.rows * shape.cols != values.size()) {
    throw InputError("heatmap grid " + std::to_string(shape.rows) + "x" +
                     std::to_string(shape.cols) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Index i = 0; i < values.size(); ++i) {
    if (std::isnan(values(i))) continue;
    lo = std::min(lo, values(i));
    hi = std::max(hi, values(i));
  }
  if (lo > hi) lo = hi = 0.0;

  std::string out = "P5\n" + std::to_string(shape.cols) + " " +
                    std::to_string(shape.rows) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i) {
    out.push_back(static_cast<char>(scale_pixel(values(i), scale, lo, hi)));
  }
  return out;
}

void export_heatmap_pgm(const Eigen::Ref<const Eigen::VectorXd>& values, GridShape shape,
                        HeatmapScale scale, const std::filesystem::path& path) {
  write_text_file(path, heatmap_pgm(values, shape, scale));
}

std::string distance_matrix_csv(const Eigen::Ref<const Eigen::MatrixXd>& matrix) {
  std::string out;
  for (Index c = 0; c < matrix.cols(); ++c) {
    if (c) out += ',';
    out += std::to_string(c);
  }
  out += '\n';
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) {
      if (c) out += ',';
      out += fixed6(matrix(r, c));
    }
    out += '\n';
  }
  return out;
}

void export_distance_matrix_csv(const Eigen::Ref<const Eigen::MatrixXd>& matrix,
                                const std::filesystem::path& path) {
  write_text_file(path, distance_matrix_csv(matrix));
}

std::string outliers_csv(const OutlierScores& scores, const ProximityStore& store) {
  std::ostringstream os;
  os << "index,true_label,predicted_label,score,flag\n";
  for (Index i = 0; i < scores.scores.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    os << i << ',' << store.true_labels[u] << ',' << store.predicted_labels[u] << ','
       << fixed6(scores.scores(i)) << ',' << (scores.flags[u] ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string audit_to_json(const AuditSummary& s) {
  Json j;
  j["pair_count"] = s.pair_count;
  j["threshold"] = s.threshold;
  j["filter_mode"] = s.filter == PairFilter::kBoth ? "both" : "either";
  j["pearson_r"] = optional_number(s.pearson);
  j["spearman_rho"] = optional_number(s.spearman);
  j["kendall_tau_b"] = optional_number(s.kendall);
  const auto& t = s.table.counts;
  j["sign_table"] = {{"rows", "model_a_sign[-,+]"},
                     {"cols", "model_b_sign[-,+]"},
                     {"counts", {{t(0, 0), t(0, 1)}, {t(1, 0), t(1, 1)}}}};
  if (s.chi_square) {
    const auto& r = s.chi_square->residuals;
    j["chi_square"] = {{"statistic", s.chi_square->statistic},
                       {"df", s.chi_square->df},
                       {"pearson_residuals", {{r(0, 0), r(0, 1)}, {r(1, 0), r(1, 1)}}}};
  } else {
    j["chi_square"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace rfprox
