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

#ifndef RFPROX_REPORT_HPP_
#define RFPROX_REPORT_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "rfprox/audit.hpp"
#include "rfprox/contribution.hpp"
#include "rfprox/proximity.hpp"

namespace rfprox {

struct GridShape {
  Index rows = 0;
  Index cols = 0;
};

// Parses "RxC", e.g. "28x28".
GridShape parse_grid(std::string_view text);

enum class HeatmapScale {
  // 0 -> 128, +max|v| -> 255, -max|v| -> 0.
  kSymmetric,
  // min -> 0, max -> 255.
  kMinMax,
};

// Fixed-point text with 6 decimals; NaN prints as "nan" and negative zero
// as "0.000000".
std::string fixed6(double value);

std::string report_to_json(const ContributionReport& report);
ContributionReport report_from_json(const std::string& text);
std::string report_to_csv(const ContributionReport& report);
void export_report_json(const ContributionReport& report, const std::filesystem::path& path);
void export_report_csv(const ContributionReport& report, const std::filesystem::path& path);

// Binary P5 PGM, maxval 255, values laid out row-major over the grid.
std::string heatmap_pgm(const Eigen::Ref<const Eigen::VectorXd>& values, GridShape shape,
                        HeatmapScale scale = HeatmapScale::kSymmetric);
void export_heatmap_pgm(const Eigen::Ref<const Eigen::VectorXd>& values, GridShape shape,
                        HeatmapScale scale, const std::filesystem::path& path);

std::string distance_matrix_csv(const Eigen::Ref<const Eigen::MatrixXd>& matrix);
void export_distance_matrix_csv(const Eigen::Ref<const Eigen::MatrixXd>& matrix,
                                const std::filesystem::path& path);

std::string outliers_csv(const OutlierScores& scores, const ProximityStore& store);

std::string audit_to_json(const AuditSummary& summary);

void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace rfprox

#endif  // RFPROX_REPORT_HPP_
