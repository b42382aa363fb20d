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

#ifndef RFPROX_DATASET_HPP_
#define RFPROX_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "rfprox/types.hpp"

namespace rfprox {

// Numeric table plus contiguous class ids. `class_names[c]` is the original
// label text of class c.
struct RawDataset {
  Eigen::MatrixXd rows;
  std::vector<ClassId> labels;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;

  Index size() const { return rows.rows(); }
  Index feature_count() const { return rows.cols(); }
};

enum class FeatureKind { kPassthrough, kOneHot, kThresholds };
enum class Direction { kLessThan, kGreaterThan };

struct Threshold {
  double value = 0.0;
  Direction direction = Direction::kLessThan;

  bool operator==(const Threshold&) const = default;
};

// How one source column expands into derived bits.
//   kPassthrough: one bit, set when the value equals 1.
//   kOneHot:      one bit per category value, set on exact equality.
//   kThresholds:  one bit per threshold, set when the comparison holds.
// A constant column is kThresholds with no thresholds, i.e. zero bits.
struct SourceFeature {
  std::string name;
  FeatureKind kind = FeatureKind::kThresholds;
  std::vector<Threshold> thresholds;
  std::vector<double> categories;

  Index derived_count() const;
  bool operator==(const SourceFeature&) const = default;
};

struct BinarizationSpec {
  std::vector<SourceFeature> features;
  std::vector<std::string> derived_feature_names;
  // Warnings raised while fitting (constant columns).
  std::vector<std::string> warnings;

  Index source_count() const { return static_cast<Index>(features.size()); }
  Index derived_count() const {
    return static_cast<Index>(derived_feature_names.size());
  }
  // Warnings are diagnostics only and do not take part in equality.
  bool operator==(const BinarizationSpec& other) const {
    return features == other.features &&
           derived_feature_names == other.derived_feature_names;
  }
};

struct BinaryDataset {
  BinaryMatrix vectors;
  std::vector<ClassId> labels;
  BinarizationSpec spec;
  std::vector<std::string> class_names;

  Index size() const { return vectors.rows(); }
  Index feature_count() const { return vectors.cols(); }
  int class_count() const;
  BinaryDataset subset(const std::vector<Index>& indices) const;
};

struct BinarizerOptions {
  int max_splits_per_feature = 4;
  // Columns with at most this many distinct values (and not already {0,1})
  // are one-hot encoded.
  int onehot_max_cardinality = 16;
};

using LabelColumn = std::variant<Index, std::string>;

// Loads a comma-separated numeric table. The label column may hold any text;
// labels are remapped to 0..K-1 in sorted order (numeric order when every
// label parses as a number).
RawDataset subset_rows(const RawDataset& data, const std::vector<Index>& indices);

RawDataset load_csv(const std::filesystem::path& path,
                    const LabelColumn& label_column, bool has_header);

// Writes `data` as CSV with a header row and the label column last.
void save_csv(const RawDataset& data, const std::filesystem::path& path);

// Reads IDX image (magic 2051) and label (magic 2049) files as raw pixel
// intensities.
RawDataset load_idx_raw(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

// Per-pixel binarization for IDX images: bit = (pixel >= pixel_threshold).
BinarizationSpec idx_binarization(Index rows, Index cols, int pixel_threshold);

BinaryDataset load_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path,
                       int pixel_threshold = 128);

BinarizationSpec fit_binarizer(const RawDataset& data,
                               const BinarizerOptions& options);
inline BinarizationSpec fit_binarizer(const RawDataset& data,
                                      int max_splits_per_feature) {
  return fit_binarizer(data, BinarizerOptions{max_splits_per_feature, 16});
}

BinaryVector apply_binarizer(const BinarizationSpec& spec,
                             const Eigen::Ref<const Eigen::RowVectorXd>& row);

BinaryDataset binarize(const BinarizationSpec& spec, const RawDataset& data);

struct HoldoutSplit {
  BinaryDataset train;
  BinaryDataset test;
  std::vector<Index> train_indices;
  std::vector<Index> test_indices;
};

// Disjoint sorted (train, test) index sets covering 0..n-1. `fraction` is
// the share of rows assigned to the test part, rounded to the nearest row
// count; both parts must be non-empty.
std::pair<std::vector<Index>, std::vector<Index>> holdout_indices(Index n, double fraction,
                                                                  std::uint64_t seed);

HoldoutSplit split_holdout(const BinaryDataset& data, double fraction,
                           std::uint64_t seed);

}  // namespace rfprox

#endif  // RFPROX_DATASET_HPP_
