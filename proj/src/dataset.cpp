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

#include "rfprox/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "rfprox/random.hpp"

namespace rfprox {
namespace {

// Gains at or below this are treated as zero (rounding noise).
constexpr double kMinGain = 1e-12;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Splits one CSV record. Double-quoted fields may contain commas; a doubled
// quote inside a quoted field is a literal quote.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  fields.push_back(trim(field));
  return fields;
}

std::optional<double> parse_number(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const char* begin = text.data();
  if (*begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

// Maps label text to contiguous ids. Numeric labels sort numerically.
std::pair<std::vector<ClassId>, std::vector<std::string>> remap_labels(
    const std::vector<std::string>& raw) {
  std::vector<std::string> names(raw.begin(), raw.end());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  const bool numeric = std::all_of(names.begin(), names.end(), [](const auto& n) {
    return parse_number(n).has_value();
  });
  if (numeric) {
    std::stable_sort(names.begin(), names.end(), [](const auto& a, const auto& b) {
      return *parse_number(a) < *parse_number(b);
    });
  }
  std::map<std::string, ClassId> ids;
  for (std::size_t c = 0; c < names.size(); ++c) ids[names[c]] = static_cast<ClassId>(c);
  std::vector<ClassId> labels;
  labels.reserve(raw.size());
  for (const auto& r : raw) labels.push_back(ids.at(r));
  return {std::move(labels), std::move(names)};
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw InputError("truncated IDX header in " + path.string());
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Sum over classes of count^2 / n, the "purity" term of n * gini.
double purity(const double* counts, int class_count, double n) {
  if (n <= 0) return 0.0;
  double s = 0.0;
  for (int c = 0; c < class_count; ++c) s += counts[c] * counts[c];
  return s / n;
}

// Greedy Gini threshold selection for one numeric column.
std::vector<double> select_thresholds(const Eigen::Ref<const Eigen::VectorXd>& column,
                                      const std::vector<ClassId>& labels,
                                      int class_count, int max_splits) {
  const Index n = column.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return column(a) < column(b); });

  // distinct[d] is the d-th distinct value; prefix row d holds class counts
  // of all rows whose value is below distinct[d].
  std::vector<double> distinct;
  Eigen::MatrixXd prefix(1, class_count);
  prefix.setZero();
  Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(class_count);
  for (Index i = 0; i < n; ++i) {
    const double v = column(order[i]);
    if (distinct.empty() || v != distinct.back()) {
      if (!distinct.empty()) {
        prefix.conservativeResize(prefix.rows() + 1, Eigen::NoChange);
        prefix.row(prefix.rows() - 1) = running;
      }
      distinct.push_back(v);
    }
    running(labels[order[i]]) += 1.0;
  }
  prefix.conservativeResize(prefix.rows() + 1, Eigen::NoChange);
  prefix.row(prefix.rows() - 1) = running;
  const Index d_count = static_cast<Index>(distinct.size());

  auto bin_purity = [&](Index a, Index b) {
    const Eigen::RowVectorXd counts = prefix.row(b) - prefix.row(a);
    return purity(counts.data(), class_count, counts.sum());
  };

  // Cut positions index `distinct`: cut d separates distinct[d-1] and
  // distinct[d]. Positions 0 and d_count bound the range.
  std::set<Index> cuts{0, d_count};
  for (int step = 0; step < max_splits; ++step) {
    double best_gain = kMinGain * static_cast<double>(n);
    Index best_cut = -1;
    for (Index d = 1; d < d_count; ++d) {
      if (cuts.contains(d)) continue;
      const auto hi = cuts.upper_bound(d);
      const Index b = *hi;
      const Index a = *std::prev(hi);
      const double gain = bin_purity(a, d) + bin_purity(d, b) - bin_purity(a, b);
      if (gain > best_gain) {
        best_gain = gain;
        best_cut = d;
      }
    }
    if (best_cut < 0) break;
    cuts.insert(best_cut);
  }
  std::vector<double> thresholds;
  for (Index d : cuts) {
    if (d == 0 || d == d_count) continue;
    thresholds.push_back(0.5 * (distinct[d - 1] + distinct[d]));
  }
  return thresholds;
}

}  // namespace

Index SourceFeature::derived_count() const {
  switch (kind) {
    case FeatureKind::kPassthrough:
      return 1;
    case FeatureKind::kOneHot:
      return static_cast<Index>(categories.size());
    case FeatureKind::kThresholds:
      return static_cast<Index>(thresholds.size());
  }
  return 0;
}

int BinaryDataset::class_count() const {
  if (!class_names.empty()) return static_cast<int>(class_names.size());
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

BinaryDataset BinaryDataset::subset(const std::vector<Index>& indices) const {
  BinaryDataset out;
  out.vectors.resize(static_cast<Index>(indices.size()), vectors.cols());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.vectors.row(static_cast<Index>(r)) = vectors.row(indices[r]);
    out.labels.push_back(labels[static_cast<std::size_t>(indices[r])]);
  }
  out.spec = spec;
  out.class_names = class_names;
  return out;
}

RawDataset load_csv(const std::filesystem::path& path,
                    const LabelColumn& label_column, bool has_header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file " + path.string());

  std::vector<std::string> header;
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (has_header && header.empty()) {
      header = std::move(fields);
      continue;
    }
    records.push_back(std::move(fields));
    line_numbers.push_back(line_no);
  }
  if (records.empty()) throw InputError("empty dataset in " + path.string());

  const std::size_t width = has_header ? header.size() : records.front().size();
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw InputError(path.string() + ":" + std::to_string(line_numbers[r]) +
                       ": ragged row (expected " + std::to_string(width) +
                       " fields, got " + std::to_string(records[r].size()) + ")");
    }
  }

  std::size_t label_index = 0;
  if (const auto* idx = std::get_if<Index>(&label_column)) {
    if (*idx < 0) {
      const Index resolved = static_cast<Index>(width) + *idx;
      if (resolved < 0) throw InputError("label column index out of range");
      label_index = static_cast<std::size_t>(resolved);
    } else {
      label_index = static_cast<std::size_t>(*idx);
    }
  } else {
    const auto& name = std::get<std::string>(label_column);
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw InputError("label column '" + name + "' not found in header of " +
                       path.string());
    }
    label_index = static_cast<std::size_t>(it - header.begin());
  }
  if (label_index >= width) throw InputError("label column index out of range");

  RawDataset data;
  data.rows.resize(static_cast<Index>(records.size()), static_cast<Index>(width - 1));
  std::vector<std::string> raw_labels;
  raw_labels.reserve(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    Index col = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_index) {
        raw_labels.push_back(records[r][c]);
        continue;
      }
      const auto value = parse_number(records[r][c]);
      if (!value) {
        throw InputError(path.string() + ":" + std::to_string(line_numbers[r]) +
                         ": non-numeric cell '" + records[r][c] + "' in column " +
                         std::to_string(c + 1));
      }
      data.rows(static_cast<Index>(r), col++) = *value;
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    if (c == label_index) continue;
    data.feature_names.push_back(has_header ? header[c] : "x" + std::to_string(c));
  }
  std::tie(data.labels, data.class_names) = remap_labels(raw_labels);
  return data;
}

void save_csv(const RawDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write CSV file " + path.string());
  for (const auto& name : data.feature_names) out << name << ',';
  out << "label\n";
  for (Index r = 0; r < data.size(); ++r) {
    for (Index c = 0; c < data.feature_count(); ++c) {
      out << format_number(data.rows(r, c)) << ',';
    }
    const auto label = data.labels[static_cast<std::size_t>(r)];
    out << (data.class_names.empty() ? std::to_string(label)
                                     : data.class_names[static_cast<std::size_t>(label)])
        << '\n';
  }
}

RawDataset load_idx_raw(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw InputError("cannot open IDX image file " + images_path.string());
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw InputError("cannot open IDX label file " + labels_path.string());

  if (const auto magic = read_be32(images, images_path); magic != 2051) {
    throw InputError("bad IDX image magic number " + std::to_string(magic) + " in " +
                     images_path.string());
  }
  const auto count = read_be32(images, images_path);
  const auto rows = read_be32(images, images_path);
  const auto cols = read_be32(images, images_path);
  if (const auto magic = read_be32(labels, labels_path); magic != 2049) {
    throw InputError("bad IDX label magic number " + std::to_string(magic) + " in " +
                     labels_path.string());
  }
  const auto label_count = read_be32(labels, labels_path);
  if (label_count != count) {
    throw InputError("IDX image/label count mismatch: " + std::to_string(count) +
                     " images, " + std::to_string(label_count) + " labels");
  }

  const std::size_t pixels = std::size_t{rows} * cols;
  std::vector<unsigned char> buffer(pixels * count);
  if (!images.read(reinterpret_cast<char*>(buffer.data()),
                   static_cast<std::streamsize>(buffer.size()))) {
    throw InputError("truncated IDX image data in " + images_path.string());
  }
  std::vector<unsigned char> label_bytes(count);
  if (!labels.read(reinterpret_cast<char*>(label_bytes.data()),
                   static_cast<std::streamsize>(count))) {
    throw InputError("truncated IDX label data in " + labels_path.string());
  }

  RawDataset data;
  data.rows = Eigen::Map<const Eigen::Matrix<unsigned char, Eigen::Dynamic,
                                             Eigen::Dynamic, Eigen::RowMajor>>(
                  buffer.data(), count, static_cast<Index>(pixels))
                  .cast<double>();
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      data.feature_names.push_back("px_" + std::to_string(r) + "_" + std::to_string(c));
    }
  }
  // Class id = raw label value.
  const int max_label = label_bytes.empty()
                            ? -1
                            : *std::max_element(label_bytes.begin(), label_bytes.end());
  for (int c = 0; c <= max_label; ++c) data.class_names.push_back(std::to_string(c));
  for (auto b : label_bytes) data.labels.push_back(static_cast<ClassId>(b));
  return data;
}

BinarizationSpec idx_binarization(Index rows, Index cols, int pixel_threshold) {
  if (pixel_threshold < 0 || pixel_threshold > 255) {
    throw InputError("pixel threshold must be within 0..255");
  }
  BinarizationSpec spec;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      SourceFeature f;
      f.name = "px_" + std::to_string(r) + "_" + std::to_string(c);
      f.kind = FeatureKind::kThresholds;
      // value >= t  <=>  value > t - 0.5 for integer pixels.
      f.thresholds.push_back({pixel_threshold - 0.5, Direction::kGreaterThan});
      spec.derived_feature_names.push_back(f.name);
      spec.features.push_back(std::move(f));
    }
  }
  return spec;
}

BinaryDataset load_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path, int pixel_threshold) {
  const RawDataset raw = load_idx_raw(images_path, labels_path);
  const auto side = static_cast<Index>(std::lround(std::sqrt(raw.feature_count())));
  Index rows = side;
  Index cols = side;
  if (side * side != raw.feature_count()) {
    rows = 1;
    cols = raw.feature_count();
  }
  return binarize(idx_binarization(rows, cols, pixel_threshold), raw);
}

BinarizationSpec fit_binarizer(const RawDataset& data, const BinarizerOptions& options) {
  if (data.size() == 0) throw InputError("cannot fit binarizer on an empty dataset");
  if (options.max_splits_per_feature < 1) {
    throw InputError("max_splits_per_feature must be positive");
  }
  if (static_cast<Index>(data.labels.size()) != data.size()) {
    throw InputError("label count does not match row count");
  }
  const int class_count =
      data.class_names.empty()
          ? *std::max_element(data.labels.begin(), data.labels.end()) + 1
          : static_cast<int>(data.class_names.size());

  BinarizationSpec spec;
  for (Index j = 0; j < data.feature_count(); ++j) {
    SourceFeature f;
    f.name = j < static_cast<Index>(data.feature_names.size())
                 ? data.feature_names[static_cast<std::size_t>(j)]
                 : "x" + std::to_string(j);
    const auto column = data.rows.col(j);
    std::set<double> values(column.begin(), column.end());

    if (values.size() == 1) {
      f.kind = FeatureKind::kThresholds;
      spec.warnings.push_back("constant feature '" + f.name +
                              "' produces no derived features");
    } else if (values == std::set<double>{0.0, 1.0}) {
      f.kind = FeatureKind::kPassthrough;
      spec.derived_feature_names.push_back(f.name);
    } else if (static_cast<int>(values.size()) <= options.onehot_max_cardinality) {
      f.kind = FeatureKind::kOneHot;
      f.categories.assign(values.begin(), values.end());
      for (double v : f.categories) {
        spec.derived_feature_names.push_back(f.name + "==" + format_number(v));
      }
    } else {
      f.kind = FeatureKind::kThresholds;
      for (double t : select_thresholds(column, data.labels, class_count,
                                        options.max_splits_per_feature)) {
        f.thresholds.push_back({t, Direction::kLessThan});
        spec.derived_feature_names.push_back(f.name + "<" + format_number(t));
      }
    }
    spec.features.push_back(std::move(f));
  }
  for (const auto& w : spec.warnings) std::clog << "warning: " << w << '\n';
  return spec;
}

BinaryVector apply_binarizer(const BinarizationSpec& spec,
                             const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() != spec.source_count()) {
    throw InputError("row has " + std::to_string(row.size()) +
                     " values, binarizer expects " +
                     std::to_string(spec.source_count()));
  }
  BinaryVector out(spec.derived_count());
  Index k = 0;
  for (Index j = 0; j < row.size(); ++j) {
    const double x = row(j);
    const auto& f = spec.features[static_cast<std::size_t>(j)];
    switch (f.kind) {
      case FeatureKind::kPassthrough:
        out(k++) = x == 1.0 ? 1 : 0;
        break;
      case FeatureKind::kOneHot:
        for (double c : f.categories) out(k++) = x == c ? 1 : 0;
        break;
      case FeatureKind::kThresholds:
        for (const auto& t : f.thresholds) {
          const bool bit =
              t.direction == Direction::kLessThan ? x < t.value : x > t.value;
          out(k++) = bit ? 1 : 0;
        }
        break;
    }
  }
  check_invariant(k == out.size(), "binarizer derived-count mismatch");
  return out;
}

BinaryDataset binarize(const BinarizationSpec& spec, const RawDataset& data) {
  BinaryDataset out;
  out.vectors.resize(data.size(), spec.derived_count());
  for (Index r = 0; r < data.size(); ++r) {
    out.vectors.row(r) = apply_binarizer(spec, data.rows.row(r));
  }
  out.labels = data.labels;
  out.spec = spec;
  out.class_names = data.class_names;
  return out;
}

std::pair<std::vector<Index>, std::vector<Index>> holdout_indices(Index n, double fraction,
                                                                  std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InputError("holdout fraction must lie strictly between 0 and 1");
  }
  const auto test_size = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
  if (test_size <= 0 || test_size >= n) {
    throw InputError("holdout fraction " + format_number(fraction) + " on " +
                     std::to_string(n) + " rows leaves an empty part");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(derive_seed(seed, 0x5eed));
  rng.shuffle(std::span<Index>(order));

  std::vector<Index> test(order.begin(), order.begin() + test_size);
  std::vector<Index> train(order.begin() + test_size, order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(test)};
}

HoldoutSplit split_holdout(const BinaryDataset& data, double fraction,
                           std::uint64_t seed) {
  HoldoutSplit split;
  std::tie(split.train_indices, split.test_indices) =
      holdout_indices(data.size(), fraction, seed);
  split.train = data.subset(split.train_indices);
  split.test = data.subset(split.test_indices);
  return split;
}

RawDataset subset_rows(const RawDataset& data, const std::vector<Index>& indices) {
  RawDataset out;
  out.rows.resize(static_cast<Index>(indices.size()), data.feature_count());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.rows.row(static_cast<Index>(r)) = data.rows.row(indices[r]);
    out.labels.push_back(data.labels[static_cast<std::size_t>(indices[r])]);
  }
  out.feature_names = data.feature_names;
  out.class_names = data.class_names;
  return out;
}

}  // namespace rfprox
