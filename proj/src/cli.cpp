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

#include "rfprox/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rfprox/audit.hpp"
#include "rfprox/contribution.hpp"
#include "rfprox/dataset.hpp"
#include "rfprox/forest.hpp"
#include "rfprox/proximity.hpp"
#include "rfprox/report.hpp"

namespace rfprox::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string to_hex(const unsigned char* bytes, unsigned length) {
  std::ostringstream os;
  for (unsigned i = 0; i < length; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(bytes[i]);
  }
  return os.str();
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned length = 0;
  if (EVP_Digest(data.data(), data.size(), md, &length, EVP_sha256(), nullptr) != 1) {
    throw InvariantError("SHA-256 digest failed");
  }
  return to_hex(md, length);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// ---------------------------------------------------------------------------
// Shared option groups.

struct DataArgs {
  std::string data;
  std::string labels;
  std::string format = "csv";
  std::string label_col = "last";
  bool no_header = false;

  void add_to(CLI::App& app) {
    app.add_option("--data", data, "CSV file, or IDX image file with --format idx")
        ->required();
    app.add_option("--labels", labels, "IDX label file (--format idx)");
    app.add_option("--format", format, "Input format")
        ->check(CLI::IsMember({"csv", "idx"}))
        ->capture_default_str();
    app.add_option("--label-col", label_col,
                   "CSV label column: 'last', a 0-based index, or a header name")
        ->capture_default_str();
    app.add_flag("--no-header", no_header, "CSV file has no header row");
  }

  RawDataset load() const {
    if (format == "idx") {
      if (labels.empty()) throw InputError("--format idx requires --labels");
      return load_idx_raw(data, labels);
    }
    LabelColumn column = Index{-1};
    if (label_col != "last") {
      Index parsed = 0;
      const auto [ptr, ec] =
          std::from_chars(label_col.data(), label_col.data() + label_col.size(), parsed);
      if (ec == std::errc() && ptr == label_col.data() + label_col.size()) {
        column = parsed;
      } else {
        column = label_col;
      }
    }
    return load_csv(data, column, !no_header);
  }
};

struct InstanceArgs {
  std::optional<Index> index;
  std::string vector_file;
  std::string subset;

  void add_to(CLI::App& app) {
    auto* idx = app.add_option("--index", index, "Row index within --subset");
    auto* vec = app.add_option("--vector-file", vector_file,
                               "File with one line of space-separated 0/1 values");
    idx->excludes(vec);
    app.add_option("--subset", subset,
                   "Rows addressed by --index: train, test or all (default: test "
                   "when the model was trained with a holdout, else train)")
        ->check(CLI::IsMember({"train", "test", "all"}));
  }
};

// ---------------------------------------------------------------------------
// Run manifest.

class Manifest {
 public:
  Manifest(std::string command, const CLI::App& sub)
      : command_(std::move(command)), start_(Clock::now()), wall_start_(std::time(nullptr)) {
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_name(false, true);
      if (name.empty() || name == "--help" || name == "-h,--help") continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
      } else {
        value = opt->get_default_str();
      }
      options_[opt->get_name()] = value;
    }
  }

  void add_input(const std::string& role, const fs::path& path) {
    inputs_.push_back({{"role", role},
                       {"path", path.string()},
                       {"sha256", sha256_hex(read_file(path))}});
  }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_output(const std::string& name) { outputs_.push_back(name); }
  Json& results() { return results_; }

  void write(const fs::path& dir) const {
    char started[32];
    std::strftime(started, sizeof started, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&wall_start_));
    Json j;
    j["command"] = command_;
    j["tool_version"] = kToolVersion;
    j["options"] = options_;
    j["seed"] = seed_ ? Json(*seed_) : Json(nullptr);
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["results"] = results_.is_null() ? Json::object() : results_;
    j["started_at"] = started;
    j["duration_seconds"] =
        std::chrono::duration<double>(Clock::now() - start_).count();
    write_text_file(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  Clock::time_point start_;
  std::time_t wall_start_;
  Json options_ = Json::object();
  Json inputs_ = Json::array();
  Json outputs_ = Json::array();
  Json results_;
  std::optional<std::uint64_t> seed_;
};

void add_data_inputs(Manifest& manifest, const DataArgs& data) {
  manifest.add_input("data", data.data);
  if (!data.labels.empty()) manifest.add_input("labels", data.labels);
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Model + data reconstruction.

struct ModelData {
  Forest forest;
  std::string model_id;
  BinaryDataset all;
  std::vector<Index> train_indices;
  std::vector<Index> test_indices;
  BinaryDataset train;
  BinaryDataset test;
};

BinarizationSpec idx_spec_for(const RawDataset& raw, int pixel_threshold) {
  const auto side = static_cast<Index>(std::lround(std::sqrt(raw.feature_count())));
  if (side * side == raw.feature_count()) {
    return idx_binarization(side, side, pixel_threshold);
  }
  return idx_binarization(1, raw.feature_count(), pixel_threshold);
}

double accuracy(const Forest& forest, const BinaryDataset& data) {
  if (data.size() == 0) return 0.0;
  Index correct = 0;
  for (Index i = 0; i < data.size(); ++i) {
    if (predict(forest, data.vectors.row(i)).label == data.labels[static_cast<std::size_t>(i)]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ModelData load_model_data(const std::string& model_path, const DataArgs& data_args) {
  ModelData md;
  const std::string bytes = read_file(model_path);
  md.forest = model_from_json(bytes);
  md.model_id = sha256_hex(bytes).substr(0, 16);

  const RawDataset raw = data_args.load();
  if (md.forest.spec.source_count() != raw.feature_count()) {
    throw InputError("data has " + std::to_string(raw.feature_count()) +
                     " columns, model was trained on " +
                     std::to_string(md.forest.spec.source_count()));
  }
  md.all = binarize(md.forest.spec, raw);
  if (md.all.feature_count() != md.forest.feature_count) {
    throw InputError("binarized data does not match the model's feature count");
  }
  if (md.forest.holdout) {
    std::tie(md.train_indices, md.test_indices) =
        holdout_indices(md.all.size(), md.forest.holdout->fraction, md.forest.holdout->seed);
  } else {
    md.train_indices.resize(static_cast<std::size_t>(md.all.size()));
    std::iota(md.train_indices.begin(), md.train_indices.end(), Index{0});
  }
  if (static_cast<Index>(md.train_indices.size()) != md.forest.train_size) {
    throw InputError("data does not reproduce the model's training set (" +
                     std::to_string(md.train_indices.size()) + " rows vs " +
                     std::to_string(md.forest.train_size) + ")");
  }
  md.train = md.all.subset(md.train_indices);
  md.test = md.all.subset(md.test_indices);
  return md;
}

struct Instance {
  BinaryVector v;
  std::string id;
  std::optional<ClassId> true_label;
  std::optional<Index> train_position;
};

BinaryVector read_vector_file(const fs::path& path, Index feature_count) {
  std::istringstream line(read_file(path));
  BinaryVector v(feature_count);
  Index k = 0;
  std::string token;
  while (line >> token) {
    if (token != "0" && token != "1") {
      throw InputError(path.string() + ": vector values must be 0 or 1, got '" + token + "'");
    }
    if (k >= feature_count) break;
    v(k++) = token == "1" ? 1 : 0;
  }
  if (k != feature_count || (line >> token)) {
    throw InputError(path.string() + ": vector length does not match the model's " +
                     std::to_string(feature_count) + " features");
  }
  return v;
}

Instance select_instance(const ModelData& md, const InstanceArgs& args) {
  Instance inst;
  if (!args.vector_file.empty()) {
    inst.v = read_vector_file(args.vector_file, md.forest.feature_count);
    inst.id = "vector:" + fs::path(args.vector_file).filename().string();
    return inst;
  }
  if (!args.index) throw InputError("one of --index or --vector-file is required");
  std::string subset = args.subset;
  if (subset.empty()) subset = md.forest.holdout ? "test" : "train";
  const std::vector<Index>* rows = nullptr;
  std::vector<Index> all_rows;
  if (subset == "train") {
    rows = &md.train_indices;
  } else if (subset == "test") {
    rows = &md.test_indices;
  } else {
    all_rows.resize(static_cast<std::size_t>(md.all.size()));
    std::iota(all_rows.begin(), all_rows.end(), Index{0});
    rows = &all_rows;
  }
  const Index i = *args.index;
  if (i < 0 || i >= static_cast<Index>(rows->size())) {
    throw InputError("--index " + std::to_string(i) + " out of range for the " + subset +
                     " subset of " + std::to_string(rows->size()) + " rows");
  }
  const Index row = (*rows)[static_cast<std::size_t>(i)];
  inst.v = md.all.vectors.row(row);
  inst.true_label = md.all.labels[static_cast<std::size_t>(row)];
  inst.id = subset + ":" + std::to_string(i);
  const auto it = std::lower_bound(md.train_indices.begin(), md.train_indices.end(), row);
  if (it != md.train_indices.end() && *it == row) {
    inst.train_position = static_cast<Index>(it - md.train_indices.begin());
  }
  return inst;
}

std::string diff_csv(const ContributionReport& report, const Eigen::VectorXd& diff) {
  std::ostringstream os;
  os << "feature_index,name,diff\n";
  for (Index k = 0; k < diff.size(); ++k) {
    os << k << ',' << report.feature_names[static_cast<std::size_t>(k)] << ','
       << fixed6(diff(k)) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Commands.

struct TrainArgs {
  DataArgs data;
  int trees = 100;
  std::uint64_t seed = 0;
  std::optional<int> max_depth;
  int min_leaf = 1;
  std::optional<int> mtry;
  int max_splits = 4;
  int onehot_max = 16;
  int pixel_threshold = 128;
  std::optional<double> holdout;
  int repeat = 1;
  unsigned threads = 0;
  std::string out;
};

void cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest("train", sub);
  manifest.set_seed(a.seed);
  add_data_inputs(manifest, a.data);
  if (a.repeat < 1) throw InputError("--repeat must be positive");
  if (a.repeat > 1 && !a.holdout) throw InputError("--repeat requires --holdout");

  const RawDataset raw = a.data.load();
  TrainConfig config;
  config.tree_count = a.trees;
  config.feature_subset_size = a.mtry;
  config.max_depth = a.max_depth;
  config.min_leaf_size = a.min_leaf;
  config.seed = a.seed;
  config.threads = a.threads;

  std::optional<Forest> saved;
  double saved_train_accuracy = 0.0;
  std::vector<double> holdout_accuracies;
  for (int r = 0; r < a.repeat; ++r) {
    std::vector<Index> train_rows(static_cast<std::size_t>(raw.size()));
    std::iota(train_rows.begin(), train_rows.end(), Index{0});
    std::vector<Index> test_rows;
    std::optional<HoldoutRecord> record;
    if (a.holdout) {
      record = HoldoutRecord{*a.holdout, a.seed + static_cast<std::uint64_t>(r)};
      std::tie(train_rows, test_rows) = holdout_indices(raw.size(), record->fraction, record->seed);
    }
    const RawDataset raw_train = subset_rows(raw, train_rows);
    const BinarizationSpec spec =
        a.data.format == "idx"
            ? idx_spec_for(raw, a.pixel_threshold)
            : fit_binarizer(raw_train, BinarizerOptions{a.max_splits, a.onehot_max});
    const BinaryDataset train_set = binarize(spec, raw_train);
    Forest forest = train(train_set, config);
    forest.holdout = record;
    if (record) {
      holdout_accuracies.push_back(accuracy(forest, binarize(spec, subset_rows(raw, test_rows))));
    }
    if (r == 0) {
      saved_train_accuracy = accuracy(forest, train_set);
      saved = std::move(forest);
    }
  }

  const fs::path dir = prepare_out_dir(a.out);
  save_model(*saved, dir / "model.json");
  manifest.add_output("model.json");

  out << "trees: " << saved->tree_count() << "\n"
      << "features: " << saved->feature_count << "\n"
      << "train_size: " << saved->train_size << "\n"
      << "train_accuracy: " << fixed6(saved_train_accuracy) << "\n";
  auto& results = manifest.results();
  results["feature_count"] = saved->feature_count;
  results["train_size"] = saved->train_size;
  results["train_accuracy"] = saved_train_accuracy;
  if (!holdout_accuracies.empty()) {
    double mean = 0.0;
    for (double acc : holdout_accuracies) mean += acc;
    mean /= static_cast<double>(holdout_accuracies.size());
    out << "holdout_accuracy: " << fixed6(mean);
    if (holdout_accuracies.size() > 1) out << " (mean of " << holdout_accuracies.size() << ")";
    out << "\n";
    results["holdout_accuracy"] = mean;
    results["holdout_accuracies"] = holdout_accuracies;
  }
  manifest.write(dir);
}

struct ExplainArgs {
  std::string model;
  DataArgs data;
  InstanceArgs instance;
  std::optional<ClassId> target_class;
  bool normalize = false;
  std::string grid;
  unsigned threads = 0;
  std::string out;
};

ExplainOptions explain_options(const ModelData& md, const Instance& inst, bool normalize,
                               unsigned threads) {
  ExplainOptions opts;
  opts.model_id = md.model_id;
  opts.instance_id = inst.id;
  opts.contribution.normalize = normalize;
  opts.contribution.exclude_index = inst.train_position;
  opts.threads = threads;
  return opts;
}

void write_report(const ContributionReport& report, const fs::path& dir,
                  const std::string& grid, Manifest& manifest, const std::string& prefix) {
  fs::create_directories(dir);
  export_report_json(report, dir / "report.json");
  export_report_csv(report, dir / "report.csv");
  manifest.add_output(prefix + "report.json");
  manifest.add_output(prefix + "report.csv");
  if (!grid.empty()) {
    export_heatmap_pgm(report.contributions(), parse_grid(grid), HeatmapScale::kSymmetric,
                       dir / "heatmap.pgm");
    manifest.add_output(prefix + "heatmap.pgm");
  }
}

void cmd_explain(const ExplainArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest("explain", sub);
  manifest.add_input("model", a.model);
  add_data_inputs(manifest, a.data);
  if (!a.grid.empty()) parse_grid(a.grid);

  const ModelData md = load_model_data(a.model, a.data);
  manifest.set_seed(md.forest.config.seed);
  const Instance inst = select_instance(md, a.instance);
  const ProximityStore store = build_store(md.forest, md.train, a.threads);
  ExplainOptions opts = explain_options(md, inst, a.normalize, a.threads);
  opts.target_class = a.target_class;
  const ContributionReport report = explain(md.forest, store, inst.v, opts);

  const fs::path dir = prepare_out_dir(a.out);
  write_report(report, dir, a.grid, manifest, "");
  manifest.results()["predicted_class"] = report.predicted_class;
  manifest.results()["target_class"] = report.target_class;
  manifest.write(dir);
  out << "instance: " << report.instance_id << "\n"
      << "predicted_class: " << report.predicted_class << "\n"
      << "target_class: " << report.target_class << "\n";
}

struct DiffArgs {
  std::string model;
  DataArgs data;
  InstanceArgs instance;
  std::optional<ClassId> wrong_class;
  std::optional<ClassId> right_class;
  bool normalize = false;
  std::string grid;
  unsigned threads = 0;
  std::string out;
};

void cmd_diff(const DiffArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest("diff", sub);
  manifest.add_input("model", a.model);
  add_data_inputs(manifest, a.data);
  if (!a.grid.empty()) parse_grid(a.grid);

  const ModelData md = load_model_data(a.model, a.data);
  manifest.set_seed(md.forest.config.seed);
  const Instance inst = select_instance(md, a.instance);
  const ProximityStore store = build_store(md.forest, md.train, a.threads);

  const ClassId predicted = predict(md.forest, inst.v).label;
  const ClassId wrong = a.wrong_class.value_or(predicted);
  if (!a.right_class && !inst.true_label) {
    throw InputError("--right-class is required when the true label is unknown");
  }
  const ClassId right = a.right_class ? *a.right_class : *inst.true_label;
  if (!a.wrong_class && !a.right_class && wrong == right) {
    throw InputError("instance " + inst.id +
                     " is classified correctly; pass --wrong-class/--right-class");
  }

  ExplainOptions opts = explain_options(md, inst, a.normalize, a.threads);
  opts.target_class = wrong;
  const ContributionReport report_wrong = explain(md.forest, store, inst.v, opts);
  opts.target_class = right;
  const ContributionReport report_right = explain(md.forest, store, inst.v, opts);
  const Eigen::VectorXd diff = misclassification_diff(report_wrong, report_right);

  const fs::path dir = prepare_out_dir(a.out);
  write_report(report_wrong, dir / "wrong", a.grid, manifest, "wrong/");
  write_report(report_right, dir / "right", a.grid, manifest, "right/");
  write_text_file(dir / "diff.csv", diff_csv(report_wrong, diff));
  manifest.add_output("diff.csv");
  if (!a.grid.empty()) {
    export_heatmap_pgm(diff, parse_grid(a.grid), HeatmapScale::kMinMax, dir / "diff.pgm");
    manifest.add_output("diff.pgm");
  }
  Index top = 0;
  if (diff.size() > 0) diff.maxCoeff(&top);
  manifest.results()["predicted_class"] = predicted;
  manifest.results()["wrong_class"] = wrong;
  manifest.results()["right_class"] = right;
  manifest.results()["diff_argmax_feature"] = top;
  manifest.write(dir);
  out << "instance: " << inst.id << "\n"
      << "predicted_class: " << predicted << "\n"
      << "wrong_class: " << wrong << "\n"
      << "right_class: " << right << "\n";
}

struct AuditArgs {
  std::string model_a;
  std::string model_b;
  DataArgs data;
  ClassId high_a = 1;
  ClassId high_b = 1;
  double threshold = kDefaultAuditThreshold;
  std::string filter_mode = "both";
  std::string subset = "all";
  unsigned threads = 0;
  std::string out;
};

void cmd_audit(const AuditArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest("audit", sub);
  manifest.add_input("model_a", a.model_a);
  manifest.add_input("model_b", a.model_b);
  add_data_inputs(manifest, a.data);

  const ModelData ma = load_model_data(a.model_a, a.data);
  const ModelData mb = load_model_data(a.model_b, a.data);
  if (ma.forest.feature_count != mb.forest.feature_count || ma.forest.spec != mb.forest.spec) {
    throw InputError("models do not share a feature space");
  }
  manifest.set_seed(ma.forest.config.seed);
  const ProximityStore store_a = build_store(ma.forest, ma.train, a.threads);
  const ProximityStore store_b = build_store(mb.forest, mb.train, a.threads);

  std::vector<Index> rows;
  if (a.subset == "train" || a.subset == "test") {
    if (ma.train_indices != mb.train_indices) {
      throw InputError("--subset " + a.subset + " needs both models to share a holdout split");
    }
    rows = a.subset == "train" ? ma.train_indices : ma.test_indices;
  } else {
    rows.resize(static_cast<std::size_t>(ma.all.size()));
    std::iota(rows.begin(), rows.end(), Index{0});
  }

  std::vector<ContributionReport> reports_a;
  std::vector<ContributionReport> reports_b;
  for (const Index row : rows) {
    const auto v = ma.all.vectors.row(row);
    const std::string id = "all:" + std::to_string(row);
    auto position = [row](const ModelData& md) -> std::optional<Index> {
      const auto it = std::lower_bound(md.train_indices.begin(), md.train_indices.end(), row);
      if (it != md.train_indices.end() && *it == row) return it - md.train_indices.begin();
      return std::nullopt;
    };
    ExplainOptions oa;
    oa.target_class = a.high_a;
    oa.model_id = ma.model_id;
    oa.instance_id = id;
    oa.contribution.exclude_index = position(ma);
    oa.threads = a.threads;
    ExplainOptions ob = oa;
    ob.target_class = a.high_b;
    ob.model_id = mb.model_id;
    ob.contribution.exclude_index = position(mb);
    reports_a.push_back(explain(ma.forest, store_a, v, oa));
    reports_b.push_back(explain(mb.forest, store_b, v, ob));
  }

  const PairFilter filter = a.filter_mode == "either" ? PairFilter::kEither : PairFilter::kBoth;
  const PairedSample sample =
      collect_pairs(reports_a, reports_b, a.high_a, a.high_b, a.threshold, filter);
  const AuditSummary summary = summarize_audit(sample, a.threshold, filter);

  const fs::path dir = prepare_out_dir(a.out);
  write_text_file(dir / "audit.json", audit_to_json(summary));
  manifest.add_output("audit.json");
  manifest.results()["instances"] = rows.size();
  manifest.results()["pair_count"] = summary.pair_count;
  manifest.write(dir);

  auto show = [](const std::optional<double>& v) { return v ? fixed6(*v) : "undefined"; };
  out << "instances: " << rows.size() << "\n"
      << "pairs: " << summary.pair_count << "\n"
      << "pearson_r: " << show(summary.pearson) << "\n"
      << "spearman_rho: " << show(summary.spearman) << "\n"
      << "kendall_tau_b: " << show(summary.kendall) << "\n";
  if (summary.chi_square) out << "chi_square: " << fixed6(summary.chi_square->statistic) << "\n";
}

struct StoreArgs {
  std::string model;
  DataArgs data;
  std::string basis = "predicted";
  double sd_multiplier = 2.0;
  unsigned threads = 0;
  std::string out;
};

void cmd_outliers(const StoreArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest("outliers", sub);
  manifest.add_input("model", a.model);
  add_data_inputs(manifest, a.data);
  const ModelData md = load_model_data(a.model, a.data);
  manifest.set_seed(md.forest.config.seed);
  const ProximityStore store = build_store(md.forest, md.train, a.threads);
  OutlierOptions opts;
  opts.sd_multiplier = a.sd_multiplier;
  opts.basis = a.basis == "true" ? GroupBasis::kTrue : GroupBasis::kPredicted;
  opts.threads = a.threads;
  const OutlierScores scores = outlier_scores(store, opts);

  const fs::path dir = prepare_out_dir(a.out);
  write_text_file(dir / "outliers.csv", outliers_csv(scores, store));
  manifest.add_output("outliers.csv");
  const auto flagged = std::count(scores.flags.begin(), scores.flags.end(), true);
  manifest.results()["flagged"] = flagged;
  manifest.write(dir);
  out << "instances: " << store.size() << "\n"
      << "flagged: " << flagged << "\n";
}

void cmd_export_prox(const StoreArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest("export-prox", sub);
  manifest.add_input("model", a.model);
  add_data_inputs(manifest, a.data);
  const ModelData md = load_model_data(a.model, a.data);
  manifest.set_seed(md.forest.config.seed);
  const ProximityStore store = build_store(md.forest, md.train, a.threads);
  const fs::path dir = prepare_out_dir(a.out);
  export_distance_matrix_csv(distance_matrix(store, a.threads), dir / "proximity.csv");
  manifest.add_output("proximity.csv");
  manifest.write(dir);
  out << "instances: " << store.size() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random forest proximity-space explanations for binary feature vectors",
               "rfprox"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a forest and write model.json");
  train_args.data.add_to(*train_cmd);
  train_cmd->add_option("--trees", train_args.trees, "Number of trees")->capture_default_str();
  train_cmd->add_option("--seed", train_args.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--max-depth", train_args.max_depth, "Maximum tree depth");
  train_cmd->add_option("--min-leaf", train_args.min_leaf, "Minimum samples per leaf")
      ->capture_default_str();
  train_cmd->add_option("--mtry", train_args.mtry,
                        "Features drawn per node (default floor(sqrt(F)))");
  train_cmd->add_option("--max-splits-per-feature", train_args.max_splits,
                        "Thresholds per continuous CSV column")
      ->capture_default_str();
  train_cmd->add_option("--onehot-max", train_args.onehot_max,
                        "Largest distinct-value count one-hot encoded")
      ->capture_default_str();
  train_cmd->add_option("--pixel-threshold", train_args.pixel_threshold,
                        "IDX pixel binarization threshold")
      ->check(CLI::Range(0, 255))
      ->capture_default_str();
  train_cmd->add_option("--holdout", train_args.holdout, "Test fraction in (0,1)");
  train_cmd->add_option("--repeat", train_args.repeat,
                        "Average holdout accuracy over this many seeded splits")
      ->capture_default_str();
  train_cmd->add_option("--threads", train_args.threads, "Worker threads (0 = all cores)");
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();

  ExplainArgs explain_args;
  auto* explain_cmd = app.add_subcommand("explain", "Per-feature contribution report");
  explain_cmd->add_option("--model", explain_args.model, "model.json")->required();
  explain_args.data.add_to(*explain_cmd);
  explain_args.instance.add_to(*explain_cmd);
  explain_cmd->add_option("--target-class", explain_args.target_class,
                          "Class to explain toward (default: predicted)");
  explain_cmd->add_flag("--normalize", explain_args.normalize,
                        "Divide contributions by the training size");
  explain_cmd->add_option("--grid", explain_args.grid, "Also write heatmap.pgm, e.g. 28x28");
  explain_cmd->add_option("--threads", explain_args.threads, "Worker threads (0 = all cores)");
  explain_cmd->add_option("--out", explain_args.out, "Output directory")->required();

  DiffArgs diff_args;
  auto* diff_cmd =
      app.add_subcommand("diff", "Wrong-class and right-class reports plus their squared diff");
  diff_cmd->add_option("--model", diff_args.model, "model.json")->required();
  diff_args.data.add_to(*diff_cmd);
  diff_args.instance.add_to(*diff_cmd);
  diff_cmd->add_option("--wrong-class", diff_args.wrong_class, "Default: predicted class");
  diff_cmd->add_option("--right-class", diff_args.right_class, "Default: true label");
  diff_cmd->add_flag("--normalize", diff_args.normalize,
                     "Divide contributions by the training size");
  diff_cmd->add_option("--grid", diff_args.grid, "Also write PGM maps, e.g. 28x28");
  diff_cmd->add_option("--threads", diff_args.threads, "Worker threads (0 = all cores)");
  diff_cmd->add_option("--out", diff_args.out, "Output directory")->required();

  AuditArgs audit_args;
  auto* audit_cmd = app.add_subcommand("audit", "Compare contributions of two models");
  audit_cmd->add_option("--model-a", audit_args.model_a, "First model.json")->required();
  audit_cmd->add_option("--model-b", audit_args.model_b, "Second model.json")->required();
  audit_args.data.add_to(*audit_cmd);
  audit_cmd->add_option("--high-class-a", audit_args.high_a, "High class of model A")
      ->capture_default_str();
  audit_cmd->add_option("--high-class-b", audit_args.high_b, "High class of model B")
      ->capture_default_str();
  audit_cmd->add_option("--threshold", audit_args.threshold, "Non-zero threshold")
      ->capture_default_str();
  audit_cmd->add_option("--filter-mode", audit_args.filter_mode, "both or either")
      ->check(CLI::IsMember({"both", "either"}))
      ->capture_default_str();
  audit_cmd->add_option("--subset", audit_args.subset, "Instances to explain")
      ->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  audit_cmd->add_option("--threads", audit_args.threads, "Worker threads (0 = all cores)");
  audit_cmd->add_option("--out", audit_args.out, "Output directory")->required();

  StoreArgs outlier_args;
  auto* outliers_cmd = app.add_subcommand("outliers", "Outlier scores of the training set");
  outliers_cmd->add_option("--model", outlier_args.model, "model.json")->required();
  outlier_args.data.add_to(*outliers_cmd);
  outliers_cmd->add_option("--basis", outlier_args.basis, "Group labels: predicted or true")
      ->check(CLI::IsMember({"predicted", "true"}))
      ->capture_default_str();
  outliers_cmd->add_option("--sd-multiplier", outlier_args.sd_multiplier,
                           "Flag above class mean + this many class sd")
      ->capture_default_str();
  outliers_cmd->add_option("--threads", outlier_args.threads, "Worker threads");
  outliers_cmd->add_option("--out", outlier_args.out, "Output directory")->required();

  StoreArgs prox_args;
  auto* prox_cmd =
      app.add_subcommand("export-prox", "Training proximity-distance matrix as CSV");
  prox_cmd->add_option("--model", prox_args.model, "model.json")->required();
  prox_args.data.add_to(*prox_cmd);
  prox_cmd->add_option("--threads", prox_args.threads, "Worker threads");
  prox_cmd->add_option("--out", prox_args.out, "Output directory")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (train_cmd->parsed()) cmd_train(train_args, *train_cmd, out);
    if (explain_cmd->parsed()) cmd_explain(explain_args, *explain_cmd, out);
    if (diff_cmd->parsed()) cmd_diff(diff_args, *diff_cmd, out);
    if (audit_cmd->parsed()) cmd_audit(audit_args, *audit_cmd, out);
    if (outliers_cmd->parsed()) cmd_outliers(outlier_args, *outliers_cmd, out);
    if (prox_cmd->parsed()) cmd_export_prox(prox_args, *prox_cmd, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::logic_error& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInvariantError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace rfprox::cli
