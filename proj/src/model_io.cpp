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

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rfprox/forest.hpp"

namespace rfprox {
namespace {

using Json = nlohmann::ordered_json;

const char* kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kPassthrough:
      return "passthrough";
    case FeatureKind::kOneHot:
      return "one_hot";
    case FeatureKind::kThresholds:
      return "thresholds";
  }
  return "?";
}

FeatureKind kind_from(const std::string& name) {
  if (name == "passthrough") return FeatureKind::kPassthrough;
  if (name == "one_hot") return FeatureKind::kOneHot;
  if (name == "thresholds") return FeatureKind::kThresholds;
  throw InputError("corrupt model file: unknown feature kind '" + name + "'");
}

Json spec_to_json(const BinarizationSpec& spec) {
  Json features = Json::array();
  for (const auto& f : spec.features) {
    Json jf;
    jf["name"] = f.name;
    jf["kind"] = kind_name(f.kind);
    Json thresholds = Json::array();
    for (const auto& t : f.thresholds) {
      thresholds.push_back(
          {{"value", t.value},
           {"direction", t.direction == Direction::kLessThan ? "lt" : "gt"}});
    }
    jf["thresholds"] = std::move(thresholds);
    jf["categories"] = f.categories;
    features.push_back(std::move(jf));
  }
  Json j;
  j["features"] = std::move(features);
  j["derived_feature_names"] = spec.derived_feature_names;
  return j;
}

BinarizationSpec spec_from_json(const Json& j) {
  BinarizationSpec spec;
  for (const auto& jf : j.at("features")) {
    SourceFeature f;
    f.name = jf.at("name").get<std::string>();
    f.kind = kind_from(jf.at("kind").get<std::string>());
    for (const auto& jt : jf.at("thresholds")) {
      const auto dir = jt.at("direction").get<std::string>();
      if (dir != "lt" && dir != "gt") {
        throw InputError("corrupt model file: bad threshold direction '" + dir + "'");
      }
      f.thresholds.push_back({jt.at("value").get<double>(),
                              dir == "lt" ? Direction::kLessThan : Direction::kGreaterThan});
    }
    f.categories = jf.at("categories").get<std::vector<double>>();
    spec.features.push_back(std::move(f));
  }
  spec.derived_feature_names =
      j.at("derived_feature_names").get<std::vector<std::string>>();
  Index derived = 0;
  for (const auto& f : spec.features) derived += f.derived_count();
  if (derived != spec.derived_count()) {
    throw InputError("corrupt model file: binarization spec derives " +
                     std::to_string(derived) + " features but names " +
                     std::to_string(spec.derived_count()));
  }
  return spec;
}

Json tree_to_json(const DecisionTree& tree) {
  Json nodes = Json::array();
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"leaf_id", n.leaf_id},
                       {"class_counts", n.class_counts},
                       {"majority_class", n.majority_class}});
    } else {
      nodes.push_back({{"feature", n.feature}, {"left", n.left}, {"right", n.right}});
    }
  }
  return Json{{"nodes", std::move(nodes)}};
}

DecisionTree tree_from_json(const Json& j, const Forest& forest) {
  DecisionTree tree;
  const auto& jnodes = j.at("nodes");
  const auto count = static_cast<std::int32_t>(jnodes.size());
  if (count == 0) throw InputError("corrupt model file: tree without nodes");
  std::set<LeafId> leaf_ids;
  for (const auto& jn : jnodes) {
    TreeNode n;
    if (jn.contains("leaf_id")) {
      n.leaf_id = jn.at("leaf_id").get<LeafId>();
      n.class_counts = jn.at("class_counts").get<std::vector<std::int32_t>>();
      n.majority_class = jn.at("majority_class").get<ClassId>();
      std::int64_t total = 0;
      for (auto c : n.class_counts) {
        if (c < 0) throw InputError("corrupt model file: negative class count");
        total += c;
      }
      if (total < 1 || static_cast<int>(n.class_counts.size()) != forest.class_count ||
          n.majority_class < 0 || n.majority_class >= forest.class_count ||
          !leaf_ids.insert(n.leaf_id).second) {
        throw InputError("corrupt model file: invalid leaf node");
      }
      ++tree.leaf_count;
    } else {
      n.feature = jn.at("feature").get<std::int32_t>();
      n.left = jn.at("left").get<std::int32_t>();
      n.right = jn.at("right").get<std::int32_t>();
      if (n.feature < 0 || n.feature >= forest.feature_count || n.left <= 0 ||
          n.right <= 0 || n.left >= count || n.right >= count) {
        throw InputError("corrupt model file: invalid internal node");
      }
    }
    tree.nodes.push_back(std::move(n));
  }
  if (leaf_ids.empty() || *leaf_ids.begin() != 0 ||
      *leaf_ids.rbegin() != tree.leaf_count - 1) {
    throw InputError("corrupt model file: leaf ids must be 0..leaf_count-1");
  }
  return tree;
}

}  // namespace

std::string model_to_json(const Forest& forest) {
  Json config;
  config["tree_count"] = forest.config.tree_count;
  if (forest.config.feature_subset_size) {
    config["feature_subset_size"] = *forest.config.feature_subset_size;
  } else {
    config["feature_subset_size"] = "sqrt";
  }
  if (forest.config.max_depth) {
    config["max_depth"] = *forest.config.max_depth;
  } else {
    config["max_depth"] = "unlimited";
  }
  config["min_leaf_size"] = forest.config.min_leaf_size;
  config["seed"] = forest.config.seed;

  Json j;
  j["format_version"] = kModelFormatVersion;
  j["class_count"] = forest.class_count;
  j["class_names"] = forest.class_names;
  j["feature_count"] = forest.feature_count;
  j["train_size"] = forest.train_size;
  j["config"] = std::move(config);
  if (forest.holdout) {
    j["holdout"] = {{"fraction", forest.holdout->fraction},
                    {"seed", forest.holdout->seed}};
  } else {
    j["holdout"] = nullptr;
  }
  j["binarization_spec"] = spec_to_json(forest.spec);
  Json trees = Json::array();
  for (const auto& t : forest.trees) trees.push_back(tree_to_json(t));
  j["trees"] = std::move(trees);
  return j.dump() + "\n";
}

Forest model_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(std::string("corrupt model file: ") + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw InputError("unsupported model format version " + std::to_string(version) +
                       " (expected " + std::to_string(kModelFormatVersion) + ")");
    }
    Forest forest;
    forest.class_count = j.at("class_count").get<int>();
    forest.class_names = j.at("class_names").get<std::vector<std::string>>();
    forest.feature_count = j.at("feature_count").get<Index>();
    forest.train_size = j.at("train_size").get<Index>();
    const auto& jc = j.at("config");
    forest.config.tree_count = jc.at("tree_count").get<int>();
    if (jc.at("feature_subset_size").is_number()) {
      forest.config.feature_subset_size = jc.at("feature_subset_size").get<int>();
    }
    if (jc.at("max_depth").is_number()) {
      forest.config.max_depth = jc.at("max_depth").get<int>();
    }
    forest.config.min_leaf_size = jc.at("min_leaf_size").get<int>();
    forest.config.seed = jc.at("seed").get<std::uint64_t>();
    if (const auto& jh = j.at("holdout"); !jh.is_null()) {
      forest.holdout = HoldoutRecord{jh.at("fraction").get<double>(),
                                     jh.at("seed").get<std::uint64_t>()};
    }
    forest.spec = spec_from_json(j.at("binarization_spec"));
    if (forest.class_count < 2 || forest.feature_count < 0 ||
        (forest.spec.derived_count() != 0 &&
         forest.spec.derived_count() != forest.feature_count)) {
      throw InputError("corrupt model file: inconsistent header");
    }
    for (const auto& jt : j.at("trees")) forest.trees.push_back(tree_from_json(jt, forest));
    if (forest.trees.empty()) throw InputError("corrupt model file: no trees");
    return forest;
  } catch (const Json::exception& e) {
    throw InputError(std::string("corrupt model file: ") + e.what());
  }
}

void save_model(const Forest& forest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model file " + path.string());
  out << model_to_json(forest);
  if (!out) throw InputError("failed writing model file " + path.string());
}

Forest load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace rfprox
