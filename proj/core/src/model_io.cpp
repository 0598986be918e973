#include "slicever/model_io.h"

#include <fstream>
#include <sstream>

namespace slicever::model_io {

namespace {

template <class T, std::size_t N>
std::array<T, N> array_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != N) throw ValidationError(std::string("model: bad array for ") + what);
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<T>();
  return out;
}

Json tree_params_json(const tree::TreeParams& p) {
  return Json{{"max_depth", p.max_depth}, {"min_samples_split", p.min_samples_split}, {"min_gain", p.min_gain}};
}

tree::TreeParams tree_params_from(const Json& j) {
  return {j.at("max_depth").get<std::int32_t>(), j.at("min_samples_split").get<std::int32_t>(),
          j.at("min_gain").get<double>()};
}

}  // namespace

Json to_json(const tree::Tree& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes) {
    Json node;
    node["feature"] = n.feature;
    node["threshold"] = n.threshold;
    node["left"] = n.left;
    node["right"] = n.right;
    node["counts"] = n.counts;
    node["probs"] = n.probs;
    node["value"] = n.value;
    nodes.push_back(std::move(node));
  }
  return Json{{"nodes", std::move(nodes)}};
}

tree::Tree tree_from_json(const Json& j) {
  tree::Tree t;
  const auto& nodes = j.at("nodes");
  for (const auto& n : nodes) {
    tree::TreeNode node;
    node.feature = n.at("feature").get<std::int32_t>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<std::int32_t>();
    node.right = n.at("right").get<std::int32_t>();
    node.counts = array_from<std::int64_t, tree::kNumClasses>(n.at("counts"), "counts");
    node.probs = array_from<double, tree::kNumClasses>(n.at("probs"), "probs");
    node.value = n.at("value").get<double>();
    t.nodes.push_back(node);
  }
  const auto size = static_cast<std::int32_t>(t.nodes.size());
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    if (n.is_leaf()) continue;
    const auto self = static_cast<std::int32_t>(i);
    if (n.left <= self || n.right <= self || n.left >= size || n.right >= size) {
      throw ValidationError("model: corrupt tree node links");
    }
  }
  return t;
}

Json to_json(const tree::Ensemble& e) {
  Json trees = Json::array();
  for (const auto& per_class : e.trees) {
    Json list = Json::array();
    for (const auto& t : per_class) list.push_back(to_json(t));
    trees.push_back(std::move(list));
  }
  Json j;
  j["rounds"] = e.params.rounds;
  j["learning_rate"] = e.params.learning_rate;
  j["tree_params"] = tree_params_json(e.tree_params);
  j["base_score"] = e.base_score;
  j["trees"] = std::move(trees);
  return j;
}

tree::Ensemble ensemble_from_json(const Json& j) {
  tree::Ensemble e;
  e.params.rounds = j.at("rounds").get<std::int32_t>();
  e.params.learning_rate = j.at("learning_rate").get<double>();
  e.tree_params = tree_params_from(j.at("tree_params"));
  e.base_score = array_from<double, tree::kNumClasses>(j.at("base_score"), "base_score");
  const auto& trees = j.at("trees");
  if (!trees.is_array() || trees.size() != tree::kNumClasses) throw ValidationError("model: bad trees array");
  for (std::size_t c = 0; c < tree::kNumClasses; ++c) {
    for (const auto& t : trees[c]) e.trees[c].push_back(tree_from_json(t));
    if (static_cast<std::int32_t>(e.trees[c].size()) != e.params.rounds) {
      throw ValidationError("model: tree count does not match rounds");
    }
  }
  return e;
}

Json to_json(const FeatureStats& s) {
  Json j;
  j["count"] = s.count;
  j["mean"] = s.mean;
  j["stddev"] = s.stddev;
  j["edges"] = s.edges;
  j["bin_props"] = s.bin_props;
  return j;
}

FeatureStats feature_stats_from_json(const Json& j) {
  FeatureStats s;
  s.count = j.at("count").get<std::size_t>();
  s.mean = array_from<double, kNumFeatures>(j.at("mean"), "mean");
  s.stddev = array_from<double, kNumFeatures>(j.at("stddev"), "stddev");
  const auto& edges = j.at("edges");
  const auto& props = j.at("bin_props");
  if (!edges.is_array() || edges.size() != kNumFeatures || !props.is_array() || props.size() != kNumFeatures) {
    throw ValidationError("model: bad feature stats");
  }
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    s.edges[f] = array_from<double, kHistogramBins + 1>(edges[f], "edges");
    s.bin_props[f] = array_from<double, kHistogramBins>(props[f], "bin_props");
  }
  return s;
}

Json to_json(const verify::VerifierModel& m) {
  Json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  Json refs = Json::object();
  for (SliceId s : kAllSlices) refs[std::string(slice_name(s))] = to_json(m.slice_reference[index_of(s)]);
  std::visit(
      [&](const auto& clf) {
        using T = std::decay_t<decltype(clf)>;
        if constexpr (std::is_same_v<T, tree::Tree>) {
          j["kind"] = "tree";
          j["classifier"] = to_json(clf);
        } else {
          j["kind"] = "gbdt";
          j["classifier"] = to_json(clf);
        }
      },
      m.classifier);
  j["train_fraction"] = m.train_fraction;
  j["train_size"] = m.train_size;
  j["normalization"] = to_json(m.normalization);
  j["slice_reference"] = std::move(refs);
  return j;
}

verify::VerifierModel model_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw ValidationError("model: unknown format");
    if (j.at("version").get<int>() != kModelVersion) throw ValidationError("model: unsupported version");
    verify::VerifierModel m;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "tree") {
      m.classifier = tree_from_json(j.at("classifier"));
    } else if (kind == "gbdt") {
      m.classifier = ensemble_from_json(j.at("classifier"));
    } else {
      throw ValidationError("model: unknown classifier kind '" + kind + "'");
    }
    m.train_fraction = j.at("train_fraction").get<double>();
    m.train_size = j.at("train_size").get<std::size_t>();
    m.normalization = feature_stats_from_json(j.at("normalization"));
    const auto& refs = j.at("slice_reference");
    for (SliceId s : kAllSlices) {
      m.slice_reference[index_of(s)] = feature_stats_from_json(refs.at(std::string(slice_name(s))));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
}

std::string serialize_model(const verify::VerifierModel& m) { return to_json(m).dump(1) + "\n"; }

verify::VerifierModel parse_model(const std::string& text) {
  const Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ValidationError("model: parse error");
  return model_from_json(j);
}

void save_model(const verify::VerifierModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("model: cannot write " + path.string());
  out << serialize_model(m);
}

verify::VerifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("model: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace slicever::model_io
