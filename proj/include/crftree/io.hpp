#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crftree/dtree.hpp"
#include "crftree/graph.hpp"
#include "crftree/potentials.hpp"

namespace crftree {

/// Raised when a file cannot be opened, read or written.
class FileError : public Error {
public:
    using Error::Error;
};

/// Raised when a document does not match its schema. The message names the
/// offending field as a JSON path, e.g. "instances[3].edges[0].p".
class FormatError : public Error {
public:
    using Error::Error;
};

inline constexpr int kFormatVersion = 1;

struct Dataset {
    int num_classes = 0;
    InstanceDims dims;
    std::optional<LossWeights> loss_weights;
    std::vector<Instance> instances;

    bool labeled() const {
        for (const Instance& inst : instances) {
            if (!inst.has_truth()) return false;
        }
        return true;
    }
};

struct ModelFile {
    PotentialModel model;
    InstanceDims dims;
    /// Training configuration echo; free-form.
    nlohmann::json config = nlohmann::json::object();
};

namespace detail {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw FileError("error reading '" + path + "'");
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out) throw FileError("error writing '" + path + "'");
}

inline json parse_document(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(what + ": " + e.what());
    }
}

inline const json& field(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw FormatError(path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw FormatError(path + "." + key + ": missing field");
    return *it;
}

inline double get_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw FormatError(path + ": expected a number");
    return v.get<double>();
}

inline long long get_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw FormatError(path + ": expected an integer");
    return v.get<long long>();
}

inline std::size_t get_index(const json& v, const std::string& path) {
    const long long x = get_integer(v, path);
    if (x < 0) throw FormatError(path + ": expected a nonnegative integer");
    return static_cast<std::size_t>(x);
}

inline const json& get_array(const json& v, const std::string& path) {
    if (!v.is_array()) throw FormatError(path + ": expected an array");
    return v;
}

inline std::vector<double> get_vector(const json& v, const std::string& path, std::size_t expected_size) {
    get_array(v, path);
    if (v.size() != expected_size)
        throw FormatError(concat(path, ": expected ", expected_size, " values, got ", v.size()));
    std::vector<double> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = get_number(v[k], concat(path, "[", k, "]"));
    return out;
}

inline void check_header(const json& doc, const char* format, const std::string& what) {
    if (!doc.is_object()) throw FormatError(what + ": top level must be an object");
    const json& f = field(doc, "format", "$");
    if (!f.is_string() || f.get<std::string>() != format)
        throw FormatError(concat("$.format: expected \"", format, "\""));
    if (get_integer(field(doc, "version", "$"), "$.version") != kFormatVersion)
        throw FormatError(concat("$.version: unsupported version (expected ", kFormatVersion, ")"));
}

inline int get_num_classes(const json& doc) {
    const long long k = get_integer(field(doc, "num_classes", "$"), "$.num_classes");
    if (k < 1) throw FormatError("$.num_classes: must be >= 1");
    return static_cast<int>(k);
}

inline Labeling get_labeling(const json& v, const std::string& path, std::size_t n, int k) {
    get_array(v, path);
    if (v.size() != n) throw FormatError(concat(path, ": expected ", n, " labels, got ", v.size()));
    std::vector<int> labels(n);
    for (std::size_t p = 0; p < n; ++p) {
        const long long x = get_integer(v[p], concat(path, "[", p, "]"));
        if (x < 1 || x > k) throw FormatError(concat(path, "[", p, "]: label ", x, " outside [1, ", k, "]"));
        labels[p] = static_cast<int>(x);
    }
    return Labeling(std::move(labels));
}

inline json tree_to_json(const DecisionTree& tree, int index = 0) {
    const auto& n = tree.nodes()[static_cast<std::size_t>(index)];
    if (n.is_leaf()) return json{{"leaf", n.output}};
    return json{{"feature", n.feature},
                {"threshold", n.threshold},
                {"left", tree_to_json(tree, n.left)},
                {"right", tree_to_json(tree, n.right)}};
}

inline int tree_from_json(const json& v, const std::string& path, std::vector<DecisionTree::Node>& nodes, int depth) {
    if (depth > 64) throw FormatError(path + ": tree too deep");
    if (!v.is_object()) throw FormatError(path + ": expected a tree node object");
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (v.contains("leaf")) {
        const long long bit = get_integer(v["leaf"], path + ".leaf");
        if (bit != 0 && bit != 1) throw FormatError(path + ".leaf: must be 0 or 1");
        nodes[static_cast<std::size_t>(id)].output = static_cast<int>(bit);
        return id;
    }
    const std::size_t feature = get_index(field(v, "feature", path), path + ".feature");
    const double threshold = get_number(field(v, "threshold", path), path + ".threshold");
    const int left = tree_from_json(field(v, "left", path), path + ".left", nodes, depth + 1);
    const int right = tree_from_json(field(v, "right", path), path + ".right", nodes, depth + 1);
    auto& node = nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(feature);
    node.threshold = threshold;
    node.left = left;
    node.right = right;
    return id;
}

inline DecisionTree parse_tree(const json& v, const std::string& path) {
    std::vector<DecisionTree::Node> nodes;
    tree_from_json(v, path, nodes, 0);
    try {
        return DecisionTree::from_nodes(std::move(nodes));
    } catch (const Error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline double get_weight(const json& v, const std::string& path) {
    const double w = get_number(v, path);
    if (!(w >= 0.0)) throw FormatError(concat(path, ": weight ", w, " is negative"));
    return w;
}

} // namespace detail

// ---------------------------------------------------------------- datasets

inline Dataset dataset_from_json(const nlohmann::json& doc) {
    using detail::concat;
    detail::check_header(doc, "crftree-dataset", "dataset");
    Dataset ds;
    ds.num_classes = detail::get_num_classes(doc);
    ds.dims.node_dim = detail::get_index(detail::field(doc, "node_dim", "$"), "$.node_dim");
    ds.dims.edge_dim = detail::get_index(detail::field(doc, "edge_dim", "$"), "$.edge_dim");
    if (doc.contains("loss_weights") && !doc["loss_weights"].is_null()) {
        std::vector<double> lw = detail::get_vector(doc["loss_weights"], "$.loss_weights",
                                                    static_cast<std::size_t>(ds.num_classes));
        try {
            ds.loss_weights = LossWeights(std::move(lw));
        } catch (const Error& e) {
            throw FormatError(std::string("$.loss_weights: ") + e.what());
        }
    }
    const auto& instances = detail::get_array(detail::field(doc, "instances", "$"), "$.instances");
    ds.instances.reserve(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const std::string ip = concat("$.instances[", i, "]");
        const auto& jin = instances[i];
        const auto& jnodes = detail::get_array(detail::field(jin, "nodes", ip), ip + ".nodes");
        std::vector<FeatureVector> nodes(jnodes.size());
        for (std::size_t p = 0; p < jnodes.size(); ++p)
            nodes[p] = detail::get_vector(jnodes[p], concat(ip, ".nodes[", p, "]"), ds.dims.node_dim);
        const auto& jedges = detail::get_array(detail::field(jin, "edges", ip), ip + ".edges");
        std::vector<Edge> edges(jedges.size());
        for (std::size_t e = 0; e < jedges.size(); ++e) {
            const std::string ep = concat(ip, ".edges[", e, "]");
            edges[e].p = detail::get_index(detail::field(jedges[e], "p", ep), ep + ".p");
            edges[e].q = detail::get_index(detail::field(jedges[e], "q", ep), ep + ".q");
            edges[e].features =
                detail::get_vector(detail::field(jedges[e], "features", ep), ep + ".features", ds.dims.edge_dim);
        }
        std::optional<Labeling> truth;
        if (jin.contains("labels") && !jin["labels"].is_null())
            truth = detail::get_labeling(jin["labels"], ip + ".labels", nodes.size(), ds.num_classes);
        try {
            ds.instances.push_back(build_instance(std::move(nodes), std::move(edges), std::move(truth), ds.dims));
        } catch (const FormatError&) {
            throw;
        } catch (const Error& e) {
            throw FormatError(ip + ": " + e.what());
        }
    }
    return ds;
}

inline nlohmann::json dataset_to_json(const Dataset& ds) {
    nlohmann::json doc = {{"format", "crftree-dataset"},
                          {"version", kFormatVersion},
                          {"num_classes", ds.num_classes},
                          {"node_dim", ds.dims.node_dim},
                          {"edge_dim", ds.dims.edge_dim}};
    if (ds.loss_weights) doc["loss_weights"] = ds.loss_weights->values();
    nlohmann::json instances = nlohmann::json::array();
    for (const Instance& inst : ds.instances) {
        nlohmann::json jin;
        jin["nodes"] = inst.nodes();
        if (inst.has_truth()) jin["labels"] = inst.truth().values();
        nlohmann::json edges = nlohmann::json::array();
        for (const Edge& e : inst.edges()) edges.push_back({{"p", e.p}, {"q", e.q}, {"features", e.features}});
        jin["edges"] = std::move(edges);
        instances.push_back(std::move(jin));
    }
    doc["instances"] = std::move(instances);
    return doc;
}

/// Header fields pretty-printed, one instance per line.
inline std::string dump_dataset(const Dataset& ds) {
    nlohmann::json doc = dataset_to_json(ds);
    nlohmann::json instances = std::move(doc["instances"]);
    doc.erase("instances");
    std::string text = doc.dump(2);
    text.resize(text.size() - 2);  // "\n}"
    text += ",\n  \"instances\": [";
    for (std::size_t i = 0; i < instances.size(); ++i) {
        text += i ? ",\n    " : "\n    ";
        text += instances[i].dump();
    }
    text += instances.empty() ? "]\n}\n" : "\n  ]\n}\n";
    return text;
}

inline Dataset load_dataset(const std::string& path) {
    const std::string text = detail::read_file(path);
    try {
        return dataset_from_json(detail::parse_document(text, path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline void save_dataset(const Dataset& ds, const std::string& path) { detail::write_file(path, dump_dataset(ds)); }

// ------------------------------------------------------------------ models

inline nlohmann::json model_to_json(const ModelFile& mf) {
    const PotentialModel& m = mf.model;
    nlohmann::json unary = nlohmann::json::array();
    for (int c = 1; c <= m.num_classes(); ++c) {
        nlohmann::json trees = nlohmann::json::array();
        for (std::size_t t = 0; t < m.unary_group(c).size(); ++t)
            trees.push_back({{"weight", m.unary_weights(c)[t]}, {"tree", detail::tree_to_json(m.unary_group(c)[t])}});
        unary.push_back({{"class", c}, {"trees", std::move(trees)}});
    }
    nlohmann::json pairwise = nlohmann::json::array();
    for (std::size_t t = 0; t < m.pairwise_group().size(); ++t)
        pairwise.push_back(
            {{"weight", m.pairwise_weights()[t]}, {"tree", detail::tree_to_json(m.pairwise_group()[t])}});
    return nlohmann::json{{"format", "crftree-model"},
                          {"version", kFormatVersion},
                          {"num_classes", m.num_classes()},
                          {"node_dim", mf.dims.node_dim},
                          {"edge_dim", mf.dims.edge_dim},
                          {"config", mf.config},
                          {"unary", std::move(unary)},
                          {"pairwise", std::move(pairwise)}};
}

inline ModelFile model_from_json(const nlohmann::json& doc) {
    using detail::concat;
    detail::check_header(doc, "crftree-model", "model");
    ModelFile mf;
    const int k = detail::get_num_classes(doc);
    mf.dims.node_dim = detail::get_index(detail::field(doc, "node_dim", "$"), "$.node_dim");
    mf.dims.edge_dim = detail::get_index(detail::field(doc, "edge_dim", "$"), "$.edge_dim");
    if (doc.contains("config")) mf.config = doc["config"];

    const auto& unary = detail::get_array(detail::field(doc, "unary", "$"), "$.unary");
    if (unary.size() != static_cast<std::size_t>(k))
        throw FormatError(concat("$.unary: expected ", k, " class groups, got ", unary.size()));
    std::vector<std::vector<DecisionTree>> trees(static_cast<std::size_t>(k));
    std::vector<std::vector<double>> weights(static_cast<std::size_t>(k));
    for (std::size_t c = 0; c < unary.size(); ++c) {
        const std::string gp = concat("$.unary[", c, "]");
        if (detail::get_integer(detail::field(unary[c], "class", gp), gp + ".class") != static_cast<long long>(c + 1))
            throw FormatError(concat(gp, ".class: expected ", c + 1));
        const auto& jt = detail::get_array(detail::field(unary[c], "trees", gp), gp + ".trees");
        for (std::size_t t = 0; t < jt.size(); ++t) {
            const std::string tp = concat(gp, ".trees[", t, "]");
            weights[c].push_back(detail::get_weight(detail::field(jt[t], "weight", tp), tp + ".weight"));
            trees[c].push_back(detail::parse_tree(detail::field(jt[t], "tree", tp), tp + ".tree"));
        }
    }
    const auto& pairwise = detail::get_array(detail::field(doc, "pairwise", "$"), "$.pairwise");
    const std::size_t rounds = pairwise.size();
    for (std::size_t c = 0; c < trees.size(); ++c) {
        if (trees[c].size() != rounds)
            throw FormatError(concat("$.unary[", c, "].trees: expected ", rounds,
                                     " trees (one per pairwise tree), got ", trees[c].size()));
    }

    mf.model = PotentialModel(k);
    std::vector<double> flat;
    std::vector<double> wp;
    for (std::size_t t = 0; t < rounds; ++t) {
        const std::string tp = concat("$.pairwise[", t, "]");
        std::vector<DecisionTree> round;
        for (std::size_t c = 0; c < trees.size(); ++c) round.push_back(trees[c][t]);
        wp.push_back(detail::get_weight(detail::field(pairwise[t], "weight", tp), tp + ".weight"));
        mf.model.add_round(std::move(round), detail::parse_tree(detail::field(pairwise[t], "tree", tp), tp + ".tree"));
    }
    for (const auto& block : weights) flat.insert(flat.end(), block.begin(), block.end());
    flat.insert(flat.end(), wp.begin(), wp.end());
    mf.model.set_weights(flat);

    if (mf.model.max_node_feature() >= static_cast<int>(mf.dims.node_dim))
        throw FormatError(concat("$.unary: a tree uses node feature ", mf.model.max_node_feature(),
                                 " but node_dim is ", mf.dims.node_dim));
    if (mf.model.max_edge_feature() >= static_cast<int>(mf.dims.edge_dim))
        throw FormatError(concat("$.pairwise: a tree uses edge feature ", mf.model.max_edge_feature(),
                                 " but edge_dim is ", mf.dims.edge_dim));
    return mf;
}

inline std::string dump_model(const ModelFile& mf) { return model_to_json(mf).dump(1) + "\n"; }

inline void save_model(const ModelFile& mf, const std::string& path) { detail::write_file(path, dump_model(mf)); }

inline ModelFile load_model(const std::string& path) {
    const std::string text = detail::read_file(path);
    try {
        return model_from_json(detail::parse_document(text, path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// ------------------------------------------------------------- predictions

inline std::string dump_predictions(const std::vector<Labeling>& labelings, int num_classes) {
    nlohmann::json rows = nlohmann::json::array();
    for (const Labeling& y : labelings) rows.push_back(y.values());
    nlohmann::json doc = {{"format", "crftree-predictions"}, {"version", kFormatVersion}, {"num_classes", num_classes}};
    std::string text = doc.dump(2);
    text.resize(text.size() - 2);
    text += ",\n  \"labelings\": [";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        text += i ? ",\n    " : "\n    ";
        text += rows[i].dump();
    }
    text += rows.empty() ? "]\n}\n" : "\n  ]\n}\n";
    return text;
}

struct Predictions {
    int num_classes = 0;
    std::vector<Labeling> labelings;
};

inline Predictions load_predictions(const std::string& path) {
    using detail::concat;
    const std::string text = detail::read_file(path);
    try {
        const nlohmann::json doc = detail::parse_document(text, path);
        detail::check_header(doc, "crftree-predictions", "predictions");
        Predictions out;
        out.num_classes = detail::get_num_classes(doc);
        const auto& rows = detail::get_array(detail::field(doc, "labelings", "$"), "$.labelings");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::string rp = concat("$.labelings[", i, "]");
            detail::get_array(rows[i], rp);
            out.labelings.push_back(detail::get_labeling(rows[i], rp, rows[i].size(), out.num_classes));
        }
        return out;
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline void save_predictions(const std::vector<Labeling>& labelings, int num_classes, const std::string& path) {
    detail::write_file(path, dump_predictions(labelings, num_classes));
}

} // namespace crftree
