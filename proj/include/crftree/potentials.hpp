#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "crftree/dtree.hpp"
#include "crftree/graph.hpp"

namespace crftree {

/// K class-wise unary tree groups plus one pairwise group, each tree paired
/// with a nonnegative weight. Weight vector layout is
/// [class 1 | class 2 | ... | class K | pairwise].
class PotentialModel {
public:
    PotentialModel() = default;
    explicit PotentialModel(int num_classes)
        : num_classes_(num_classes), unary_(static_cast<std::size_t>(num_classes)),
          w_unary_(static_cast<std::size_t>(num_classes)) {
        if (num_classes < 1) throw Error("PotentialModel: num_classes must be >= 1");
    }

    int num_classes() const { return num_classes_; }
    /// Completed column-generation rounds (trees per group).
    std::size_t rounds() const { return pairwise_.size(); }
    std::size_t dimension() const { return rounds() * static_cast<std::size_t>(num_classes_ + 1); }
    bool empty() const { return rounds() == 0; }

    /// Trees of class `c` (1-based).
    const std::vector<DecisionTree>& unary_group(int c) const { return unary_.at(static_cast<std::size_t>(c - 1)); }
    const std::vector<DecisionTree>& pairwise_group() const { return pairwise_; }
    const std::vector<double>& unary_weights(int c) const { return w_unary_.at(static_cast<std::size_t>(c - 1)); }
    const std::vector<double>& pairwise_weights() const { return w_pairwise_; }

    /// Appends one tree per class and one pairwise tree, all with weight 0.
    void add_round(std::vector<DecisionTree> class_trees, DecisionTree pairwise_tree) {
        if (class_trees.size() != static_cast<std::size_t>(num_classes_))
            throw Error(detail::concat("add_round: got ", class_trees.size(), " unary trees for ", num_classes_,
                                       " classes"));
        for (std::size_t c = 0; c < class_trees.size(); ++c) {
            unary_[c].push_back(std::move(class_trees[c]));
            w_unary_[c].push_back(0.0);
        }
        pairwise_.push_back(std::move(pairwise_tree));
        w_pairwise_.push_back(0.0);
    }

    /// Flattened weights in block order.
    std::vector<double> weights() const {
        std::vector<double> w;
        w.reserve(dimension());
        for (const auto& block : w_unary_) w.insert(w.end(), block.begin(), block.end());
        w.insert(w.end(), w_pairwise_.begin(), w_pairwise_.end());
        return w;
    }

    void set_weights(std::span<const double> w) {
        if (w.size() != dimension())
            throw Error(detail::concat("set_weights: got ", w.size(), " weights, model dimension is ", dimension()));
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (!(w[j] >= 0.0) || !std::isfinite(w[j]))
                throw Error(detail::concat("set_weights: weight ", j, " must be finite and >= 0"));
        }
        std::size_t k = 0;
        for (auto& block : w_unary_)
            for (double& x : block) x = w[k++];
        for (double& x : w_pairwise_) x = w[k++];
    }

    /// Largest node/edge feature index used by any tree (-1 if none).
    int max_node_feature() const {
        int m = -1;
        for (const auto& g : unary_)
            for (const auto& t : g) m = std::max(m, t.max_feature());
        return m;
    }
    int max_edge_feature() const {
        int m = -1;
        for (const auto& t : pairwise_) m = std::max(m, t.max_feature());
        return m;
    }

    friend bool operator==(const PotentialModel&, const PotentialModel&) = default;

private:
    int num_classes_ = 0;
    std::vector<std::vector<DecisionTree>> unary_;
    std::vector<DecisionTree> pairwise_;
    std::vector<std::vector<double>> w_unary_;
    std::vector<double> w_pairwise_;
};

/// Column outputs of every potential on one instance: unary[c][t][p] is the
/// output of class-c column t on node p, pairwise[j][e] that of pairwise
/// column j on edge e. For tree models these are the cached {0,1} tree
/// outputs; the learner and inference only ever see this table, so any
/// real-valued feature columns with nonnegative pairwise outputs work.
struct ColumnTable {
    int num_classes = 0;
    std::size_t num_nodes = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::vector<std::vector<double>>> unary;
    std::vector<std::vector<double>> pairwise;

    ColumnTable() = default;
    ColumnTable(const Instance& inst, int k)
        : num_classes(k), num_nodes(inst.num_nodes()), unary(static_cast<std::size_t>(k)) {
        edges.reserve(inst.num_edges());
        for (const Edge& e : inst.edges()) edges.emplace_back(e.p, e.q);
    }

    std::size_t num_edges() const { return edges.size(); }
    std::size_t unary_columns(int c) const { return unary[static_cast<std::size_t>(c - 1)].size(); }
    std::size_t dimension() const {
        std::size_t d = pairwise.size();
        for (const auto& g : unary) d += g.size();
        return d;
    }
    /// Offset of class c's block (1-based c); c = K + 1 gives the pairwise offset.
    std::size_t block_offset(int c) const {
        std::size_t off = 0;
        for (int k = 1; k < c; ++k) off += unary[static_cast<std::size_t>(k - 1)].size();
        return off;
    }
};

/// Appends the outputs of model rounds [first_round, rounds()) to `table`.
inline void extend_columns(ColumnTable& table, const Instance& inst, const PotentialModel& model,
                           std::size_t first_round = 0) {
    for (int c = 1; c <= model.num_classes(); ++c) {
        const auto& trees = model.unary_group(c);
        for (std::size_t t = first_round; t < trees.size(); ++t) {
            std::vector<double> col(inst.num_nodes());
            for (std::size_t p = 0; p < inst.num_nodes(); ++p) col[p] = trees[t].eval(inst.node(p));
            table.unary[static_cast<std::size_t>(c - 1)].push_back(std::move(col));
        }
    }
    const auto& ptrees = model.pairwise_group();
    for (std::size_t t = first_round; t < ptrees.size(); ++t) {
        std::vector<double> col(inst.num_edges());
        for (std::size_t e = 0; e < inst.num_edges(); ++e) col[e] = ptrees[t].eval(inst.edge(e).features);
        table.pairwise.push_back(std::move(col));
    }
}

inline ColumnTable build_columns(const Instance& inst, const PotentialModel& model) {
    ColumnTable table(inst, model.num_classes());
    extend_columns(table, inst, model);
    return table;
}

/// Block c (1-based) holds sum over nodes labeled c of the class-c column outputs.
inline std::vector<double> unary_feature_map(const Labeling& y, const ColumnTable& table) {
    validate_labeling(y, table.num_nodes, table.num_classes);
    std::vector<double> psi(table.block_offset(table.num_classes + 1), 0.0);
    for (int c = 1; c <= table.num_classes; ++c) {
        const std::size_t off = table.block_offset(c);
        const auto& cols = table.unary[static_cast<std::size_t>(c - 1)];
        for (std::size_t t = 0; t < cols.size(); ++t) {
            double s = 0.0;
            for (std::size_t p = 0; p < table.num_nodes; ++p) {
                if (y[p] == c) s += cols[t][p];
            }
            psi[off + t] = s;
        }
    }
    return psi;
}

/// Entry j sums pairwise column j over edges whose endpoints disagree.
inline std::vector<double> pairwise_feature_map(const Labeling& y, const ColumnTable& table) {
    validate_labeling(y, table.num_nodes, table.num_classes);
    std::vector<double> psi(table.pairwise.size(), 0.0);
    for (std::size_t j = 0; j < table.pairwise.size(); ++j) {
        double s = 0.0;
        for (std::size_t e = 0; e < table.num_edges(); ++e) {
            if (y[table.edges[e].first] != y[table.edges[e].second]) s += table.pairwise[j][e];
        }
        psi[j] = s;
    }
    return psi;
}

inline std::vector<double> joint_feature_map(const Labeling& y, const ColumnTable& table) {
    std::vector<double> psi = unary_feature_map(y, table);
    std::vector<double> pw = pairwise_feature_map(y, table);
    psi.insert(psi.end(), pw.begin(), pw.end());
    return psi;
}

/// E(y) = sum_p w_{y_p}.H_{y_p}(x_p) + sum_{(p,q)} w2.H2(x_pq) [y_p != y_q],
/// computed directly from the potentials rather than through Psi.
inline double energy(const Labeling& y, const ColumnTable& table, std::span<const double> w) {
    validate_labeling(y, table.num_nodes, table.num_classes);
    if (w.size() != table.dimension())
        throw Error(detail::concat("energy: weight dimension ", w.size(), ", model dimension ", table.dimension()));
    double unary = 0.0;
    for (std::size_t p = 0; p < table.num_nodes; ++p) {
        const int c = y[p];
        const std::size_t off = table.block_offset(c);
        const auto& cols = table.unary[static_cast<std::size_t>(c - 1)];
        for (std::size_t t = 0; t < cols.size(); ++t) unary += w[off + t] * cols[t][p];
    }
    const std::size_t off = table.block_offset(table.num_classes + 1);
    double pairwise = 0.0;
    for (std::size_t e = 0; e < table.num_edges(); ++e) {
        if (y[table.edges[e].first] == y[table.edges[e].second]) continue;
        for (std::size_t j = 0; j < table.pairwise.size(); ++j) pairwise += w[off + j] * table.pairwise[j][e];
    }
    return unary + pairwise;
}

inline std::vector<double> unary_feature_map(const Labeling& y, const Instance& inst, const PotentialModel& model) {
    return unary_feature_map(y, build_columns(inst, model));
}
inline std::vector<double> pairwise_feature_map(const Labeling& y, const Instance& inst,
                                                const PotentialModel& model) {
    return pairwise_feature_map(y, build_columns(inst, model));
}
inline std::vector<double> joint_feature_map(const Labeling& y, const Instance& inst, const PotentialModel& model) {
    return joint_feature_map(y, build_columns(inst, model));
}
inline double energy(const Labeling& y, const Instance& inst, const PotentialModel& model) {
    return energy(y, build_columns(inst, model), model.weights());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(detail::concat("dot: sizes differ (", a.size(), " vs ", b.size(), ")"));
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

/// eta_e(a, b): pairwise potential of edge e when its endpoints take labels a and b.
inline double pairwise_potential(const ColumnTable& table, std::span<const double> w, std::size_t e, int a, int b) {
    if (a == b) return 0.0;
    const std::size_t off = table.block_offset(table.num_classes + 1);
    double eta = 0.0;
    for (std::size_t j = 0; j < table.pairwise.size(); ++j) eta += w[off + j] * table.pairwise[j][e];
    return eta;
}

/// Binary-case sums eta(1,1)+eta(2,2) and eta(1,2)+eta(2,1) of one edge.
struct EdgeCertificate {
    double same = 0.0;
    double different = 0.0;
};

inline EdgeCertificate edge_certificate(const ColumnTable& table, std::span<const double> w, std::size_t e) {
    return EdgeCertificate{pairwise_potential(table, w, e, 1, 1) + pairwise_potential(table, w, e, 2, 2),
                           pairwise_potential(table, w, e, 1, 2) + pairwise_potential(table, w, e, 2, 1)};
}

/// True iff every edge satisfies eta(0,0)+eta(1,1) = 0 <= eta(0,1)+eta(1,0).
inline bool verify_submodular(const ColumnTable& table, std::span<const double> w) {
    for (std::size_t e = 0; e < table.num_edges(); ++e) {
        const EdgeCertificate cert = edge_certificate(table, w, e);
        if (!(cert.same == 0.0 && cert.different >= cert.same)) return false;
    }
    return true;
}

} // namespace crftree
