#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crftree {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace detail

using FeatureVector = std::vector<double>;

/// Per-node class assignment. Classes are numbered 1..K.
class Labeling {
public:
    Labeling() = default;
    explicit Labeling(std::vector<int> labels) : labels_(std::move(labels)) {}
    Labeling(std::size_t n, int label) : labels_(n, label) {}

    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    int operator[](std::size_t p) const { return labels_[p]; }
    int& operator[](std::size_t p) { return labels_[p]; }

    auto begin() const { return labels_.begin(); }
    auto end() const { return labels_.end(); }
    const std::vector<int>& values() const { return labels_; }

    friend bool operator==(const Labeling&, const Labeling&) = default;
    friend auto operator<=>(const Labeling&, const Labeling&) = default;

private:
    std::vector<int> labels_;
};

/// Throws unless `y` has `n` entries, each in [1, K].
inline void validate_labeling(const Labeling& y, std::size_t n, int num_classes) {
    if (y.size() != n)
        throw Error(detail::concat("labeling has ", y.size(), " entries, expected ", n));
    for (std::size_t p = 0; p < n; ++p) {
        if (y[p] < 1 || y[p] > num_classes)
            throw Error(detail::concat("label ", y[p], " at node ", p, " outside [1, ", num_classes, "]"));
    }
}

/// An undirected edge, stored with p < q.
struct Edge {
    std::size_t p = 0;
    std::size_t q = 0;
    FeatureVector features;
};

struct InstanceDims {
    std::size_t node_dim = 0;
    std::size_t edge_dim = 0;
};

/// A graph with per-node and per-edge feature vectors and an optional
/// ground-truth labeling. Immutable once built; see build_instance().
class Instance {
public:
    Instance() = default;

    std::size_t num_nodes() const { return nodes_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    std::size_t node_dim() const { return dims_.node_dim; }
    std::size_t edge_dim() const { return dims_.edge_dim; }
    InstanceDims dims() const { return dims_; }

    std::span<const double> node(std::size_t p) const { return nodes_[p]; }
    const std::vector<FeatureVector>& nodes() const { return nodes_; }
    const Edge& edge(std::size_t e) const { return edges_[e]; }
    const std::vector<Edge>& edges() const { return edges_; }

    bool has_truth() const { return truth_.has_value(); }
    const Labeling& truth() const {
        if (!truth_) throw Error("instance has no ground-truth labeling");
        return *truth_;
    }

    /// Returns a copy carrying `truth`; the length must match the node count.
    Instance with_truth(Labeling truth) const {
        if (truth.size() != num_nodes())
            throw Error(detail::concat("truth has ", truth.size(), " labels for ", num_nodes(), " nodes"));
        Instance copy = *this;
        copy.truth_ = std::move(truth);
        return copy;
    }

    Instance without_truth() const {
        Instance copy = *this;
        copy.truth_.reset();
        return copy;
    }

private:
    friend Instance build_instance(std::vector<FeatureVector>, std::vector<Edge>, std::optional<Labeling>,
                                   std::optional<InstanceDims>);

    std::vector<FeatureVector> nodes_;
    std::vector<Edge> edges_;
    InstanceDims dims_;
    std::optional<Labeling> truth_;
};

/// Validates and canonicalizes an instance. When `dims` is absent the node
/// (edge) dimension is taken from the first node (edge), or 0 if none.
inline Instance build_instance(std::vector<FeatureVector> node_features, std::vector<Edge> edges,
                               std::optional<Labeling> truth = std::nullopt,
                               std::optional<InstanceDims> dims = std::nullopt) {
    InstanceDims d;
    if (dims) {
        d = *dims;
    } else {
        d.node_dim = node_features.empty() ? 0 : node_features.front().size();
        d.edge_dim = edges.empty() ? 0 : edges.front().features.size();
    }

    for (std::size_t p = 0; p < node_features.size(); ++p) {
        if (node_features[p].size() != d.node_dim)
            throw Error(detail::concat("node ", p, ": feature dimension ", node_features[p].size(), ", expected ",
                                       d.node_dim));
        if (!detail::all_finite(node_features[p]))
            throw Error(detail::concat("node ", p, ": non-finite feature value"));
    }

    const std::size_t n = node_features.size();
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        Edge& edge = edges[e];
        if (edge.p >= n || edge.q >= n)
            throw Error(detail::concat("edge ", e, " (", edge.p, ",", edge.q, "): node index out of range [0, ", n,
                                       ")"));
        if (edge.p == edge.q) throw Error(detail::concat("edge ", e, " (", edge.p, ",", edge.q, "): self-loop"));
        if (edge.features.size() != d.edge_dim)
            throw Error(detail::concat("edge ", e, ": feature dimension ", edge.features.size(), ", expected ",
                                       d.edge_dim));
        if (!detail::all_finite(edge.features))
            throw Error(detail::concat("edge ", e, ": non-finite feature value"));
        if (edge.p > edge.q) std::swap(edge.p, edge.q);
        if (!seen.emplace(edge.p, edge.q).second)
            throw Error(detail::concat("edge ", e, " (", edge.p, ",", edge.q, "): duplicate undirected edge"));
    }

    if (truth && truth->size() != n)
        throw Error(detail::concat("truth has ", truth->size(), " labels for ", n, " nodes"));
    if (truth) {
        for (std::size_t p = 0; p < n; ++p) {
            if ((*truth)[p] < 1) throw Error(detail::concat("node ", p, ": label ", (*truth)[p], " is below 1"));
        }
    }

    Instance inst;
    inst.nodes_ = std::move(node_features);
    inst.edges_ = std::move(edges);
    inst.dims_ = d;
    inst.truth_ = std::move(truth);
    return inst;
}

/// Per-class misclassification costs c_1..c_K of the weighted Hamming loss.
class LossWeights {
public:
    LossWeights() = default;
    explicit LossWeights(std::vector<double> costs) : costs_(std::move(costs)) {
        if (costs_.empty()) throw Error("loss weights: no classes");
        bool any_positive = false;
        for (std::size_t k = 0; k < costs_.size(); ++k) {
            if (!std::isfinite(costs_[k]) || costs_[k] < 0.0)
                throw Error(detail::concat("loss weight for class ", k + 1, " must be finite and >= 0"));
            any_positive = any_positive || costs_[k] > 0.0;
        }
        if (!any_positive) throw Error("loss weights: at least one class cost must be > 0");
    }

    static LossWeights uniform(int num_classes) {
        return LossWeights(std::vector<double>(static_cast<std::size_t>(num_classes), 1.0));
    }

    int num_classes() const { return static_cast<int>(costs_.size()); }
    /// Cost of misclassifying a node whose true class is `label` (1-based).
    double cost(int label) const { return costs_.at(static_cast<std::size_t>(label - 1)); }
    const std::vector<double>& values() const { return costs_; }

private:
    std::vector<double> costs_;
};

/// c_k = N / (K * N_k), so that sum_k freq_k * c_k = 1.
inline LossWeights class_frequency_weights(std::span<const Instance> dataset, int num_classes) {
    if (num_classes < 1) throw Error("class_frequency_weights: num_classes must be >= 1");
    std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!dataset[i].has_truth())
            throw Error(detail::concat("class_frequency_weights: instance ", i, " has no ground truth"));
        const Labeling& y = dataset[i].truth();
        validate_labeling(y, dataset[i].num_nodes(), num_classes);
        for (int label : y) counts[static_cast<std::size_t>(label - 1)] += 1.0;
        total += static_cast<double>(y.size());
    }
    std::vector<double> costs(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0.0)
            throw Error(detail::concat("class_frequency_weights: class ", k + 1, " never appears in the data"));
        costs[k] = total / (static_cast<double>(num_classes) * counts[k]);
    }
    return LossWeights(std::move(costs));
}

/// Sum over nodes of c_{truth[p]} * [pred[p] != truth[p]].
inline double weighted_hamming_loss(const Labeling& truth, const Labeling& pred, const LossWeights& lw) {
    if (truth.size() != pred.size())
        throw Error(detail::concat("weighted_hamming_loss: lengths differ (", truth.size(), " vs ", pred.size(), ")"));
    double loss = 0.0;
    for (std::size_t p = 0; p < truth.size(); ++p) {
        if (pred[p] != truth[p]) loss += lw.cost(truth[p]);
    }
    return loss;
}

} // namespace crftree
