#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "crftree/graph.hpp"

namespace crftree {

/// Depth-limited axis-aligned binary tree with {0,1} leaves.
/// Routing convention: go left iff x[feature] <= threshold.
class DecisionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int output = 0;  // leaf bit

        bool is_leaf() const { return feature < 0; }
        friend bool operator==(const Node&, const Node&) = default;
    };

    DecisionTree() : nodes_{Node{}} {}

    static DecisionTree constant(int bit) {
        DecisionTree t;
        t.nodes_[0].output = bit ? 1 : 0;
        return t;
    }

    static DecisionTree stump(int feature, double threshold, int left_bit, int right_bit) {
        std::vector<Node> nodes(3);
        nodes[0] = Node{feature, threshold, 1, 2, 0};
        nodes[1].output = left_bit ? 1 : 0;
        nodes[2].output = right_bit ? 1 : 0;
        return from_nodes(std::move(nodes));
    }

    /// Node 0 is the root; children must have larger indices than their parent.
    static DecisionTree from_nodes(std::vector<Node> nodes) {
        if (nodes.empty()) throw Error("decision tree: no nodes");
        std::vector<int> parents(nodes.size(), 0);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Node& n = nodes[i];
            if (n.is_leaf()) {
                if (n.output != 0 && n.output != 1)
                    throw Error(detail::concat("decision tree node ", i, ": leaf output must be 0 or 1"));
                continue;
            }
            if (!std::isfinite(n.threshold))
                throw Error(detail::concat("decision tree node ", i, ": non-finite threshold"));
            for (int child : {n.left, n.right}) {
                if (child <= static_cast<int>(i) || child >= static_cast<int>(nodes.size()))
                    throw Error(detail::concat("decision tree node ", i, ": invalid child index ", child));
                if (++parents[static_cast<std::size_t>(child)] > 1)
                    throw Error(detail::concat("decision tree node ", child, ": has more than one parent"));
            }
        }
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            if (parents[i] == 0) throw Error(detail::concat("decision tree node ", i, ": unreachable"));
        }
        DecisionTree t;
        t.nodes_ = std::move(nodes);
        return t;
    }

    int eval(std::span<const double> x) const {
        if (static_cast<int>(x.size()) <= max_feature())
            throw Error(detail::concat("decision tree uses feature ", max_feature(), " but input has dimension ",
                                       x.size()));
        const Node* n = &nodes_[0];
        while (!n->is_leaf()) {
            n = &nodes_[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left
                                                                                                          : n->right)];
        }
        return n->output;
    }

    /// Largest feature index used, or -1 for a constant tree.
    int max_feature() const {
        int m = -1;
        for (const Node& n : nodes_) m = std::max(m, n.feature);
        return m;
    }

    int depth() const { return depth_from(0); }
    bool is_constant() const { return nodes_[0].is_leaf(); }
    const std::vector<Node>& nodes() const { return nodes_; }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    int depth_from(int i) const {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_from(n.left), depth_from(n.right));
    }

    std::vector<Node> nodes_;
};

/// A training point with a signed net weight: positive rewards output 1,
/// negative rewards output 0.
struct SignedExample {
    FeatureVector features;
    double net_weight = 0.0;
};

/// J(h) = sum_e net_weight_e * h(x_e).
inline double tree_objective(const DecisionTree& tree, std::span<const SignedExample> examples) {
    double j = 0.0;
    for (const SignedExample& e : examples) {
        if (tree.eval(e.features)) j += e.net_weight;
    }
    return j;
}

namespace detail {

class TreeGrower {
public:
    TreeGrower(std::vector<SignedExample> examples, std::size_t dim) : ex_(std::move(examples)), dim_(dim) {
        order_.resize(dim_);
        for (std::size_t f = 0; f < dim_; ++f) {
            auto& ord = order_[f];
            ord.resize(ex_.size());
            std::iota(ord.begin(), ord.end(), std::size_t{0});
            std::stable_sort(ord.begin(), ord.end(),
                             [&](std::size_t a, std::size_t b) { return ex_[a].features[f] < ex_[b].features[f]; });
        }
        tag_.assign(ex_.size(), 0);
    }

    DecisionTree grow(int max_depth) {
        std::vector<std::size_t> all(ex_.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        grow_node(all, 0, max_depth);
        return DecisionTree::from_nodes(std::move(nodes_));
    }

private:
    struct Split {
        bool valid = false;
        double score = 0.0;
        std::size_t feature = 0;
        double threshold = 0.0;
    };

    // Running best single split over one side of a scan.
    struct StumpScan {
        double total = 0.0;
        double prefix = 0.0;
        double prev = 0.0;
        bool started = false;
        double best = 0.0;

        void push(double x, double w) {
            if (started && x > prev) best = std::max(best, std::max(0.0, prefix) + std::max(0.0, total - prefix));
            prefix += w;
            prev = x;
            started = true;
        }
    };

    static double midpoint(double lo, double hi) {
        double mid = lo + 0.5 * (hi - lo);
        return mid >= hi ? lo : mid;
    }

    int new_tag() { return ++tag_counter_; }

    // Best stump over examples tagged `tag`. Scores within `tol` of the
    // incumbent count as ties, which keep the lowest feature, then lowest threshold.
    Split best_stump(int tag, double total, double tol) const {
        Split best;
        for (std::size_t f = 0; f < dim_; ++f) {
            double prefix = 0.0, prev = 0.0;
            bool started = false;
            for (std::size_t e : order_[f]) {
                if (tag_[e] != tag) continue;
                const double x = ex_[e].features[f];
                if (started && x > prev) {
                    const double s = std::max(0.0, prefix) + std::max(0.0, total - prefix);
                    if (!best.valid || s > best.score + tol) best = Split{true, s, f, midpoint(prev, x)};
                }
                prefix += ex_[e].net_weight;
                prev = x;
                started = true;
            }
        }
        return best;
    }

    // Value of the best depth-<=1 subtree on each side of the split (f, threshold).
    double lookahead_value(int tag, std::size_t f, double threshold, double total_left, double total_right) const {
        double best_left = std::max(0.0, total_left);
        double best_right = std::max(0.0, total_right);
        for (std::size_t g = 0; g < dim_; ++g) {
            StumpScan left{total_left}, right{total_right};
            for (std::size_t e : order_[g]) {
                if (tag_[e] != tag) continue;
                const SignedExample& ex = ex_[e];
                (ex.features[f] <= threshold ? left : right).push(ex.features[g], ex.net_weight);
            }
            best_left = std::max(best_left, left.best);
            best_right = std::max(best_right, right.best);
        }
        return best_left + best_right;
    }

    // Root split chosen by the optimal depth-2 value it enables.
    Split best_lookahead(int tag, double total, double tol) const {
        Split best;
        for (std::size_t f = 0; f < dim_; ++f) {
            double prefix = 0.0, prev = 0.0;
            bool started = false;
            for (std::size_t e : order_[f]) {
                if (tag_[e] != tag) continue;
                const double x = ex_[e].features[f];
                if (started && x > prev) {
                    const double thr = midpoint(prev, x);
                    const double s = lookahead_value(tag, f, thr, prefix, total - prefix);
                    if (!best.valid || s > best.score + tol) best = Split{true, s, f, thr};
                }
                prefix += ex_[e].net_weight;
                prev = x;
                started = true;
            }
        }
        return best;
    }

    int grow_node(const std::vector<std::size_t>& members, int tag, int depth_left) {
        double total = 0.0, mass = 0.0;
        for (std::size_t e : members) {
            total += ex_[e].net_weight;
            mass += std::abs(ex_[e].net_weight);
        }
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(DecisionTree::Node{-1, 0.0, -1, -1, total > 0.0 ? 1 : 0});
        if (depth_left <= 0 || members.size() < 2) return id;

        const double tol = 1e-12 * mass;
        const Split split = depth_left >= 2 ? best_lookahead(tag, total, tol) : best_stump(tag, total, tol);
        if (!split.valid || split.score <= std::max(0.0, total) + tol) return id;

        const int left_tag = new_tag(), right_tag = new_tag();
        std::vector<std::size_t> left, right;
        for (std::size_t e : members) {
            if (ex_[e].features[split.feature] <= split.threshold) {
                tag_[e] = left_tag;
                left.push_back(e);
            } else {
                tag_[e] = right_tag;
                right.push_back(e);
            }
        }
        const int l = grow_node(left, left_tag, depth_left - 1);
        const int r = grow_node(right, right_tag, depth_left - 1);
        DecisionTree::Node& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = static_cast<int>(split.feature);
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        node.output = 0;
        return id;
    }

    std::vector<SignedExample> ex_;
    std::size_t dim_;
    std::vector<std::vector<std::size_t>> order_;
    std::vector<int> tag_;
    int tag_counter_ = 0;
    std::vector<DecisionTree::Node> nodes_;
};

} // namespace detail

/// Trains a tree maximizing J(h) = sum_e net_weight_e * h(x_e).
///
/// Leaves output 1 iff the net weight reaching them is positive. At depth 1
/// the split search is exhaustive over midpoint thresholds. Whenever two or
/// more levels remain, a split is scored by the best depth-<=1 subtrees it
/// admits on each side, so depth-2 trees are exact maximizers (XOR-type
/// structure is found even when no single split helps). Ties keep the
/// lowest feature index, then the lowest threshold.
inline DecisionTree train_weighted_tree(std::span<const SignedExample> examples, int max_depth) {
    if (max_depth < 1) throw Error("train_weighted_tree: max_depth must be >= 1");
    if (examples.empty()) throw Error("train_weighted_tree: empty example set");
    const std::size_t dim = examples.front().features.size();
    std::vector<SignedExample> kept;
    kept.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const SignedExample& e = examples[i];
        if (e.features.size() != dim)
            throw Error(detail::concat("train_weighted_tree: example ", i, " has dimension ", e.features.size(),
                                       ", expected ", dim));
        if (!std::isfinite(e.net_weight) || !detail::all_finite(e.features))
            throw Error(detail::concat("train_weighted_tree: example ", i, " is not finite"));
        if (e.net_weight != 0.0) kept.push_back(e);
    }
    if (kept.empty()) throw Error("train_weighted_tree: all example weights are zero");
    return detail::TreeGrower(std::move(kept), dim).grow(max_depth);
}

} // namespace crftree
