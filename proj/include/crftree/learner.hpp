#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "crftree/dtree.hpp"
#include "crftree/graph.hpp"
#include "crftree/inference.hpp"
#include "crftree/potentials.hpp"
#include "crftree/qp.hpp"

namespace crftree {

struct TrainConfig {
    double C = 1.0;
    int cg_iters = 50;
    int tree_depth = 2;
    double eps_cp = 0.01;
    int max_cp_iters = 100;
    std::uint64_t seed = 0;
    /// Stop column generation once no new tree has a positive dual objective.
    bool kkt_early_stop = true;
    QpOptions qp;

    void validate() const {
        if (!(C > 0.0) || !std::isfinite(C)) throw Error("TrainConfig: C must be positive");
        if (cg_iters < 0) throw Error("TrainConfig: cg_iters must be >= 0");
        if (tree_depth < 1) throw Error("TrainConfig: tree_depth must be >= 1");
        if (!(eps_cp > 0.0)) throw Error("TrainConfig: eps_cp must be positive");
        if (max_cp_iters < 1) throw Error("TrainConfig: max_cp_iters must be >= 1");
    }
};

namespace detail {

inline void check_training_set(std::span<const Instance> data, int num_classes) {
    if (data.empty()) throw Error("training set is empty");
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!data[i].has_truth()) throw Error(concat("training instance ", i, " has no ground truth"));
        validate_labeling(data[i].truth(), data[i].num_nodes(), num_classes);
    }
}

inline void check_lambda(std::span<const Instance> data, const LambdaMap& lambda) {
    if (lambda.empty()) throw Error("tree generation: empty lambda map (no dual signal)");
    for (const LambdaEntry& e : lambda) {
        if (e.example >= data.size()) throw Error(concat("lambda entry refers to example ", e.example));
        if (e.labeling.size() != data[e.example].num_nodes())
            throw Error(concat("lambda entry for example ", e.example, " has a labeling of the wrong length"));
    }
}

inline double lambda_mass(const LambdaMap& lambda) {
    double s = 0.0;
    for (const LambdaEntry& e : lambda) s += e.weight;
    return s;
}

inline bool is_cut(const Labeling& y, const Edge& e) { return y[e.p] != y[e.q]; }

} // namespace detail

/// Net-weighted node examples for the class-c unary tree: node p of example
/// i gains +lambda if the violated labeling puts c there and -lambda if the
/// truth does.
inline std::vector<SignedExample> unary_examples(std::span<const Instance> data, const LambdaMap& lambda, int c) {
    detail::check_lambda(data, lambda);
    std::vector<std::vector<double>> net(data.size());
    for (const LambdaEntry& e : lambda) {
        const Instance& inst = data[e.example];
        const Labeling& truth = inst.truth();
        auto& row = net[e.example];
        row.resize(inst.num_nodes(), 0.0);
        for (std::size_t p = 0; p < inst.num_nodes(); ++p) {
            const int delta = (e.labeling[p] == c) - (truth[p] == c);
            if (delta != 0) row[p] += e.weight * delta;
        }
    }
    const double drop = 1e-14 * detail::lambda_mass(lambda);
    std::vector<SignedExample> out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t p = 0; p < net[i].size(); ++p) {
            if (std::abs(net[i][p]) > drop) out.push_back(SignedExample{data[i].nodes()[p], net[i][p]});
        }
    }
    return out;
}

/// Net-weighted edge examples for the pairwise tree: +lambda where the
/// violated labeling cuts the edge, -lambda where the truth does.
inline std::vector<SignedExample> pairwise_examples(std::span<const Instance> data, const LambdaMap& lambda) {
    detail::check_lambda(data, lambda);
    std::vector<std::vector<double>> net(data.size());
    for (const LambdaEntry& e : lambda) {
        const Instance& inst = data[e.example];
        auto& row = net[e.example];
        row.resize(inst.num_edges(), 0.0);
        for (std::size_t k = 0; k < inst.num_edges(); ++k) {
            const int delta = detail::is_cut(e.labeling, inst.edge(k)) - detail::is_cut(inst.truth(), inst.edge(k));
            if (delta != 0) row[k] += e.weight * delta;
        }
    }
    const double drop = 1e-14 * detail::lambda_mass(lambda);
    std::vector<SignedExample> out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t k = 0; k < net[i].size(); ++k) {
            if (std::abs(net[i][k]) > drop) out.push_back(SignedExample{data[i].edge(k).features, net[i][k]});
        }
    }
    return out;
}

/// One tree per class; a class without any nonzero net example gets a
/// constant-0 tree.
inline std::vector<DecisionTree> generate_unary_trees(std::span<const Instance> data, const LambdaMap& lambda,
                                                      int num_classes, int depth) {
    std::vector<DecisionTree> trees;
    trees.reserve(static_cast<std::size_t>(num_classes));
    for (int c = 1; c <= num_classes; ++c) {
        const auto examples = unary_examples(data, lambda, c);
        trees.push_back(examples.empty() ? DecisionTree::constant(0) : train_weighted_tree(examples, depth));
    }
    return trees;
}

inline DecisionTree generate_pairwise_tree(std::span<const Instance> data, const LambdaMap& lambda, int depth) {
    const auto examples = pairwise_examples(data, lambda);
    return examples.empty() ? DecisionTree::constant(0) : train_weighted_tree(examples, depth);
}

/// Largest value, over the new trees, of sum_{i,y} lambda_(i,y) times that
/// tree's Psi-coordinate difference Psi(y) - Psi(y_i). Zero or below means no
/// new column violates the KKT condition w >= sum lambda [Psi(y) - Psi(y_i)].
inline double kkt_violation(std::span<const Instance> data, const LambdaMap& lambda,
                            std::span<const DecisionTree> unary_trees, const DecisionTree& pairwise_tree) {
    double best = 0.0;
    bool any = false;
    auto take = [&](double v) {
        best = any ? std::max(best, v) : v;
        any = true;
    };
    for (std::size_t c = 0; c < unary_trees.size(); ++c) {
        const int label = static_cast<int>(c) + 1;
        double v = 0.0;
        for (const LambdaEntry& e : lambda) {
            const Instance& inst = data[e.example];
            double coord = 0.0;
            for (std::size_t p = 0; p < inst.num_nodes(); ++p) {
                const double h = unary_trees[c].eval(inst.node(p));
                coord += h * ((e.labeling[p] == label) ? 1.0 : 0.0) - h * ((inst.truth()[p] == label) ? 1.0 : 0.0);
            }
            v += e.weight * coord;
        }
        take(v);
    }
    double v = 0.0;
    for (const LambdaEntry& e : lambda) {
        const Instance& inst = data[e.example];
        double coord = 0.0;
        for (std::size_t k = 0; k < inst.num_edges(); ++k) {
            const double h = pairwise_tree.eval(inst.edge(k).features);
            coord += h * detail::is_cut(e.labeling, inst.edge(k)) - h * detail::is_cut(inst.truth(), inst.edge(k));
        }
        v += e.weight * coord;
    }
    take(v);
    return any ? best : 0.0;
}

struct CuttingPlaneStats {
    int iterations = 0;
    /// Restricted objective 0.5|w|^2 + C xi after each QP solve.
    std::vector<double> objectives;
    /// (1/m) sum_i max(0, H_i) - xi after each solve, where
    /// H_i = Delta_i - w.[Psi(y*_i) - Psi(y_i)] at the fresh most-violated labelings.
    std::vector<double> violations;
    bool converged = false;
    /// 0.5|w|^2 + (C/m) sum_i max(0, H_i) at the final w.
    double risk = 0.0;
};

struct CuttingPlaneResult {
    std::vector<double> w;
    double xi = 0.0;
    LambdaMap lambda;
    std::vector<ConstraintEntry> working_set;
    CuttingPlaneStats stats;
};

/// 1-slack cutting-plane training of w for fixed columns. Starts from an
/// empty working set; `w_start` only seeds the first most-violated labelings.
/// r_i = 1 iff example i's margin violation H_i is positive at the current w.
inline CuttingPlaneResult cutting_plane(std::span<const Instance> data, std::span<const ColumnTable> tables,
                                        std::vector<double> w_start, const LossWeights& lw, const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t m = data.size();
    if (m == 0 || tables.size() != m) throw Error("cutting_plane: need one column table per training instance");
    const std::size_t dim = tables[0].dimension();
    const int k = tables[0].num_classes;
    detail::check_training_set(data, k);
    for (std::size_t i = 0; i < m; ++i) {
        if (tables[i].dimension() != dim || tables[i].num_classes != k)
            throw Error(detail::concat("cutting_plane: column table ", i, " does not match table 0"));
    }
    if (w_start.size() != dim)
        throw Error(detail::concat("cutting_plane: start weights have dimension ", w_start.size(), ", expected ", dim));

    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<std::vector<double>> psi_truth(m);
    for (std::size_t i = 0; i < m; ++i) psi_truth[i] = joint_feature_map(data[i].truth(), tables[i]);

    struct Margins {
        std::vector<double> loss;
        std::vector<std::vector<double>> dpsi;
        std::vector<double> h;
    };
    auto most_violated = [&](std::span<const double> w) {
        std::vector<Labeling> ystar(m);
        for (std::size_t i = 0; i < m; ++i)
            ystar[i] = loss_augmented_inference(potts_energy(tables[i], w), data[i].truth(), lw);
        return ystar;
    };
    auto margins = [&](const std::vector<Labeling>& ystar, std::span<const double> w) {
        Margins mg;
        mg.loss.resize(m);
        mg.dpsi.resize(m);
        mg.h.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            mg.loss[i] = weighted_hamming_loss(data[i].truth(), ystar[i], lw);
            std::vector<double> d = joint_feature_map(ystar[i], tables[i]);
            for (std::size_t j = 0; j < dim; ++j) d[j] -= psi_truth[i][j];
            mg.h[i] = mg.loss[i] - dot(w, d);
            mg.dpsi[i] = std::move(d);
        }
        return mg;
    };
    auto mean_hinge = [&](const Margins& mg) {
        double s = 0.0;
        for (double h : mg.h) s += std::max(0.0, h);
        return s * inv_m;
    };

    CuttingPlaneResult res;
    res.w = std::move(w_start);
    std::vector<Labeling> ystar = most_violated(res.w);
    Margins mg = margins(ystar, res.w);

    for (int it = 0; it < cfg.max_cp_iters; ++it) {
        ConstraintEntry c;
        c.r.resize(m);
        c.d.assign(dim, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            c.r[i] = mg.h[i] > 0.0 ? 1 : 0;
            if (!c.r[i]) continue;
            for (std::size_t j = 0; j < dim; ++j) c.d[j] += mg.dpsi[i][j] * inv_m;
            c.b += mg.loss[i] * inv_m;
        }
        c.violated = ystar;
        res.working_set.push_back(std::move(c));

        const QPSolution sol = solve_restricted_qp(res.working_set, cfg.C, dim, cfg.qp);
        res.w = sol.w;
        res.xi = sol.xi;
        res.lambda = extract_lambda(sol, res.working_set);
        res.stats.objectives.push_back(sol.objective);
        res.stats.iterations = it + 1;

        ystar = most_violated(res.w);
        mg = margins(ystar, res.w);
        const double violation = mean_hinge(mg) - res.xi;
        res.stats.violations.push_back(violation);
        if (violation <= cfg.eps_cp) {
            res.stats.converged = true;
            break;
        }
    }
    res.stats.risk = 0.5 * dot(res.w, res.w) + cfg.C * mean_hinge(mg);
    return res;
}

inline CuttingPlaneResult cutting_plane(std::span<const Instance> data, const PotentialModel& model,
                                        const LossWeights& lw, const TrainConfig& cfg) {
    std::vector<ColumnTable> tables;
    tables.reserve(data.size());
    for (const Instance& inst : data) tables.push_back(build_columns(inst, model));
    return cutting_plane(data, tables, model.weights(), lw, cfg);
}

/// Exact regularized risk 0.5|w|^2 + (C/m) sum_i max(0, max_y Delta - w.[Psi(y) - Psi(y_i)]),
/// the inner max found by loss-augmented inference (exact for K = 2).
inline double regularized_risk(std::span<const Instance> data, const PotentialModel& model, const LossWeights& lw,
                               double C) {
    const std::vector<double> w = model.weights();
    double hinge = 0.0;
    for (const Instance& inst : data) {
        const ColumnTable table = build_columns(inst, model);
        const Labeling y = loss_augmented_inference(potts_energy(table, w), inst.truth(), lw);
        const double h = weighted_hamming_loss(inst.truth(), y, lw) -
                         (energy(y, table, w) - energy(inst.truth(), table, w));
        hinge += std::max(0.0, h);
    }
    return 0.5 * dot(w, w) + C * hinge / static_cast<double>(data.size());
}

struct RoundReport {
    int round = 0;
    int cp_iterations = 0;
    bool cp_converged = false;
    double objective = 0.0;
    double xi = 0.0;
    double max_tree_objective = 0.0;
    double train_risk = 0.0;
    int constant_trees = 0;
};

struct TrainResult {
    PotentialModel model;
    std::vector<RoundReport> rounds;
    bool stopped_early = false;
};

/// Column generation of class-wise unary trees and one pairwise tree per
/// round, with w re-fitted by cutting_plane() after each round.
///
/// The initial dual weights come from loss-augmented inference under the
/// empty model: lambda_(i, y^_i) = C/m. New trees enter with weight 0 and the
/// previous w seeds the next round's first most-violated labelings.
inline TrainResult train_crftree(std::span<const Instance> data, int num_classes, const LossWeights& lw,
                                 const TrainConfig& cfg,
                                 const std::function<void(const RoundReport&)>& on_round = {}) {
    cfg.validate();
    if (num_classes < 2) throw Error("train_crftree: need at least 2 classes");
    detail::check_training_set(data, num_classes);
    if (lw.num_classes() != num_classes)
        throw Error(detail::concat("train_crftree: loss weights cover ", lw.num_classes(), " classes, data has ",
                                   num_classes));

    const std::size_t m = data.size();
    TrainResult result;
    result.model = PotentialModel(num_classes);
    std::vector<ColumnTable> tables;
    tables.reserve(m);
    for (const Instance& inst : data) tables.emplace_back(inst, num_classes);

    LambdaMap lambda;
    for (std::size_t i = 0; i < m; ++i) {
        const PottsEnergy empty(data[i].num_nodes(), num_classes);
        lambda.push_back(
            LambdaEntry{i, loss_augmented_inference(empty, data[i].truth(), lw), cfg.C / static_cast<double>(m)});
    }

    for (int round = 1; round <= cfg.cg_iters; ++round) {
        if (lambda.empty()) {
            result.stopped_early = true;
            break;
        }
        std::vector<DecisionTree> unary = generate_unary_trees(data, lambda, num_classes, cfg.tree_depth);
        DecisionTree pairwise = generate_pairwise_tree(data, lambda, cfg.tree_depth);
        const double max_obj = kkt_violation(data, lambda, unary, pairwise);
        if (cfg.kkt_early_stop && max_obj <= 1e-9) {
            result.stopped_early = true;
            break;
        }

        RoundReport report;
        report.round = round;
        report.max_tree_objective = max_obj;
        for (const auto& t : unary) report.constant_trees += t.is_constant();
        report.constant_trees += pairwise.is_constant();

        result.model.add_round(std::move(unary), std::move(pairwise));
        for (std::size_t i = 0; i < m; ++i)
            extend_columns(tables[i], data[i], result.model, result.model.rounds() - 1);

        CuttingPlaneResult cp = cutting_plane(data, tables, result.model.weights(), lw, cfg);
        result.model.set_weights(cp.w);
        lambda = std::move(cp.lambda);

        report.cp_iterations = cp.stats.iterations;
        report.cp_converged = cp.stats.converged;
        report.objective = cp.stats.objectives.empty() ? 0.0 : cp.stats.objectives.back();
        report.xi = cp.xi;
        report.train_risk = cp.stats.risk;
        result.rounds.push_back(report);
        if (on_round) on_round(report);
    }
    return result;
}

} // namespace crftree
