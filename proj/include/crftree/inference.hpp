#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "crftree/graph.hpp"
#include "crftree/maxflow.hpp"
#include "crftree/potentials.hpp"

namespace crftree {

/// Energy with arbitrary per-node unaries and Potts pairwise terms:
///   E(y) = sum_p U(p, y_p) + sum_e weight_e [y_p != y_q],  weight_e >= 0.
/// Every tree-potential energy has this form once the column outputs are
/// contracted with w.
class PottsEnergy {
public:
    struct Term {
        std::size_t p;
        std::size_t q;
        double weight;
    };

    PottsEnergy(std::size_t num_nodes, int num_classes)
        : n_(num_nodes), k_(num_classes), unary_(num_nodes * static_cast<std::size_t>(num_classes), 0.0) {
        if (num_classes < 1) throw Error("PottsEnergy: num_classes must be >= 1");
    }

    std::size_t num_nodes() const { return n_; }
    int num_classes() const { return k_; }

    double unary(std::size_t p, int c) const { return unary_[index(p, c)]; }
    double& unary(std::size_t p, int c) { return unary_[index(p, c)]; }

    void add_edge(std::size_t p, std::size_t q, double weight) {
        if (p >= n_ || q >= n_ || p == q) throw Error(detail::concat("PottsEnergy: bad edge (", p, ",", q, ")"));
        if (!(weight >= 0.0) || !std::isfinite(weight))
            throw Error(detail::concat("PottsEnergy: edge (", p, ",", q, ") weight ", weight,
                                       " breaks submodularity (must be finite and >= 0)"));
        terms_.push_back(Term{p, q, weight});
    }
    const std::vector<Term>& edges() const { return terms_; }

    double evaluate(const Labeling& y) const {
        validate_labeling(y, n_, k_);
        double e = 0.0;
        for (std::size_t p = 0; p < n_; ++p) e += unary(p, y[p]);
        for (const Term& t : terms_) {
            if (y[t.p] != y[t.q]) e += t.weight;
        }
        return e;
    }

private:
    std::size_t index(std::size_t p, int c) const {
        return p * static_cast<std::size_t>(k_) + static_cast<std::size_t>(c - 1);
    }

    std::size_t n_;
    int k_;
    std::vector<double> unary_;
    std::vector<Term> terms_;
};

/// Contracts the column outputs with w.
inline PottsEnergy potts_energy(const ColumnTable& table, std::span<const double> w) {
    if (w.size() != table.dimension())
        throw Error(detail::concat("potts_energy: weight dimension ", w.size(), ", model dimension ",
                                   table.dimension()));
    PottsEnergy en(table.num_nodes, table.num_classes);
    for (int c = 1; c <= table.num_classes; ++c) {
        const std::size_t off = table.block_offset(c);
        const auto& cols = table.unary[static_cast<std::size_t>(c - 1)];
        for (std::size_t p = 0; p < table.num_nodes; ++p) {
            double u = 0.0;
            for (std::size_t t = 0; t < cols.size(); ++t) u += w[off + t] * cols[t][p];
            en.unary(p, c) = u;
        }
    }
    for (std::size_t e = 0; e < table.num_edges(); ++e)
        en.add_edge(table.edges[e].first, table.edges[e].second, pairwise_potential(table, w, e, 1, 2));
    return en;
}

inline PottsEnergy potts_energy(const Instance& inst, const PotentialModel& model) {
    return potts_energy(build_columns(inst, model), model.weights());
}

/// Folds -Delta(truth, y) into the unaries: every class other than truth[p]
/// gets -c_{truth[p]}. Minimizing the result minimizes E(y) - Delta(truth, y).
inline PottsEnergy absorb_loss(PottsEnergy energy, const Labeling& truth, const LossWeights& lw) {
    validate_labeling(truth, energy.num_nodes(), energy.num_classes());
    if (lw.num_classes() != energy.num_classes())
        throw Error(detail::concat("absorb_loss: loss weights cover ", lw.num_classes(), " classes, energy has ",
                                   energy.num_classes()));
    for (std::size_t p = 0; p < energy.num_nodes(); ++p) {
        const double c = lw.cost(truth[p]);
        for (int k = 1; k <= energy.num_classes(); ++k) {
            if (k != truth[p]) energy.unary(p, k) -= c;
        }
    }
    return energy;
}

/// Per-node unary minimizer, lowest class on ties.
inline Labeling unary_argmin(const PottsEnergy& energy) {
    Labeling y(energy.num_nodes(), 1);
    for (std::size_t p = 0; p < energy.num_nodes(); ++p) {
        for (int c = 2; c <= energy.num_classes(); ++c) {
            if (energy.unary(p, c) < energy.unary(p, y[p])) y[p] = c;
        }
    }
    return y;
}

/// Exact minimizer for K = 2 via one s-t min cut (label 1 = source side).
/// Among minimizers the one with the most nodes at label 1 is returned.
inline Labeling min_energy_binary(const PottsEnergy& energy) {
    if (energy.num_classes() != 2)
        throw Error(detail::concat("min_energy_binary: requires 2 classes, got ", energy.num_classes()));
    FlowNetwork net(energy.num_nodes());
    for (std::size_t p = 0; p < energy.num_nodes(); ++p) {
        const double u1 = energy.unary(p, 1), u2 = energy.unary(p, 2);
        const double m = std::min(u1, u2);
        net.add_terminal(p, u2 - m, u1 - m);
    }
    for (const auto& t : energy.edges()) {
        if (t.weight > 0.0) net.add_edge(t.p, t.q, t.weight, t.weight);
    }
    const MinCut cut = max_flow_min_cut(net);
    Labeling y(energy.num_nodes(), 1);
    for (std::size_t p = 0; p < energy.num_nodes(); ++p) {
        if (cut.side[p] == Side::sink) y[p] = 2;
    }
    return y;
}

/// Best labeling reachable from `current` by one alpha-expansion move: each
/// node either keeps its label (source side) or switches to alpha (sink side).
inline Labeling expansion_move(const PottsEnergy& energy, const Labeling& current, int alpha) {
    const std::size_t n = energy.num_nodes();
    std::vector<double> cost_keep(n), cost_switch(n);
    for (std::size_t p = 0; p < n; ++p) {
        cost_keep[p] = energy.unary(p, current[p]);
        cost_switch[p] = energy.unary(p, alpha);
    }
    FlowNetwork net(n);
    for (const auto& t : energy.edges()) {
        const int a = current[t.p], b = current[t.q];
        // E(x_p, x_q) = A + (C - A) x_p + (D - C) x_q + (B + C - A - D)(1 - x_p) x_q
        const double A = a != b ? t.weight : 0.0;
        const double B = a != alpha ? t.weight : 0.0;
        const double C = alpha != b ? t.weight : 0.0;
        const double D = 0.0;
        cost_switch[t.p] += C - A;
        cost_switch[t.q] += D - C;
        const double cross = std::max(0.0, B + C - A - D);
        if (cross > 0.0) net.add_edge(t.p, t.q, cross, 0.0);
    }
    for (std::size_t p = 0; p < n; ++p) {
        const double m = std::min(cost_keep[p], cost_switch[p]);
        net.add_terminal(p, cost_switch[p] - m, cost_keep[p] - m);
    }
    const MinCut cut = max_flow_min_cut(net);
    Labeling next = current;
    for (std::size_t p = 0; p < n; ++p) {
        if (cut.side[p] == Side::sink) next[p] = alpha;
    }
    return next;
}

struct ExpansionTrace {
    Labeling labeling;
    /// Energy of the initial labeling followed by that of every accepted move.
    std::vector<double> energies;
    int sweeps = 0;
};

/// Alpha-expansion from `init`, cycling alpha = 1..K until a full sweep
/// accepts no move; a move is accepted only if it strictly lowers the
/// energy. For K = 2 the single binary min cut is already globally optimal,
/// so it replaces the sweep and is accepted only if it improves on `init`.
inline ExpansionTrace alpha_expansion_traced(const PottsEnergy& energy, Labeling init) {
    validate_labeling(init, energy.num_nodes(), energy.num_classes());
    ExpansionTrace trace;
    double current = energy.evaluate(init);
    trace.energies.push_back(current);
    trace.labeling = std::move(init);
    auto improves = [](double candidate, double incumbent) {
        return candidate < incumbent - 1e-12 * (1.0 + std::abs(incumbent));
    };

    if (energy.num_classes() == 2) {
        trace.sweeps = 1;
        Labeling exact = min_energy_binary(energy);
        const double e = energy.evaluate(exact);
        if (improves(e, current)) {
            trace.labeling = std::move(exact);
            trace.energies.push_back(e);
        }
        return trace;
    }
    if (energy.num_classes() < 2) return trace;

    bool changed = true;
    while (changed) {
        changed = false;
        ++trace.sweeps;
        for (int alpha = 1; alpha <= energy.num_classes(); ++alpha) {
            Labeling candidate = expansion_move(energy, trace.labeling, alpha);
            const double e = energy.evaluate(candidate);
            if (improves(e, current)) {
                current = e;
                trace.labeling = std::move(candidate);
                trace.energies.push_back(e);
                changed = true;
            }
        }
    }
    return trace;
}

inline Labeling alpha_expansion(const PottsEnergy& energy, Labeling init) {
    return alpha_expansion_traced(energy, std::move(init)).labeling;
}

/// MAP labeling: exact min cut for K = 2, alpha-expansion from the unary
/// argmin otherwise.
inline Labeling map_inference(const PottsEnergy& energy) {
    if (energy.num_classes() == 2) return min_energy_binary(energy);
    return alpha_expansion(energy, unary_argmin(energy));
}

/// argmin_y E(y) - Delta(truth, y); exact for K = 2.
inline Labeling loss_augmented_inference(const PottsEnergy& energy, const Labeling& truth, const LossWeights& lw) {
    return map_inference(absorb_loss(energy, truth, lw));
}

inline Labeling min_energy_binary(const Instance& inst, const PotentialModel& model) {
    if (model.num_classes() != 2)
        throw Error(detail::concat("min_energy_binary: requires 2 classes, got ", model.num_classes()));
    return min_energy_binary(potts_energy(inst, model));
}

inline Labeling alpha_expansion(const Instance& inst, const PotentialModel& model, Labeling init) {
    return alpha_expansion(potts_energy(inst, model), std::move(init));
}

inline Labeling map_inference(const Instance& inst, const PotentialModel& model) {
    return map_inference(potts_energy(inst, model));
}

inline Labeling loss_augmented_inference(const Instance& inst, const Labeling& truth, const PotentialModel& model,
                                         const LossWeights& lw) {
    return loss_augmented_inference(potts_energy(inst, model), truth, lw);
}

/// Uses the instance's own ground truth; throws if it has none.
inline Labeling loss_augmented_inference(const Instance& inst, const PotentialModel& model, const LossWeights& lw) {
    if (!inst.has_truth()) throw Error("loss_augmented_inference: instance has no ground truth");
    return loss_augmented_inference(inst, inst.truth(), model, lw);
}

} // namespace crftree
