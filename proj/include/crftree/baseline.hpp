#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "crftree/graph.hpp"
#include "crftree/inference.hpp"
#include "crftree/learner.hpp"
#include "crftree/potentials.hpp"

namespace crftree {

/// Linear-feature CRF: class c's unary column block is [x, -x, 1] on the node
/// features (both signs, since weights are nonnegative), and the pairwise
/// block is |f_d| for each edge feature d.
inline ColumnTable linear_columns(const Instance& inst, int num_classes) {
    ColumnTable table(inst, num_classes);
    const std::size_t d = inst.node_dim();
    for (int c = 1; c <= num_classes; ++c) {
        auto& cols = table.unary[static_cast<std::size_t>(c - 1)];
        cols.assign(2 * d + 1, std::vector<double>(inst.num_nodes()));
        for (std::size_t p = 0; p < inst.num_nodes(); ++p) {
            const auto x = inst.node(p);
            for (std::size_t k = 0; k < d; ++k) {
                cols[k][p] = x[k];
                cols[d + k][p] = -x[k];
            }
            cols[2 * d][p] = 1.0;
        }
    }
    table.pairwise.assign(inst.edge_dim(), std::vector<double>(inst.num_edges()));
    for (std::size_t e = 0; e < inst.num_edges(); ++e) {
        const auto& f = inst.edge(e).features;
        for (std::size_t k = 0; k < f.size(); ++k) table.pairwise[k][e] = std::abs(f[k]);
    }
    return table;
}

struct LinearModel {
    int num_classes = 0;
    std::vector<double> w;

    Labeling predict(const Instance& inst) const { return map_inference(potts_energy(linear_columns(inst, num_classes), w)); }
};

struct LinearTrainResult {
    LinearModel model;
    CuttingPlaneStats stats;
};

/// Same 1-slack cutting-plane trainer as the tree model, on linear columns.
inline LinearTrainResult train_linear_ssvm(std::span<const Instance> data, int num_classes, const LossWeights& lw,
                                           const TrainConfig& cfg) {
    if (data.empty()) throw Error("train_linear_ssvm: empty training set");
    std::vector<ColumnTable> tables;
    tables.reserve(data.size());
    for (const Instance& inst : data) tables.push_back(linear_columns(inst, num_classes));
    CuttingPlaneResult cp =
        cutting_plane(data, tables, std::vector<double>(tables[0].dimension(), 0.0), lw, cfg);
    return LinearTrainResult{LinearModel{num_classes, std::move(cp.w)}, std::move(cp.stats)};
}

} // namespace crftree
