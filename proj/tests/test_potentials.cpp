#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "crftree/potentials.hpp"
#include "oracles.hpp"

namespace {

using namespace crftree;

// Nodes with 1-D features 0, 1, 2 on a triangle.
Instance triangle() {
    return build_instance({{0.0}, {1.0}, {2.0}},
                          {Edge{0, 1, {0.0}}, Edge{1, 2, {1.0}}, Edge{0, 2, {1.0}}});
}

TEST(UnaryFeatureMap, NoTrees) {
    EXPECT_TRUE(unary_feature_map(Labeling(3, 1), triangle(), PotentialModel(2)).empty());
}

TEST(UnaryFeatureMap, Counting) {
    PotentialModel m(1);
    m.add_round({DecisionTree::constant(1)}, DecisionTree::constant(0));
    EXPECT_EQ(unary_feature_map(Labeling(3, 1), triangle(), m), (std::vector<double>{3.0}));
}

TEST(UnaryFeatureMap, ClassBlocks) {
    PotentialModel m(2);
    m.add_round({DecisionTree::stump(0, 0.5, 1, 0), DecisionTree::stump(0, 0.5, 0, 1)}, DecisionTree::constant(0));
    const Labeling y(std::vector<int>{1, 2, 2});
    EXPECT_EQ(unary_feature_map(y, triangle(), m), (std::vector<double>{1.0, 2.0}));
}

TEST(UnaryFeatureMap, LabelOutOfRange) {
    PotentialModel m(2);
    m.add_round({DecisionTree::constant(1), DecisionTree::constant(1)}, DecisionTree::constant(1));
    EXPECT_THROW(unary_feature_map(Labeling(std::vector<int>{1, 3, 1}), triangle(), m), Error);
    EXPECT_THROW(energy(Labeling(std::vector<int>{0, 1, 1}), triangle(), m), Error);
}

TEST(PairwiseFeatureMap, ConstantLabelingIsZero) {
    PotentialModel m(2);
    m.add_round({DecisionTree::constant(1), DecisionTree::constant(1)}, DecisionTree::constant(1));
    EXPECT_EQ(pairwise_feature_map(Labeling(3, 2), triangle(), m), (std::vector<double>{0.0}));
}

TEST(PairwiseFeatureMap, CountsCutEdges) {
    PotentialModel m(2);
    m.add_round({DecisionTree::constant(0), DecisionTree::constant(0)}, DecisionTree::constant(1));
    // Labels (1,1,2) cut edges (1,2) and (0,2).
    EXPECT_EQ(pairwise_feature_map(Labeling(std::vector<int>{1, 1, 2}), triangle(), m), (std::vector<double>{2.0}));
}

TEST(PairwiseFeatureMap, OnlyFiringTreesCount) {
    PotentialModel m(2);
    m.add_round({DecisionTree::constant(0), DecisionTree::constant(0)}, DecisionTree::stump(0, 0.5, 1, 0));
    // Labels (1,2,2) cut (0,1) [feature 0, fires] and (0,2) [feature 1, silent].
    EXPECT_EQ(pairwise_feature_map(Labeling(std::vector<int>{1, 2, 2}), triangle(), m), (std::vector<double>{1.0}));
}

TEST(JointFeatureMap, Dimensions) {
    oracle::Rng rng(1);
    EXPECT_TRUE(joint_feature_map(Labeling(3, 1), triangle(), PotentialModel(3)).empty());
    for (int t = 1; t <= 4; ++t) {
        const PotentialModel m = oracle::random_model(rng, 3, t, 1, 1);
        EXPECT_EQ(m.dimension(), static_cast<std::size_t>(3 * t + t));
        EXPECT_EQ(joint_feature_map(Labeling(3, 2), triangle(), m).size(), m.dimension());
    }
}

TEST(Energy, EmptyModelIsZero) {
    oracle::Rng rng(2);
    const Instance inst = oracle::random_instance(rng, 5, 3);
    oracle::for_each_labeling(5, 3, [&](const Labeling& y) { EXPECT_EQ(energy(y, inst, PotentialModel(3)), 0.0); });
}

TEST(Energy, ExhaustiveFeatureMapIdentity) {
    oracle::Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const int k = 2 + trial % 2;
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 2, k == 2 ? 8 : 6));
        const Instance inst = oracle::random_instance(rng, n, k);
        const PotentialModel m = oracle::random_model(rng, k, oracle::uniform_int(rng, 1, 3));
        const std::vector<double> w = m.weights();
        oracle::for_each_labeling(n, k, [&](const Labeling& y) {
            const double e = energy(y, inst, m);
            EXPECT_LE(std::abs(e - dot(w, joint_feature_map(y, inst, m))), 1e-9 * (1.0 + std::abs(e)));
        });
    }
}

TEST(Energy, ConstantLabelingHasNoPairwiseEnergy) {
    oracle::Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const Instance inst = oracle::random_instance(rng, 6, 3);
        const PotentialModel m = oracle::random_model(rng, 3, 2);
        for (int c = 1; c <= 3; ++c) {
            for (double v : pairwise_feature_map(Labeling(6, c), inst, m)) EXPECT_EQ(v, 0.0);
        }
    }
}

TEST(Energy, ZeroWeightRoundIsNeutral) {
    oracle::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Instance inst = oracle::random_instance(rng, 6, 2);
        PotentialModel m = oracle::random_model(rng, 2, 2);
        std::vector<double> before;
        oracle::for_each_labeling(6, 2, [&](const Labeling& y) { before.push_back(energy(y, inst, m)); });
        m.add_round({oracle::random_tree(rng, 2, 2), oracle::random_tree(rng, 2, 2)}, oracle::random_tree(rng, 2, 2));
        std::size_t i = 0;
        oracle::for_each_labeling(6, 2, [&](const Labeling& y) { EXPECT_EQ(energy(y, inst, m), before[i++]); });
    }
}

TEST(Energy, ColumnTableExtensionMatchesRebuild) {
    oracle::Rng rng(6);
    const Instance inst = oracle::random_instance(rng, 7, 3);
    PotentialModel m(3);
    ColumnTable table(inst, 3);
    for (int t = 0; t < 3; ++t) {
        m.add_round({oracle::random_tree(rng, 2, 2), oracle::random_tree(rng, 2, 2), oracle::random_tree(rng, 2, 2)},
                    oracle::random_tree(rng, 2, 2));
        extend_columns(table, inst, m, m.rounds() - 1);
    }
    const ColumnTable fresh = build_columns(inst, m);
    EXPECT_EQ(table.unary, fresh.unary);
    EXPECT_EQ(table.pairwise, fresh.pairwise);
}

TEST(PotentialModel, WeightValidation) {
    PotentialModel m(2);
    m.add_round({DecisionTree::constant(1), DecisionTree::constant(1)}, DecisionTree::constant(1));
    EXPECT_THROW(m.set_weights(std::vector<double>{1.0, -0.1, 0.0}), Error);
    EXPECT_THROW(m.set_weights(std::vector<double>{1.0, 0.0}), Error);
    EXPECT_THROW(m.set_weights(std::vector<double>{1.0, std::nan(""), 0.0}), Error);
    m.set_weights(std::vector<double>{1.0, 2.0, 3.0});
    EXPECT_EQ(m.unary_weights(2), (std::vector<double>{2.0}));
    EXPECT_EQ(m.pairwise_weights(), (std::vector<double>{3.0}));
    EXPECT_THROW(m.add_round({DecisionTree::constant(1)}, DecisionTree::constant(1)), Error);
}

TEST(Submodularity, CertificateOnRandomModels) {
    oracle::Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Instance inst = oracle::random_instance(rng, 8, 2);
        const PotentialModel m = oracle::random_model(rng, 2, 3);
        const ColumnTable table = build_columns(inst, m);
        const std::vector<double> w = m.weights();
        EXPECT_TRUE(verify_submodular(table, w));
        for (std::size_t e = 0; e < table.num_edges(); ++e) {
            const EdgeCertificate cert = edge_certificate(table, w, e);
            EXPECT_EQ(cert.same, 0.0);
            EXPECT_GE(cert.different, 0.0);
            double expect = 0.0;
            const std::size_t off = table.block_offset(3);
            for (std::size_t j = 0; j < table.pairwise.size(); ++j) expect += w[off + j] * table.pairwise[j][e];
            EXPECT_DOUBLE_EQ(cert.different, 2.0 * expect);
        }
    }
}

} // namespace
