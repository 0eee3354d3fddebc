#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "crftree/inference.hpp"
#include "oracles.hpp"

namespace {

using namespace crftree;

PottsEnergy random_potts(oracle::Rng& rng, std::size_t n, int k, double edge_prob = 0.4) {
    PottsEnergy en(n, k);
    for (std::size_t p = 0; p < n; ++p) {
        for (int c = 1; c <= k; ++c) en.unary(p, c) = oracle::uniform(rng, -2.0, 2.0);
    }
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (oracle::uniform(rng, 0.0, 1.0) < edge_prob) en.add_edge(p, q, oracle::uniform(rng, 0.0, 1.5));
        }
    }
    return en;
}

TEST(PottsEnergy, Validation) {
    PottsEnergy en(3, 2);
    EXPECT_THROW(en.add_edge(0, 0, 1.0), Error);
    EXPECT_THROW(en.add_edge(0, 3, 1.0), Error);
    EXPECT_THROW(en.add_edge(0, 1, -0.5), Error);
    EXPECT_THROW(en.evaluate(Labeling(std::vector<int>{1, 3, 1})), Error);
    EXPECT_THROW(PottsEnergy(2, 0), Error);
}

TEST(MinEnergyBinary, EmptyModelTieBreaksToOne) {
    oracle::Rng rng(1);
    const Instance inst = oracle::random_instance(rng, 6, 2);
    EXPECT_EQ(min_energy_binary(inst, PotentialModel(2)), Labeling(6, 1));
}

TEST(MinEnergyBinary, RequiresTwoClasses) {
    oracle::Rng rng(2);
    const Instance inst = oracle::random_instance(rng, 4, 3);
    EXPECT_THROW(min_energy_binary(inst, PotentialModel(3)), Error);
    EXPECT_THROW(min_energy_binary(PottsEnergy(4, 3)), Error);
}

TEST(MinEnergyBinary, NoPairwiseMeansIndependentArgmin) {
    oracle::Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const PottsEnergy en = random_potts(rng, 8, 2, 0.0);
        EXPECT_EQ(min_energy_binary(en), unary_argmin(en));
    }
}

TEST(MinEnergyBinary, MatchesExhaustiveOnTreeModels) {
    oracle::Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 4, 12));
        const Instance inst = oracle::random_instance(rng, n, 2);
        const PotentialModel m = oracle::random_model(rng, 2, oracle::uniform_int(rng, 1, 3));
        const PottsEnergy en = potts_energy(inst, m);
        const Labeling y = min_energy_binary(inst, m);
        EXPECT_NEAR(energy(y, inst, m), oracle::brute_min_energy(en), 1e-9) << "trial " << trial;
    }
}

TEST(LossAugmented, EmptyModelPicksSmallestOtherClass) {
    oracle::Rng rng(5);
    for (int k = 2; k <= 4; ++k) {
        const Instance inst = oracle::random_instance(rng, 7, k);
        const Labeling y = loss_augmented_inference(inst, PotentialModel(k), LossWeights::uniform(k));
        for (std::size_t p = 0; p < y.size(); ++p) {
            const int expect = inst.truth()[p] == 1 ? 2 : 1;
            EXPECT_EQ(y[p], expect);
        }
    }
}

TEST(LossAugmented, ZeroLossReducesToMap) {
    oracle::Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + trial % 2;
        Instance inst = oracle::random_instance(rng, 8, k);
        inst = inst.with_truth(Labeling(8, 1));
        std::vector<double> c(static_cast<std::size_t>(k), 1.0);
        c[0] = 0.0;  // truth is all class 1, so Delta vanishes identically
        const PotentialModel m = oracle::random_model(rng, k, 2);
        EXPECT_EQ(loss_augmented_inference(inst, m, LossWeights(c)), map_inference(inst, m));
    }
}

TEST(LossAugmented, BinaryMatchesExhaustive) {
    oracle::Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 2, 12));
        const Instance inst = oracle::random_instance(rng, n, 2);
        const PotentialModel m = oracle::random_model(rng, 2, oracle::uniform_int(rng, 1, 3));
        const LossWeights lw = oracle::random_loss_weights(rng, 2);
        double best = std::numeric_limits<double>::infinity();
        oracle::for_each_labeling(n, 2, [&](const Labeling& y) {
            best = std::min(best, energy(y, inst, m) - weighted_hamming_loss(inst.truth(), y, lw));
        });
        const Labeling y = loss_augmented_inference(inst, m, lw);
        EXPECT_NEAR(energy(y, inst, m) - weighted_hamming_loss(inst.truth(), y, lw), best, 1e-9) << "trial " << trial;
    }
}

TEST(LossAugmented, MissingTruth) {
    oracle::Rng rng(8);
    const Instance inst = oracle::random_instance(rng, 4, 2).without_truth();
    EXPECT_THROW(loss_augmented_inference(inst, PotentialModel(2), LossWeights::uniform(2)), Error);
}

TEST(ExpansionMove, OptimalAmongAllMoves) {
    oracle::Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = oracle::uniform_int(rng, 3, 4);
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 2, 9));
        const PottsEnergy en = random_potts(rng, n, k);
        std::vector<int> cur(n);
        for (int& y : cur) y = oracle::uniform_int(rng, 1, k);
        const int alpha = oracle::uniform_int(rng, 1, k);
        const Labeling next = expansion_move(en, Labeling(cur), alpha);
        for (std::size_t p = 0; p < n; ++p) EXPECT_TRUE(next[p] == cur[p] || next[p] == alpha);
        EXPECT_NEAR(en.evaluate(next), oracle::brute_expansion_move(en, Labeling(cur), alpha), 1e-9)
            << "trial " << trial;
    }
}

TEST(AlphaExpansion, ThreeClassBoundAndLocalOptimality) {
    oracle::Rng rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 2, 9));
        const Instance inst = oracle::random_instance(rng, n, 3);
        const PotentialModel m = oracle::random_model(rng, 3, oracle::uniform_int(rng, 1, 3));
        const PottsEnergy en = potts_energy(inst, m);
        const ExpansionTrace tr = alpha_expansion_traced(en, unary_argmin(en));
        const double e = en.evaluate(tr.labeling);
        const double opt = oracle::brute_min_energy(en);
        EXPECT_LE(e, 2.0 * opt + 1e-9) << "trial " << trial;
        for (std::size_t i = 1; i < tr.energies.size(); ++i) EXPECT_LT(tr.energies[i], tr.energies[i - 1]);
        EXPECT_LE(tr.sweeps, 3 * static_cast<int>(n));
        for (int alpha = 1; alpha <= 3; ++alpha)
            EXPECT_GE(oracle::brute_expansion_move(en, tr.labeling, alpha), e - 1e-9) << "trial " << trial;
    }
}

TEST(AlphaExpansion, MoveEnergiesStrictlyDecreaseWithNegativeUnaries) {
    oracle::Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const PottsEnergy en = random_potts(rng, 9, 4);
        Labeling init(9, 1);
        const ExpansionTrace tr = alpha_expansion_traced(en, init);
        for (std::size_t i = 1; i < tr.energies.size(); ++i) EXPECT_LT(tr.energies[i], tr.energies[i - 1]);
        EXPECT_DOUBLE_EQ(tr.energies.back(), en.evaluate(tr.labeling));
    }
}

TEST(AlphaExpansion, BinaryMatchesExactCut) {
    oracle::Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 2, 12));
        const Instance inst = oracle::random_instance(rng, n, 2);
        const PotentialModel m = oracle::random_model(rng, 2, 2);
        const PottsEnergy en = potts_energy(inst, m);
        const Labeling exact = min_energy_binary(en);
        std::vector<int> init(n);
        for (int& y : init) y = oracle::uniform_int(rng, 1, 2);
        const Labeling ae = alpha_expansion(en, Labeling(init));
        EXPECT_LE(std::abs(en.evaluate(ae) - en.evaluate(exact)), 1e-12 * (1.0 + std::abs(en.evaluate(exact))));
        EXPECT_EQ(alpha_expansion(en, exact), exact);
    }
}

TEST(AlphaExpansion, FixedPointReturnedUnchanged) {
    oracle::Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const PottsEnergy en = random_potts(rng, 8, 3);
        const Labeling y = alpha_expansion(en, unary_argmin(en));
        EXPECT_EQ(alpha_expansion(en, y), y);
    }
}

TEST(Inference, UnaryShiftInvariance) {
    oracle::Rng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 2 + trial % 3;
        // Integer-valued energies keep the shifted sums exact.
        PottsEnergy en(8, k);
        for (std::size_t p = 0; p < 8; ++p) {
            for (int c = 1; c <= k; ++c) en.unary(p, c) = oracle::uniform_int(rng, -4, 4);
        }
        for (std::size_t p = 0; p + 1 < 8; ++p) en.add_edge(p, p + 1, oracle::uniform_int(rng, 0, 3));
        const Labeling base = map_inference(en);
        PottsEnergy shifted = en;
        const std::size_t node = static_cast<std::size_t>(oracle::uniform_int(rng, 0, 7));
        const double shift = oracle::uniform_int(rng, -5, 5);
        for (int c = 1; c <= k; ++c) shifted.unary(node, c) += shift;
        EXPECT_EQ(map_inference(shifted), base) << "trial " << trial;
    }
}

} // namespace
