// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "crftree/crftree.hpp"
#include "oracles.hpp"

namespace {

using namespace crftree;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("%s %-28s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// ------------------------------------------------------------- inference

Outcome binary_exactness() {
    oracle::Rng rng(1001);
    double worst = 0.0;
    const auto t0 = Clock::now();
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 1, 12));
        const Instance inst = oracle::random_instance(rng, n, 2);
        const PotentialModel m = oracle::random_model(rng, 2, oracle::uniform_int(rng, 1, 3));
        const double got = energy(map_inference(inst, m), inst, m);
        worst = std::max(worst, std::abs(got - oracle::brute_min_energy(potts_energy(inst, m))));
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    return {worst <= 1e-9 && secs < 30.0, fmt("200 pairs, max |E - E*| = %.3g, %.2fs", worst, secs)};
}

Outcome loss_augmented_exactness() {
    oracle::Rng rng(1002);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 1, 12));
        const Instance inst = oracle::random_instance(rng, n, 2);
        const PotentialModel m = oracle::random_model(rng, 2, oracle::uniform_int(rng, 1, 3));
        const LossWeights lw = oracle::random_loss_weights(rng, 2);
        auto objective = [&](const Labeling& y) { return energy(y, inst, m) - weighted_hamming_loss(inst.truth(), y, lw); };
        double best = std::numeric_limits<double>::infinity();
        oracle::for_each_labeling(n, 2, [&](const Labeling& y) { best = std::min(best, objective(y)); });
        worst = std::max(worst, std::abs(objective(loss_augmented_inference(inst, m, lw)) - best));
    }
    return {worst <= 1e-9, fmt("200 pairs, max |(E - D) - opt| = %.3g", worst)};
}

Outcome alpha_expansion_bound() {
    oracle::Rng rng(1003);
    double worst_ratio = 0.0;
    int bound_fail = 0, monotone_fail = 0, binary_fail = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 1, 9));
        const Instance inst = oracle::random_instance(rng, n, 3);
        const PotentialModel m = oracle::random_model(rng, 3, oracle::uniform_int(rng, 1, 3));
        const PottsEnergy en = potts_energy(inst, m);
        const ExpansionTrace tr = alpha_expansion_traced(en, unary_argmin(en));
        const double e = en.evaluate(tr.labeling);
        const double opt = oracle::brute_min_energy(en);
        if (e > 2.0 * opt + 1e-9) ++bound_fail;
        if (opt != 0.0) worst_ratio = std::max(worst_ratio, e / opt);
        for (std::size_t i = 1; i < tr.energies.size(); ++i)
            if (!(tr.energies[i] < tr.energies[i - 1])) ++monotone_fail;
    }
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 1, 12));
        const Instance inst = oracle::random_instance(rng, n, 2);
        const PotentialModel m = oracle::random_model(rng, 2, oracle::uniform_int(rng, 1, 3));
        const PottsEnergy en = potts_energy(inst, m);
        if (alpha_expansion(en, unary_argmin(en)) != min_energy_binary(en)) ++binary_fail;
    }
    Outcome o;
    o.pass = bound_fail == 0 && monotone_fail == 0 && binary_fail == 0;
    o.detail = fmt("K=3: %g over 2x bound, %g non-decreasing moves", bound_fail, monotone_fail) +
               fmt(", max E/E* = %.4f; K=2: %g mismatches", worst_ratio, binary_fail);
    return o;
}

Outcome maxflow_oracle() {
    oracle::Rng rng(1004);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 1, 8));
        FlowNetwork net(n);
        for (std::size_t p = 0; p < n; ++p) net.add_terminal(p, oracle::uniform(rng, 0.0, 5.0), oracle::uniform(rng, 0.0, 5.0));
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (oracle::uniform(rng, 0.0, 1.0) < 0.5)
                    net.add_edge(p, q, oracle::uniform(rng, 0.0, 4.0), oracle::uniform(rng, 0.0, 4.0));
            }
        }
        const MinCut cut = max_flow_min_cut(net);
        worst = std::max(worst, std::abs(cut.flow - oracle::brute_min_cut(net)));
        worst = std::max(worst, std::abs(cut.flow - cut_capacity(net, cut.side)));
    }
    return {worst <= 1e-9, fmt("200 networks, max |flow - brute cut| = %.3g", worst)};
}

// ------------------------------------------------------------------ trees

Outcome tree_oracle() {
    oracle::Rng rng(1005);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t dim = trial % 2 == 0 ? 1 : 2;
        const int count = oracle::uniform_int(rng, 1, 10);
        std::vector<SignedExample> ex;
        for (int i = 0; i < count; ++i) {
            FeatureVector x(dim);
            // Coarse grid values so ties between points occur.
            for (double& v : x) v = oracle::uniform_int(rng, 0, 4) * 0.5;
            ex.push_back(SignedExample{x, oracle::uniform(rng, -1.0, 1.0)});
        }
        const DecisionTree t = train_weighted_tree(ex, 1);
        if (tree_objective(t, ex) != oracle::best_stump_objective(ex)) ++mismatches;
    }
    return {mismatches == 0, fmt("100 sets, %g objectives differ from exhaustive stump search", mismatches)};
}

// --------------------------------------------------------------------- qp

Outcome qp_correctness() {
    oracle::Rng rng(1006);
    double worst_gap = 0.0, worst_kkt = 0.0, worst_box = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t dim = static_cast<std::size_t>(oracle::uniform_int(rng, 1, 3));
        const int count = oracle::uniform_int(rng, 1, 4);
        const double C = std::pow(10.0, oracle::uniform(rng, -1.0, 1.5));
        std::vector<ConstraintEntry> cs;
        for (int j = 0; j < count; ++j) {
            ConstraintEntry c;
            c.d.resize(dim);
            for (double& x : c.d) x = oracle::uniform(rng, -1.0, 2.0);
            c.b = oracle::uniform(rng, 0.0, 2.0);
            cs.push_back(std::move(c));
        }
        const QPSolution sol = solve_restricted_qp(cs, C, dim);
        worst_gap = std::max(worst_gap, std::abs(sol.objective - oracle::qp_grid_search(cs, C, dim)));
        worst_kkt = std::max({worst_kkt, sol.stationarity, sol.complementarity});
        double total = 0.0;
        for (double m : sol.mu) total += m;
        worst_box = std::max(worst_box, total - C);
    }
    Outcome o;
    o.pass = worst_gap <= 1e-3 && worst_kkt <= 1e-6 && worst_box <= 1e-9;
    o.detail = fmt("50 QPs, max |obj - grid| = %.3g, KKT residual %.3g, max(sum mu - C) = %.3g", worst_gap, worst_kkt,
                   worst_box);
    return o;
}

// ------------------------------------------------------------- potentials

Outcome energy_identity() {
    oracle::Rng rng(1007);
    double worst = 0.0;
    long long labelings = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const int k = 2 + trial % 2;
        const std::size_t n = static_cast<std::size_t>(oracle::uniform_int(rng, 1, k == 2 ? 8 : 7));
        const Instance inst = oracle::random_instance(rng, n, k);
        const PotentialModel m = oracle::random_model(rng, k, oracle::uniform_int(rng, 1, 3));
        const ColumnTable table = build_columns(inst, m);
        const std::vector<double> w = m.weights();
        oracle::for_each_labeling(n, k, [&](const Labeling& y) {
            worst = std::max(worst, std::abs(energy(y, inst, m) - dot(w, joint_feature_map(y, table))));
            ++labelings;
        });
    }
    return {worst <= 1e-9, fmt("%g labelings, max |E - w.Psi| = %.3g", static_cast<double>(labelings), worst)};
}

// ---------------------------------------------------------------- training

struct Headline {
    Dataset train, test;
    LossWeights lw = LossWeights::uniform(2);
    TrainConfig cfg;
    TrainResult result;
    double seconds = 0.0;
    bool ran = false;
};

constexpr std::uint64_t kHeadlineSeed = 1;

Headline& headline() {
    static Headline h;
    if (h.ran) return h;
    h.train = synth_grid_task(kHeadlineSeed, 8, 2, 0.1, SynthTask::xor_task, 30);
    h.test = synth_grid_task(derived_seed(kHeadlineSeed), 8, 2, 0.1, SynthTask::xor_task, 30);
    h.lw = class_frequency_weights(h.train.instances, 2);
    h.cfg.C = 1.0;
    h.cfg.tree_depth = 2;
    h.cfg.cg_iters = 20;
    const auto t0 = Clock::now();
    h.result = train_crftree(h.train.instances, 2, h.lw, h.cfg);
    h.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    h.ran = true;
    return h;
}

Outcome submodularity() {
    Headline& h = headline();
    const std::vector<double> w = h.result.model.weights();
    long long edges = 0, bad = 0;
    for (const Dataset* ds : {&h.train, &h.test}) {
        for (const Instance& inst : ds->instances) {
            const ColumnTable table = build_columns(inst, h.result.model);
            for (std::size_t e = 0; e < table.num_edges(); ++e) {
                const EdgeCertificate cert = edge_certificate(table, w, e);
                if (!(cert.same == 0.0 && cert.different >= 0.0)) ++bad;
                ++edges;
            }
        }
    }
    for (double x : w)
        if (!(x >= 0.0)) ++bad;
    return {bad == 0 && edges > 0, fmt("%g edges checked on the trained model, %g violations", static_cast<double>(edges),
                                       static_cast<double>(bad))};
}

Outcome cutting_plane_contract() {
    Headline& h = headline();
    int unconverged_rounds = 0;
    for (const RoundReport& r : h.result.rounds)
        if (!r.cp_converged) ++unconverged_rounds;
    // Replay the final fit from w = 0 to inspect its per-iteration trace.
    const CuttingPlaneResult cp = cutting_plane(h.train.instances, PotentialModel(h.result.model), h.lw, h.cfg);
    int drops = 0;
    for (std::size_t i = 1; i < cp.stats.objectives.size(); ++i) {
        const double prev = cp.stats.objectives[i - 1];
        if (cp.stats.objectives[i] < prev - 1e-9 * (1.0 + std::abs(prev))) ++drops;
    }
    const double final_violation = cp.stats.violations.empty() ? 0.0 : cp.stats.violations.back();
    Outcome o;
    o.pass = unconverged_rounds == 0 && drops == 0 && cp.stats.converged && final_violation <= 0.01 &&
             cp.stats.iterations <= 100;
    o.detail = fmt("%g/%g rounds converged; replay: %g iterations", static_cast<double>(h.result.rounds.size()) - unconverged_rounds,
                   static_cast<double>(h.result.rounds.size()), cp.stats.iterations) +
               fmt(", final violation %.4g, %g objective decreases", final_violation, drops);
    return o;
}

Outcome nonlinearity_headline() {
    Headline& h = headline();
    ConfusionCounts tree(2), linear(2);
    for (const Instance& inst : h.test.instances) tree.add(inst.truth(), map_inference(inst, h.result.model));
    const auto t0 = Clock::now();
    const LinearTrainResult lin = train_linear_ssvm(h.train.instances, 2, h.lw, h.cfg);
    const double lin_secs = std::chrono::duration<double>(Clock::now() - t0).count();
    for (const Instance& inst : h.test.instances) linear.add(inst.truth(), lin.model.predict(inst));
    const double a = tree.accuracy().value, b = linear.accuracy().value;
    const double total = h.seconds + lin_secs;
    Outcome o;
    o.pass = a >= 0.90 && a - b >= 0.10 && total < 300.0 && h.result.rounds.size() == 20;
    o.detail = fmt("seed 1: tree acc %.4f, linear acc %.4f, gap %.4f", a, b, a - b) +
               fmt(", %.1fs train", total);
    return o;
}

Outcome reproducibility() {
    Headline& h = headline();
    ModelFile first;
    first.model = h.result.model;
    first.dims = h.train.dims;
    ModelFile second = first;
    second.model = train_crftree(h.train.instances, 2, h.lw, h.cfg).model;
    const std::string a = dump_model(first), b = dump_model(second);
    return {a == b, fmt("two headline trainings, %g-byte model dumps, identical: %g", static_cast<double>(a.size()),
                        a == b ? 1.0 : 0.0)};
}

} // namespace

int main() {
    report("binary-inference-exactness", binary_exactness);
    report("loss-augmented-exactness", loss_augmented_exactness);
    report("alpha-expansion", alpha_expansion_bound);
    report("max-flow-oracle", maxflow_oracle);
    report("tree-training-oracle", tree_oracle);
    report("qp-correctness", qp_correctness);
    report("energy-identity", energy_identity);
    report("submodularity-certificate", submodularity);
    report("cutting-plane-contract", cutting_plane_contract);
    report("nonlinearity-headline", nonlinearity_headline);
    report("reproducibility", reproducibility);
    std::printf("%s: %d failing criteria\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
