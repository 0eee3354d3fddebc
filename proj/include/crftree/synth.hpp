#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crftree/graph.hpp"
#include "crftree/io.hpp"

namespace crftree {

namespace detail {

/// Platform-independent uniform draw in [0, 1).
inline double uniform01(std::mt19937_64& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& eng, double lo, double hi) { return lo + (hi - lo) * uniform01(eng); }

/// Uniform integer in [0, n).
inline std::size_t uniform_index(std::mt19937_64& eng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(eng) * static_cast<double>(n));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Quadrant q has signs (+,+), (-,+), (-,-), (+,-) for q = 0..3.
inline int quadrant_class(int q, int k) { return q % k + 1; }

inline FeatureVector xor_features(std::mt19937_64& eng, int c, int k) {
    std::vector<int> quadrants;
    for (int q = 0; q < 4; ++q) {
        if (quadrant_class(q, k) == c) quadrants.push_back(q);
    }
    const int q = quadrants[uniform_index(eng, quadrants.size())];
    const double a = std::pow(10.0, uniform(eng, -4.0, 0.0));
    const double b = std::pow(10.0, uniform(eng, -4.0, 0.0));
    const double sx = (q == 0 || q == 3) ? 1.0 : -1.0;
    const double sy = q <= 1 ? 1.0 : -1.0;
    return {sx * a, sy * b};
}

inline FeatureVector linear_features(std::mt19937_64& eng, int c) {
    const double x = static_cast<double>(c - 1) + uniform(eng, 0.1, 0.9);
    return {x, uniform01(eng)};
}

} // namespace detail

enum class SynthTask { linear, xor_task };

inline SynthTask parse_synth_task(const std::string& name) {
    if (name == "linear") return SynthTask::linear;
    if (name == "xor") return SynthTask::xor_task;
    throw Error("unknown task '" + name + "' (valid: linear, xor)");
}

/// Seed for a held-out split generated alongside the one seeded with `seed`.
inline std::uint64_t derived_seed(std::uint64_t seed) { return detail::splitmix64(seed); }

/// Grid-structured classification task.
///
/// Labels are Voronoi regions of K + 2 random seed cells; seed s takes
/// class s mod K + 1. Node features are 2-D:
///  - xor: signed log-uniform magnitudes in [1e-4, 1]; the sign quadrant
///    encodes the class (quadrant q belongs to class q mod K + 1, K <= 4).
///  - linear: (c - 1 + U[0.1, 0.9], U[0, 1]).
/// With probability `flip_noise` a node's features are drawn for a random
/// other class. Edges join 4-neighbours; edge features are |x_p - x_q| per
/// dimension plus a constant 1.
inline Dataset synth_grid_task(std::uint64_t seed, int grid_size, int num_classes, double flip_noise, SynthTask task,
                               std::size_t num_instances) {
    if (grid_size < 2) throw Error(detail::concat("synth_grid_task: grid size must be >= 2, got ", grid_size));
    if (num_classes < 2) throw Error("synth_grid_task: need at least 2 classes");
    if (task == SynthTask::xor_task && num_classes > 4) throw Error("synth_grid_task: the xor task supports K <= 4");
    if (!(flip_noise >= 0.0 && flip_noise <= 1.0)) throw Error("synth_grid_task: flip noise must lie in [0, 1]");
    const std::size_t g = static_cast<std::size_t>(grid_size);
    const std::size_t n = g * g;
    const std::size_t num_seeds = static_cast<std::size_t>(num_classes) + 2;
    if (num_seeds > n) throw Error("synth_grid_task: grid too small for the number of classes");

    std::mt19937_64 eng(seed);
    Dataset ds;
    ds.num_classes = num_classes;
    ds.dims = InstanceDims{2, 3};
    ds.instances.reserve(num_instances);
    for (std::size_t i = 0; i < num_instances; ++i) {
        std::vector<std::size_t> cells;
        while (cells.size() < num_seeds) {
            const std::size_t cell = detail::uniform_index(eng, n);
            bool fresh = true;
            for (std::size_t s : cells) fresh = fresh && s != cell;
            if (fresh) cells.push_back(cell);
        }
        std::vector<int> seed_class(num_seeds);
        for (std::size_t s = 0; s < num_seeds; ++s)
            seed_class[s] = static_cast<int>(s % static_cast<std::size_t>(num_classes)) + 1;

        std::vector<int> labels(n);
        for (std::size_t p = 0; p < n; ++p) {
            const long long r = static_cast<long long>(p / g), c = static_cast<long long>(p % g);
            long long best = -1;
            for (std::size_t s = 0; s < num_seeds; ++s) {
                const long long dr = r - static_cast<long long>(cells[s] / g);
                const long long dc = c - static_cast<long long>(cells[s] % g);
                const long long d2 = dr * dr + dc * dc;
                if (best < 0 || d2 < best) {
                    best = d2;
                    labels[p] = seed_class[s];
                }
            }
        }

        std::vector<FeatureVector> nodes(n);
        for (std::size_t p = 0; p < n; ++p) {
            int c = labels[p];
            if (detail::uniform01(eng) < flip_noise) {
                const int other = static_cast<int>(detail::uniform_index(eng, static_cast<std::size_t>(num_classes - 1))) + 1;
                c = other >= c ? other + 1 : other;
            }
            nodes[p] = task == SynthTask::xor_task ? detail::xor_features(eng, c, num_classes)
                                                   : detail::linear_features(eng, c);
        }

        std::vector<Edge> edges;
        auto link = [&](std::size_t p, std::size_t q) {
            FeatureVector f(3);
            f[0] = std::abs(nodes[p][0] - nodes[q][0]);
            f[1] = std::abs(nodes[p][1] - nodes[q][1]);
            f[2] = 1.0;
            edges.push_back(Edge{p, q, std::move(f)});
        };
        for (std::size_t p = 0; p < n; ++p) {
            if (p % g + 1 < g) link(p, p + 1);
            if (p + g < n) link(p, p + g);
        }
        ds.instances.push_back(build_instance(std::move(nodes), std::move(edges), Labeling(std::move(labels)), ds.dims));
    }
    return ds;
}

inline Dataset synth_grid_task(std::uint64_t seed, int grid_size, int num_classes, double flip_noise,
                               const std::string& task, std::size_t num_instances) {
    return synth_grid_task(seed, grid_size, num_classes, flip_noise, parse_synth_task(task), num_instances);
}

} // namespace crftree
