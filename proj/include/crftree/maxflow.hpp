#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "crftree/graph.hpp"

namespace crftree {

enum class Side { source, sink };

/// s-t network over `n` non-terminal nodes. Terminal capacities: a node on
/// the sink side cuts its source arc, a node on the source side cuts its
/// sink arc. Each pairwise edge carries a capacity per direction.
class FlowNetwork {
public:
    struct Arc {
        std::size_t p;
        std::size_t q;
        double cap_pq;
        double cap_qp;
    };

    explicit FlowNetwork(std::size_t num_nodes) : source_(num_nodes, 0.0), sink_(num_nodes, 0.0) {}

    std::size_t num_nodes() const { return source_.size(); }

    void add_terminal(std::size_t p, double source_cap, double sink_cap) {
        check_node(p);
        check_cap(source_cap);
        check_cap(sink_cap);
        source_[p] += source_cap;
        sink_[p] += sink_cap;
    }

    void add_edge(std::size_t p, std::size_t q, double cap_pq, double cap_qp) {
        check_node(p);
        check_node(q);
        if (p == q) throw Error(detail::concat("flow network: self-loop at node ", p));
        check_cap(cap_pq);
        check_cap(cap_qp);
        arcs_.push_back(Arc{p, q, cap_pq, cap_qp});
    }

    double source_cap(std::size_t p) const { return source_[p]; }
    double sink_cap(std::size_t p) const { return sink_[p]; }
    const std::vector<Arc>& arcs() const { return arcs_; }

    double max_capacity() const {
        double m = 0.0;
        for (std::size_t p = 0; p < num_nodes(); ++p) m = std::max({m, source_[p], sink_[p]});
        for (const Arc& a : arcs_) m = std::max({m, a.cap_pq, a.cap_qp});
        return m;
    }

private:
    void check_node(std::size_t p) const {
        if (p >= num_nodes())
            throw Error(detail::concat("flow network: node ", p, " out of range [0, ", num_nodes(), ")"));
    }
    static void check_cap(double c) {
        if (!(c >= 0.0) || !std::isfinite(c)) throw Error("flow network: capacities must be finite and >= 0");
    }

    std::vector<double> source_;
    std::vector<double> sink_;
    std::vector<Arc> arcs_;
};

/// Capacity of the cut induced by `side`.
inline double cut_capacity(const FlowNetwork& net, std::span<const Side> side) {
    if (side.size() != net.num_nodes()) throw Error("cut_capacity: side vector has wrong length");
    double c = 0.0;
    for (std::size_t p = 0; p < net.num_nodes(); ++p) c += side[p] == Side::sink ? net.source_cap(p) : net.sink_cap(p);
    for (const auto& a : net.arcs()) {
        if (side[a.p] == Side::source && side[a.q] == Side::sink) c += a.cap_pq;
        if (side[a.q] == Side::source && side[a.p] == Side::sink) c += a.cap_qp;
    }
    return c;
}

struct MinCut {
    double flow = 0.0;
    std::vector<Side> side;
};

namespace detail {

// Dinic's algorithm on a residual graph with paired arcs (i, i ^ 1).
class Dinic {
public:
    Dinic(std::size_t n, double tol) : head_(n, -1), tol_(tol) {}

    void add(std::size_t u, std::size_t v, double cap_uv, double cap_vu) {
        push_arc(u, v, cap_uv);
        push_arc(v, u, cap_vu);
    }

    double run(std::size_t s, std::size_t t) {
        double flow = 0.0;
        while (bfs(s, t)) {
            iter_.assign(head_.begin(), head_.end());
            while (true) {
                const double f = dfs(s, t, std::numeric_limits<double>::infinity());
                if (f <= 0.0) break;
                flow += f;
            }
        }
        return flow;
    }

    /// Nodes that can still reach `t` in the residual graph.
    std::vector<char> reaches(std::size_t t) const {
        std::vector<char> seen(head_.size(), 0);
        std::vector<std::size_t> stack{t};
        seen[t] = 1;
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            for (int a = head_[v]; a != -1; a = next_[static_cast<std::size_t>(a)]) {
                // residual arc u -> v is the partner of v -> u
                const std::size_t back = static_cast<std::size_t>(a) ^ 1U;
                const std::size_t u = to_[static_cast<std::size_t>(a)];
                if (!seen[u] && cap_[back] > tol_) {
                    seen[u] = 1;
                    stack.push_back(u);
                }
            }
        }
        return seen;
    }

private:
    void push_arc(std::size_t u, std::size_t v, double cap) {
        to_.push_back(v);
        cap_.push_back(cap);
        next_.push_back(head_[u]);
        head_[u] = static_cast<int>(to_.size() - 1);
    }

    bool bfs(std::size_t s, std::size_t t) {
        level_.assign(head_.size(), -1);
        std::queue<std::size_t> queue;
        level_[s] = 0;
        queue.push(s);
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop();
            for (int a = head_[u]; a != -1; a = next_[static_cast<std::size_t>(a)]) {
                const std::size_t v = to_[static_cast<std::size_t>(a)];
                if (level_[v] < 0 && cap_[static_cast<std::size_t>(a)] > tol_) {
                    level_[v] = level_[u] + 1;
                    queue.push(v);
                }
            }
        }
        return level_[t] >= 0;
    }

    double dfs(std::size_t u, std::size_t t, double limit) {
        if (u == t) return limit;
        for (int& a = iter_[u]; a != -1; a = next_[static_cast<std::size_t>(a)]) {
            const std::size_t ai = static_cast<std::size_t>(a);
            const std::size_t v = to_[ai];
            if (cap_[ai] <= tol_ || level_[v] != level_[u] + 1) continue;
            const double pushed = dfs(v, t, std::min(limit, cap_[ai]));
            if (pushed > 0.0) {
                cap_[ai] -= pushed;
                cap_[ai ^ 1U] += pushed;
                return pushed;
            }
        }
        return 0.0;
    }

    std::vector<int> head_;
    std::vector<int> next_;
    std::vector<std::size_t> to_;
    std::vector<double> cap_;
    std::vector<int> level_;
    std::vector<int> iter_;
    double tol_;
};

} // namespace detail

/// Exact s-t max flow. The returned partition is the maximal source side
/// (every node that cannot reach the sink in the residual graph), which is
/// a minimum cut; ties between equal cuts therefore favor Side::source.
inline MinCut max_flow_min_cut(const FlowNetwork& net) {
    const std::size_t n = net.num_nodes();
    const std::size_t s = n, t = n + 1;
    const double tol = 1e-13 * (1.0 + net.max_capacity());
    detail::Dinic dinic(n + 2, tol);
    for (std::size_t p = 0; p < n; ++p) {
        if (net.source_cap(p) > 0.0) dinic.add(s, p, net.source_cap(p), 0.0);
        if (net.sink_cap(p) > 0.0) dinic.add(p, t, net.sink_cap(p), 0.0);
    }
    for (const auto& a : net.arcs()) dinic.add(a.p, a.q, a.cap_pq, a.cap_qp);

    MinCut result;
    result.flow = dinic.run(s, t);
    const std::vector<char> to_sink = dinic.reaches(t);
    result.side.resize(n);
    for (std::size_t p = 0; p < n; ++p) result.side[p] = to_sink[p] ? Side::sink : Side::source;
    return result;
}

} // namespace crftree
