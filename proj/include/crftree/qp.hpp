#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "crftree/graph.hpp"

namespace crftree {

/// One aggregated 1-slack constraint  w.d >= b - xi  with
///   d = (1/m) sum_i r_i [Psi(y*_i) - Psi(y_i)],  b = (1/m) sum_i r_i Delta(y_i, y*_i).
/// `r` and `violated` record which labelings were aggregated; both may be
/// left empty for a bare (d, b) constraint.
struct ConstraintEntry {
    std::vector<std::uint8_t> r;
    std::vector<Labeling> violated;
    std::vector<double> d;
    double b = 0.0;
};

struct QPSolution {
    std::vector<double> w;
    double xi = 0.0;
    std::vector<double> mu;  // one multiplier per constraint
    double objective = 0.0;  // 0.5 |w|^2 + C xi
    double dual_objective = 0.0;
    double stationarity = 0.0;     // |proj(w - sum_j mu_j d_j)|_inf
    double complementarity = 0.0;  // max_j mu_j |b_j - xi - w.d_j|, and the slack's (C - sum mu) xi
    int iterations = 0;
};

struct QpOptions {
    int max_iterations = 10000;  // passes; each pass is (#constraints + 1) pair updates
    double tolerance = 1e-6;     // KKT residual accepted at the iteration cap
};

class QpError : public Error {
public:
    QpError(const std::string& what, double residual) : Error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

namespace detail {

// Largest t in [0, t_max] maximizing  db*t - 0.5 |(v + t u)_+|^2.
inline double pair_step(std::span<const double> v, std::span<const double> u, double db, double t_max) {
    auto slope = [&](double t) {
        double s = db;
        for (std::size_t k = 0; k < v.size(); ++k) s -= u[k] * std::max(0.0, v[k] + t * u[k]);
        return s;
    };
    if (slope(t_max) >= 0.0) return t_max;
    double lo = 0.0, hi = t_max;
    for (int it = 0; it < 200 && hi - lo > 1e-300; ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    // Solve the linear piece containing the bracket exactly.
    const double mid = lo + 0.5 * (hi - lo);
    double num = db, den = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (v[k] + mid * u[k] > 0.0) {
            num -= u[k] * v[k];
            den += u[k] * u[k];
        }
    }
    if (den > 0.0) {
        const double t = num / den;
        if (t >= lo && t <= hi) return t;
    }
    return mid;
}

} // namespace detail

/// Solves  min 0.5|w|^2 + C xi  s.t.  w >= 0, xi >= 0, w.d_j >= b_j - xi
/// through its dual
///   max_mu  sum_j mu_j b_j - 0.5 |(sum_j mu_j d_j)_+|^2,  mu >= 0, sum_j mu_j <= C,
/// with w = (sum_j mu_j d_j)_+. The slack multiplier C - sum_j mu_j is kept as
/// an extra coordinate so the feasible set is a simplex, and each step moves
/// mass along the maximally violating pair with an exact line search.
inline QPSolution solve_restricted_qp(std::span<const ConstraintEntry> constraints, double C, std::size_t dim,
                                      const QpOptions& opts = {}) {
    if (!(C > 0.0) || !std::isfinite(C)) throw Error("solve_restricted_qp: C must be positive and finite");
    const std::size_t J = constraints.size();
    double b_scale = 1.0;
    for (std::size_t j = 0; j < J; ++j) {
        const auto& c = constraints[j];
        if (c.d.size() != dim)
            throw Error(detail::concat("solve_restricted_qp: constraint ", j, " has dimension ", c.d.size(),
                                       ", expected ", dim));
        if (!std::isfinite(c.b) || !detail::all_finite(c.d))
            throw Error(detail::concat("solve_restricted_qp: constraint ", j, " is not finite"));
        b_scale = std::max(b_scale, std::abs(c.b));
    }

    // Coordinate 0 is the slack multiplier (d = 0, b = 0).
    std::vector<double> mu(J + 1, 0.0);
    mu[0] = C;
    std::vector<double> v(dim, 0.0), w(dim, 0.0), g(J + 1, 0.0), u(dim);
    auto b_of = [&](std::size_t j) { return j == 0 ? 0.0 : constraints[j - 1].b; };
    auto refresh = [&] {
        for (std::size_t k = 0; k < dim; ++k) w[k] = std::max(0.0, v[k]);
        g[0] = 0.0;
        for (std::size_t j = 1; j <= J; ++j) {
            double s = 0.0;
            const auto& d = constraints[j - 1].d;
            for (std::size_t k = 0; k < dim; ++k) s += d[k] * w[k];
            g[j] = constraints[j - 1].b - s;
        }
    };
    refresh();

    const double gap_tol = 1e-13 * b_scale;
    const long long max_steps = static_cast<long long>(opts.max_iterations) * static_cast<long long>(J + 1);
    std::size_t up = 0, down = 0;
    auto select_pair = [&] {
        up = 0;
        down = J + 1;
        for (std::size_t j = 0; j <= J; ++j) {
            if (g[j] > g[up]) up = j;
            if (mu[j] > 0.0 && (down > J || g[j] < g[down])) down = j;
        }
        return g[up] - g[down];
    };
    long long steps = 0;
    for (; steps < max_steps; ++steps) {
        const double gap = select_pair();
        if (gap <= gap_tol || up == down) break;

        for (std::size_t k = 0; k < dim; ++k) {
            const double di = up == 0 ? 0.0 : constraints[up - 1].d[k];
            const double dk = down == 0 ? 0.0 : constraints[down - 1].d[k];
            u[k] = di - dk;
        }
        const double t_max = mu[down];
        const double t = detail::pair_step(v, u, b_of(up) - b_of(down), t_max);
        if (t <= 0.0) break;
        mu[up] += t;
        mu[down] = t >= t_max ? 0.0 : mu[down] - t;
        for (std::size_t k = 0; k < dim; ++k) v[k] += t * u[k];
        refresh();
    }

    // Rebuild v from mu to shed accumulated drift, then recover the primal.
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t j = 1; j <= J; ++j) {
        if (mu[j] == 0.0) continue;
        for (std::size_t k = 0; k < dim; ++k) v[k] += mu[j] * constraints[j - 1].d[k];
    }
    refresh();

    QPSolution sol;
    sol.w = w;
    sol.mu.assign(mu.begin() + 1, mu.end());
    sol.xi = 0.0;
    for (std::size_t j = 1; j <= J; ++j) sol.xi = std::max(sol.xi, g[j]);
    double wn = 0.0, mub = 0.0;
    for (double x : w) wn += x * x;
    for (std::size_t j = 1; j <= J; ++j) mub += mu[j] * b_of(j);
    sol.objective = 0.5 * wn + C * sol.xi;
    sol.dual_objective = mub - 0.5 * wn;
    for (std::size_t k = 0; k < dim; ++k) {
        const double r = w[k] - v[k];
        if (!(w[k] == 0.0 && v[k] <= 0.0)) sol.stationarity = std::max(sol.stationarity, std::abs(r));
    }
    for (std::size_t j = 1; j <= J; ++j)
        sol.complementarity = std::max(sol.complementarity, mu[j] * std::abs(g[j] - sol.xi));
    sol.complementarity = std::max(sol.complementarity, mu[0] * sol.xi);
    sol.iterations = static_cast<int>(steps);

    if (select_pair() > gap_tol) {
        const double residual = std::max(sol.stationarity, sol.complementarity);
        if (residual > opts.tolerance)
            throw QpError(detail::concat("solve_restricted_qp: no convergence after ", steps,
                                         " pair updates (KKT residual ", residual, ")"),
                          residual);
    }
    return sol;
}

/// Dual weight of one (example, violated labeling) pair.
struct LambdaEntry {
    std::size_t example = 0;
    Labeling labeling;
    double weight = 0.0;
};

/// Sorted by (example, labeling); only positive weights are kept.
using LambdaMap = std::vector<LambdaEntry>;

/// lambda_(i, y) = sum over constraints j with r^j_i = 1 and violated_j[i] = y of mu_j / m.
inline LambdaMap extract_lambda(const QPSolution& sol, std::span<const ConstraintEntry> constraints) {
    if (sol.mu.size() != constraints.size())
        throw Error(detail::concat("extract_lambda: ", sol.mu.size(), " multipliers for ", constraints.size(),
                                   " constraints"));
    std::map<std::pair<std::size_t, Labeling>, double> acc;
    for (std::size_t j = 0; j < constraints.size(); ++j) {
        if (sol.mu[j] <= 0.0) continue;
        const auto& c = constraints[j];
        const double m = static_cast<double>(c.r.size());
        for (std::size_t i = 0; i < c.r.size(); ++i) {
            if (!c.r[i]) continue;
            if (i >= c.violated.size())
                throw Error(detail::concat("extract_lambda: constraint ", j, " lacks a labeling for example ", i));
            acc[{i, c.violated[i]}] += sol.mu[j] / m;
        }
    }
    LambdaMap out;
    out.reserve(acc.size());
    for (auto& [key, weight] : acc) out.push_back(LambdaEntry{key.first, key.second, weight});
    return out;
}

} // namespace crftree
