#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "crftree/graph.hpp"

namespace crftree {

/// A metric value plus whether it was well defined (0/0 cases report 0 and
/// defined = false instead of failing).
struct MetricValue {
    double value = 0.0;
    bool defined = true;
};

/// Pooled per-class TP/FP/FN counts over any number of labelings.
class ConfusionCounts {
public:
    explicit ConfusionCounts(int num_classes)
        : k_(num_classes), tp_(static_cast<std::size_t>(num_classes) + 1, 0),
          fp_(tp_.size(), 0), fn_(tp_.size(), 0) {}

    void add(const Labeling& truth, const Labeling& pred) {
        if (truth.size() != pred.size())
            throw Error(detail::concat("metrics: lengths differ (", truth.size(), " vs ", pred.size(), ")"));
        for (std::size_t p = 0; p < truth.size(); ++p) {
            const int t = truth[p], y = pred[p];
            if (t < 1 || t > k_ || y < 1 || y > k_)
                throw Error(detail::concat("metrics: label outside [1, ", k_, "] at node ", p));
            ++total_;
            if (t == y) {
                ++correct_;
                ++tp_[static_cast<std::size_t>(t)];
            } else {
                ++fn_[static_cast<std::size_t>(t)];
                ++fp_[static_cast<std::size_t>(y)];
            }
        }
    }

    int num_classes() const { return k_; }
    std::size_t total() const { return total_; }

    /// Whether class c occurs in the truth or the prediction.
    bool present(int c) const { return tp(c) + fp(c) + fn(c) > 0; }

    MetricValue accuracy() const {
        if (total_ == 0) return {0.0, false};
        return {static_cast<double>(correct_) / static_cast<double>(total_), true};
    }

    /// TP / (TP + FP + FN).
    MetricValue iou(int c) const {
        const std::size_t denom = tp(c) + fp(c) + fn(c);
        if (denom == 0) return {0.0, false};
        return {static_cast<double>(tp(c)) / static_cast<double>(denom), true};
    }

    /// F = 2pr / (p + r) with p = TP/(TP+FP), r = TP/(TP+FN).
    MetricValue f_score(int c) const {
        const double t = static_cast<double>(tp(c));
        const double p = tp(c) + fp(c) ? t / static_cast<double>(tp(c) + fp(c)) : 0.0;
        const double r = tp(c) + fn(c) ? t / static_cast<double>(tp(c) + fn(c)) : 0.0;
        if (p + r == 0.0) return {0.0, false};
        return {2.0 * p * r / (p + r), true};
    }

    std::size_t tp(int c) const { return tp_.at(static_cast<std::size_t>(c)); }
    std::size_t fp(int c) const { return fp_.at(static_cast<std::size_t>(c)); }
    std::size_t fn(int c) const { return fn_.at(static_cast<std::size_t>(c)); }

private:
    int k_;
    std::vector<std::size_t> tp_, fp_, fn_;
    std::size_t correct_ = 0;
    std::size_t total_ = 0;
};

namespace detail {

inline int max_label(const Labeling& a, const Labeling& b) {
    int k = 1;
    for (int x : a) k = std::max(k, x);
    for (int x : b) k = std::max(k, x);
    return k;
}

inline ConfusionCounts confusion(const Labeling& truth, const Labeling& pred, int at_least) {
    if (truth.size() != pred.size())
        throw Error(detail::concat("metrics: lengths differ (", truth.size(), " vs ", pred.size(), ")"));
    ConfusionCounts counts(std::max(at_least, max_label(truth, pred)));
    counts.add(truth, pred);
    return counts;
}

} // namespace detail

inline double pixel_accuracy(const Labeling& truth, const Labeling& pred) {
    return detail::confusion(truth, pred, 1).accuracy().value;
}

inline MetricValue intersection_over_union(const Labeling& truth, const Labeling& pred, int c) {
    return detail::confusion(truth, pred, c).iou(c);
}

inline MetricValue f_score(const Labeling& truth, const Labeling& pred, int c) {
    return detail::confusion(truth, pred, c).f_score(c);
}

} // namespace crftree
