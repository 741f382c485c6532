#pragma once

#include <cstddef>
#include <vector>

namespace dpsr {

/**
 * Sum tree over a fixed number of non-negative leaf weights.
 *
 * Implicit complete binary tree in a flat array: node 1 is the root, node i
 * has children 2i and 2i+1, and leaves live at [leaf_base, 2 * leaf_base)
 * where leaf_base is the capacity rounded up to a power of two. Padding
 * leaves stay at weight 0.
 *
 * Every write recomputes each ancestor as the sum of its two children, so
 * internal nodes never accumulate incremental drift.
 */
class PrefixSumTree {
public:
    explicit PrefixSumTree(std::size_t capacity);

    std::size_t capacity() const noexcept { return capacity_; }

    /// Throws RangeError for a bad index and InvalidWeightError for a
    /// negative or non-finite weight.
    void set_weight(std::size_t index, double w);

    double weight(std::size_t index) const;

    double total() const noexcept { return nodes_[1]; }

    /// Smallest index i with leaf[0] + ... + leaf[i] > u. A zero-weight leaf
    /// is never returned. Requires 0 <= u < total().
    std::size_t find_prefix(double u) const;

    /// Recomputes every internal node from the leaves.
    void rebuild();

    void clear();

private:
    std::size_t capacity_;
    std::size_t leaf_base_;
    std::vector<double> nodes_;
};

/**
 * Min/max segment tree. Leaves are either occupied (hold a value) or unset;
 * queries aggregate over occupied leaves only.
 */
class ExtremaTree {
public:
    explicit ExtremaTree(std::size_t capacity);

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t occupied_count() const noexcept { return occupied_; }

    void update(std::size_t index, double v);
    void clear(std::size_t index);
    bool occupied(std::size_t index) const;
    double value(std::size_t index) const;

    /// Both throw EmptyStructureError when no leaf is occupied.
    double query_min() const;
    double query_max() const;

private:
    void propagate(std::size_t node);

    std::size_t capacity_;
    std::size_t leaf_base_;
    std::size_t occupied_ = 0;
    std::vector<double> min_;
    std::vector<double> max_;
    std::vector<bool> set_;
};

}  // namespace dpsr
