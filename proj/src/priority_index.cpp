#include "dpsr/priority_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dpsr/errors.hpp"

namespace dpsr {

namespace {

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

void check_index(std::size_t index, std::size_t capacity) {
    if (index >= capacity) {
        throw RangeError("index " + std::to_string(index) + " out of range for capacity " +
                         std::to_string(capacity));
    }
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

PrefixSumTree::PrefixSumTree(std::size_t capacity)
    : capacity_(capacity), leaf_base_(next_power_of_two(capacity)), nodes_(2 * leaf_base_, 0.0) {
    if (capacity == 0) {
        throw SizeError("PrefixSumTree capacity must be positive");
    }
}

void PrefixSumTree::set_weight(std::size_t index, double w) {
    check_index(index, capacity_);
    if (!(w >= 0.0) || !std::isfinite(w)) {
        throw InvalidWeightError("weight must be finite and non-negative, got " + std::to_string(w));
    }
    std::size_t node = leaf_base_ + index;
    nodes_[node] = w;
    for (node >>= 1; node >= 1; node >>= 1) {
        nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
    }
}

double PrefixSumTree::weight(std::size_t index) const {
    check_index(index, capacity_);
    return nodes_[leaf_base_ + index];
}

std::size_t PrefixSumTree::find_prefix(double u) const {
    const double total = nodes_[1];
    if (total <= 0.0) {
        throw EmptyStructureError("find_prefix on a tree with zero total weight");
    }
    if (!(u >= 0.0) || !(u < total)) {
        throw RangeError("prefix query " + std::to_string(u) + " outside [0, " + std::to_string(total) + ")");
    }
    // Descend into a child with positive weight only; the strict comparison
    // sends exact boundary values to the right.
    std::size_t node = 1;
    while (node < leaf_base_) {
        const std::size_t left = 2 * node;
        if (u < nodes_[left] || nodes_[left + 1] <= 0.0) {
            node = left;
        } else {
            u -= nodes_[left];
            node = left + 1;
        }
    }
    return node - leaf_base_;
}

void PrefixSumTree::rebuild() {
    for (std::size_t node = leaf_base_ - 1; node >= 1; --node) {
        nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
    }
}

void PrefixSumTree::clear() { std::fill(nodes_.begin(), nodes_.end(), 0.0); }

ExtremaTree::ExtremaTree(std::size_t capacity)
    : capacity_(capacity),
      leaf_base_(next_power_of_two(capacity)),
      min_(2 * leaf_base_, kInf),
      max_(2 * leaf_base_, -kInf),
      set_(capacity, false) {
    if (capacity == 0) {
        throw SizeError("ExtremaTree capacity must be positive");
    }
}

void ExtremaTree::propagate(std::size_t node) {
    for (node >>= 1; node >= 1; node >>= 1) {
        min_[node] = std::min(min_[2 * node], min_[2 * node + 1]);
        max_[node] = std::max(max_[2 * node], max_[2 * node + 1]);
    }
}

void ExtremaTree::update(std::size_t index, double v) {
    check_index(index, capacity_);
    if (!std::isfinite(v)) {
        throw InvalidWeightError("extrema value must be finite");
    }
    if (!set_[index]) {
        set_[index] = true;
        ++occupied_;
    }
    const std::size_t node = leaf_base_ + index;
    min_[node] = v;
    max_[node] = v;
    propagate(node);
}

void ExtremaTree::clear(std::size_t index) {
    check_index(index, capacity_);
    if (!set_[index]) {
        return;
    }
    set_[index] = false;
    --occupied_;
    const std::size_t node = leaf_base_ + index;
    min_[node] = kInf;
    max_[node] = -kInf;
    propagate(node);
}

bool ExtremaTree::occupied(std::size_t index) const {
    check_index(index, capacity_);
    return set_[index];
}

double ExtremaTree::value(std::size_t index) const {
    check_index(index, capacity_);
    if (!set_[index]) {
        throw EmptyStructureError("leaf " + std::to_string(index) + " is unset");
    }
    return min_[leaf_base_ + index];
}

double ExtremaTree::query_min() const {
    if (occupied_ == 0) {
        throw EmptyStructureError("query_min on empty ExtremaTree");
    }
    return min_[1];
}

double ExtremaTree::query_max() const {
    if (occupied_ == 0) {
        throw EmptyStructureError("query_max on empty ExtremaTree");
    }
    return max_[1];
}

}  // namespace dpsr
