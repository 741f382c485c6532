#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "dpsr/errors.hpp"
#include "dpsr/priority_index.hpp"
#include "dpsr/rng.hpp"
#include "oracles.hpp"

using dpsr::ExtremaTree;
using dpsr::PrefixSumTree;

namespace {

PrefixSumTree tree_of(const std::vector<double>& weights) {
    PrefixSumTree tree(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        tree.set_weight(i, weights[i]);
    }
    return tree;
}

}  // namespace

TEST(PrefixSumTree, TotalOfOnes) {
    PrefixSumTree tree(4);
    for (std::size_t i = 0; i < 4; ++i) tree.set_weight(i, 1.0);
    EXPECT_EQ(tree.total(), 4.0);
    tree.set_weight(2, 5.0);
    EXPECT_EQ(tree.total(), 8.0);
}

TEST(PrefixSumTree, RejectsBadWeightsAndIndexes) {
    PrefixSumTree tree(4);
    EXPECT_THROW(tree.set_weight(0, -1.0), dpsr::InvalidWeightError);
    EXPECT_THROW(tree.set_weight(0, std::numeric_limits<double>::infinity()), dpsr::InvalidWeightError);
    EXPECT_THROW(tree.set_weight(0, std::numeric_limits<double>::quiet_NaN()), dpsr::InvalidWeightError);
    EXPECT_THROW(tree.set_weight(4, 1.0), dpsr::RangeError);
    EXPECT_THROW(tree.weight(4), dpsr::RangeError);
    EXPECT_THROW(PrefixSumTree(0), dpsr::SizeError);
}

TEST(PrefixSumTree, UnsetLeavesAreZero) {
    PrefixSumTree tree(5);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(tree.weight(i), 0.0);
    EXPECT_EQ(tree.total(), 0.0);
}

TEST(PrefixSumTree, FindPrefixExamples) {
    const PrefixSumTree tree = tree_of({1, 2, 3, 4});
    EXPECT_EQ(tree.find_prefix(3.5), 2u);
    EXPECT_EQ(tree.find_prefix(0.0), 0u);
    EXPECT_EQ(tree.find_prefix(9.999), 3u);
    EXPECT_THROW(tree.find_prefix(10.0), dpsr::RangeError);
    EXPECT_THROW(tree.find_prefix(-0.5), dpsr::RangeError);

    EXPECT_EQ(tree_of({0, 7}).find_prefix(0.0), 1u);
}

TEST(PrefixSumTree, BoundaryGoesToNextLeaf) {
    const PrefixSumTree tree = tree_of({1, 2, 3, 4});
    EXPECT_EQ(tree.find_prefix(1.0), 1u);
    EXPECT_EQ(tree.find_prefix(3.0), 2u);
    EXPECT_EQ(tree.find_prefix(6.0), 3u);
}

TEST(PrefixSumTree, ZeroWeightLeavesNeverReturned) {
    const PrefixSumTree tree = tree_of({0, 2, 0, 0, 3, 0});
    for (double u = 0.0; u < 5.0; u += 0.25) {
        const std::size_t i = tree.find_prefix(u);
        EXPECT_TRUE(i == 1 || i == 4) << "u=" << u;
    }
}

TEST(PrefixSumTree, EmptyTreeFind) {
    PrefixSumTree tree(3);
    EXPECT_THROW(tree.find_prefix(0.0), dpsr::EmptyStructureError);
}

TEST(PrefixSumTree, IdempotentSet) {
    PrefixSumTree tree = tree_of({0.5, 0.25, 2.0});
    const double before = tree.total();
    tree.set_weight(1, 0.25);
    tree.set_weight(1, 0.25);
    EXPECT_EQ(tree.total(), before);
}

TEST(PrefixSumTree, RandomOperationsMatchLinearScan) {
    // Dyadic weights keep every partial sum exact, so agreement must be exact.
    constexpr std::size_t kCapacity = 37;
    PrefixSumTree tree(kCapacity);
    std::vector<double> weights(kCapacity, 0.0);
    dpsr::Rng rng(2024, 0);
    for (int op = 0; op < 10'000; ++op) {
        if (op % 2 == 0 || tree.total() == 0.0) {
            const std::size_t i = rng.uniform_index(kCapacity);
            const double w = rng.uniform() < 0.2 ? 0.0 : static_cast<double>(rng.uniform_index(1024)) / 64.0;
            tree.set_weight(i, w);
            weights[i] = w;
        } else {
            const double u = rng.uniform() * tree.total();
            ASSERT_EQ(tree.find_prefix(u), oracle::linear_find_prefix(weights, u)) << "op " << op;
        }
        ASSERT_EQ(tree.total(), std::accumulate(weights.begin(), weights.end(), 0.0));
    }
}

TEST(PrefixSumTree, RebuildKeepsSums) {
    PrefixSumTree tree = tree_of({0.1, 0.2, 0.3, 0.7, 1e-9});
    const double before = tree.total();
    tree.rebuild();
    EXPECT_NEAR(tree.total(), before, 1e-12);
    tree.clear();
    EXPECT_EQ(tree.total(), 0.0);
}

TEST(PrefixSumTree, EmpiricalFrequencies) {
    const std::vector<double> weights = {1, 0, 3, 0.5, 2, 7, 0.25, 4};
    const PrefixSumTree tree = tree_of(weights);
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> counts(weights.size(), 0.0);
    dpsr::Rng rng(9, 0);
    constexpr int kDraws = 200'000;
    for (int d = 0; d < kDraws; ++d) {
        counts[tree.find_prefix(rng.uniform() * tree.total())] += 1.0;
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        EXPECT_NEAR(counts[i] / kDraws, weights[i] / total, 0.005);
    }
}

TEST(ExtremaTree, Examples) {
    ExtremaTree tree(3);
    tree.update(0, 3);
    tree.update(1, 1);
    tree.update(2, 2);
    EXPECT_EQ(tree.query_min(), 1.0);
    EXPECT_EQ(tree.query_max(), 3.0);
    tree.update(1, 5);
    EXPECT_EQ(tree.query_max(), 5.0);
    EXPECT_EQ(tree.query_min(), 2.0);

    ExtremaTree single(1);
    single.update(0, 4);
    EXPECT_EQ(single.query_min(), 4.0);
    EXPECT_EQ(single.query_max(), 4.0);
}

TEST(ExtremaTree, EmptyQueriesThrow) {
    ExtremaTree tree(4);
    EXPECT_THROW(tree.query_min(), dpsr::EmptyStructureError);
    EXPECT_THROW(tree.query_max(), dpsr::EmptyStructureError);
    tree.update(2, -1.5);
    tree.clear(2);
    EXPECT_THROW(tree.query_max(), dpsr::EmptyStructureError);
    EXPECT_THROW(tree.update(4, 1.0), dpsr::RangeError);
}

TEST(ExtremaTree, RandomOperationsMatchScan) {
    constexpr std::size_t kCapacity = 29;
    ExtremaTree tree(kCapacity);
    std::vector<double> values(kCapacity);
    std::vector<bool> set(kCapacity, false);
    dpsr::Rng rng(77, 0);
    for (int op = 0; op < 5'000; ++op) {
        const std::size_t i = rng.uniform_index(kCapacity);
        if (rng.uniform() < 0.2) {
            tree.clear(i);
            set[i] = false;
        } else {
            values[i] = rng.uniform() * 200.0 - 100.0;
            tree.update(i, values[i]);
            set[i] = true;
        }
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        std::size_t count = 0;
        for (std::size_t j = 0; j < kCapacity; ++j) {
            if (set[j]) {
                lo = std::min(lo, values[j]);
                hi = std::max(hi, values[j]);
                ++count;
            }
        }
        ASSERT_EQ(tree.occupied_count(), count);
        if (count > 0) {
            ASSERT_EQ(tree.query_min(), lo);
            ASSERT_EQ(tree.query_max(), hi);
        }
    }
}
