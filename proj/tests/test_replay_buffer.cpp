#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "dpsr/errors.hpp"
#include "dpsr/replay_buffer.hpp"
#include "dpsr/rng.hpp"
#include "oracles.hpp"

using dpsr::DpsrBuffer;
using dpsr::Experience;

namespace {

Experience make_exp(double priority, std::uint64_t birth = 0, dpsr::Action action = 0) {
    Experience e;
    e.state = {0.0, 1.0};
    e.action = action;
    e.reward = 0.5;
    e.next_state = {1.0, 0.0};
    e.birth_step = birth;
    e.priority = priority;
    return e;
}

DpsrBuffer filled(const std::vector<double>& priorities, double alpha = 0.6, double gamma = 0.3) {
    DpsrBuffer buffer(priorities.size(), alpha, gamma);
    for (std::size_t i = 0; i < priorities.size(); ++i) {
        buffer.append(make_exp(priorities[i], i));
    }
    return buffer;
}

double scan_max(const DpsrBuffer& buffer) {
    double hi = 0.0;
    for (std::size_t i = 0; i < buffer.size(); ++i) hi = std::max(hi, buffer.at(i).priority);
    return hi;
}

}  // namespace

TEST(DpsrBuffer, AppendAndMaxPriority) {
    DpsrBuffer buffer(3);
    EXPECT_EQ(buffer.new_experience_priority(), 1.0);
    EXPECT_EQ(buffer.append(make_exp(1.0)), 0u);
    EXPECT_EQ(buffer.max_priority(), 1.0);
    EXPECT_EQ(buffer.append(make_exp(2.5)), 1u);
    EXPECT_EQ(buffer.max_priority(), 2.5);
    buffer.append(make_exp(0.5));
    EXPECT_TRUE(buffer.full());
    EXPECT_THROW(buffer.append(make_exp(1.0)), dpsr::CapacityError);
}

TEST(DpsrBuffer, NewExperiencePriority) {
    EXPECT_EQ(filled({0.3, 2.0, 0.7}).new_experience_priority(), 2.0);
    EXPECT_EQ(filled({1e-6}).new_experience_priority(), 1e-6);
    EXPECT_THROW(DpsrBuffer(2).max_priority(), dpsr::EmptyStructureError);
}

TEST(DpsrBuffer, RejectsBadPriorities) {
    DpsrBuffer buffer(2);
    EXPECT_THROW(buffer.append(make_exp(0.0)), dpsr::InvalidWeightError);
    EXPECT_THROW(buffer.append(make_exp(std::nan(""))), dpsr::InvalidWeightError);
    EXPECT_THROW(DpsrBuffer(0), dpsr::SizeError);
}

TEST(DpsrBuffer, UpdatePriority) {
    DpsrBuffer buffer = filled({1.0, 2.0});
    buffer.update_priority(0, 0.0);
    EXPECT_EQ(buffer.at(0).priority, 1e-6);
    buffer.update_priority(1, 0.7);
    EXPECT_EQ(buffer.at(1).priority, 0.7 + 1e-6);
    EXPECT_DOUBLE_EQ(buffer.sample_leaf(1), std::pow(0.7 + 1e-6, 0.6));
    EXPECT_DOUBLE_EQ(buffer.replace_leaf(1), std::pow(0.7 + 1e-6, -0.3));
    EXPECT_THROW(buffer.update_priority(2, 0.1), dpsr::SlotError);
    EXPECT_THROW(buffer.update_priority(0, -0.1), dpsr::InvalidWeightError);
}

TEST(DpsrBuffer, OverwriteSlot) {
    DpsrBuffer buffer = filled({1.0, 4.0, 2.0});
    Experience e = make_exp(0.5, 99, 1);
    e.snapshot = {"kind", {1.5}, {7}};
    buffer.overwrite_slot(0, e);
    EXPECT_EQ(buffer.at(0), e);
    EXPECT_EQ(buffer.max_priority(), 4.0);
    buffer.overwrite_slot(1, make_exp(0.25));
    EXPECT_EQ(buffer.max_priority(), 2.0);
    buffer.overwrite_slot(2, make_exp(8.0));
    EXPECT_EQ(buffer.max_priority(), 8.0);

    DpsrBuffer partial(4);
    partial.append(make_exp(1.0));
    EXPECT_THROW(partial.overwrite_slot(1, make_exp(1.0)), dpsr::SlotError);
}

TEST(DpsrBuffer, DrawProbabilities) {
    DpsrBuffer buffer = filled({1.0, 3.0}, 1.0);
    EXPECT_DOUBLE_EQ(buffer.sampling_probability(0), 0.25);
    EXPECT_DOUBLE_EQ(buffer.sampling_probability(1), 0.75);

    DpsrBuffer rep = filled({1.0, 4.0}, 0.6, 0.5);
    EXPECT_DOUBLE_EQ(rep.replacement_probability(0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(rep.replacement_probability(1), 1.0 / 3.0);
}

TEST(DpsrBuffer, EqualPrioritiesGiveUnitWeights) {
    DpsrBuffer buffer = filled(std::vector<double>(16, 0.37));
    dpsr::Rng rng(3, 0);
    for (double beta : {0.0, 0.4, 1.0, 3.0}) {
        for (const auto& s : buffer.sample_batch(64, 0.6, beta, rng)) {
            EXPECT_EQ(s.weight, 1.0);
        }
    }
}

TEST(DpsrBuffer, ZeroBetaGivesUnitWeights) {
    DpsrBuffer buffer = filled({0.1, 5.0, 2.0, 1e-6, 30.0});
    dpsr::Rng rng(3, 0);
    for (const auto& s : buffer.sample_batch(200, 0.6, 0.0, rng)) {
        EXPECT_EQ(s.weight, 1.0);
    }
}

TEST(DpsrBuffer, WeightsMatchOracleAndStayInUnitInterval) {
    const std::vector<double> priorities = {0.1, 5.0, 2.0, 1e-6, 30.0, 0.75};
    DpsrBuffer buffer = filled(priorities);
    const std::vector<double> expected = oracle::importance_weights(priorities, 0.6, 0.7);
    dpsr::Rng rng(5, 0);
    for (const auto& s : buffer.sample_batch(500, 0.6, 0.7, rng)) {
        EXPECT_GT(s.weight, 0.0);
        EXPECT_LE(s.weight, 1.0);
        EXPECT_NEAR(s.weight, expected[s.slot], 1e-12);
    }
}

TEST(DpsrBuffer, WeightsUseOccupiedCountWhileFilling) {
    DpsrBuffer buffer(10);
    buffer.append(make_exp(1.0));
    buffer.append(make_exp(4.0));
    const std::vector<double> expected = oracle::importance_weights({1.0, 4.0}, 0.6, 1.0);
    dpsr::Rng rng(8, 0);
    for (const auto& s : buffer.sample_batch(50, 0.6, 1.0, rng)) {
        EXPECT_NEAR(s.weight, expected[s.slot], 1e-12);
    }
}

TEST(DpsrBuffer, AlphaZeroSamplesUniformly) {
    DpsrBuffer buffer = filled({0.01, 1.0, 100.0, 5.0});
    dpsr::Rng rng(1, 0);
    buffer.sample_batch(1, 0.0, 0.0, rng);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(buffer.sampling_probability(i), 0.25);
    }
}

TEST(DpsrBuffer, SampleFrequenciesMatchDistribution) {
    std::vector<double> priorities;
    dpsr::Rng gen(11, 0);
    for (int i = 0; i < 64; ++i) priorities.push_back(0.01 + 4.0 * gen.uniform());
    DpsrBuffer buffer = filled(priorities);
    const std::vector<double> expected = oracle::power_distribution(priorities, 0.6);
    std::vector<double> counts(64, 0.0);
    dpsr::Rng rng(12, 0);
    constexpr int kDraws = 200'000;
    for (const auto& s : buffer.sample_batch(kDraws, 0.6, 0.4, rng)) counts[s.slot] += 1.0;
    for (int i = 0; i < 64; ++i) EXPECT_NEAR(counts[i] / kDraws, expected[i], 0.005);
}

TEST(DpsrBuffer, ReplacementCandidatesAreDistinct) {
    DpsrBuffer buffer = filled({1, 2, 3, 4, 5, 6, 7, 8});
    dpsr::Rng rng(4, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto c = buffer.select_replacement_candidates(8, 0.3, rng);
        EXPECT_EQ(std::set<std::size_t>(c.begin(), c.end()).size(), 8u);
    }
    // Masking is undone afterward.
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_DOUBLE_EQ(buffer.replace_leaf(i), std::pow(static_cast<double>(i + 1), -0.3));
    }
}

TEST(DpsrBuffer, ReplacementPreconditions) {
    DpsrBuffer partial(3);
    partial.append(make_exp(1.0));
    dpsr::Rng rng(1, 0);
    EXPECT_THROW(partial.select_replacement_candidates(1, 0.3, rng), dpsr::StateError);
    DpsrBuffer full = filled({1, 2, 3});
    EXPECT_THROW(full.select_replacement_candidates(4, 0.3, rng), dpsr::SizeError);
    EXPECT_THROW(full.select_replacement_candidates(0, 0.3, rng), dpsr::SizeError);
}

TEST(DpsrBuffer, ReplacementInclusionUniformForEqualPriorities) {
    DpsrBuffer buffer = filled(std::vector<double>(10, 2.0));
    std::vector<double> counts(10, 0.0);
    dpsr::Rng rng(21, 0);
    constexpr int kTrials = 100'000;
    for (int t = 0; t < kTrials; ++t) {
        for (std::size_t slot : buffer.select_replacement_candidates(3, 0.3, rng)) counts[slot] += 1.0;
    }
    for (double c : counts) EXPECT_NEAR(c / kTrials, 0.3, 0.01);
}

TEST(DpsrBuffer, ReplacementFirstCandidateFrequencies) {
    std::vector<double> priorities;
    dpsr::Rng gen(31, 0);
    for (int i = 0; i < 64; ++i) priorities.push_back(0.01 + 4.0 * gen.uniform());
    DpsrBuffer buffer = filled(priorities);
    const std::vector<double> expected = oracle::power_distribution(priorities, -0.3);
    std::vector<double> counts(64, 0.0);
    dpsr::Rng rng(32, 0);
    constexpr int kTrials = 200'000;
    for (int t = 0; t < kTrials; ++t) counts[buffer.select_replacement_candidates(2, 0.3, rng).front()] += 1.0;
    for (int i = 0; i < 64; ++i) EXPECT_NEAR(counts[i] / kTrials, expected[i], 0.005);
}

TEST(DpsrBuffer, SetExponentsRebuildsTransforms) {
    DpsrBuffer buffer = filled({0.5, 2.0, 3.0});
    buffer.set_exponents(0.7, 0.3);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(buffer.sample_leaf(i), std::pow(buffer.at(i).priority, 0.7));
    }
    buffer.set_exponents(0.7, 0.5);
    EXPECT_EQ(buffer.at(1).priority, 2.0);
    EXPECT_DOUBLE_EQ(buffer.replace_leaf(1), std::pow(2.0, -0.5));
}

TEST(DpsrBuffer, RebuildChangesNothing) {
    DpsrBuffer buffer = filled({0.5, 2.0, 3.0, 0.001, 7.0});
    std::vector<double> before;
    for (std::size_t i = 0; i < 5; ++i) before.push_back(buffer.sampling_probability(i));
    buffer.rebuild_indexes();
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(buffer.sampling_probability(i), before[i], 1e-9);
}

TEST(DpsrBuffer, RandomOperationsKeepInvariants) {
    DpsrBuffer buffer(20, 0.6, 0.3);
    dpsr::Rng rng(99, 0);
    for (int op = 0; op < 3'000; ++op) {
        const double r = rng.uniform();
        if (!buffer.full()) {
            buffer.append(make_exp(buffer.new_experience_priority()));
        } else if (r < 0.4) {
            buffer.update_priority(rng.uniform_index(20), rng.uniform() * 3.0);
        } else if (r < 0.7) {
            buffer.overwrite_slot(rng.uniform_index(20), make_exp(0.01 + rng.uniform() * 5.0));
        } else {
            buffer.sample_batch(4, 0.6, 0.5, rng);
        }
        ASSERT_EQ(buffer.max_priority(), scan_max(buffer));
        for (std::size_t i = 0; i < buffer.size(); ++i) {
            ASSERT_GE(buffer.at(i).priority, buffer.priority_epsilon());
            ASSERT_NEAR(buffer.sample_leaf(i), std::pow(buffer.at(i).priority, 0.6),
                        1e-9 * buffer.sample_leaf(i));
            ASSERT_NEAR(buffer.replace_leaf(i), std::pow(buffer.at(i).priority, -0.3),
                        1e-9 * buffer.replace_leaf(i));
        }
    }
}

TEST(DpsrBuffer, CsvDump) {
    DpsrBuffer buffer(2);
    Experience e = make_exp(0.5, 7, 1);
    e.terminal = true;
    buffer.append(e);
    std::ostringstream os;
    buffer.write_csv(os);
    EXPECT_EQ(os.str(), "slot,birth_step,priority,action,reward,terminal\n0,7,0.5,1,0.5,1\n");
}
