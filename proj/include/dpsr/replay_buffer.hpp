#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dpsr/experience.hpp"
#include "dpsr/priority_index.hpp"
#include "dpsr/rng.hpp"

namespace dpsr {

/**
 * Fixed-capacity experience store with two priority transforms.
 *
 * Raw priorities live in the experiences themselves. Two sum trees hold the
 * transformed values used for drawing: p^alpha for training samples and
 * p^-gamma for replacement candidates. Two extrema trees track min p^alpha
 * (for importance-weight normalization) and max raw p (for new insertions).
 *
 * Slots fill in order 0, 1, ..., capacity - 1 and are never vacated.
 */
class DpsrBuffer {
public:
    static constexpr double kDefaultPriorityEpsilon = 1e-6;
    static constexpr double kEmptyBufferPriority = 1.0;
    static constexpr std::uint64_t kRebuildInterval = 100'000;

    struct Sample {
        std::size_t slot;
        double weight;
    };

    explicit DpsrBuffer(std::size_t capacity, double alpha = 0.6, double gamma = 0.3,
                        double priority_epsilon = kDefaultPriorityEpsilon);

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return slots_.size(); }
    bool empty() const noexcept { return slots_.empty(); }
    bool full() const noexcept { return slots_.size() == capacity_; }

    double alpha() const noexcept { return alpha_; }
    double gamma() const noexcept { return gamma_; }
    double priority_epsilon() const noexcept { return priority_epsilon_; }

    const Experience& at(std::size_t slot) const;

    /// Stores into the next free slot. Throws CapacityError when full.
    std::size_t append(Experience exp);

    /// Discards the slot's experience and stores `exp` in its place.
    void overwrite_slot(std::size_t slot, Experience exp);

    /// Sets the slot's priority to abs_td + priority_epsilon().
    void update_priority(std::size_t slot, double abs_td);

    /// Max raw priority over occupied slots. Throws on an empty buffer.
    double max_priority() const;

    /// Priority for a freshly stored experience: max_priority(), or 1.0 when
    /// the buffer is empty.
    double new_experience_priority() const;

    /// k independent draws with probability p_i^alpha / sum_j p_j^alpha.
    /// Weights are (N * P_i)^-beta normalized by the largest such weight over
    /// every occupied slot, so each lies in (0, 1].
    std::vector<Sample> sample_batch(std::size_t k, double alpha, double beta, Rng& rng);

    /// `count` distinct slots drawn one at a time with probability
    /// proportional to p_i^-gamma among the slots not yet drawn. Requires a
    /// full buffer.
    std::vector<std::size_t> select_replacement_candidates(std::size_t count, double gamma, Rng& rng);

    /// Rebuilds both transformed trees when either exponent changes.
    void set_exponents(double alpha, double gamma);

    double sampling_probability(std::size_t slot) const;
    double replacement_probability(std::size_t slot) const;
    double sample_leaf(std::size_t slot) const;
    double replace_leaf(std::size_t slot) const;
    double min_sample_leaf() const;

    /// Recomputes every transformed leaf from raw priorities.
    void rebuild_indexes();

    /// Debug dump: one CSV row per occupied slot.
    void write_csv(std::ostream& out) const;

private:
    void check_occupied(std::size_t slot) const;
    void check_priority(double priority) const;
    void index_slot(std::size_t slot);
    void count_update();

    std::size_t capacity_;
    double alpha_;
    double gamma_;
    double priority_epsilon_;
    std::vector<Experience> slots_;
    PrefixSumTree sample_tree_;
    PrefixSumTree replace_tree_;
    ExtremaTree sample_min_tree_;
    ExtremaTree priority_max_tree_;
    std::uint64_t updates_since_rebuild_ = 0;
};

}  // namespace dpsr
