#include "dpsr/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "dpsr/errors.hpp"
#include "dpsr/format.hpp"

namespace dpsr {

namespace {

void check_exponent(double value, const char* name) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw InvalidWeightError(std::string(name) + " must be finite and non-negative");
    }
}

// A draw scaled into [0, total); guards the product against rounding up to total.
double scaled_draw(Rng& rng, double total) {
    const double u = rng.uniform() * total;
    return u < total ? u : std::nextafter(total, 0.0);
}

}  // namespace

DpsrBuffer::DpsrBuffer(std::size_t capacity, double alpha, double gamma, double priority_epsilon)
    : capacity_(capacity),
      alpha_(alpha),
      gamma_(gamma),
      priority_epsilon_(priority_epsilon),
      sample_tree_(capacity),
      replace_tree_(capacity),
      sample_min_tree_(capacity),
      priority_max_tree_(capacity) {
    check_exponent(alpha, "alpha");
    check_exponent(gamma, "gamma");
    if (!(priority_epsilon > 0.0) || !std::isfinite(priority_epsilon)) {
        throw InvalidWeightError("priority epsilon must be positive");
    }
    slots_.reserve(capacity);
}

const Experience& DpsrBuffer::at(std::size_t slot) const {
    check_occupied(slot);
    return slots_[slot];
}

void DpsrBuffer::check_occupied(std::size_t slot) const {
    if (slot >= slots_.size()) {
        throw SlotError("slot " + std::to_string(slot) + " is not occupied (size " +
                        std::to_string(slots_.size()) + ")");
    }
}

void DpsrBuffer::check_priority(double priority) const {
    if (!std::isfinite(priority) || priority < priority_epsilon_) {
        throw InvalidWeightError("priority must be finite and at least " + std::to_string(priority_epsilon_) +
                                 ", got " + std::to_string(priority));
    }
}

void DpsrBuffer::index_slot(std::size_t slot) {
    const double p = slots_[slot].priority;
    const double sample_value = std::pow(p, alpha_);
    sample_tree_.set_weight(slot, sample_value);
    replace_tree_.set_weight(slot, std::pow(p, -gamma_));
    sample_min_tree_.update(slot, sample_value);
    priority_max_tree_.update(slot, p);
    count_update();
}

void DpsrBuffer::count_update() {
    if (++updates_since_rebuild_ >= kRebuildInterval) {
        sample_tree_.rebuild();
        replace_tree_.rebuild();
        updates_since_rebuild_ = 0;
    }
}

std::size_t DpsrBuffer::append(Experience exp) {
    if (full()) {
        throw CapacityError("buffer is full (" + std::to_string(capacity_) + " slots); use replacement");
    }
    check_priority(exp.priority);
    slots_.push_back(std::move(exp));
    const std::size_t slot = slots_.size() - 1;
    index_slot(slot);
    return slot;
}

void DpsrBuffer::overwrite_slot(std::size_t slot, Experience exp) {
    check_occupied(slot);
    check_priority(exp.priority);
    slots_[slot] = std::move(exp);
    index_slot(slot);
}

void DpsrBuffer::update_priority(std::size_t slot, double abs_td) {
    check_occupied(slot);
    if (!(abs_td >= 0.0) || !std::isfinite(abs_td)) {
        throw InvalidWeightError("absolute TD error must be finite and non-negative");
    }
    slots_[slot].priority = abs_td + priority_epsilon_;
    index_slot(slot);
}

double DpsrBuffer::max_priority() const { return priority_max_tree_.query_max(); }

double DpsrBuffer::new_experience_priority() const {
    return empty() ? kEmptyBufferPriority : max_priority();
}

void DpsrBuffer::set_exponents(double alpha, double gamma) {
    check_exponent(alpha, "alpha");
    check_exponent(gamma, "gamma");
    if (alpha == alpha_ && gamma == gamma_) {
        return;
    }
    alpha_ = alpha;
    gamma_ = gamma;
    rebuild_indexes();
}

void DpsrBuffer::rebuild_indexes() {
    for (std::size_t slot = 0; slot < slots_.size(); ++slot) {
        const double p = slots_[slot].priority;
        const double sample_value = std::pow(p, alpha_);
        sample_tree_.set_weight(slot, sample_value);
        replace_tree_.set_weight(slot, std::pow(p, -gamma_));
        sample_min_tree_.update(slot, sample_value);
    }
    updates_since_rebuild_ = 0;
}

std::vector<DpsrBuffer::Sample> DpsrBuffer::sample_batch(std::size_t k, double alpha, double beta, Rng& rng) {
    if (empty()) {
        throw EmptyStructureError("sample_batch on an empty buffer");
    }
    check_exponent(beta, "beta");
    set_exponents(alpha, gamma_);

    const double total = sample_tree_.total();
    const double min_leaf = sample_min_tree_.query_min();
    std::vector<Sample> batch;
    batch.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t slot = sample_tree_.find_prefix(scaled_draw(rng, total));
        // (N P_i)^-beta / (N P_min)^-beta: both N and the tree total cancel.
        double weight = std::pow(sample_tree_.weight(slot) / min_leaf, -beta);
        weight = std::clamp(weight, std::numeric_limits<double>::min(), 1.0);
        batch.push_back({slot, weight});
    }
    return batch;
}

std::vector<std::size_t> DpsrBuffer::select_replacement_candidates(std::size_t count, double gamma, Rng& rng) {
    if (!full()) {
        throw StateError("replacement candidates require a full buffer");
    }
    if (count == 0 || count > capacity_) {
        throw SizeError("candidate count " + std::to_string(count) + " outside [1, " + std::to_string(capacity_) +
                        "]");
    }
    set_exponents(alpha_, gamma);

    std::vector<std::size_t> chosen;
    std::vector<double> masked;
    chosen.reserve(count);
    masked.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t slot = replace_tree_.find_prefix(scaled_draw(rng, replace_tree_.total()));
        chosen.push_back(slot);
        masked.push_back(replace_tree_.weight(slot));
        replace_tree_.set_weight(slot, 0.0);
    }
    for (std::size_t i = 0; i < count; ++i) {
        replace_tree_.set_weight(chosen[i], masked[i]);
    }
    return chosen;
}

double DpsrBuffer::sampling_probability(std::size_t slot) const {
    check_occupied(slot);
    return sample_tree_.weight(slot) / sample_tree_.total();
}

double DpsrBuffer::replacement_probability(std::size_t slot) const {
    check_occupied(slot);
    return replace_tree_.weight(slot) / replace_tree_.total();
}

double DpsrBuffer::sample_leaf(std::size_t slot) const {
    check_occupied(slot);
    return sample_tree_.weight(slot);
}

double DpsrBuffer::replace_leaf(std::size_t slot) const {
    check_occupied(slot);
    return replace_tree_.weight(slot);
}

double DpsrBuffer::min_sample_leaf() const { return sample_min_tree_.query_min(); }

void DpsrBuffer::write_csv(std::ostream& out) const {
    out << "slot,birth_step,priority,action,reward,terminal\n";
    for (std::size_t slot = 0; slot < slots_.size(); ++slot) {
        const Experience& e = slots_[slot];
        out << slot << ',' << e.birth_step << ',' << format_real(e.priority) << ',' << e.action << ','
            << format_real(e.reward) << ','
            << (e.terminal ? 1 : 0) << '\n';
    }
}

}  // namespace dpsr
