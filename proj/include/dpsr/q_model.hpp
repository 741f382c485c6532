#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dpsr/experience.hpp"
#include "dpsr/rng.hpp"

namespace dpsr {

/// Action-value function. Batched entry points take states as the columns
/// of a (input_dim x batch) matrix and return an (action_count x batch)
/// matrix of Q-values.
class QFunction {
public:
    virtual ~QFunction() = default;

    virtual std::size_t input_dim() const = 0;
    virtual std::size_t action_count() const = 0;

    virtual Eigen::MatrixXd q_values_batch(const Eigen::MatrixXd& states) const = 0;

    /// theta += eta * sum_i scales[i] * grad_theta Q(states[:, i], actions[i]).
    virtual void apply_scaled_gradients(const Eigen::MatrixXd& states, std::span<const Action> actions,
                                        std::span<const double> scales, double eta) = 0;

    /// Architecture descriptor; equal shapes mean parameters are interchangeable.
    virtual std::vector<std::uint32_t> shape() const = 0;
    virtual std::vector<double> parameters() const = 0;
    virtual void set_parameters(std::span<const double> params) = 0;
    virtual std::unique_ptr<QFunction> clone() const = 0;

    std::vector<double> q_values(std::span<const double> state) const;
};

/**
 * Fully connected network: input -> hidden... -> action_count, rectifier on
 * hidden layers, identity on the output.
 *
 * Flat parameter order is, per layer, the weight matrix row by row
 * (row = output unit) followed by the bias vector.
 */
class DenseQNet final : public QFunction {
public:
    /// Zero-initialized parameters.
    DenseQNet(std::size_t input_dim, std::size_t action_count, std::vector<std::size_t> hidden = {64, 64});

    /// Draws every weight and bias uniformly from +-1/sqrt(fan_in).
    void initialize(Rng& rng);

    std::size_t input_dim() const override { return layer_sizes_.front(); }
    std::size_t action_count() const override { return layer_sizes_.back(); }
    const std::vector<std::size_t>& layer_sizes() const noexcept { return layer_sizes_; }
    std::size_t parameter_count() const;

    Eigen::MatrixXd q_values_batch(const Eigen::MatrixXd& states) const override;
    void apply_scaled_gradients(const Eigen::MatrixXd& states, std::span<const Action> actions,
                                std::span<const double> scales, double eta) override;

    /// grad_theta Q(state, action) in flat parameter order.
    std::vector<double> gradient(std::span<const double> state, Action action) const;

    std::vector<std::uint32_t> shape() const override;
    std::vector<double> parameters() const override;
    void set_parameters(std::span<const double> params) override;
    std::unique_ptr<QFunction> clone() const override;

private:
    struct Layer {
        Eigen::MatrixXd weights;  // out x in
        Eigen::VectorXd bias;
    };

    // Per-layer gradients of sum_i scales[i] * Q(s_i, a_i).
    std::vector<Layer> backward(const Eigen::MatrixXd& states, std::span<const Action> actions,
                                std::span<const double> scales) const;

    std::vector<std::size_t> layer_sizes_;
    std::vector<Layer> layers_;
};

/// Table of Q-values indexed by (discrete state id, action). The indexer maps
/// an observation vector to its state id.
class TabularQ final : public QFunction {
public:
    using StateIndexer = std::function<std::size_t(std::span<const double>)>;

    TabularQ(std::size_t state_count, std::size_t action_count, std::size_t input_dim, StateIndexer indexer);

    std::size_t state_count() const noexcept { return state_count_; }
    std::size_t input_dim() const override { return input_dim_; }
    std::size_t action_count() const override { return action_count_; }

    double value(std::size_t state, Action action) const;
    void set_value(std::size_t state, Action action, double v);

    Eigen::MatrixXd q_values_batch(const Eigen::MatrixXd& states) const override;
    void apply_scaled_gradients(const Eigen::MatrixXd& states, std::span<const Action> actions,
                                std::span<const double> scales, double eta) override;

    std::vector<std::uint32_t> shape() const override;
    std::vector<double> parameters() const override;
    void set_parameters(std::span<const double> params) override;
    std::unique_ptr<QFunction> clone() const override;

private:
    std::size_t index_of(std::span<const double> state) const;

    std::size_t state_count_;
    std::size_t action_count_;
    std::size_t input_dim_;
    StateIndexer indexer_;
    std::vector<double> table_;  // state-major
};

/// Index of the largest entry; ties go to the lowest index.
Action argmax_action(std::span<const double> q);

Action greedy_action(const QFunction& qf, std::span<const double> state);

/// Double-DQN TD error: the online network picks argmax_a Q(s', a), the
/// target network evaluates it. Terminal transitions do not bootstrap.
double td_error(const QFunction& qf, const QFunction& target, const Experience& exp, double discount);

/// Batched td_error over experiences.
std::vector<double> td_errors(const QFunction& qf, const QFunction& target,
                              std::span<const Experience* const> batch, double discount);

struct WeightedTransition {
    const Experience* experience;
    double weight;
    double delta;
};

/// theta += eta * sum_i w_i * delta_i * grad_theta Q(s_i, a_i). The
/// bootstrap target is treated as a constant.
void apply_weighted_update(QFunction& qf, std::span<const WeightedTransition> batch, double eta);

/// Copies online parameters into the target. Throws ShapeError on an
/// architecture mismatch.
void sync_target(const QFunction& qf, QFunction& target);

/// Little-endian: u32 shape length, u32 shape entries, then f64 parameters.
void save_parameters(const QFunction& qf, std::ostream& out);
void load_parameters(QFunction& qf, std::istream& in);

/// Packs observations as matrix columns.
Eigen::MatrixXd stack_states(std::span<const Observation* const> states, std::size_t dim);

}  // namespace dpsr
