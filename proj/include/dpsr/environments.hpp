#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsr/experience.hpp"

namespace dpsr {

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool terminal = false;

    bool operator==(const StepResult&) const = default;
};

/**
 * Deterministic environment whose full state can be captured and respawned.
 *
 * spawn_from() builds a new, independent instance from a snapshot; stepping
 * the copy never touches the original. Implementations throw TokenError for
 * a snapshot they cannot interpret and EpisodeFinishedError when stepped
 * after a terminal transition.
 */
class SnapshotEnv {
public:
    virtual ~SnapshotEnv() = default;

    virtual std::string_view name() const = 0;
    virtual std::size_t action_count() const = 0;
    virtual std::size_t observation_dim() const = 0;

    virtual Observation reset() = 0;
    virtual StepResult step(Action action) = 0;
    virtual Observation observation() const = 0;
    virtual bool terminal() const = 0;

    virtual Snapshot snapshot() const = 0;
    virtual std::unique_ptr<SnapshotEnv> spawn_from(const Snapshot& token) const = 0;
};

/**
 * Two corridors joined at the start. The first action locks the direction
 * for the rest of the episode: afterwards both actions move that way.
 * Going right pays a small reward every step; going left pays nothing until
 * a large treasure at the far end.
 *
 * Observation: (position / max(left_depth, right_length), direction lock).
 */
class ForkedCorridor final : public SnapshotEnv {
public:
    static constexpr Action kLeft = 0;
    static constexpr Action kRight = 1;

    struct Params {
        int left_depth = 15;
        int right_length = 20;
        double right_step_reward = 1.0;
        double left_step_reward = 0.0;
        double treasure_reward = 40.0;

        bool operator==(const Params&) const = default;
    };

    ForkedCorridor() : ForkedCorridor(Params{}) {}
    explicit ForkedCorridor(Params params);

    std::string_view name() const override { return "forked_corridor"; }
    std::size_t action_count() const override { return 2; }
    std::size_t observation_dim() const override { return 2; }

    Observation reset() override;
    StepResult step(Action action) override;
    Observation observation() const override;
    bool terminal() const override { return terminal_; }

    Snapshot snapshot() const override;
    std::unique_ptr<SnapshotEnv> spawn_from(const Snapshot& token) const override;

    const Params& params() const noexcept { return params_; }
    int position() const noexcept { return position_; }
    int direction_lock() const noexcept { return lock_; }

private:
    Params params_;
    int position_ = 0;
    int lock_ = 0;
    bool terminal_ = false;
};

struct CartPoleState {
    double x = 0.0;
    double x_dot = 0.0;
    double theta = 0.0;
    double theta_dot = 0.0;

    bool operator==(const CartPoleState&) const = default;
};

/**
 * Classic cart-pole with explicit Euler integration (positions advance with
 * the pre-step velocities). Reward 1 per step; the episode ends when the
 * cart leaves |x| <= 2.4, the pole leaves |theta| <= 12 degrees, or after
 * 200 steps.
 *
 * reset() draws each state variable uniformly from [-0.05, 0.05] using a
 * splitmix64 stream that is part of the environment state, so a snapshot
 * also fixes every later reset.
 */
class CartPole final : public SnapshotEnv {
public:
    static constexpr double kGravity = 9.8;
    static constexpr double kCartMass = 1.0;
    static constexpr double kPoleMass = 0.1;
    static constexpr double kHalfLength = 0.5;
    static constexpr double kForce = 10.0;
    static constexpr double kTau = 0.02;
    static constexpr double kXLimit = 2.4;
    static constexpr double kThetaLimit = 12.0 * 3.14159265358979323846 / 180.0;
    static constexpr std::uint64_t kMaxSteps = 200;

    explicit CartPole(std::uint64_t seed = 0);

    std::string_view name() const override { return "cartpole"; }
    std::size_t action_count() const override { return 2; }
    std::size_t observation_dim() const override { return 4; }

    Observation reset() override;
    StepResult step(Action action) override;
    Observation observation() const override;
    bool terminal() const override { return terminal_; }

    Snapshot snapshot() const override;
    std::unique_ptr<SnapshotEnv> spawn_from(const Snapshot& token) const override;

    /// Places the system in an exact state and restarts the step count.
    void set_state(const CartPoleState& state);
    const CartPoleState& state() const noexcept { return state_; }
    std::uint64_t steps() const noexcept { return steps_; }

    /// Integrates one step under an arbitrary horizontal force (test hook);
    /// episode bookkeeping is identical to step().
    StepResult step_with_force(double force);

private:
    double next_noise();

    CartPoleState state_;
    std::uint64_t steps_ = 0;
    bool terminal_ = false;
    std::uint64_t noise_state_;
};

/**
 * Chain of non-terminal states 0..n-1 with a terminal goal past the right
 * end. LEFT (0) moves one state left (bounded at 0), RIGHT (1) moves one
 * right. Entering the goal pays 1 and ends the episode; every other step
 * pays 0. Episodes start at state 0 and are cut off after max_steps.
 *
 * Observation: one-hot encoding of the current state.
 */
class ChainWorld final : public SnapshotEnv {
public:
    static constexpr Action kLeft = 0;
    static constexpr Action kRight = 1;

    struct Params {
        std::size_t states = 5;
        std::uint64_t max_steps = 100;

        bool operator==(const Params&) const = default;
    };

    ChainWorld() : ChainWorld(Params{}) {}
    explicit ChainWorld(Params params);

    std::string_view name() const override { return "chain"; }
    std::size_t action_count() const override { return 2; }
    std::size_t observation_dim() const override { return params_.states; }

    Observation reset() override;
    StepResult step(Action action) override;
    Observation observation() const override;
    bool terminal() const override { return terminal_; }

    Snapshot snapshot() const override;
    std::unique_ptr<SnapshotEnv> spawn_from(const Snapshot& token) const override;

    const Params& params() const noexcept { return params_; }
    std::size_t position() const noexcept { return position_; }

    /// Places the agent at a non-terminal state.
    void set_position(std::size_t state);

    /// State id of a one-hot observation.
    static std::size_t state_id(std::span<const double> observation);

private:
    Params params_;
    std::size_t position_ = 0;
    std::uint64_t steps_ = 0;
    bool terminal_ = false;
};

/// Exact optimal action values for a chain of `states` non-terminal states,
/// by value iteration to a max residual below 1e-10. Row = state, column =
/// action.
std::vector<std::vector<double>> chain_q_star(std::size_t states, double discount);

struct EnvironmentConfig {
    std::string name = "cartpole";
    ForkedCorridor::Params corridor;
    ChainWorld::Params chain;

    bool operator==(const EnvironmentConfig&) const = default;
};

/// Builds "forked_corridor", "cartpole" or "chain". Throws ConfigError for
/// any other name.
std::unique_ptr<SnapshotEnv> make_environment(const EnvironmentConfig& config, std::uint64_t seed);

}  // namespace dpsr
