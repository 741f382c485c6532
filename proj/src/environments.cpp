#include "dpsr/environments.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpsr/errors.hpp"

namespace dpsr {

namespace {

void check_kind(const Snapshot& token, std::string_view kind, std::size_t reals, std::size_t integers) {
    if (token.kind != kind) {
        throw TokenError("snapshot of kind '" + token.kind + "' given to " + std::string(kind));
    }
    if (token.reals.size() != reals || token.integers.size() != integers) {
        throw TokenError("malformed " + std::string(kind) + " snapshot");
    }
    for (double v : token.reals) {
        if (!std::isfinite(v)) {
            throw TokenError("non-finite value in " + std::string(kind) + " snapshot");
        }
    }
}

void check_action(Action action, std::size_t count) {
    if (action >= count) {
        throw RangeError("action " + std::to_string(action) + " out of range");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ForkedCorridor

ForkedCorridor::ForkedCorridor(Params params) : params_(params) {
    if (params_.left_depth < 1 || params_.right_length < 1) {
        throw ConfigError("corridor depth and length must be at least 1");
    }
}

Observation ForkedCorridor::reset() {
    position_ = 0;
    lock_ = 0;
    terminal_ = false;
    return observation();
}

Observation ForkedCorridor::observation() const {
    const double scale = std::max(params_.left_depth, params_.right_length);
    return {position_ / scale, static_cast<double>(lock_)};
}

StepResult ForkedCorridor::step(Action action) {
    check_action(action, 2);
    if (terminal_) {
        throw EpisodeFinishedError("forked corridor episode already finished");
    }
    if (lock_ == 0) {
        lock_ = action == kLeft ? -1 : 1;
    }
    position_ += lock_;
    double reward = 0.0;
    if (lock_ > 0) {
        reward = params_.right_step_reward;
        terminal_ = position_ >= params_.right_length;
    } else if (-position_ >= params_.left_depth) {
        reward = params_.treasure_reward;
        terminal_ = true;
    } else {
        reward = params_.left_step_reward;
    }
    return {observation(), reward, terminal_};
}

Snapshot ForkedCorridor::snapshot() const {
    return {"forked_corridor",
            {params_.right_step_reward, params_.left_step_reward, params_.treasure_reward},
            {static_cast<std::uint64_t>(params_.left_depth), static_cast<std::uint64_t>(params_.right_length),
             static_cast<std::uint64_t>(static_cast<std::int64_t>(position_)),
             static_cast<std::uint64_t>(static_cast<std::int64_t>(lock_)), terminal_ ? 1u : 0u}};
}

std::unique_ptr<SnapshotEnv> ForkedCorridor::spawn_from(const Snapshot& token) const {
    check_kind(token, "forked_corridor", 3, 5);
    Params p;
    p.right_step_reward = token.reals[0];
    p.left_step_reward = token.reals[1];
    p.treasure_reward = token.reals[2];
    p.left_depth = static_cast<int>(token.integers[0]);
    p.right_length = static_cast<int>(token.integers[1]);
    const auto position = static_cast<std::int64_t>(token.integers[2]);
    const auto lock = static_cast<std::int64_t>(token.integers[3]);
    if (p.left_depth < 1 || p.right_length < 1 || lock < -1 || lock > 1 || token.integers[4] > 1 ||
        position < -p.left_depth || position > p.right_length || (lock == 0 && position != 0) ||
        position * lock < 0) {
        throw TokenError("inconsistent forked corridor snapshot");
    }
    auto env = std::make_unique<ForkedCorridor>(p);
    env->position_ = static_cast<int>(position);
    env->lock_ = static_cast<int>(lock);
    env->terminal_ = token.integers[4] == 1;
    return env;
}

// ---------------------------------------------------------------------------
// CartPole

CartPole::CartPole(std::uint64_t seed) : noise_state_(seed) {}

double CartPole::next_noise() {
    // splitmix64
    std::uint64_t z = (noise_state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    return -0.05 + 0.1 * u;
}

Observation CartPole::reset() {
    state_.x = next_noise();
    state_.x_dot = next_noise();
    state_.theta = next_noise();
    state_.theta_dot = next_noise();
    steps_ = 0;
    terminal_ = false;
    return observation();
}

Observation CartPole::observation() const { return {state_.x, state_.x_dot, state_.theta, state_.theta_dot}; }

void CartPole::set_state(const CartPoleState& state) {
    state_ = state;
    steps_ = 0;
    terminal_ = false;
}

StepResult CartPole::step(Action action) {
    check_action(action, 2);
    return step_with_force(action == 1 ? kForce : -kForce);
}

StepResult CartPole::step_with_force(double force) {
    if (terminal_) {
        throw EpisodeFinishedError("cartpole episode already finished");
    }
    constexpr double total_mass = kCartMass + kPoleMass;
    constexpr double pole_mass_length = kPoleMass * kHalfLength;
    const double cos_theta = std::cos(state_.theta);
    const double sin_theta = std::sin(state_.theta);
    const double temp = (force + pole_mass_length * state_.theta_dot * state_.theta_dot * sin_theta) / total_mass;
    const double theta_acc = (kGravity * sin_theta - cos_theta * temp) /
                             (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_theta * cos_theta / total_mass));
    const double x_acc = temp - pole_mass_length * theta_acc * cos_theta / total_mass;

    state_.x += kTau * state_.x_dot;
    state_.x_dot += kTau * x_acc;
    state_.theta += kTau * state_.theta_dot;
    state_.theta_dot += kTau * theta_acc;
    ++steps_;

    terminal_ = std::abs(state_.x) > kXLimit || std::abs(state_.theta) > kThetaLimit || steps_ >= kMaxSteps;
    return {observation(), 1.0, terminal_};
}

Snapshot CartPole::snapshot() const {
    return {"cartpole",
            {state_.x, state_.x_dot, state_.theta, state_.theta_dot},
            {steps_, terminal_ ? 1u : 0u, noise_state_}};
}

std::unique_ptr<SnapshotEnv> CartPole::spawn_from(const Snapshot& token) const {
    check_kind(token, "cartpole", 4, 3);
    if (token.integers[1] > 1 || token.integers[0] > kMaxSteps) {
        throw TokenError("inconsistent cartpole snapshot");
    }
    auto env = std::make_unique<CartPole>();
    env->state_ = {token.reals[0], token.reals[1], token.reals[2], token.reals[3]};
    env->steps_ = token.integers[0];
    env->terminal_ = token.integers[1] == 1;
    env->noise_state_ = token.integers[2];
    return env;
}

// ---------------------------------------------------------------------------
// ChainWorld

ChainWorld::ChainWorld(Params params) : params_(params) {
    if (params_.states == 0 || params_.max_steps == 0) {
        throw ConfigError("chain needs at least one state and one step");
    }
}

Observation ChainWorld::reset() {
    position_ = 0;
    steps_ = 0;
    terminal_ = false;
    return observation();
}

Observation ChainWorld::observation() const {
    Observation obs(params_.states, 0.0);
    if (position_ < params_.states) {
        obs[position_] = 1.0;
    }
    return obs;
}

void ChainWorld::set_position(std::size_t state) {
    if (state >= params_.states) {
        throw RangeError("chain state out of range");
    }
    position_ = state;
    steps_ = 0;
    terminal_ = false;
}

std::size_t ChainWorld::state_id(std::span<const double> observation) {
    const auto it = std::max_element(observation.begin(), observation.end());
    return static_cast<std::size_t>(it - observation.begin());
}

StepResult ChainWorld::step(Action action) {
    check_action(action, 2);
    if (terminal_) {
        throw EpisodeFinishedError("chain episode already finished");
    }
    double reward = 0.0;
    if (action == kRight) {
        ++position_;
        if (position_ == params_.states) {
            reward = 1.0;
            terminal_ = true;
            // The goal is absorbing; report the last real state as observed.
            position_ = params_.states - 1;
        }
    } else if (position_ > 0) {
        --position_;
    }
    ++steps_;
    if (steps_ >= params_.max_steps) {
        terminal_ = true;
    }
    return {observation(), reward, terminal_};
}

Snapshot ChainWorld::snapshot() const {
    return {"chain", {}, {params_.states, params_.max_steps, position_, steps_, terminal_ ? 1u : 0u}};
}

std::unique_ptr<SnapshotEnv> ChainWorld::spawn_from(const Snapshot& token) const {
    check_kind(token, "chain", 0, 5);
    Params p{token.integers[0], token.integers[1]};
    if (p.states == 0 || p.max_steps == 0 || token.integers[2] >= p.states || token.integers[3] > p.max_steps ||
        token.integers[4] > 1) {
        throw TokenError("inconsistent chain snapshot");
    }
    auto env = std::make_unique<ChainWorld>(p);
    env->position_ = token.integers[2];
    env->steps_ = token.integers[3];
    env->terminal_ = token.integers[4] == 1;
    return env;
}

std::vector<std::vector<double>> chain_q_star(std::size_t states, double discount) {
    if (states == 0) {
        throw ConfigError("chain needs at least one state");
    }
    if (!(discount >= 0.0) || !(discount < 1.0)) {
        throw ConfigError("value iteration needs a discount in [0, 1)");
    }
    std::vector<std::vector<double>> q(states, std::vector<double>(2, 0.0));
    auto value = [&](std::size_t s) { return std::max(q[s][0], q[s][1]); };
    for (;;) {
        double residual = 0.0;
        std::vector<std::vector<double>> next(states, std::vector<double>(2, 0.0));
        for (std::size_t s = 0; s < states; ++s) {
            const std::size_t left = s == 0 ? 0 : s - 1;
            next[s][ChainWorld::kLeft] = discount * value(left);
            next[s][ChainWorld::kRight] = s + 1 == states ? 1.0 : discount * value(s + 1);
            for (int a = 0; a < 2; ++a) {
                residual = std::max(residual, std::abs(next[s][a] - q[s][a]));
            }
        }
        q = std::move(next);
        if (residual < 1e-10) {
            return q;
        }
    }
}

std::unique_ptr<SnapshotEnv> make_environment(const EnvironmentConfig& config, std::uint64_t seed) {
    if (config.name == "forked_corridor") {
        return std::make_unique<ForkedCorridor>(config.corridor);
    }
    if (config.name == "cartpole") {
        return std::make_unique<CartPole>(seed);
    }
    if (config.name == "chain") {
        return std::make_unique<ChainWorld>(config.chain);
    }
    throw ConfigError("unknown environment '" + config.name + "'");
}

}  // namespace dpsr
