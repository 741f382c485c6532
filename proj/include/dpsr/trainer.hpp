#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsr/environments.hpp"
#include "dpsr/experience.hpp"
#include "dpsr/q_model.hpp"
#include "dpsr/replay_buffer.hpp"
#include "dpsr/rng.hpp"

namespace dpsr {

enum class Mode {
    uniform,          // uniform sampling, FIFO eviction
    per,              // prioritized sampling, FIFO eviction
    dpsr,             // prioritized sampling, prioritized replacement, state recycling
    dpsr_no_recycle,  // prioritized sampling and replacement only
};

std::string_view to_string(Mode mode);
/// Throws ConfigError for an unknown name.
Mode parse_mode(std::string_view name);

struct ScheduleConfig {
    double epsilon_start = 1.0;
    double epsilon_decay = 9.8;
    double epsilon_min = 0.02;
    double alpha = 0.6;
    double beta_start = 0.4;
    double beta_end = 1.0;
    double gamma = 0.3;

    bool operator==(const ScheduleConfig&) const = default;
};

/// Time-dependent exploration and priority exponents over a horizon T:
///   epsilon(t) = max(epsilon_start - epsilon_decay * t / T, epsilon_min)
///   alpha(t)   = alpha
///   beta(t)    = beta_start + (beta_end - beta_start) * t / T
///   gamma(t)   = gamma
class Schedules {
public:
    Schedules(ScheduleConfig config, std::uint64_t horizon);

    double epsilon(std::uint64_t t) const;
    double alpha(std::uint64_t t) const;
    double beta(std::uint64_t t) const;
    double gamma(std::uint64_t t) const;

    const ScheduleConfig& config() const noexcept { return config_; }

private:
    double progress(std::uint64_t t) const;

    ScheduleConfig config_;
    std::uint64_t horizon_;
};

struct TrainConfig {
    Mode mode = Mode::dpsr;
    std::uint64_t seed = 1;

    std::size_t batch_size = 32;
    double learning_rate = 0.0005;
    std::size_t buffer_size = 5000;
    bool recycle_max_priority = false;
    std::size_t common_candidates = 128;
    std::size_t recycle_candidates = 8;
    std::uint64_t target_sync_interval = 500;
    std::uint64_t train_interval = 1;
    std::uint64_t recycle_interval = 1000;
    std::uint64_t total_steps = 100'000;
    double discount = 1.0;
    std::size_t learning_starts = 1000;
    double priority_epsilon = DpsrBuffer::kDefaultPriorityEpsilon;
    ScheduleConfig schedule;

    std::vector<std::size_t> hidden = {64, 64};
    std::size_t eval_episodes = 10;
    // When false, recycled experiences only compete for eviction and are not
    // written back into their slots.
    bool recycle_writeback = true;
    std::uint64_t checkpoint_interval = 1000;

    /// "desk" (default), "full" (large buffer, long horizon), "cartpole",
    /// "corridor", "chain". Throws ConfigError for an unknown name.
    static TrainConfig preset(std::string_view name);

    /// Throws ConfigError describing the first invalid field.
    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

/// Episodes in the trailing return mean.
inline constexpr std::size_t kReturnWindow = 100;

struct EpisodeRecord {
    std::uint64_t end_timestep = 0;
    std::size_t episode = 0;  // 1-based
    double episode_return = 0.0;
    std::size_t length = 0;
    double mean100 = 0.0;  // over the available episodes until the window fills
    double epsilon = 0.0;

    bool operator==(const EpisodeRecord&) const = default;
};

struct Checkpoint {
    std::uint64_t timestep = 0;
    double mean100 = 0.0;
    double epsilon = 0.0;
    double priority_min = 0.0;
    double priority_max = 0.0;
    double priority_mean = 0.0;

    bool operator==(const Checkpoint&) const = default;
};

struct RunMetrics {
    std::vector<EpisodeRecord> episodes;
    std::vector<Checkpoint> checkpoints;
    std::vector<double> eval_returns;
    double eval_mean = 0.0;
    std::optional<Action> greedy_first_action;  // greedy choice at the first evaluation start state

    std::uint64_t train_steps = 0;
    std::uint64_t recycle_stages = 0;
    std::uint64_t recycled_experiences = 0;
    std::uint64_t recycle_skipped = 0;    // candidates whose snapshot could not be restored
    std::uint64_t recycle_fallbacks = 0;  // recycle slots that fell back to common replacement

    double best_mean100() const;
    /// First episode-end timestep, once a full window of episodes exists,
    /// whose trailing mean reaches `threshold`.
    std::optional<std::uint64_t> steps_to_threshold(double threshold) const;

    bool operator==(const RunMetrics&) const = default;
};

struct ReplacementEvent {
    std::uint64_t timestep = 0;
    std::vector<std::size_t> candidates;
    std::vector<std::uint64_t> birth_steps;  // parallel to candidates, before eviction
    std::size_t chosen = 0;
    bool after_recycle = false;
};

struct RecycleEvent {
    std::uint64_t timestep = 0;
    std::size_t slot = 0;
    Action old_action = 0;
    Action new_action = 0;
    double new_priority = 0.0;
    double max_priority = 0.0;  // buffer max at the start of the stage
};

struct StoreEvent {
    std::uint64_t timestep = 0;
    std::size_t slot = 0;
    double priority = 0.0;
    double expected_priority = 0.0;  // buffer max before storing, 1.0 when empty
};

/// Instrumentation callbacks; any may be empty.
struct TrainerHooks {
    std::function<void(const EpisodeRecord&)> on_episode_end;
    std::function<void(const ReplacementEvent&)> on_replacement;
    std::function<void(const RecycleEvent&)> on_recycle;
    std::function<void(const StoreEvent&)> on_store;
};

using EnvFactory = std::function<std::unique_ptr<SnapshotEnv>(std::uint64_t seed)>;

/// Epsilon-greedy: with probability epsilon a uniformly random action,
/// otherwise greedy_action.
Action act(const QFunction& qf, std::span<const double> observation, double epsilon, Rng& rng);

/**
 * One training run: owns the buffer, online and target models, the
 * environment, and every random stream. The stages of the loop are exposed
 * individually so they can be exercised on hand-built buffers.
 */
class Trainer {
public:
    Trainer(TrainConfig config, EnvFactory env_factory, TrainerHooks hooks = {},
            std::unique_ptr<QFunction> model = nullptr);

    const TrainConfig& config() const noexcept { return config_; }
    const Schedules& schedules() const noexcept { return schedules_; }
    DpsrBuffer& buffer() noexcept { return buffer_; }
    QFunction& online() noexcept { return *online_; }
    QFunction& target() noexcept { return *target_; }
    SnapshotEnv& environment() noexcept { return *env_; }
    const RunMetrics& metrics() const noexcept { return metrics_; }

    Action act(std::span<const double> observation, std::uint64_t t);

    /// Stores `exp` (priority already assigned): append while filling;
    /// otherwise recycle-and-replace on recycling steps or evict one slot.
    void store_experience(Experience exp, std::uint64_t t);

    /// Regenerates candidate experiences from their snapshots with a changed
    /// action. Returns the candidate slot with minimal new priority. Throws
    /// RecycleFailedError when no candidate could be restored.
    std::size_t recycle_stage(std::uint64_t t);

    /// One prioritized update. Returns the batch mean |delta|, or nullopt
    /// when the buffer does not yet hold enough experiences.
    std::optional<double> train_step(std::uint64_t t);

    /// Full loop for t = 1..T, then greedy evaluation.
    RunMetrics run();

private:
    bool recycling_enabled() const;
    void replace_common(Experience exp, std::uint64_t t);
    void record_episode(std::uint64_t t, double episode_return, std::size_t length);
    void record_checkpoint(std::uint64_t t);
    void evaluate();

    TrainConfig config_;
    EnvFactory env_factory_;
    TrainerHooks hooks_;
    Schedules schedules_;
    DpsrBuffer buffer_;
    std::unique_ptr<SnapshotEnv> env_;
    std::unique_ptr<QFunction> online_;
    std::unique_ptr<QFunction> target_;
    Rng act_rng_;
    Rng sample_rng_;
    Rng replace_rng_;
    Rng recycle_rng_;
    std::uint64_t eval_seed_;
    std::size_t fifo_cursor_ = 0;
    std::deque<double> recent_returns_;
    RunMetrics metrics_;
};

/// Runs one configuration to completion.
RunMetrics run(const TrainConfig& config, const EnvFactory& env_factory, TrainerHooks hooks = {});

}  // namespace dpsr
