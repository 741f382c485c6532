#include "dpsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dpsr/errors.hpp"

namespace dpsr {

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::uniform:
            return "uniform";
        case Mode::per:
            return "per";
        case Mode::dpsr:
            return "dpsr";
        case Mode::dpsr_no_recycle:
            return "dpsr_no_recycle";
    }
    return "unknown";
}

Mode parse_mode(std::string_view name) {
    for (Mode m : {Mode::uniform, Mode::per, Mode::dpsr, Mode::dpsr_no_recycle}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    throw ConfigError("unknown mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Schedules

Schedules::Schedules(ScheduleConfig config, std::uint64_t horizon) : config_(config), horizon_(horizon) {}

double Schedules::progress(std::uint64_t t) const {
    return horizon_ == 0 ? 1.0 : static_cast<double>(t) / static_cast<double>(horizon_);
}

double Schedules::epsilon(std::uint64_t t) const {
    return std::max(config_.epsilon_start - config_.epsilon_decay * progress(t), config_.epsilon_min);
}

double Schedules::alpha(std::uint64_t) const { return config_.alpha; }

double Schedules::beta(std::uint64_t t) const {
    return config_.beta_start + (config_.beta_end - config_.beta_start) * progress(t);
}

double Schedules::gamma(std::uint64_t) const { return config_.gamma; }

// ---------------------------------------------------------------------------
// TrainConfig

TrainConfig TrainConfig::preset(std::string_view name) {
    TrainConfig c;
    if (name == "desk") {
        return c;
    }
    if (name == "full") {
        c.buffer_size = 50'000;
        c.total_steps = 1'000'000;
        c.recycle_interval = 10'000;
        return c;
    }
    if (name == "cartpole") {
        c.discount = 0.99;
        c.learning_rate = 0.001;
        c.buffer_size = 2000;
        c.recycle_interval = 1;
        c.recycle_candidates = 4;
        return c;
    }
    if (name == "corridor") {
        c.total_steps = 20'000;
        c.recycle_interval = 10;
        return c;
    }
    if (name == "chain") {
        c.discount = 0.9;
        c.total_steps = 10'000;
        c.buffer_size = 1000;
        c.learning_starts = 100;
        return c;
    }
    throw ConfigError("unknown preset '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
    if (buffer_size == 0) fail("buffer_size must be positive");
    if (common_candidates == 0 || common_candidates > buffer_size)
        fail("common_candidates must lie in [1, buffer_size]");
    if (recycle_candidates == 0 || recycle_candidates > buffer_size)
        fail("recycle_candidates must lie in [1, buffer_size]");
    if (target_sync_interval == 0) fail("target_sync_interval must be positive");
    if (train_interval == 0) fail("train_interval must be positive");
    if (recycle_interval == 0) fail("recycle_interval must be positive");
    if (!(discount >= 0.0) || discount > 1.0) fail("discount must lie in [0, 1]");
    if (!(priority_epsilon > 0.0) || !std::isfinite(priority_epsilon)) fail("priority_epsilon must be positive");
    const ScheduleConfig& s = schedule;
    if (!(s.epsilon_min >= 0.0) || s.epsilon_min > 1.0 || !(s.epsilon_start >= 0.0) || s.epsilon_start > 1.0)
        fail("exploration rates must lie in [0, 1]");
    if (!std::isfinite(s.epsilon_decay)) fail("epsilon_decay must be finite");
    if (!(s.alpha >= 0.0) || !std::isfinite(s.alpha)) fail("alpha must be non-negative");
    if (!(s.beta_start >= 0.0) || !(s.beta_end >= 0.0) || !std::isfinite(s.beta_start) || !std::isfinite(s.beta_end))
        fail("beta must be non-negative");
    if (!(s.gamma >= 0.0) || !std::isfinite(s.gamma)) fail("gamma must be non-negative");
    for (std::size_t h : hidden) {
        if (h == 0) fail("hidden layer widths must be positive");
    }
    if (checkpoint_interval == 0) fail("checkpoint_interval must be positive");
}

// ---------------------------------------------------------------------------
// RunMetrics

double RunMetrics::best_mean100() const {
    if (episodes.empty()) {
        return 0.0;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const EpisodeRecord& e : episodes) {
        best = std::max(best, e.mean100);
    }
    return best;
}

std::optional<std::uint64_t> RunMetrics::steps_to_threshold(double threshold) const {
    for (const EpisodeRecord& e : episodes) {
        if (e.episode >= kReturnWindow && e.mean100 >= threshold) {
            return e.end_timestep;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Trainer

Action act(const QFunction& qf, std::span<const double> observation, double epsilon, Rng& rng) {
    if (rng.uniform() < epsilon) {
        return static_cast<Action>(rng.uniform_index(qf.action_count()));
    }
    return greedy_action(qf, observation);
}

Trainer::Trainer(TrainConfig config, EnvFactory env_factory, TrainerHooks hooks, std::unique_ptr<QFunction> model)
    : config_(std::move(config)),
      env_factory_(std::move(env_factory)),
      hooks_(std::move(hooks)),
      schedules_(config_.schedule, config_.total_steps),
      buffer_((config_.validate(), config_.buffer_size), config_.schedule.alpha, config_.schedule.gamma,
              config_.priority_epsilon),
      act_rng_(config_.seed, streams::kAct),
      sample_rng_(config_.seed, streams::kSample),
      replace_rng_(config_.seed, streams::kReplace),
      recycle_rng_(config_.seed, streams::kRecycle),
      eval_seed_(Rng(config_.seed, streams::kEval).next()) {
    if (!env_factory_) {
        throw ConfigError("trainer needs an environment factory");
    }
    env_ = env_factory_(Rng(config_.seed, streams::kEnv).next());
    if (model) {
        online_ = std::move(model);
    } else {
        auto net = std::make_unique<DenseQNet>(env_->observation_dim(), env_->action_count(), config_.hidden);
        Rng init(config_.seed, streams::kInit);
        net->initialize(init);
        online_ = std::move(net);
    }
    if (online_->input_dim() != env_->observation_dim() || online_->action_count() != env_->action_count()) {
        throw ShapeError("model does not match the environment's observation or action space");
    }
    target_ = online_->clone();
}

bool Trainer::recycling_enabled() const { return config_.mode == Mode::dpsr; }

Action Trainer::act(std::span<const double> observation, std::uint64_t t) {
    return dpsr::act(*online_, observation, schedules_.epsilon(t), act_rng_);
}

void Trainer::store_experience(Experience exp, std::uint64_t t) {
    if (hooks_.on_store) {
        const double expected = buffer_.new_experience_priority();
        const double priority = exp.priority;
        const std::size_t slot_hint = buffer_.full() ? buffer_.capacity() : buffer_.size();
        hooks_.on_store({t, slot_hint, priority, expected});
    }
    if (!buffer_.full()) {
        buffer_.append(std::move(exp));
        return;
    }

    if (config_.mode == Mode::uniform || config_.mode == Mode::per) {
        const std::size_t slot = fifo_cursor_;
        fifo_cursor_ = (fifo_cursor_ + 1) % buffer_.capacity();
        if (hooks_.on_replacement) {
            hooks_.on_replacement({t, {slot}, {buffer_.at(slot).birth_step}, slot, false});
        }
        buffer_.overwrite_slot(slot, std::move(exp));
        return;
    }

    if (recycling_enabled() && t % config_.recycle_interval == 0) {
        if (env_->action_count() < 2) {
            ++metrics_.recycle_fallbacks;
        } else {
            try {
                const std::size_t slot = recycle_stage(t);
                if (hooks_.on_replacement) {
                    hooks_.on_replacement({t, {slot}, {buffer_.at(slot).birth_step}, slot, true});
                }
                buffer_.overwrite_slot(slot, std::move(exp));
                return;
            } catch (const RecycleFailedError&) {
                ++metrics_.recycle_fallbacks;
            }
        }
    }
    replace_common(std::move(exp), t);
}

void Trainer::replace_common(Experience exp, std::uint64_t t) {
    const std::vector<std::size_t> candidates =
        buffer_.select_replacement_candidates(config_.common_candidates, schedules_.gamma(t), replace_rng_);
    std::size_t chosen = candidates.front();
    for (std::size_t slot : candidates) {
        const std::uint64_t birth = buffer_.at(slot).birth_step;
        const std::uint64_t best = buffer_.at(chosen).birth_step;
        if (birth < best || (birth == best && slot < chosen)) {
            chosen = slot;
        }
    }
    if (hooks_.on_replacement) {
        ReplacementEvent event{t, candidates, {}, chosen, false};
        event.birth_steps.reserve(candidates.size());
        for (std::size_t slot : candidates) {
            event.birth_steps.push_back(buffer_.at(slot).birth_step);
        }
        hooks_.on_replacement(event);
    }
    buffer_.overwrite_slot(chosen, std::move(exp));
}

std::size_t Trainer::recycle_stage(std::uint64_t t) {
    if (!buffer_.full()) {
        throw StateError("recycling requires a full buffer");
    }
    const std::size_t actions = env_->action_count();
    if (actions < 2) {
        throw StateError("recycling needs at least two actions");
    }
    ++metrics_.recycle_stages;
    const std::vector<std::size_t> candidates =
        buffer_.select_replacement_candidates(config_.recycle_candidates, schedules_.gamma(t), replace_rng_);
    const double max_priority = buffer_.max_priority();

    struct Recycled {
        std::size_t slot;
        Experience experience;
    };
    std::vector<Recycled> recycled;
    recycled.reserve(candidates.size());
    for (std::size_t slot : candidates) {
        const Experience& old = buffer_.at(slot);
        std::unique_ptr<SnapshotEnv> copy;
        try {
            copy = env_->spawn_from(old.snapshot);
        } catch (const TokenError&) {
            ++metrics_.recycle_skipped;
            continue;
        }
        if (copy->terminal()) {
            ++metrics_.recycle_skipped;
            continue;
        }
        Action action = greedy_action(*online_, old.state);
        if (action == old.action) {
            // Uniform over the actions other than the stored one.
            action = static_cast<Action>(recycle_rng_.uniform_index(actions - 1));
            if (action >= old.action) {
                ++action;
            }
        }
        StepResult step = copy->step(action);
        Experience fresh{old.state, action, step.reward, std::move(step.observation), step.terminal,
                         old.snapshot, t, max_priority};
        if (!config_.recycle_max_priority) {
            fresh.priority = std::abs(td_error(*online_, *target_, fresh, config_.discount)) + buffer_.priority_epsilon();
        }
        recycled.push_back({slot, std::move(fresh)});
    }
    if (recycled.empty()) {
        throw RecycleFailedError("no recycling candidate could be restored");
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < recycled.size(); ++i) {
        const double p = recycled[i].experience.priority;
        const double q = recycled[best].experience.priority;
        if (p < q || (p == q && recycled[i].slot < recycled[best].slot)) {
            best = i;
        }
    }
    const std::size_t best_slot = recycled[best].slot;
    for (Recycled& r : recycled) {
        if (hooks_.on_recycle) {
            hooks_.on_recycle({t, r.slot, buffer_.at(r.slot).action, r.experience.action, r.experience.priority,
                               max_priority});
        }
        ++metrics_.recycled_experiences;
        if (config_.recycle_writeback) {
            buffer_.overwrite_slot(r.slot, std::move(r.experience));
        }
    }
    return best_slot;
}

std::optional<double> Trainer::train_step(std::uint64_t t) {
    if (buffer_.size() < std::max(config_.batch_size, config_.learning_starts)) {
        return std::nullopt;
    }
    const bool uniform = config_.mode == Mode::uniform;
    const double alpha = uniform ? 0.0 : schedules_.alpha(t);
    const double beta = uniform ? 0.0 : schedules_.beta(t);
    const std::vector<DpsrBuffer::Sample> samples =
        buffer_.sample_batch(config_.batch_size, alpha, beta, sample_rng_);

    std::vector<const Experience*> batch;
    batch.reserve(samples.size());
    for (const DpsrBuffer::Sample& s : samples) {
        batch.push_back(&buffer_.at(s.slot));
    }
    const std::vector<double> deltas = td_errors(*online_, *target_, batch, config_.discount);

    std::vector<WeightedTransition> update;
    update.reserve(samples.size());
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        update.push_back({batch[i], samples[i].weight, deltas[i]});
        abs_sum += std::abs(deltas[i]);
    }
    apply_weighted_update(*online_, update, config_.learning_rate);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        buffer_.update_priority(samples[i].slot, std::abs(deltas[i]));
    }
    ++metrics_.train_steps;
    if (t % config_.target_sync_interval == 0) {
        sync_target(*online_, *target_);
    }
    return abs_sum / static_cast<double>(samples.size());
}

void Trainer::record_episode(std::uint64_t t, double episode_return, std::size_t length) {
    recent_returns_.push_back(episode_return);
    if (recent_returns_.size() > kReturnWindow) {
        recent_returns_.pop_front();
    }
    const double sum = std::accumulate(recent_returns_.begin(), recent_returns_.end(), 0.0);
    EpisodeRecord record{t,
                         metrics_.episodes.size() + 1,
                         episode_return,
                         length,
                         sum / static_cast<double>(recent_returns_.size()),
                         schedules_.epsilon(t)};
    metrics_.episodes.push_back(record);
    if (hooks_.on_episode_end) {
        hooks_.on_episode_end(record);
    }
}

void Trainer::record_checkpoint(std::uint64_t t) {
    Checkpoint c;
    c.timestep = t;
    c.epsilon = schedules_.epsilon(t);
    if (!metrics_.episodes.empty()) {
        c.mean100 = metrics_.episodes.back().mean100;
    }
    if (!buffer_.empty()) {
        double lo = std::numeric_limits<double>::infinity();
        double sum = 0.0;
        for (std::size_t slot = 0; slot < buffer_.size(); ++slot) {
            const double p = buffer_.at(slot).priority;
            lo = std::min(lo, p);
            sum += p;
        }
        c.priority_min = lo;
        c.priority_max = buffer_.max_priority();
        c.priority_mean = sum / static_cast<double>(buffer_.size());
    }
    metrics_.checkpoints.push_back(c);
}

void Trainer::evaluate() {
    constexpr std::uint64_t kMaxEvalSteps = 100'000;
    std::unique_ptr<SnapshotEnv> env = env_factory_(eval_seed_);
    metrics_.eval_returns.clear();
    for (std::size_t episode = 0; episode < config_.eval_episodes; ++episode) {
        Observation obs = env->reset();
        if (episode == 0) {
            metrics_.greedy_first_action = greedy_action(*online_, obs);
        }
        double total = 0.0;
        for (std::uint64_t step = 0; step < kMaxEvalSteps; ++step) {
            StepResult r = env->step(greedy_action(*online_, obs));
            total += r.reward;
            if (r.terminal) {
                break;
            }
            obs = std::move(r.observation);
        }
        metrics_.eval_returns.push_back(total);
    }
    if (!metrics_.eval_returns.empty()) {
        metrics_.eval_mean = std::accumulate(metrics_.eval_returns.begin(), metrics_.eval_returns.end(), 0.0) /
                             static_cast<double>(metrics_.eval_returns.size());
    }
}

RunMetrics Trainer::run() {
    const std::uint64_t horizon = config_.total_steps;
    if (horizon == 0) {
        return metrics_;
    }
    Observation obs = env_->reset();
    Action action = act(obs, 0);
    double episode_return = 0.0;
    std::size_t episode_length = 0;

    for (std::uint64_t t = 1; t <= horizon; ++t) {
        Snapshot snapshot = env_->snapshot();
        StepResult step = env_->step(action);
        episode_return += step.reward;
        ++episode_length;

        Experience exp{obs, action, step.reward, step.observation, step.terminal, std::move(snapshot), t,
                       buffer_.new_experience_priority()};
        store_experience(std::move(exp), t);

        if (t % config_.train_interval == 0) {
            train_step(t);
        }
        if (step.terminal) {
            record_episode(t, episode_return, episode_length);
            episode_return = 0.0;
            episode_length = 0;
            obs = env_->reset();
        } else {
            obs = std::move(step.observation);
        }
        if (t % config_.checkpoint_interval == 0) {
            record_checkpoint(t);
        }
        action = act(obs, t);
    }
    evaluate();
    return metrics_;
}

RunMetrics run(const TrainConfig& config, const EnvFactory& env_factory, TrainerHooks hooks) {
    Trainer trainer(config, env_factory, std::move(hooks));
    return trainer.run();
}

}  // namespace dpsr
