#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpsr/environments.hpp"
#include "dpsr/trainer.hpp"

namespace dpsr {

/**
 * A run matrix: one environment, several modes and seeds, and a shared
 * training configuration (preset plus overrides).
 *
 * Text form is flat `key=value` lines; `#` starts a comment. Recognized keys:
 *   env, modes, seeds, out, preset, threshold
 *   batch_size (k), learning_rate (eta), buffer_size (N),
 *   recycle_max_priority (M), common_candidates (C_c),
 *   recycle_candidates (C_r), target_sync_interval (F_t),
 *   train_interval (F_s), recycle_interval (F_r), total_steps (T),
 *   discount, learning_starts, priority_epsilon, epsilon_start,
 *   epsilon_decay, epsilon_min, alpha, beta_start, beta_end, gamma, hidden,
 *   eval_episodes, recycle_writeback, checkpoint_interval
 *   d_left, len_right, r_step_right, r_step_left, r_treasure,
 *   chain_states, chain_max_steps
 * `seeds` takes a comma list and/or inclusive ranges such as `1-5`.
 */
struct ExperimentSpec {
    EnvironmentConfig environment;
    std::vector<Mode> modes;
    std::vector<std::uint64_t> seeds;
    std::string preset;  // resolved name, never "auto"
    TrainConfig train;   // mode and seed are filled per run
    std::optional<double> threshold;
    std::string out_dir;  // empty when not given

    bool operator==(const ExperimentSpec&) const = default;
};

/// Throws ConfigError (with the offending line) for unknown or repeated
/// keys, unparsable values, a missing env, or an invalid resulting config.
ExperimentSpec parse_spec(std::string_view text);
ExperimentSpec load_spec(const std::filesystem::path& path);

/// Fully resolved text form; parse_spec(emit_spec(s)) == s.
std::string emit_spec(const ExperimentSpec& spec);

/// Default steps-to-threshold target for an environment name, if any.
std::optional<double> default_threshold(std::string_view env);

/// Preset matching an environment name ("desk" when none does).
std::string_view default_preset(std::string_view env);

struct SummaryRow {
    Mode mode = Mode::dpsr;
    std::uint64_t seed = 0;
    double final_eval = 0.0;
    double best_mean100 = 0.0;
    std::optional<std::uint64_t> steps_to_threshold;

    bool operator==(const SummaryRow&) const = default;
};

struct ModeAggregate {
    Mode mode = Mode::dpsr;
    std::size_t runs = 0;
    double final_eval_mean = 0.0;
    double final_eval_median = 0.0;
    double best_mean100_mean = 0.0;
    double best_mean100_median = 0.0;
    std::size_t reached = 0;
    // Runs that never reach the threshold count as +infinity.
    double steps_to_threshold_median = 0.0;
};

double median(std::vector<double> values);

/// One entry per mode, in first-appearance order.
std::vector<ModeAggregate> aggregate(const std::vector<SummaryRow>& rows);

void write_curve_csv(std::ostream& out, const RunMetrics& metrics);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_aggregate_csv(std::ostream& out, const std::vector<ModeAggregate>& aggregates);
/// Throws ReportError on a malformed file or header.
std::vector<SummaryRow> read_summary_csv(std::istream& in);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

SummaryRow summarize(Mode mode, std::uint64_t seed, const RunMetrics& metrics, std::optional<double> threshold);

std::unique_ptr<SnapshotEnv> make_environment_for(const ExperimentSpec& spec, std::uint64_t seed);

/// Runs every (mode, seed) pair with up to `jobs` runs in parallel and writes
/// curve_<mode>_seed<seed>.csv, run_<mode>_seed<seed>.txt, summary.csv and
/// aggregate.csv into `out_dir`. Throws IoError when it cannot be written.
std::vector<SummaryRow> run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                                       std::size_t jobs = 1);

struct ComparisonRow {
    std::string label;
    double baseline = 0.0;
    double treatment = 0.0;
    std::optional<double> improvement_percent;  // absent when baseline <= 0
};

struct ComparisonReport {
    std::string baseline_mode;
    std::string treatment_mode;
    std::vector<ComparisonRow> rows;
    std::optional<double> mean_improvement;
    std::optional<double> median_improvement;

    std::string text() const;
};

/// Percentage improvement of the treatment's mean final_eval over the
/// baseline's. Each entry in `summaries` is one environment.
ComparisonReport compare_summaries(const std::vector<std::pair<std::string, std::vector<SummaryRow>>>& summaries,
                                   Mode baseline, Mode treatment);

/// Reads each summary file (labeled by its directory name) and compares.
/// Throws ReportError when a mode is missing from a summary.
ComparisonReport compare_report(const std::vector<std::filesystem::path>& summary_paths, Mode baseline,
                                Mode treatment);

}  // namespace dpsr
