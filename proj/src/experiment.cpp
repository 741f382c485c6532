#include "dpsr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "dpsr/errors.hpp"
#include "dpsr/format.hpp"

namespace dpsr {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) {
            return parts;
        }
        start = pos + 1;
    }
}

struct BadValue {
    std::string what;
};

std::uint64_t to_u64(std::string_view text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw BadValue{"expected a non-negative integer, got '" + std::string(text) + "'"};
    }
    return v;
}

double to_real(std::string_view text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw BadValue{"expected a finite number, got '" + std::string(text) + "'"};
    }
    return v;
}

bool to_bool(std::string_view text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw BadValue{"expected true or false, got '" + std::string(text) + "'"};
}

int to_int(std::string_view text) {
    const std::uint64_t v = to_u64(text);
    if (v > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
        throw BadValue{"value '" + std::string(text) + "' is too large"};
    }
    return static_cast<int>(v);
}

std::string join_sizes(const std::vector<std::size_t>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + std::to_string(values[i]);
    }
    return out;
}

std::vector<std::size_t> to_sizes(std::string_view text) {
    std::vector<std::size_t> out;
    if (text.empty()) {
        return out;
    }
    for (std::string_view part : split(text, ',')) {
        out.push_back(static_cast<std::size_t>(to_u64(part)));
    }
    return out;
}

std::vector<Mode> to_modes(std::string_view text) {
    std::vector<Mode> out;
    for (std::string_view part : split(text, ',')) {
        Mode m;
        try {
            m = parse_mode(part);
        } catch (const ConfigError& e) {
            throw BadValue{e.what()};
        }
        if (std::find(out.begin(), out.end(), m) != out.end()) {
            throw BadValue{"mode '" + std::string(part) + "' listed twice"};
        }
        out.push_back(m);
    }
    return out;
}

std::vector<std::uint64_t> to_seeds(std::string_view text) {
    std::vector<std::uint64_t> out;
    for (std::string_view part : split(text, ',')) {
        const auto dash = part.find('-');
        std::uint64_t lo = 0;
        std::uint64_t hi = 0;
        if (dash == std::string_view::npos) {
            lo = hi = to_u64(part);
        } else {
            lo = to_u64(trim(part.substr(0, dash)));
            hi = to_u64(trim(part.substr(dash + 1)));
            if (hi < lo) {
                throw BadValue{"empty seed range '" + std::string(part) + "'"};
            }
        }
        for (std::uint64_t s = lo;; ++s) {
            if (std::find(out.begin(), out.end(), s) != out.end()) {
                throw BadValue{"seed " + std::to_string(s) + " listed twice"};
            }
            out.push_back(s);
            if (s == hi) {
                break;
            }
        }
    }
    return out;
}

using Setter = std::function<void(ExperimentSpec&, std::string_view)>;
using Getter = std::function<std::string(const ExperimentSpec&)>;

struct Field {
    std::string_view name;
    std::string_view alias;
    Setter set;
    Getter get;
};

template <typename T>
Field uint_field(std::string_view name, std::string_view alias, T TrainConfig::*member) {
    return {name, alias, [member](ExperimentSpec& s, std::string_view v) { s.train.*member = static_cast<T>(to_u64(v)); },
            [member](const ExperimentSpec& s) { return std::to_string(s.train.*member); }};
}

Field real_field(std::string_view name, std::string_view alias, double TrainConfig::*member) {
    return {name, alias, [member](ExperimentSpec& s, std::string_view v) { s.train.*member = to_real(v); },
            [member](const ExperimentSpec& s) { return format_real(s.train.*member); }};
}

Field bool_field(std::string_view name, std::string_view alias, bool TrainConfig::*member) {
    return {name, alias, [member](ExperimentSpec& s, std::string_view v) { s.train.*member = to_bool(v); },
            [member](const ExperimentSpec& s) { return std::string(s.train.*member ? "true" : "false"); }};
}

Field schedule_field(std::string_view name, double ScheduleConfig::*member) {
    return {name, "", [member](ExperimentSpec& s, std::string_view v) { s.train.schedule.*member = to_real(v); },
            [member](const ExperimentSpec& s) { return format_real(s.train.schedule.*member); }};
}

// Training and environment overrides, applied after the preset in this order.
const std::vector<Field>& override_fields() {
    static const std::vector<Field> fields = [] {
        std::vector<Field> f;
        f.push_back(uint_field("batch_size", "k", &TrainConfig::batch_size));
        f.push_back(real_field("learning_rate", "eta", &TrainConfig::learning_rate));
        f.push_back(uint_field("buffer_size", "N", &TrainConfig::buffer_size));
        f.push_back(bool_field("recycle_max_priority", "M", &TrainConfig::recycle_max_priority));
        f.push_back(uint_field("common_candidates", "C_c", &TrainConfig::common_candidates));
        f.push_back(uint_field("recycle_candidates", "C_r", &TrainConfig::recycle_candidates));
        f.push_back(uint_field("target_sync_interval", "F_t", &TrainConfig::target_sync_interval));
        f.push_back(uint_field("train_interval", "F_s", &TrainConfig::train_interval));
        f.push_back(uint_field("recycle_interval", "F_r", &TrainConfig::recycle_interval));
        f.push_back(uint_field("total_steps", "T", &TrainConfig::total_steps));
        f.push_back(real_field("discount", "", &TrainConfig::discount));
        f.push_back(uint_field("learning_starts", "", &TrainConfig::learning_starts));
        f.push_back(real_field("priority_epsilon", "", &TrainConfig::priority_epsilon));
        f.push_back(schedule_field("epsilon_start", &ScheduleConfig::epsilon_start));
        f.push_back(schedule_field("epsilon_decay", &ScheduleConfig::epsilon_decay));
        f.push_back(schedule_field("epsilon_min", &ScheduleConfig::epsilon_min));
        f.push_back(schedule_field("alpha", &ScheduleConfig::alpha));
        f.push_back(schedule_field("beta_start", &ScheduleConfig::beta_start));
        f.push_back(schedule_field("beta_end", &ScheduleConfig::beta_end));
        f.push_back(schedule_field("gamma", &ScheduleConfig::gamma));
        f.push_back({"hidden", "", [](ExperimentSpec& s, std::string_view v) { s.train.hidden = to_sizes(v); },
                     [](const ExperimentSpec& s) { return join_sizes(s.train.hidden); }});
        f.push_back(uint_field("eval_episodes", "", &TrainConfig::eval_episodes));
        f.push_back(bool_field("recycle_writeback", "", &TrainConfig::recycle_writeback));
        f.push_back(uint_field("checkpoint_interval", "", &TrainConfig::checkpoint_interval));

        f.push_back({"d_left", "", [](ExperimentSpec& s, std::string_view v) { s.environment.corridor.left_depth = to_int(v); },
                     [](const ExperimentSpec& s) { return std::to_string(s.environment.corridor.left_depth); }});
        f.push_back({"len_right", "",
                     [](ExperimentSpec& s, std::string_view v) { s.environment.corridor.right_length = to_int(v); },
                     [](const ExperimentSpec& s) { return std::to_string(s.environment.corridor.right_length); }});
        f.push_back({"r_step_right", "",
                     [](ExperimentSpec& s, std::string_view v) { s.environment.corridor.right_step_reward = to_real(v); },
                     [](const ExperimentSpec& s) { return format_real(s.environment.corridor.right_step_reward); }});
        f.push_back({"r_step_left", "",
                     [](ExperimentSpec& s, std::string_view v) { s.environment.corridor.left_step_reward = to_real(v); },
                     [](const ExperimentSpec& s) { return format_real(s.environment.corridor.left_step_reward); }});
        f.push_back({"r_treasure", "",
                     [](ExperimentSpec& s, std::string_view v) { s.environment.corridor.treasure_reward = to_real(v); },
                     [](const ExperimentSpec& s) { return format_real(s.environment.corridor.treasure_reward); }});
        f.push_back({"chain_states", "",
                     [](ExperimentSpec& s, std::string_view v) { s.environment.chain.states = to_u64(v); },
                     [](const ExperimentSpec& s) { return std::to_string(s.environment.chain.states); }});
        f.push_back({"chain_max_steps", "",
                     [](ExperimentSpec& s, std::string_view v) { s.environment.chain.max_steps = to_u64(v); },
                     [](const ExperimentSpec& s) { return std::to_string(s.environment.chain.max_steps); }});
        return f;
    }();
    return fields;
}

const std::vector<std::string_view> kSpecKeys = {"env", "modes", "seeds", "out", "preset", "threshold"};

struct Entry {
    std::string value;
    std::size_t line;
};

std::string canonical_key(std::string_view key) {
    for (std::string_view k : kSpecKeys) {
        if (key == k) return std::string(k);
    }
    for (const Field& f : override_fields()) {
        if (key == f.name || (!f.alias.empty() && key == f.alias)) return std::string(f.name);
    }
    return {};
}

std::string mode_list(const std::vector<Mode>& modes) {
    std::string out;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        out += (i ? "," : "") + std::string(to_string(modes[i]));
    }
    return out;
}

std::string seed_list(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        out += (i ? "," : "") + std::to_string(seeds[i]);
    }
    return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::string optional_steps(const std::optional<std::uint64_t>& steps) {
    return steps ? std::to_string(*steps) : std::string();
}

std::string percent(double value) {
    std::ostringstream os;
    os << std::showpos << std::fixed << std::setprecision(1) << value << '%';
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec text

std::optional<double> default_threshold(std::string_view env) {
    if (env == "cartpole") return 150.0;
    if (env == "forked_corridor") return 30.0;
    if (env == "chain") return 0.9;
    return std::nullopt;
}

std::string_view default_preset(std::string_view env) {
    if (env == "cartpole") return "cartpole";
    if (env == "forked_corridor") return "corridor";
    if (env == "chain") return "chain";
    return "desk";
}

ExperimentSpec parse_spec(std::string_view text) {
    std::map<std::string, Entry> entries;
    std::size_t line_no = 0;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("expected key=value, got '" + std::string(line) + "'", line_no);
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string name = canonical_key(key);
        if (name.empty()) {
            throw ConfigError("unknown key '" + std::string(key) + "'", line_no);
        }
        if (entries.count(name)) {
            throw ConfigError("key '" + name + "' given twice (first on line " +
                                  std::to_string(entries[name].line) + ")",
                              line_no);
        }
        entries[name] = {std::string(trim(line.substr(eq + 1))), line_no};
    }

    auto apply = [&](const std::string& key, const auto& fn) {
        const auto it = entries.find(key);
        if (it == entries.end()) {
            return false;
        }
        try {
            fn(std::string_view(it->second.value));
        } catch (const BadValue& e) {
            throw ConfigError(key + ": " + e.what, it->second.line);
        } catch (const ConfigError& e) {
            throw ConfigError(key + ": " + e.what(), it->second.line);
        }
        return true;
    };

    ExperimentSpec spec;
    if (!apply("env", [&](std::string_view v) { spec.environment.name = std::string(v); })) {
        throw ConfigError("missing required key 'env'");
    }
    const std::size_t env_line = entries["env"].line;
    if (spec.environment.name != "cartpole" && spec.environment.name != "forked_corridor" &&
        spec.environment.name != "chain") {
        throw ConfigError("env: unknown environment '" + spec.environment.name + "'", env_line);
    }

    spec.preset = std::string(default_preset(spec.environment.name));
    apply("preset", [&](std::string_view v) {
        if (v != "auto") spec.preset = std::string(v);
    });
    try {
        spec.train = TrainConfig::preset(spec.preset);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("preset: ") + e.what(), entries.count("preset") ? entries["preset"].line : 0);
    }

    spec.modes = {Mode::uniform, Mode::per, Mode::dpsr};
    apply("modes", [&](std::string_view v) { spec.modes = to_modes(v); });
    spec.seeds = {1};
    apply("seeds", [&](std::string_view v) { spec.seeds = to_seeds(v); });
    apply("out", [&](std::string_view v) { spec.out_dir = std::string(v); });
    spec.threshold = default_threshold(spec.environment.name);
    apply("threshold", [&](std::string_view v) {
        if (v == "none") {
            spec.threshold.reset();
        } else {
            spec.threshold = to_real(v);
        }
    });

    for (const Field& f : override_fields()) {
        apply(std::string(f.name), [&](std::string_view v) { f.set(spec, v); });
    }

    try {
        spec.train.validate();
        make_environment(spec.environment, 0);
    } catch (const ConfigError& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_spec(text.str());
}

std::string emit_spec(const ExperimentSpec& spec) {
    std::ostringstream os;
    os << "env=" << spec.environment.name << '\n';
    os << "modes=" << mode_list(spec.modes) << '\n';
    os << "seeds=" << seed_list(spec.seeds) << '\n';
    if (!spec.out_dir.empty()) {
        os << "out=" << spec.out_dir << '\n';
    }
    os << "preset=" << spec.preset << '\n';
    os << "threshold=" << (spec.threshold ? format_real(*spec.threshold) : std::string("none")) << '\n';
    for (const Field& f : override_fields()) {
        os << f.name << '=' << f.get(spec) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Summaries

double median(std::vector<double> values) {
    if (values.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) {
        return values[mid];
    }
    return (values[mid - 1] + values[mid]) / 2.0;
}

std::vector<ModeAggregate> aggregate(const std::vector<SummaryRow>& rows) {
    std::vector<Mode> order;
    for (const SummaryRow& r : rows) {
        if (std::find(order.begin(), order.end(), r.mode) == order.end()) {
            order.push_back(r.mode);
        }
    }
    std::vector<ModeAggregate> out;
    for (Mode mode : order) {
        std::vector<double> evals;
        std::vector<double> bests;
        std::vector<double> steps;
        ModeAggregate a;
        a.mode = mode;
        for (const SummaryRow& r : rows) {
            if (r.mode != mode) continue;
            evals.push_back(r.final_eval);
            bests.push_back(r.best_mean100);
            if (r.steps_to_threshold) {
                ++a.reached;
                steps.push_back(static_cast<double>(*r.steps_to_threshold));
            } else {
                steps.push_back(std::numeric_limits<double>::infinity());
            }
        }
        a.runs = evals.size();
        const double n = static_cast<double>(a.runs);
        a.final_eval_mean = std::accumulate(evals.begin(), evals.end(), 0.0) / n;
        a.best_mean100_mean = std::accumulate(bests.begin(), bests.end(), 0.0) / n;
        a.final_eval_median = median(evals);
        a.best_mean100_median = median(bests);
        a.steps_to_threshold_median = median(steps);
        out.push_back(a);
    }
    return out;
}

void write_curve_csv(std::ostream& out, const RunMetrics& metrics) {
    out << "timestep,episode,return,mean100,epsilon\n";
    for (const EpisodeRecord& e : metrics.episodes) {
        out << e.end_timestep << ',' << e.episode << ',' << format_real(e.episode_return) << ','
            << format_real(e.mean100) << ',' << format_real(e.epsilon) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "mode,seed,final_eval,best_mean100,steps_to_threshold\n";
    for (const SummaryRow& r : rows) {
        out << to_string(r.mode) << ',' << r.seed << ',' << format_real(r.final_eval) << ','
            << format_real(r.best_mean100) << ',' << optional_steps(r.steps_to_threshold) << '\n';
    }
}

void write_aggregate_csv(std::ostream& out, const std::vector<ModeAggregate>& aggregates) {
    out << "mode,runs,final_eval_mean,final_eval_median,best_mean100_mean,best_mean100_median,reached,"
           "steps_to_threshold_median\n";
    for (const ModeAggregate& a : aggregates) {
        out << to_string(a.mode) << ',' << a.runs << ',' << format_real(a.final_eval_mean) << ','
            << format_real(a.final_eval_median) << ',' << format_real(a.best_mean100_mean) << ','
            << format_real(a.best_mean100_median) << ',' << a.reached << ','
            << format_real(a.steps_to_threshold_median) << '\n';
    }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "mode,seed,final_eval,best_mean100,steps_to_threshold") {
        throw ReportError("not a summary file: unexpected header");
    }
    std::vector<SummaryRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string_view> cells = split(trim(line), ',');
        if (cells.size() != 5) {
            throw ReportError("summary line " + std::to_string(line_no) + ": expected 5 fields");
        }
        try {
            SummaryRow r;
            r.mode = parse_mode(cells[0]);
            r.seed = to_u64(cells[1]);
            r.final_eval = to_real(cells[2]);
            r.best_mean100 = to_real(cells[3]);
            if (!cells[4].empty()) {
                r.steps_to_threshold = to_u64(cells[4]);
            }
            rows.push_back(r);
        } catch (const BadValue& e) {
            throw ReportError("summary line " + std::to_string(line_no) + ": " + e.what);
        } catch (const ConfigError& e) {
            throw ReportError("summary line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    return read_summary_csv(in);
}

SummaryRow summarize(Mode mode, std::uint64_t seed, const RunMetrics& metrics, std::optional<double> threshold) {
    SummaryRow row;
    row.mode = mode;
    row.seed = seed;
    row.final_eval = metrics.eval_mean;
    row.best_mean100 = metrics.best_mean100();
    if (threshold) {
        row.steps_to_threshold = metrics.steps_to_threshold(*threshold);
    }
    return row;
}

// ---------------------------------------------------------------------------
// Running

std::unique_ptr<SnapshotEnv> make_environment_for(const ExperimentSpec& spec, std::uint64_t seed) {
    return make_environment(spec.environment, seed);
}

std::vector<SummaryRow> run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                                       std::size_t jobs) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory " + out_dir.string() + (ec ? ": " + ec.message() : ""));
    }

    struct Task {
        Mode mode;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (Mode mode : spec.modes) {
        for (std::uint64_t seed : spec.seeds) {
            tasks.push_back({mode, seed});
        }
    }
    std::vector<SummaryRow> rows(tasks.size());

    auto run_one = [&](const Task& task) {
        TrainConfig config = spec.train;
        config.mode = task.mode;
        config.seed = task.seed;
        const EnvFactory factory = [&spec](std::uint64_t seed) { return make_environment_for(spec, seed); };
        const RunMetrics metrics = run(config, factory);
        const SummaryRow row = summarize(task.mode, task.seed, metrics, spec.threshold);

        const std::string stem = std::string(to_string(task.mode)) + "_seed" + std::to_string(task.seed);
        const auto curve_path = out_dir / ("curve_" + stem + ".csv");
        std::ofstream curve = open_output(curve_path);
        write_curve_csv(curve, metrics);
        finish_output(curve, curve_path);

        ExperimentSpec single = spec;
        single.modes = {task.mode};
        single.seeds = {task.seed};
        const auto echo_path = out_dir / ("run_" + stem + ".txt");
        std::ofstream echo = open_output(echo_path);
        echo << emit_spec(single);
        echo << "# final_eval=" << format_real(row.final_eval) << '\n';
        echo << "# best_mean100=" << format_real(row.best_mean100) << '\n';
        echo << "# steps_to_threshold=" << optional_steps(row.steps_to_threshold) << '\n';
        echo << "# episodes=" << metrics.episodes.size() << '\n';
        echo << "# train_steps=" << metrics.train_steps << '\n';
        echo << "# recycle_stages=" << metrics.recycle_stages << '\n';
        echo << "# recycled_experiences=" << metrics.recycled_experiences << '\n';
        echo << "# recycle_skipped=" << metrics.recycle_skipped << '\n';
        echo << "# recycle_fallbacks=" << metrics.recycle_fallbacks << '\n';
        finish_output(echo, echo_path);
        return row;
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            rows[i] = run_one(tasks[i]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::mutex error_mutex;
        std::exception_ptr error;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) {
                    try {
                        rows[i] = run_one(tasks[i]);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!error) error = std::current_exception();
                        next = tasks.size();
                    }
                }
            });
        }
        for (std::thread& t : pool) {
            t.join();
        }
        if (error) {
            std::rethrow_exception(error);
        }
    }

    const auto summary_path = out_dir / "summary.csv";
    std::ofstream summary = open_output(summary_path);
    write_summary_csv(summary, rows);
    finish_output(summary, summary_path);

    const auto aggregate_path = out_dir / "aggregate.csv";
    std::ofstream agg = open_output(aggregate_path);
    write_aggregate_csv(agg, aggregate(rows));
    finish_output(agg, aggregate_path);
    return rows;
}

// ---------------------------------------------------------------------------
// Comparison

ComparisonReport compare_summaries(const std::vector<std::pair<std::string, std::vector<SummaryRow>>>& summaries,
                                   Mode baseline, Mode treatment) {
    ComparisonReport report;
    report.baseline_mode = std::string(to_string(baseline));
    report.treatment_mode = std::string(to_string(treatment));
    std::vector<double> improvements;
    for (const auto& [label, rows] : summaries) {
        auto mean_of = [&](Mode mode) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const SummaryRow& r : rows) {
                if (r.mode == mode) {
                    sum += r.final_eval;
                    ++n;
                }
            }
            if (n == 0) {
                throw ReportError("summary '" + label + "' has no rows for mode " + std::string(to_string(mode)));
            }
            return sum / static_cast<double>(n);
        };
        ComparisonRow row;
        row.label = label;
        row.baseline = mean_of(baseline);
        row.treatment = mean_of(treatment);
        if (row.baseline > 0.0) {
            row.improvement_percent = (row.treatment - row.baseline) / row.baseline * 100.0;
            improvements.push_back(*row.improvement_percent);
        }
        report.rows.push_back(row);
    }
    if (!improvements.empty()) {
        report.mean_improvement =
            std::accumulate(improvements.begin(), improvements.end(), 0.0) / static_cast<double>(improvements.size());
        report.median_improvement = median(improvements);
    }
    return report;
}

ComparisonReport compare_report(const std::vector<std::filesystem::path>& summary_paths, Mode baseline,
                                Mode treatment) {
    std::vector<std::pair<std::string, std::vector<SummaryRow>>> summaries;
    for (const auto& path : summary_paths) {
        std::string label = path.parent_path().filename().string();
        if (label.empty()) {
            label = path.stem().string();
        }
        summaries.emplace_back(label, read_summary_csv(path));
    }
    return compare_summaries(summaries, baseline, treatment);
}

std::string ComparisonReport::text() const {
    std::ostringstream os;
    os << "baseline=" << baseline_mode << " treatment=" << treatment_mode << '\n';
    os << "environment,baseline,treatment,improvement\n";
    for (const ComparisonRow& r : rows) {
        os << r.label << ',' << format_real(r.baseline) << ',' << format_real(r.treatment) << ','
           << (r.improvement_percent ? percent(*r.improvement_percent) : std::string("excluded")) << '\n';
    }
    os << "mean improvement: " << (mean_improvement ? percent(*mean_improvement) : std::string("n/a")) << '\n';
    os << "median improvement: " << (median_improvement ? percent(*median_improvement) : std::string("n/a"))
       << '\n';
    return os.str();
}

}  // namespace dpsr
