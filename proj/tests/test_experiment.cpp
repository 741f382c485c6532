#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dpsr/errors.hpp"
#include "dpsr/experiment.hpp"

namespace fs = std::filesystem;
using dpsr::Mode;
using dpsr::SummaryRow;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("dpsr_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::size_t config_error_line(const std::string& text) {
    try {
        dpsr::parse_spec(text);
    } catch (const dpsr::ConfigError& e) {
        return e.line();
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return 0;
}

}  // namespace

TEST(ParseSpec, MinimalSpecGetsPresetDefaults) {
    const auto spec = dpsr::parse_spec("env=cartpole\nmodes=dpsr\nseeds=1\n");
    EXPECT_EQ(spec.environment.name, "cartpole");
    EXPECT_EQ(spec.modes, std::vector<Mode>{Mode::dpsr});
    EXPECT_EQ(spec.seeds, std::vector<std::uint64_t>{1});
    EXPECT_EQ(spec.preset, "cartpole");
    EXPECT_EQ(spec.train, dpsr::TrainConfig::preset("cartpole"));
    EXPECT_EQ(spec.threshold, 150.0);
    EXPECT_TRUE(spec.out_dir.empty());
}

TEST(ParseSpec, OverridesAliasesAndComments) {
    const auto spec = dpsr::parse_spec(
        "# matrix\n"
        "env = forked_corridor\n"
        "modes = dpsr, dpsr_no_recycle\n"
        "seeds = 1-3, 10\n"
        "preset = desk\n"
        "k = 16   # small batches\n"
        "eta=0.001\n"
        "M=true\n"
        "C_c=64\n"
        "F_r=250\n"
        "T=5000\n"
        "gamma=0.5\n"
        "hidden=32\n"
        "d_left=5\n"
        "threshold=none\n");
    EXPECT_EQ(spec.modes, (std::vector<Mode>{Mode::dpsr, Mode::dpsr_no_recycle}));
    EXPECT_EQ(spec.seeds, (std::vector<std::uint64_t>{1, 2, 3, 10}));
    EXPECT_EQ(spec.preset, "desk");
    EXPECT_EQ(spec.train.batch_size, 16u);
    EXPECT_EQ(spec.train.learning_rate, 0.001);
    EXPECT_TRUE(spec.train.recycle_max_priority);
    EXPECT_EQ(spec.train.common_candidates, 64u);
    EXPECT_EQ(spec.train.recycle_interval, 250u);
    EXPECT_EQ(spec.train.total_steps, 5000u);
    EXPECT_EQ(spec.train.schedule.gamma, 0.5);
    EXPECT_EQ(spec.train.hidden, std::vector<std::size_t>{32});
    EXPECT_EQ(spec.environment.corridor.left_depth, 5);
    EXPECT_FALSE(spec.threshold.has_value());
}

TEST(ParseSpec, ErrorsCarryLineNumbers) {
    EXPECT_EQ(config_error_line("env=cartpole\nk=notanumber\n"), 2u);
    EXPECT_EQ(config_error_line("env=cartpole\n\nwidth=3\n"), 3u);
    EXPECT_EQ(config_error_line("env=cartpole\nk=4\nbatch_size=8\n"), 3u);
    EXPECT_EQ(config_error_line("env=pong\n"), 1u);
    EXPECT_EQ(config_error_line("env=cartpole\nmodes=dpsr,rainbow\n"), 2u);
    EXPECT_EQ(config_error_line("env=cartpole\njust text\n"), 2u);
    EXPECT_EQ(config_error_line("env=cartpole\nseeds=5-2\n"), 2u);
    EXPECT_EQ(config_error_line("env=cartpole\nM=maybe\n"), 2u);
    EXPECT_THROW(dpsr::parse_spec("modes=dpsr\n"), dpsr::ConfigError);
    EXPECT_THROW(dpsr::parse_spec("env=cartpole\ndiscount=2\n"), dpsr::ConfigError);
    try {
        dpsr::parse_spec("env=cartpole\nk=notanumber\n");
    } catch (const dpsr::ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
    }
}

TEST(ParseSpec, EmitRoundTrip) {
    const auto spec = dpsr::parse_spec(
        "env=chain\nmodes=uniform,per\nseeds=4,2\nout=results\neta=0.00025\nchain_states=7\nhidden=\n");
    const std::string text = dpsr::emit_spec(spec);
    const auto again = dpsr::parse_spec(text);
    EXPECT_EQ(again, spec);
    EXPECT_EQ(dpsr::emit_spec(again), text);
    EXPECT_TRUE(again.train.hidden.empty());
}

TEST(Summary, CsvRoundTripAndAggregates) {
    const std::vector<SummaryRow> rows = {
        {Mode::per, 1, 100.0, 120.5, 4000},
        {Mode::per, 2, 50.0, 80.0, std::nullopt},
        {Mode::per, 3, 75.25, 90.0, 2000},
        {Mode::dpsr, 1, 10.0, 11.0, 100},
        {Mode::dpsr, 2, 30.0, 31.0, 300},
    };
    std::stringstream csv;
    dpsr::write_summary_csv(csv, rows);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "mode,seed,final_eval,best_mean100,steps_to_threshold");
    EXPECT_NE(csv.str().find("per,2,50,80,\n"), std::string::npos);
    EXPECT_EQ(dpsr::read_summary_csv(csv), rows);

    const auto agg = dpsr::aggregate(rows);
    ASSERT_EQ(agg.size(), 2u);
    EXPECT_EQ(agg[0].mode, Mode::per);
    EXPECT_EQ(agg[0].runs, 3u);
    EXPECT_EQ(agg[0].final_eval_mean, (100.0 + 50.0 + 75.25) / 3.0);
    EXPECT_EQ(agg[0].final_eval_median, 75.25);
    EXPECT_EQ(agg[0].reached, 2u);
    EXPECT_EQ(agg[0].steps_to_threshold_median, 4000.0);
    EXPECT_EQ(agg[1].final_eval_median, 20.0);
    EXPECT_EQ(agg[1].steps_to_threshold_median, 200.0);

    std::stringstream bad("mode,seed\n");
    EXPECT_THROW(dpsr::read_summary_csv(bad), dpsr::ReportError);
}

TEST(Median, EvenOddInfinite) {
    EXPECT_EQ(dpsr::median({3, 1, 2}), 2.0);
    EXPECT_EQ(dpsr::median({4, 1, 3, 2}), 2.5);
    EXPECT_TRUE(std::isinf(dpsr::median({1, INFINITY, INFINITY})));
    EXPECT_TRUE(std::isnan(dpsr::median({})));
}

TEST(Compare, Improvements) {
    const std::vector<SummaryRow> a = {{Mode::per, 1, 100.0, 0, {}}, {Mode::dpsr, 1, 200.0, 0, {}}};
    const std::vector<SummaryRow> b = {{Mode::per, 1, -5.0, 0, {}}, {Mode::dpsr, 1, 3.0, 0, {}}};
    const std::vector<SummaryRow> c = {{Mode::per, 1, 40.0, 0, {}},
                                       {Mode::per, 2, 60.0, 0, {}},
                                       {Mode::dpsr, 1, 45.0, 0, {}}};
    const auto report = dpsr::compare_summaries({{"a", a}, {"b", b}, {"c", c}}, Mode::per, Mode::dpsr);
    ASSERT_EQ(report.rows.size(), 3u);
    EXPECT_EQ(report.rows[0].improvement_percent, 100.0);
    EXPECT_FALSE(report.rows[1].improvement_percent.has_value());
    EXPECT_EQ(report.rows[1].baseline, -5.0);
    EXPECT_EQ(report.rows[2].improvement_percent, -10.0);
    EXPECT_EQ(report.mean_improvement, 45.0);
    EXPECT_EQ(report.median_improvement, 45.0);
    EXPECT_NE(report.text().find("b,-5,3,excluded"), std::string::npos);

    const auto same = dpsr::compare_summaries({{"a", a}}, Mode::per, Mode::per);
    EXPECT_EQ(same.rows[0].improvement_percent, 0.0);
    EXPECT_THROW(dpsr::compare_summaries({{"a", a}}, Mode::per, Mode::uniform), dpsr::ReportError);
}

TEST(RunExperiment, WritesFilesDeterministically) {
    const auto spec = dpsr::parse_spec(
        "env=forked_corridor\nmodes=dpsr,per\nseeds=1-3\nT=400\nN=64\nlearning_starts=32\nC_c=8\nC_r=4\nF_r=20\n"
        "hidden=8\neval_episodes=2\n");
    const fs::path first = scratch_dir("first");
    const fs::path second = scratch_dir("second");
    const auto rows = dpsr::run_experiment(spec, first, 1);
    dpsr::run_experiment(spec, second, 3);
    ASSERT_EQ(rows.size(), 6u);

    std::size_t curves = 0;
    for (const auto& entry : fs::directory_iterator(first)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("curve_", 0) == 0) ++curves;
        EXPECT_EQ(read_file(entry.path()), read_file(second / name)) << name;
    }
    EXPECT_EQ(curves, 6u);
    EXPECT_TRUE(fs::exists(first / "summary.csv"));
    EXPECT_TRUE(fs::exists(first / "aggregate.csv"));

    const std::string curve = read_file(first / "curve_dpsr_seed2.csv");
    EXPECT_EQ(curve.substr(0, curve.find('\n')), "timestep,episode,return,mean100,epsilon");
    EXPECT_EQ(dpsr::read_summary_csv(first / "summary.csv"), rows);

    // The echo file re-parses into the single run it describes.
    const auto echo = dpsr::load_spec(first / "run_per_seed3.txt");
    EXPECT_EQ(echo.modes, std::vector<Mode>{Mode::per});
    EXPECT_EQ(echo.seeds, std::vector<std::uint64_t>{3});
    EXPECT_EQ(echo.train, spec.train);

    const auto report = dpsr::compare_report({first / "summary.csv"}, Mode::per, Mode::dpsr);
    EXPECT_EQ(report.rows[0].label, first.filename().string());
    fs::remove_all(first);
    fs::remove_all(second);
}

TEST(RunExperiment, UnwritableDirectory) {
    const fs::path dir = scratch_dir("blocked");
    { std::ofstream(dir.string()) << "file"; }
    const auto spec = dpsr::parse_spec("env=chain\nmodes=dpsr\nT=10\n");
    EXPECT_THROW(dpsr::run_experiment(spec, dir / "sub", 1), dpsr::IoError);
    fs::remove_all(dir);
}
