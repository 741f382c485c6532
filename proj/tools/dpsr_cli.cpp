#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpsr/errors.hpp"
#include "dpsr/experiment.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr const char* kOutEnvVar = "DPSR_OUT_DIR";
constexpr const char* kDefaultOut = "dpsr_out";

std::filesystem::path resolve_out(const std::string& flag, const dpsr::ExperimentSpec& spec) {
    if (!flag.empty()) return flag;
    if (!spec.out_dir.empty()) return spec.out_dir;
    if (const char* env = std::getenv(kOutEnvVar); env && *env) return env;
    return kDefaultOut;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Replay-buffer experiments: run seeded matrices and compare summaries"};
    app.require_subcommand(1);

    std::string spec_path;
    std::string out_flag;
    std::size_t jobs = 1;
    CLI::App* run_cmd = app.add_subcommand("run", "Run every (mode, seed) pair of an experiment spec");
    run_cmd->add_option("spec", spec_path, "Experiment spec file (key=value lines)")->required();
    run_cmd->add_option("--out", out_flag, std::string("Output directory (overrides the spec and ") + kOutEnvVar + ")");
    run_cmd->add_option("--jobs", jobs, "Runs to execute in parallel")->check(CLI::PositiveNumber);

    std::vector<std::string> summaries;
    std::string baseline;
    std::string treatment;
    CLI::App* compare_cmd = app.add_subcommand("compare", "Percentage improvement of one mode over another");
    compare_cmd->add_option("summary", summaries, "summary.csv files, one per environment")->required();
    compare_cmd->add_option("--baseline", baseline, "Baseline mode")->required();
    compare_cmd->add_option("--treatment", treatment, "Treatment mode")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run_cmd) {
            const dpsr::ExperimentSpec spec = dpsr::load_spec(spec_path);
            const std::filesystem::path out = resolve_out(out_flag, spec);
            const auto rows = dpsr::run_experiment(spec, out, jobs);
            std::cout << "wrote " << rows.size() << " runs to " << out.string() << '\n';
        } else {
            std::vector<std::filesystem::path> paths(summaries.begin(), summaries.end());
            const auto report = dpsr::compare_report(paths, dpsr::parse_mode(baseline), dpsr::parse_mode(treatment));
            std::cout << report.text();
        }
    } catch (const dpsr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
