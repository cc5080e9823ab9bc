// Command-line front end: run, sweep, measures, validate.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bobw/harness.hpp"
#include "bobw/mdp_io.hpp"

namespace fs = std::filesystem;
using namespace bobw;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> T;
};

void apply(ExperimentConfig& c, const Overrides& o) {
    override_config(c, o.seed, o.out ? std::optional<fs::path>(*o.out) : std::nullopt, o.T);
    if (c.output_dir.empty()) override_config(c, std::nullopt, fs::path("results"), std::nullopt);
}

int cmd_run(const std::string& path, const Overrides& o) {
    ExperimentConfig c = load_config(path);
    apply(c, o);
    const auto runs = run_experiment(c);
    int rc = kOk;
    for (const RunSummary& r : runs) {
        std::cout << c.name << " seed=" << r.seed << " episodes=" << r.real_episodes
                  << " virtual=" << r.virtual_episodes;
        if (!r.regret_hindsight.empty()) std::cout << " regret=" << r.regret_hindsight.back();
        if (!r.regret_mustar.empty()) std::cout << " pseudo=" << r.regret_mustar.back();
        std::cout << " csv=" << r.csv_path.string() << '\n';
        if (!r.error.empty()) {
            std::cerr << "run failed (seed " << r.seed << "): " << r.error << '\n';
            rc = kRuntimeError;
        }
    }
    return rc;
}

int cmd_sweep(const std::string& dir, const Overrides& o) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no *.json configs in " + dir);
    std::vector<ExperimentConfig> configs;
    for (const auto& f : files) {
        ExperimentConfig c = load_config(f);
        override_config(c, o.seed, std::nullopt, o.T);
        configs.push_back(std::move(c));
    }
    const fs::path out = o.out ? fs::path(*o.out) : fs::path(dir) / "sweep-out";
    const SweepResult res = sweep(configs, out);
    int rc = kOk;
    for (const RunSummary& r : res.runs)
        if (!r.error.empty()) {
            std::cerr << r.name << " seed " << r.seed << ": " << r.error << '\n';
            rc = kRuntimeError;
        }
    std::cout << "manifest: " << res.manifest.string() << "\naggregate: " << res.aggregate.string() << '\n';
    return rc;
}

int cmd_measures(const std::string& path, const Overrides& o) {
    ExperimentConfig c = load_config(path);
    override_config(c, o.seed, std::nullopt, o.T);
    const MeasureReport r = measures_only(c, c.seeds.front());
    const std::string text = to_json(r).dump(2);
    if (o.out) {
        std::ofstream(*o.out) << text << '\n';
    } else {
        std::cout << text << '\n';
    }
    return kOk;
}

int cmd_validate(const std::string& path) {
    const LayeredMdp mdp = load_mdp(path);
    std::cout << "ok: H=" << mdp.horizon() << " S=" << mdp.num_states() << " A=" << mdp.num_actions()
              << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Best-of-both-worlds learners for layered episodic MDPs"};
    app.require_subcommand(1);
    Overrides o;
    std::string target;

    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "Run a single seed instead of the configured list");
        sub->add_option("--out", o.out, "Output directory (file for measures)");
        sub->add_option("--T", o.T, "Override the number of episodes");
    };
    auto* run = app.add_subcommand("run", "Run one experiment config");
    run->add_option("config", target, "Config JSON")->required();
    add_overrides(run);
    auto* sw = app.add_subcommand("sweep", "Run every config JSON in a directory");
    sw->add_option("dir", target, "Directory of config JSON files")->required();
    add_overrides(sw);
    auto* me = app.add_subcommand("measures", "Compute complexity measures of a config's losses");
    me->add_option("config", target, "Config JSON")->required();
    add_overrides(me);
    auto* va = app.add_subcommand("validate", "Check an MDP JSON file");
    va->add_option("mdp", target, "MDP JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (run->parsed()) return cmd_run(target, o);
        if (sw->parsed()) return cmd_sweep(target, o);
        if (me->parsed()) return cmd_measures(target, o);
        if (va->parsed()) return cmd_validate(target);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const MdpFormatError& e) {
        std::cerr << "invalid mdp: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kConfigError;
}
