#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bobw/complexity.hpp"
#include "bobw/global_opt.hpp"
#include "bobw/losses.hpp"
#include "bobw/mdp.hpp"
#include "bobw/policy_opt.hpp"
#include "bobw/solver.hpp"

namespace bobw {

/// Bad or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Child stream seed for a labelled component; stable across platforms.
std::uint64_t child_seed(std::uint64_t master, std::string_view label);

std::uint64_t fnv1a64(std::string_view bytes);

enum class LearnerKind { GlobalOpt, PolicyOpt, Oreps };

struct LearnerSpec {
    LearnerKind kind = LearnerKind::GlobalOpt;
    PredictorConfig predictor;
    std::optional<double> oreps_eta;  ///< fixed rate for the baseline; default from the horizon
    double virtual_cap_constant = 2000.0;
};

struct SolverSettings {
    NewtonOptions newton;
    double simplex_tol = kDefaultSolverTol;
};

/// What one learner iteration exposes to the harness.
struct LearnerOutcome {
    bool real = true;
    OccupancyMeasure q;  ///< occupancy of the played policy
    int solver_iterations = 0;
    double max_eta = 0.0;
    std::size_t virtual_count = 0;  ///< cumulative
};

class Learner {
public:
    virtual ~Learner() = default;
    virtual LearnerOutcome step(Rng& rng, const Observe& observe) = 0;
    virtual std::size_t real_episodes() const = 0;
};

/// Negative-entropy FTRL over the occupancy polytope with a fixed rate and the
/// plain importance-weighted estimator.
class OrepsBaseline {
public:
    OrepsBaseline(LayeredMdp mdp, std::size_t T, double eta, NewtonOptions options = {});

    struct Decision {
        OccupancyMeasure q;
        Policy pi;
        int solver_iterations = 0;
    };
    Decision act() const;
    Decision step(Rng& rng, const Observe& observe);

    double eta() const { return eta_; }
    std::size_t episode() const { return t_; }
    const LossTable& cumulative_estimate() const { return cumulative_; }

private:
    LayeredMdp mdp_;
    std::size_t T_;
    double eta_;
    NewtonOptions options_;
    LossTable cumulative_;
    std::size_t t_ = 1;
    std::optional<OccupancyMeasure> last_q_;
};

/// sqrt(H ln(SA/H) / (T S A)), the usual fixed tuning for this baseline.
double default_oreps_eta(const LayeredMdp& mdp, std::size_t T);

std::unique_ptr<Learner> make_learner(const LearnerSpec& spec, const LayeredMdp& mdp,
                                      std::size_t T, const SolverSettings& solver);

/// A loss process on its MDP, plus the hindsight-relevant extras.
struct Environment {
    LayeredMdp mdp;
    std::unique_ptr<LossProcess> process;
    std::optional<std::vector<ActionId>> pin;
};

/// Builds the environment described by the `environment` object of a config.
/// Relative paths resolve against `base_dir`. Throws ConfigError.
Environment build_environment(const nlohmann::json& env, std::size_t T, std::uint64_t env_seed,
                              const std::filesystem::path& base_dir = {});

struct MeasureSettings {
    bool enabled = true;
    std::size_t q_inf_iterations = 10000;
    std::size_t overlay_points = 50;
};

struct ExperimentConfig {
    std::string name = "run";
    nlohmann::json environment;
    LearnerSpec learner;
    std::size_t T = 0;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir;  ///< empty: keep everything in memory
    SolverSettings solver;
    MeasureSettings measures;
    std::filesystem::path base_dir;
    nlohmann::json raw;  ///< the normalized config, hashed for identification
};

ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies the command-line overrides and refreshes `raw`.
void override_config(ExperimentConfig& config, std::optional<std::uint64_t> seed,
                     std::optional<std::filesystem::path> out, std::optional<std::size_t> T);

/// 16 hex digits of FNV-1a over the normalized config.
std::string config_hash(const ExperimentConfig& config);

struct EpisodeRecord {
    std::size_t t = 0;  ///< iteration index, real and virtual, 1-based
    bool real = true;
    double expected_loss = 0.0;
    double comp_hindsight = 0.0;
    double comp_mustar = 0.0;  ///< NaN when no mean loss is defined
    double corruption_inc = 0.0;
    std::size_t virtual_count = 0;
    double max_eta = 0.0;
    int solver_iters = 0;
};

inline constexpr const char* kEpisodeCsvHeader =
    "t,real,expected_loss,comp_hindsight,comp_mustar,corruption_inc,virtual_count,max_eta,solver_iters";

void write_episode_csv(const std::filesystem::path& path, const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> read_episode_csv(const std::filesystem::path& path);
std::string format_record(const EpisodeRecord& r);

struct RunSummary {
    std::string name;
    std::string config_hash;
    std::uint64_t seed = 0;
    double wall_clock = 0.0;
    std::size_t real_episodes = 0;
    std::size_t virtual_episodes = 0;
    /// cumulative regret after each real episode against the hindsight-optimal policy
    std::vector<double> regret_hindsight;
    /// same against the policy optimal for the clean mean; empty when undefined
    std::vector<double> regret_mustar;
    /// sum of <q_t - q*, mu>: the pseudo-regret with the noise of l_t removed; empty when undefined
    std::vector<double> pseudo_regret;
    std::vector<EpisodeRecord> records;
    std::optional<MeasureReport> measures;
    std::optional<nlohmann::json> overlays;
    std::filesystem::path csv_path;
    std::filesystem::path measures_path;
    std::string error;
};

/// One seed: T real episodes, comparators filled afterwards, measures attached.
RunSummary run_single(const ExperimentConfig& config, std::uint64_t seed);

/// Every seed of one config, in order. Writes per-run files and a manifest when
/// output_dir is set. Failures are recorded in RunSummary::error.
std::vector<RunSummary> run_experiment(const ExperimentConfig& config);

/// Draws T episodes of losses for one seed without a learner and reports the measures.
/// History-dependent scripts see empty trajectories.
MeasureReport measures_only(const ExperimentConfig& config, std::uint64_t seed);

/// Thread budget from BOBW_THREADS, else the hardware concurrency.
std::size_t thread_budget();

struct SweepResult {
    std::vector<RunSummary> runs;
    std::filesystem::path manifest;
    std::filesystem::path aggregate;
};

/// Runs every (config, seed) pair in parallel and writes an aggregate CSV keyed
/// by (config_hash, seed, t) plus a manifest into out_dir.
SweepResult sweep(const std::vector<ExperimentConfig>& configs, const std::filesystem::path& out_dir,
                  std::size_t threads = 0);

nlohmann::json manifest_entry(const RunSummary& run);

}  // namespace bobw
