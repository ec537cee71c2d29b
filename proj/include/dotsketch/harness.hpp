#pragma once

// Experiment driver: phantoms, synthetic data, run modes, statistics and
// plain-text outputs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dotsketch/fdm.hpp"
#include "dotsketch/objective.hpp"
#include "dotsketch/opt_directions.hpp"
#include "dotsketch/pals.hpp"
#include "dotsketch/sketching.hpp"
#include "dotsketch/tregs.hpp"

namespace dotsketch {

enum class RunMode { full, saa, saa_replace, sa };
enum class StopMetric { estimated, audited, either };
enum class PhantomKind { cup, multi_blob, amoeba };

const char* to_string(RunMode mode);
const char* to_string(StopMetric metric);
const char* to_string(PhantomKind kind);
RunMode parse_run_mode(const std::string& s);
StopMetric parse_stop_metric(const std::string& s);
PhantomKind parse_phantom_kind(const std::string& s);

struct ExperimentConfig {
    // geometry
    int nx = 101;
    int ny = 101;
    double half_width = 1.0;  ///< a
    double depth = 1.0;       ///< c
    int n_sources = 32;
    int n_detectors = 32;

    // medium
    double diffusion = 1.0 / 30.0;
    double mu_in = 0.2;
    double mu_out = 0.01;
    double heterogeneity = 0.01;  ///< relative std in each region
    double speed_of_light = 1.0;  ///< unused at zero frequency
    PhantomKind phantom = PhantomKind::cup;

    // PaLS
    int init_grid = 5;  ///< bases on an init_grid x init_grid lattice
    double gamma = 1e-2;
    double epsilon = 0.01;
    double tau = 0.15;
    double init_alpha = 0.2;
    double init_beta = 2.0;

    // data
    double noise = 1e-3;  ///< delta; ||e||_F = delta ||D||_F
    std::uint64_t data_seed = 1;

    // optimization
    RunMode mode = RunMode::saa_replace;
    int source_samples = 10;
    int detector_samples = 10;
    int replace_count = 2;
    StopMetric stop_on = StopMetric::either;  ///< final-phase test in sketched modes
    bool audit = true;  ///< audit true misfit in sketched modes
    int max_iterations = 100;
    double initial_radius = 1.0;
    StepRule step_rule = StepRule::filter;
    double gcv_weight = 0.2;
    std::uint64_t sketch_seed = 1000;
    int trials = 10;
    SolverOptions::Method solver = SolverOptions::Method::direct;

    double intermediate_tolerance() const { return noise; }
    double final_tolerance() const { return noise * noise; }

    void validate() const;
    std::map<std::string, std::string> to_map() const;
};

/// Documented key = value text format; '#' starts a comment. Unknown keys are
/// rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
std::string format_config(const ExperimentConfig& config);

/// Pixel-basis anomaly mask (1 inside) on the grid.
Eigen::VectorXd phantom_mask(PhantomKind kind, const Grid2D& grid);

/// mu_in inside, mu_out outside, plus N(0, (heterogeneity * value)^2) noise.
Eigen::VectorXd synth_phantom(PhantomKind kind, const Grid2D& grid, double mu_in, double mu_out,
                              double heterogeneity, std::uint64_t seed);

struct SyntheticData {
    Eigen::MatrixXd clean;
    Eigen::MatrixXd measured;
    Eigen::MatrixXd noise;
    double noise_floor = 0.0;  ///< delta^2
};

SyntheticData gen_data(const DotModel& model, const Eigen::VectorXd& truth, double delta, std::uint64_t seed);

/// init_grid^2 bases on a lattice over the domain, alternating signs with
/// the corner basis negative, uniform dilation.
ParamVector initial_guess(const ExperimentConfig& config);

/// Model, truth and data shared by all trials of an experiment.
struct ExperimentSetup {
    ExperimentConfig config;
    std::unique_ptr<DotModel> model;
    Eigen::VectorXd truth;
    SyntheticData data;
};

ExperimentSetup make_setup(const ExperimentConfig& config);
PalsModel pals_model(const ExperimentConfig& config);
DotModel make_model(const ExperimentConfig& config);

struct HistoryRow {
    int iteration = 0;
    double estimated = 0.0;  ///< misfit the optimizer sees (normalized)
    double true_misfit = std::numeric_limits<double>::quiet_NaN();
    long solves = 0;         ///< cumulative non-audit PDE solves
    double radius = 0.0;
    double step_norm = 0.0;
    bool accepted = true;
    long truncation = 0;  ///< singular triplets in the step
    SolveLedger::Phase phase = SolveLedger::Phase::pre_replacement;
};

struct RunReport {
    RunMode mode = RunMode::full;
    std::uint64_t seed = 0;
    std::vector<HistoryRow> history;
    Eigen::VectorXd params;
    Eigen::VectorXd image;  ///< reconstructed absorption per node
    int nx = 0;
    int ny = 0;
    bool converged = false;           ///< stopping criterion met
    bool reached_true_tolerance = false;  ///< some audited/true misfit <= delta^2
    std::string status;
    int iterations = 0;
    int replacement_iteration = -1;
    SolveLedger ledger;
    int underestimates = 0;           ///< m: iterations with estimated < true
    int audited_iterations = 0;       ///< n
    SketchPair sketch;
    std::vector<ReplacementStep> replacement_steps;
    long source_samples = 0;
    long detector_samples = 0;
    long n_sources = 0;
    long n_detectors = 0;

    long total_solves() const { return ledger.totals().total(); }
    double underestimation_ratio() const {
        return audited_iterations ? static_cast<double>(underestimates) / audited_iterations : 0.0;
    }
    double final_true_misfit() const;
};

RunReport run_trial(const ExperimentSetup& setup, std::uint64_t trial_seed);

struct AggregateReport {
    ExperimentConfig config;
    std::vector<RunReport> trials;
    double mean_iterations = 0.0;
    double mean_function_evals = 0.0;
    double mean_jacobian_evals = 0.0;
    double mean_solves = 0.0;
    double mean_underestimation_ratio = 0.0;
    double mean_underestimates = 0.0;
    double mean_audited_iterations = 0.0;
    double convergence_rate = 0.0;
    double true_tolerance_rate = 0.0;
};

AggregateReport aggregate(const ExperimentConfig& config, std::vector<RunReport> trials);

/// Runs config.trials trials with seeds sketch_seed + t on one setup.
AggregateReport run_experiment(const ExperimentConfig& config);
AggregateReport run_experiment(const ExperimentSetup& setup);

/// Per-trial outputs: history.csv, image.csv, image.pgm, summary.txt and
/// sketch matrices.
void emit_outputs(const RunReport& report, const std::filesystem::path& dir);
void emit_aggregate(const AggregateReport& report, const std::filesystem::path& dir);

void write_pgm(const std::filesystem::path& path, const Eigen::VectorXd& field, int nx, int ny, double lo,
               double hi);
std::map<std::string, std::string> read_summary(const std::filesystem::path& path);

}  // namespace dotsketch
