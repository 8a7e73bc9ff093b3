#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrl/anomaly.hpp"
#include "rrl/mdp.hpp"
#include "rrl/reverse_td.hpp"

namespace rrl {

enum class ExperimentKind { oracle, learn, lambda_sweep, dist_train, detect };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct LearnBlock {
    std::vector<double> lambdas = {0.0, 0.3, 0.7, 0.9, 1.0};
    std::vector<double> alphas = {1e-3, 5e-3, 1e-2, 5e-2};
    /// "constant" uses the alphas grid; "robbins-monro" uses rm_a / rm_b.
    std::string schedule = "constant";
    double rm_a = 0.5;
    double rm_b = 1e3;
    long total_steps = 1000000;
    long eval_every = 1000;
    bool mve_normalized = false;
    bool off_policy = false;
    double target_p_action0 = 0.5;
    double behavior_p_action0 = 0.5;
};

struct DistBlock {
    int n_quantiles = 20;
    double kappa = 1.0;
    long sync_period = 100;
    double alpha = 5e-3;
    long steps = 200000;
    long eval_every = 1000;
    double target_p_action0 = 0.1;
    double behavior_p_action0 = 0.5;
};

struct DetectBlock {
    std::string spec = "none";
    double delta = 1.0;
    double sigma = 1.0;
    long steps = 20000;
    long onset = -1;  // -1: midpoint of the stream
    std::string model_path;  // empty: train phase 1 per seed
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::oracle;
    std::string mdp_preset = "microdrone";
    std::string mdp_path;  // overrides the preset when nonempty
    bool ideal_rewards = false;
    std::uint64_t master_seed = 1;
    int n_seeds = 30;
    std::vector<std::uint64_t> seeds;  // explicit override of the expansion
    std::string outdir = "out";
    int threads = 0;  // 0: library default; 1: serial reference path
    bool oracle_dist = false;

    LearnBlock learn;
    DistBlock dist;
    DetectBlock detect;

    /// Per-run seed list: explicit `seeds` if set, otherwise n_seeds values
    /// split from master_seed by counter.
    std::vector<std::uint64_t> resolved_seeds() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Loads a config file; accepts both a bare config and a manifest (in which
/// case its embedded "config" object is used), so manifests replay runs.
ExperimentConfig load_config(const std::string& path);

struct CurveRow {
    long run_id = 0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    double alpha = 0.0;
    long step = 0;
    double metric = 0.0;
};

struct CurveBundle {
    std::vector<CurveRow> rows;
};

struct AggregateRow {
    double lambda = 0.0;
    double alpha = 0.0;
    long step = 0;
    double mean = 0.0;
    double median = 0.0;
    double std_error = 0.0;  // sample std over seeds / sqrt(n_seeds)
};

/// Groups rows by (lambda, alpha, step) and aggregates the metric over seeds.
std::vector<AggregateRow> aggregate_curves(const CurveBundle& bundle);

double mean_of(const std::vector<double>& xs);
double median_of(std::vector<double> xs);
double std_error_of(const std::vector<double>& xs);

/// Trapezoidal area under a (step, metric) curve.
double curve_auc(const std::vector<std::pair<long, double>>& curve);

enum class TuneCriterion { auc, final_mve };

/// Best constant step size per lambda under the criterion, computed on the
/// seed-mean curves; ties break toward the smaller alpha. Throws IncompleteGrid
/// when some (lambda, alpha) cell has no rows.
std::map<double, double> tune_step_size(const CurveBundle& bundle, TuneCriterion criterion);

/// Runs `body(run_index)` for every run. threads == 1 is the plain serial
/// reference loop; otherwise the runs are dispatched to an OpenMP worker pool.
/// Either path yields identical results because runs share nothing mutable.
void for_each_run(int n_runs, int threads, const std::function<void(int)>& body);

/// Executes the configured experiment and writes results.csv, aggregate.csv and
/// manifest.json under config.outdir (the oracle experiment prints JSON to
/// stdout instead). Partial outputs are removed when a run fails.
void run(const ExperimentConfig& config);

/// Policy putting probability p on action 0 and the rest uniformly on others.
Policy biased_policy(const FiniteMdp& mdp, double p_action0);

/// Resolves preset/path plus ideal_rewards into an MDP and default policy.
MdpWithPolicy resolve_mdp(const ExperimentConfig& config);

}  // namespace rrl
