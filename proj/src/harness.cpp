#include "rrl/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <iostream>
#include <limits>
#include <set>
#include <tuple>

#include "rrl/io.hpp"
#include "rrl/oracle.hpp"
#include "rrl/version.hpp"

namespace rrl {

namespace fs = std::filesystem;

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::oracle: return "oracle";
        case ExperimentKind::learn: return "learn";
        case ExperimentKind::lambda_sweep: return "lambda-sweep";
        case ExperimentKind::dist_train: return "dist-train";
        case ExperimentKind::detect: return "detect";
    }
    return "oracle";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    if (name == "oracle") return ExperimentKind::oracle;
    if (name == "learn") return ExperimentKind::learn;
    if (name == "lambda-sweep" || name == "lambda_sweep") return ExperimentKind::lambda_sweep;
    if (name == "dist-train" || name == "dist_train") return ExperimentKind::dist_train;
    if (name == "detect") return ExperimentKind::detect;
    throw std::invalid_argument("unknown experiment: " + name);
}

std::vector<std::uint64_t> ExperimentConfig::resolved_seeds() const {
    if (!seeds.empty()) return seeds;
    if (n_seeds < 1) throw std::invalid_argument("need at least one seed");
    std::vector<std::uint64_t> out(n_seeds);
    for (int i = 0; i < n_seeds; ++i) out[i] = derive_seed(master_seed, i);
    return out;
}

ExperimentConfig config_from_json(const nlohmann::json& input) {
    const nlohmann::json& j = input.contains("config") ? input.at("config") : input;
    ExperimentConfig c;
    c.experiment = experiment_kind_from_string(j.value("experiment", "oracle"));
    c.mdp_preset = j.value("mdp_preset", c.mdp_preset);
    c.mdp_path = j.value("mdp_path", c.mdp_path);
    c.ideal_rewards = j.value("ideal_rewards", c.ideal_rewards);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.n_seeds = j.value("n_seeds", c.n_seeds);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.outdir = j.value("outdir", c.outdir);
    c.threads = j.value("threads", c.threads);
    c.oracle_dist = j.value("oracle_dist", c.oracle_dist);

    if (j.contains("learn")) {
        const auto& b = j.at("learn");
        c.learn.lambdas = b.value("lambdas", c.learn.lambdas);
        c.learn.alphas = b.value("alphas", c.learn.alphas);
        c.learn.schedule = b.value("schedule", c.learn.schedule);
        c.learn.rm_a = b.value("rm_a", c.learn.rm_a);
        c.learn.rm_b = b.value("rm_b", c.learn.rm_b);
        c.learn.total_steps = b.value("total_steps", c.learn.total_steps);
        c.learn.eval_every = b.value("eval_every", c.learn.eval_every);
        c.learn.mve_normalized = b.value("mve_normalized", c.learn.mve_normalized);
        c.learn.off_policy = b.value("off_policy", c.learn.off_policy);
        c.learn.target_p_action0 = b.value("target_p_action0", c.learn.target_p_action0);
        c.learn.behavior_p_action0 = b.value("behavior_p_action0", c.learn.behavior_p_action0);
    }
    if (j.contains("dist")) {
        const auto& b = j.at("dist");
        c.dist.n_quantiles = b.value("n_quantiles", c.dist.n_quantiles);
        c.dist.kappa = b.value("kappa", c.dist.kappa);
        c.dist.sync_period = b.value("sync_period", c.dist.sync_period);
        c.dist.alpha = b.value("alpha", c.dist.alpha);
        c.dist.steps = b.value("steps", c.dist.steps);
        c.dist.eval_every = b.value("eval_every", c.dist.eval_every);
        c.dist.target_p_action0 = b.value("target_p_action0", c.dist.target_p_action0);
        c.dist.behavior_p_action0 = b.value("behavior_p_action0", c.dist.behavior_p_action0);
    }
    if (j.contains("detect")) {
        const auto& b = j.at("detect");
        c.detect.spec = b.value("spec", c.detect.spec);
        c.detect.delta = b.value("delta", c.detect.delta);
        c.detect.sigma = b.value("sigma", c.detect.sigma);
        c.detect.steps = b.value("steps", c.detect.steps);
        c.detect.onset = b.value("onset", c.detect.onset);
        c.detect.model_path = b.value("model_path", c.detect.model_path);
    }
    return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["experiment"] = to_string(c.experiment);
    j["mdp_preset"] = c.mdp_preset;
    j["mdp_path"] = c.mdp_path;
    j["ideal_rewards"] = c.ideal_rewards;
    j["master_seed"] = c.master_seed;
    j["n_seeds"] = c.n_seeds;
    if (!c.seeds.empty()) j["seeds"] = c.seeds;
    j["outdir"] = c.outdir;
    j["threads"] = c.threads;
    j["oracle_dist"] = c.oracle_dist;
    j["learn"] = {{"lambdas", c.learn.lambdas},
                  {"alphas", c.learn.alphas},
                  {"schedule", c.learn.schedule},
                  {"rm_a", c.learn.rm_a},
                  {"rm_b", c.learn.rm_b},
                  {"total_steps", c.learn.total_steps},
                  {"eval_every", c.learn.eval_every},
                  {"mve_normalized", c.learn.mve_normalized},
                  {"off_policy", c.learn.off_policy},
                  {"target_p_action0", c.learn.target_p_action0},
                  {"behavior_p_action0", c.learn.behavior_p_action0}};
    j["dist"] = {{"n_quantiles", c.dist.n_quantiles},
                 {"kappa", c.dist.kappa},
                 {"sync_period", c.dist.sync_period},
                 {"alpha", c.dist.alpha},
                 {"steps", c.dist.steps},
                 {"eval_every", c.dist.eval_every},
                 {"target_p_action0", c.dist.target_p_action0},
                 {"behavior_p_action0", c.dist.behavior_p_action0}};
    j["detect"] = {{"spec", c.detect.spec},
                   {"delta", c.detect.delta},
                   {"sigma", c.detect.sigma},
                   {"steps", c.detect.steps},
                   {"onset", c.detect.onset},
                   {"model_path", c.detect.model_path}};
    return j;
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_json(load_json_file(path));
}

double mean_of(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    return m / static_cast<double>(xs.size());
}

double median_of(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double std_error_of(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    if (n < 2) return 0.0;
    const double m = mean_of(xs);
    double var = 0.0;
    for (double x : xs) var += (x - m) * (x - m);
    var /= static_cast<double>(n - 1);
    return std::sqrt(var / static_cast<double>(n));
}

double curve_auc(const std::vector<std::pair<long, double>>& curve) {
    double auc = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        auc += 0.5 * (curve[i].second + curve[i - 1].second) *
               static_cast<double>(curve[i].first - curve[i - 1].first);
    return auc;
}

std::vector<AggregateRow> aggregate_curves(const CurveBundle& bundle) {
    std::map<std::tuple<double, double, long>, std::vector<double>> groups;
    for (const CurveRow& row : bundle.rows)
        groups[{row.lambda, row.alpha, row.step}].push_back(row.metric);

    std::vector<AggregateRow> out;
    out.reserve(groups.size());
    for (auto& [key, values] : groups) {
        AggregateRow a;
        a.lambda = std::get<0>(key);
        a.alpha = std::get<1>(key);
        a.step = std::get<2>(key);
        a.mean = mean_of(values);
        a.median = median_of(values);
        a.std_error = std_error_of(values);
        out.push_back(a);
    }
    return out;
}

std::map<double, double> tune_step_size(const CurveBundle& bundle, TuneCriterion criterion) {
    // Seed-mean curve per (lambda, alpha).
    std::map<std::pair<double, double>, std::map<long, std::vector<double>>> cells;
    std::set<double> lambdas, alphas;
    for (const CurveRow& row : bundle.rows) {
        cells[{row.lambda, row.alpha}][row.step].push_back(row.metric);
        lambdas.insert(row.lambda);
        alphas.insert(row.alpha);
    }

    std::map<double, double> best;
    for (double lambda : lambdas) {
        double best_alpha = 0.0;
        double best_score = std::numeric_limits<double>::infinity();
        for (double alpha : alphas) {
            auto it = cells.find({lambda, alpha});
            if (it == cells.end())
                throw IncompleteGrid("missing curves for lambda=" + format_double(lambda) +
                                     ", alpha=" + format_double(alpha));
            std::vector<std::pair<long, double>> mean_curve;
            mean_curve.reserve(it->second.size());
            for (const auto& [step, values] : it->second)
                mean_curve.emplace_back(step, mean_of(values));
            const double score = criterion == TuneCriterion::auc
                                     ? curve_auc(mean_curve)
                                     : mean_curve.back().second;
            // Strict < keeps the smaller alpha on ties (alphas ascend).
            if (score < best_score) {
                best_score = score;
                best_alpha = alpha;
            }
        }
        best[lambda] = best_alpha;
    }
    return best;
}

void for_each_run(int n_runs, int threads, const std::function<void(int)>& body) {
    if (threads == 1) {
        for (int i = 0; i < n_runs; ++i) body(i);
        return;
    }
    std::exception_ptr error;
    const int team = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(team)
    for (int i = 0; i < n_runs; ++i) {
        try {
            body(i);
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

Policy biased_policy(const FiniteMdp& mdp, double p_action0) {
    if (p_action0 < 0.0 || p_action0 > 1.0)
        throw std::invalid_argument("action probability not in [0,1]");
    Policy policy;
    policy.probs.resize(mdp.n_states, mdp.n_actions);
    const double rest = mdp.n_actions > 1 ? (1.0 - p_action0) / (mdp.n_actions - 1) : 0.0;
    policy.probs.setConstant(rest);
    policy.probs.col(0).setConstant(p_action0);
    return policy;
}

MdpWithPolicy resolve_mdp(const ExperimentConfig& config) {
    if (!config.mdp_path.empty()) return load_mdp(config.mdp_path);
    if (config.mdp_preset == "microdrone") return build_microdrone(config.ideal_rewards);
    throw std::invalid_argument("unknown MDP preset: " + config.mdp_preset);
}

namespace {

StepSchedule schedule_for(const LearnBlock& block, double alpha) {
    if (block.schedule == "constant") return StepSchedule::constant_step(alpha);
    if (block.schedule == "robbins-monro" || block.schedule == "robbins_monro")
        return StepSchedule::robbins_monro(block.rm_a, block.rm_b);
    throw std::invalid_argument("unknown schedule: " + block.schedule);
}

void write_curve_results(const std::string& path, const CurveBundle& bundle) {
    CsvWriter csv(path);
    csv.row({"run_id", "seed", "lambda", "alpha", "step", "mve"});
    for (const CurveRow& row : bundle.rows)
        csv.row({std::to_string(row.run_id), std::to_string(row.seed),
                 format_double(row.lambda), format_double(row.alpha),
                 std::to_string(row.step), format_double(row.metric)});
}

void write_curve_aggregate(const std::string& path, const CurveBundle& bundle) {
    CsvWriter csv(path);
    csv.row({"lambda", "alpha", "step", "mean", "median", "std_error"});
    for (const AggregateRow& row : aggregate_curves(bundle))
        csv.row({format_double(row.lambda), format_double(row.alpha),
                 std::to_string(row.step), format_double(row.mean),
                 format_double(row.median), format_double(row.std_error)});
}

struct RunDescriptor {
    long run_id = 0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    double alpha = 0.0;
};

void write_manifest(const std::string& path, const ExperimentConfig& config,
                    const std::vector<RunDescriptor>& runs) {
    nlohmann::json j;
    j["tool"] = "reverse-rl";
    j["version"] = kVersion;
    j["config"] = config_to_json(config);
    auto run_list = nlohmann::json::array();
    for (const auto& r : runs)
        run_list.push_back({{"run_id", r.run_id},
                            {"seed", r.seed},
                            {"lambda", r.lambda},
                            {"alpha", r.alpha}});
    j["runs"] = std::move(run_list);
    save_json_file(j, path);
}

void run_oracle(const ExperimentConfig& config) {
    const MdpWithPolicy preset = resolve_mdp(config);
    const Policy target = config.learn.target_p_action0 == 0.5
                              ? preset.policy
                              : biased_policy(preset.mdp, config.learn.target_p_action0);
    const OracleReport report = oracle_report(preset.mdp, target);

    nlohmann::json j;
    j["forward_values"] = std::vector<double>(
        report.forward_values.data(), report.forward_values.data() + report.forward_values.size());
    j["reverse_values"] = std::vector<double>(
        report.reverse_values.data(), report.reverse_values.data() + report.reverse_values.size());
    j["d_pi"] = std::vector<double>(report.d_pi.data(), report.d_pi.data() + report.d_pi.size());
    j["spectral_radius_reverse"] = report.spectral_radius_reverse;
    j["method"] = "matrix_solve";
    std::cout << j.dump(2) << std::endl;

    if (config.oracle_dist) {
        fs::create_directories(config.outdir);
        const auto distributions = distributional_fixed_point(preset.mdp, target);
        CsvWriter csv((fs::path(config.outdir) / "distributions.csv").string());
        csv.row({"state", "value", "mass"});
        for (std::size_t s = 0; s < distributions.size(); ++s)
            for (const auto& atom : distributions[s].atoms())
                csv.row({std::to_string(s), format_double(atom.value),
                         format_double(atom.mass)});
    }
}

void run_learn_like(const ExperimentConfig& config) {
    const MdpWithPolicy preset = resolve_mdp(config);
    const LearnBlock& block = config.learn;

    PolicyPair policies;
    policies.target = biased_policy(preset.mdp, block.target_p_action0);
    std::optional<OffPolicyWeights> off_weights;
    if (block.off_policy) {
        policies.behavior = biased_policy(preset.mdp, block.behavior_p_action0);
        off_weights = OffPolicyWeights{
            density_ratio(preset.mdp, policies.target, *policies.behavior),
            is_ratio(preset.mdp, policies.target, *policies.behavior)};
    }
    const Eigen::VectorXd reference = reverse_gvf(preset.mdp, policies.target);

    const std::vector<std::uint64_t> seeds = config.resolved_seeds();
    const bool sweep = config.experiment == ExperimentKind::lambda_sweep;
    // A sweep crosses the full (lambda, alpha) grid with constant step sizes;
    // plain `learn` is one learner with the configured schedule.
    const std::vector<double> lambdas =
        sweep ? block.lambdas : std::vector<double>{block.lambdas.front()};
    const std::vector<double> grid_alphas =
        sweep ? block.alphas
              : std::vector<double>{block.schedule == "constant" ? block.alphas.front()
                                                                 : block.rm_a};

    std::vector<RunDescriptor> runs;
    for (double lambda : lambdas)
        for (double alpha : grid_alphas)
            for (std::uint64_t seed : seeds)
                runs.push_back({static_cast<long>(runs.size()), seed, lambda, alpha});

    std::vector<LearningCurve> curves(runs.size());
    for_each_run(static_cast<int>(runs.size()), config.threads, [&](int i) {
        const RunDescriptor& r = runs[i];
        LearnerConfig lc;
        lc.lambda = r.lambda;
        lc.schedule = sweep ? StepSchedule::constant_step(r.alpha)
                            : schedule_for(block, r.alpha);
        lc.total_steps = block.total_steps;
        lc.eval_every = block.eval_every;
        lc.mve_normalized = block.mve_normalized;
        lc.seed = r.seed;
        if (off_weights) lc.off_policy = off_weights;
        LinearValueModel model = LinearValueModel::tabular(preset.mdp.n_states);
        curves[i] = run_learner(preset.mdp, policies, lc, model, reference);
    });

    CurveBundle bundle;
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (const CurvePoint& point : curves[i])
            bundle.rows.push_back({runs[i].run_id, runs[i].seed, runs[i].lambda,
                                   runs[i].alpha, point.step, point.mve});

    fs::create_directories(config.outdir);
    write_curve_results((fs::path(config.outdir) / "results.csv").string(), bundle);
    write_curve_aggregate((fs::path(config.outdir) / "aggregate.csv").string(), bundle);
    if (sweep) {
        CsvWriter csv((fs::path(config.outdir) / "tuned.csv").string());
        csv.row({"criterion", "lambda", "alpha"});
        for (const auto criterion : {TuneCriterion::auc, TuneCriterion::final_mve}) {
            const auto best = tune_step_size(bundle, criterion);
            for (const auto& [lambda, alpha] : best)
                csv.row({criterion == TuneCriterion::auc ? "auc" : "final_mve",
                         format_double(lambda), format_double(alpha)});
        }
    }
    write_manifest((fs::path(config.outdir) / "manifest.json").string(), config, runs);
}

void run_dist_train(const ExperimentConfig& config) {
    const MdpWithPolicy preset = resolve_mdp(config);
    const DistBlock& block = config.dist;
    const Policy target = biased_policy(preset.mdp, block.target_p_action0);
    const Policy behavior = biased_policy(preset.mdp, block.behavior_p_action0);

    Phase1Config phase1;
    phase1.steps = block.steps;
    phase1.alpha = block.alpha;
    phase1.eval_every = block.eval_every;
    phase1.model = {block.n_quantiles, block.kappa, block.sync_period};

    const std::vector<std::uint64_t> seeds = config.resolved_seeds();
    std::vector<std::optional<Phase1Result>> results(seeds.size());
    for_each_run(static_cast<int>(seeds.size()), config.threads, [&](int i) {
        results[i] = run_phase1(preset.mdp, behavior, target, phase1, seeds[i]);
    });

    fs::create_directories(config.outdir);
    CurveBundle bundle;
    std::vector<RunDescriptor> runs;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        runs.push_back({static_cast<long>(i), seeds[i], 0.0, block.alpha});
        for (const CurvePoint& point : results[i]->curve)
            bundle.rows.push_back(
                {runs.back().run_id, seeds[i], 0.0, block.alpha, point.step, point.mve});
        save_quantile_model(results[i]->model,
                            (fs::path(config.outdir) /
                             ("model_seed" + std::to_string(seeds[i]) + ".csv"))
                                .string());
    }
    write_curve_results((fs::path(config.outdir) / "results.csv").string(), bundle);
    write_curve_aggregate((fs::path(config.outdir) / "aggregate.csv").string(), bundle);
    write_manifest((fs::path(config.outdir) / "manifest.json").string(), config, runs);
}

void run_detect(const ExperimentConfig& config) {
    const MdpWithPolicy preset = resolve_mdp(config);
    const DistBlock& dist = config.dist;
    const DetectBlock& block = config.detect;
    const Policy target = biased_policy(preset.mdp, dist.target_p_action0);
    const Policy behavior = biased_policy(preset.mdp, dist.behavior_p_action0);

    const long onset = block.onset >= 0 ? block.onset : block.steps / 2;
    const AnomalySpec spec = AnomalySpec::parse(block.spec, preset.mdp, onset);

    std::optional<QuantileModel> shared_model;
    if (!block.model_path.empty()) shared_model = load_quantile_model(block.model_path);

    Phase1Config phase1;
    phase1.steps = dist.steps;
    phase1.alpha = dist.alpha;
    phase1.eval_every = dist.eval_every;
    phase1.model = {dist.n_quantiles, dist.kappa, dist.sync_period};

    const std::vector<std::uint64_t> seeds = config.resolved_seeds();
    std::vector<DetectionTrace> traces(seeds.size());
    for_each_run(static_cast<int>(seeds.size()), config.threads, [&](int i) {
        const std::uint64_t train_seed = derive_seed(seeds[i], 1);
        const std::uint64_t stream_seed = derive_seed(seeds[i], 2);
        if (shared_model) {
            traces[i] = run_phase2(preset.mdp, target, *shared_model, spec, block.steps,
                                   block.delta, block.sigma, stream_seed);
        } else {
            const Phase1Result trained =
                run_phase1(preset.mdp, behavior, target, phase1, train_seed);
            traces[i] = run_phase2(preset.mdp, target, trained.model, spec, block.steps,
                                   block.delta, block.sigma, stream_seed);
        }
    });

    fs::create_directories(config.outdir);
    {
        CsvWriter csv((fs::path(config.outdir) / "results.csv").string());
        csv.row({"seed", "spec", "step", "state", "g_bar", "anomaly_prob"});
        for (std::size_t i = 0; i < seeds.size(); ++i)
            for (const DetectionRecord& rec : traces[i])
                csv.row({std::to_string(seeds[i]), spec.to_string(),
                         std::to_string(rec.step), std::to_string(rec.state),
                         format_double(rec.g_bar), format_double(rec.anomaly_prob)});
    }
    {
        CsvWriter csv((fs::path(config.outdir) / "aggregate.csv").string());
        csv.row({"spec", "step", "mean", "median", "std_error"});
        for (long t = 0; t < block.steps; ++t) {
            std::vector<double> probs;
            probs.reserve(seeds.size());
            for (const auto& trace : traces) probs.push_back(trace[t].anomaly_prob);
            csv.row({spec.to_string(), std::to_string(t + 1), format_double(mean_of(probs)),
                     format_double(median_of(probs)), format_double(std_error_of(probs))});
        }
    }
    std::vector<RunDescriptor> runs;
    for (std::size_t i = 0; i < seeds.size(); ++i)
        runs.push_back({static_cast<long>(i), seeds[i], 0.0, dist.alpha});
    write_manifest((fs::path(config.outdir) / "manifest.json").string(), config, runs);
}

void remove_partial_outputs(const ExperimentConfig& config) {
    std::error_code ec;
    for (const char* name : {"results.csv", "aggregate.csv", "manifest.json", "tuned.csv",
                             "distributions.csv"})
        fs::remove(fs::path(config.outdir) / name, ec);
}

}  // namespace

void run(const ExperimentConfig& config) {
    try {
        switch (config.experiment) {
            case ExperimentKind::oracle:
                run_oracle(config);
                break;
            case ExperimentKind::learn:
            case ExperimentKind::lambda_sweep:
                run_learn_like(config);
                break;
            case ExperimentKind::dist_train:
                run_dist_train(config);
                break;
            case ExperimentKind::detect:
                run_detect(config);
                break;
        }
    } catch (...) {
        remove_partial_outputs(config);
        throw;
    }
}

}  // namespace rrl
