#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "rrl/harness.hpp"
#include "rrl/version.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string preset;
    std::string mdp_path;
    std::string outdir;
    int seeds = -1;
    std::int64_t master_seed = -1;
    int threads = -1;
    bool ideal_rewards = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path,
                    "JSON config or manifest; flags override its fields");
    cmd->add_option("--preset", flags.preset, "named MDP preset (microdrone)");
    cmd->add_option("--mdp", flags.mdp_path, "path to an MDP JSON file");
    cmd->add_option("--out", flags.outdir, "output directory");
    cmd->add_option("--seeds", flags.seeds, "number of independent runs");
    cmd->add_option("--master-seed", flags.master_seed, "64-bit master seed");
    cmd->add_option("--threads", flags.threads, "worker threads (1 = serial)");
    cmd->add_flag("--ideal-rewards", flags.ideal_rewards,
                  "deterministic 2/1 move rewards instead of 0 on failed moves");
}

rrl::ExperimentConfig make_config(const CommonFlags& flags, rrl::ExperimentKind kind) {
    rrl::ExperimentConfig config;
    if (!flags.config_path.empty()) config = rrl::load_config(flags.config_path);
    config.experiment = kind;
    if (!flags.preset.empty()) config.mdp_preset = flags.preset;
    if (!flags.mdp_path.empty()) config.mdp_path = flags.mdp_path;
    if (!flags.outdir.empty()) config.outdir = flags.outdir;
    if (flags.seeds > 0) {
        config.n_seeds = flags.seeds;
        config.seeds.clear();
    }
    if (flags.master_seed >= 0) {
        config.master_seed = static_cast<std::uint64_t>(flags.master_seed);
        config.seeds.clear();
    }
    if (flags.threads >= 0) config.threads = flags.threads;
    if (flags.ideal_rewards) config.ideal_rewards = true;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reverse-rl: reverse temporal-difference learners, their exact "
                 "oracles, and streaming anomaly detection on finite MDPs"};
    app.set_version_flag("--version", rrl::kVersion);
    app.require_subcommand(1);

    CommonFlags flags;

    auto* oracle = app.add_subcommand("oracle", "print analytic values as JSON");
    bool oracle_dist = false;
    double oracle_pi0 = 0.5;
    add_common(oracle, flags);
    oracle->add_flag("--dist", oracle_dist,
                     "also write per-state reverse-return distributions CSV");
    oracle->add_option("--pi-a0", oracle_pi0, "target probability of action 0");

    auto* learn = app.add_subcommand("learn", "run one reverse TD learner");
    double learn_lambda = 0.0, learn_alpha = -1.0;
    long learn_steps = -1;
    std::string learn_schedule;
    bool off_policy = false, mve_normalized = false;
    double pi_a0 = -1.0, mu_a0 = -1.0;
    add_common(learn, flags);
    learn->add_option("--lambda", learn_lambda, "bootstrap mixing in [0,1]");
    learn->add_option("--alpha", learn_alpha, "constant step size");
    learn->add_option("--schedule", learn_schedule, "constant | robbins-monro");
    learn->add_option("--steps", learn_steps, "stream length");
    learn->add_flag("--off-policy", off_policy, "stream under the behavior policy");
    learn->add_flag("--mve-normalized", mve_normalized, "divide the MVE by |S|");
    learn->add_option("--pi-a0", pi_a0, "target probability of action 0");
    learn->add_option("--mu-a0", mu_a0, "behavior probability of action 0");

    auto* sweep = app.add_subcommand("lambda-sweep",
                                     "cross lambda and step-size grids over seeds");
    long sweep_steps = -1;
    bool sweep_normalized = false;
    add_common(sweep, flags);
    sweep->add_option("--steps", sweep_steps, "stream length per run");
    sweep->add_flag("--mve-normalized", sweep_normalized, "divide the MVE by |S|");

    auto* dist_train = app.add_subcommand("dist-train",
                                          "off-policy quantile training (phase 1)");
    long dist_steps = -1;
    int dist_quantiles = -1;
    double dist_alpha = -1.0, dist_pi0 = -1.0, dist_mu0 = -1.0;
    add_common(dist_train, flags);
    dist_train->add_option("--steps", dist_steps, "training stream length");
    dist_train->add_option("--quantiles", dist_quantiles, "number of quantiles");
    dist_train->add_option("--alpha", dist_alpha, "SGD step size");
    dist_train->add_option("--pi-a0", dist_pi0, "target probability of action 0");
    dist_train->add_option("--mu-a0", dist_mu0, "behavior probability of action 0");

    auto* detect = app.add_subcommand("detect",
                                      "stream under the target policy and score anomalies");
    std::string spec_text, model_path;
    double delta = -1.0, sigma = -1.0;
    long detect_steps = -1, onset = -2;
    add_common(detect, flags);
    detect->add_option("--spec", spec_text,
                       "none | reward:<delta>:<prob> | policy:<p_action0>");
    detect->add_option("--delta", delta, "half-width of the accepted window");
    detect->add_option("--sigma", sigma, "imputation standard deviation");
    detect->add_option("--steps", detect_steps, "deployment stream length");
    detect->add_option("--onset", onset, "anomaly onset step (default: midpoint)");
    detect->add_option("--model", model_path, "quantile model CSV (default: train per seed)");

    CLI11_PARSE(app, argc, argv);

    try {
        rrl::ExperimentConfig config;
        if (oracle->parsed()) {
            config = make_config(flags, rrl::ExperimentKind::oracle);
            config.oracle_dist = oracle_dist;
            config.learn.target_p_action0 = oracle_pi0;
        } else if (learn->parsed()) {
            config = make_config(flags, rrl::ExperimentKind::learn);
            config.learn.lambdas = {learn_lambda};
            if (learn_alpha > 0) config.learn.alphas = {learn_alpha};
            if (!learn_schedule.empty()) config.learn.schedule = learn_schedule;
            if (learn_steps > 0) config.learn.total_steps = learn_steps;
            if (off_policy) config.learn.off_policy = true;
            if (mve_normalized) config.learn.mve_normalized = true;
            if (pi_a0 >= 0) config.learn.target_p_action0 = pi_a0;
            if (mu_a0 >= 0) config.learn.behavior_p_action0 = mu_a0;
        } else if (sweep->parsed()) {
            config = make_config(flags, rrl::ExperimentKind::lambda_sweep);
            if (sweep_steps > 0) config.learn.total_steps = sweep_steps;
            if (sweep_normalized) config.learn.mve_normalized = true;
        } else if (dist_train->parsed()) {
            config = make_config(flags, rrl::ExperimentKind::dist_train);
            if (dist_steps > 0) config.dist.steps = dist_steps;
            if (dist_quantiles > 0) config.dist.n_quantiles = dist_quantiles;
            if (dist_alpha > 0) config.dist.alpha = dist_alpha;
            if (dist_pi0 >= 0) config.dist.target_p_action0 = dist_pi0;
            if (dist_mu0 >= 0) config.dist.behavior_p_action0 = dist_mu0;
        } else if (detect->parsed()) {
            config = make_config(flags, rrl::ExperimentKind::detect);
            if (!spec_text.empty()) config.detect.spec = spec_text;
            if (delta >= 0) config.detect.delta = delta;
            if (sigma > 0) config.detect.sigma = sigma;
            if (detect_steps > 0) config.detect.steps = detect_steps;
            if (onset >= -1) config.detect.onset = onset;
            if (!model_path.empty()) config.detect.model_path = model_path;
        }
        rrl::run(config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
