#include "rrl/anomaly.hpp"

#include <sstream>

#include "rrl/io.hpp"
#include "rrl/oracle.hpp"

namespace rrl {

AnomalySpec AnomalySpec::reward_anomaly(double delta, double prob, long onset) {
    if (prob < 0.0 || prob > 1.0) throw std::invalid_argument("anomaly probability not in [0,1]");
    AnomalySpec spec;
    spec.kind = Kind::reward;
    spec.reward_delta = delta;
    spec.reward_prob = prob;
    spec.onset_step = onset;
    return spec;
}

AnomalySpec AnomalySpec::policy_anomaly(Policy replacement, long onset) {
    AnomalySpec spec;
    spec.kind = Kind::policy;
    spec.replacement = std::move(replacement);
    spec.onset_step = onset;
    return spec;
}

std::string AnomalySpec::to_string() const {
    switch (kind) {
        case Kind::none:
            return "none";
        case Kind::reward: {
            std::ostringstream os;
            os << "reward:" << (reward_delta >= 0 ? "+" : "") << format_double(reward_delta)
               << ":" << format_double(reward_prob);
            return os.str();
        }
        case Kind::policy: {
            std::ostringstream os;
            os << "policy:" << format_double(replacement->probs(0, 0));
            return os.str();
        }
    }
    return "none";
}

AnomalySpec AnomalySpec::parse(const std::string& text, const FiniteMdp& mdp, long onset) {
    if (text == "none" || text.empty()) {
        AnomalySpec spec;
        spec.onset_step = onset;
        return spec;
    }
    std::vector<std::string> parts;
    std::istringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);

    if (parts[0] == "reward") {
        if (parts.size() != 3) throw std::invalid_argument("expected reward:<delta>:<prob>");
        return reward_anomaly(std::stod(parts[1]), std::stod(parts[2]), onset);
    }
    if (parts[0] == "policy") {
        if (parts.size() != 2) throw std::invalid_argument("expected policy:<p_action0>");
        const double p0 = std::stod(parts[1]);
        if (p0 < 0.0 || p0 > 1.0) throw std::invalid_argument("action probability not in [0,1]");
        Policy replacement;
        replacement.probs.resize(mdp.n_states, mdp.n_actions);
        const double rest = mdp.n_actions > 1 ? (1.0 - p0) / (mdp.n_actions - 1) : 0.0;
        replacement.probs.setConstant(rest);
        replacement.probs.col(0).setConstant(p0);
        return policy_anomaly(std::move(replacement), onset);
    }
    throw std::invalid_argument("unknown anomaly spec: " + text);
}

double inject_reward(double reward, const AnomalySpec& spec, long step, Rng& rng) {
    if (spec.kind != AnomalySpec::Kind::reward || !spec.active_at(step)) return reward;
    if (rng.next_double() < spec.reward_prob) return reward + spec.reward_delta;
    return reward;
}

Transition sample_step_with_anomaly(const FiniteMdp& mdp, const Policy& pi,
                                    const AnomalySpec& spec, long step, int state, Rng& rng) {
    const bool swap_policy =
        spec.kind == AnomalySpec::Kind::policy && spec.active_at(step);
    Transition tr = sample_step(mdp, swap_policy ? *spec.replacement : pi, state, rng, step);
    tr.reward = inject_reward(tr.reward, spec, step, rng);
    return tr;
}

Phase1Result run_phase1(const FiniteMdp& mdp, const Policy& mu, const Policy& pi,
                        const Phase1Config& config, std::uint64_t seed) {
    const Eigen::MatrixXd rho = is_ratio(mdp, pi, mu);  // throws on coverage gaps
    const Eigen::VectorXd v_bar = reverse_gvf(mdp, pi);

    Phase1Result result{QuantileModel(mdp.n_states, config.model), {}};
    auto mve = [&]() { return (result.model.mean_values() - v_bar).squaredNorm(); };
    result.curve.push_back({0, mve()});

    Rng rng(seed);
    int state = rng.categorical(mdp.initial_dist);
    for (long t = 1; t <= config.steps; ++t) {
        const Transition tr = sample_step(mdp, mu, state, rng, t);
        quantile_update_step(result.model, tr, mdp.discount(tr.prev_state), config.alpha,
                             rho(tr.prev_state, tr.action));
        if (t % result.model.sync_period() == 0) result.model.sync_target();
        state = tr.next_state;
        if (t % config.eval_every == 0) result.curve.push_back({t, mve()});
    }
    return result;
}

DetectionTrace run_phase2(const FiniteMdp& mdp, const Policy& pi, const QuantileModel& model,
                          const AnomalySpec& spec, long steps, double delta, double sigma,
                          std::uint64_t seed) {
    DetectionTrace trace;
    trace.reserve(steps);

    Rng rng(seed);
    int state = rng.categorical(mdp.initial_dist);
    Detector detector(model, delta, sigma);
    for (long t = 1; t <= steps; ++t) {
        const Transition tr = sample_step_with_anomaly(mdp, pi, spec, t, state, rng);
        const double prob =
            detector.observe(tr.reward, mdp.discount(tr.prev_state), tr.next_state);
        state = tr.next_state;
        trace.push_back({t, state, detector.g_bar(), prob});
    }
    return trace;
}

}  // namespace rrl
