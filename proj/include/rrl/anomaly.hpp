#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rrl/mdp.hpp"
#include "rrl/quantile.hpp"
#include "rrl/reverse_td.hpp"

namespace rrl {

/// Fault injected into a stream from `onset_step` on: extra reward with some
/// probability, or a replacement action distribution.
struct AnomalySpec {
    enum class Kind { none, reward, policy };

    Kind kind = Kind::none;
    double reward_delta = 0.0;
    double reward_prob = 0.0;
    std::optional<Policy> replacement;
    long onset_step = 0;

    static AnomalySpec none_spec() { return {}; }
    static AnomalySpec reward_anomaly(double delta, double prob, long onset);
    static AnomalySpec policy_anomaly(Policy replacement, long onset);

    bool active_at(long step) const { return kind != Kind::none && step >= onset_step; }

    /// "none", "reward:+2:0.5", or "policy:0.9" (clockwise-action probability).
    std::string to_string() const;

    /// Parses the textual form above. Policy anomalies are expanded against
    /// `mdp` (probability mass on action 0, remainder uniform on the rest).
    static AnomalySpec parse(const std::string& text, const FiniteMdp& mdp, long onset);
};

/// Samples one step under the anomaly: the action distribution is swapped when
/// a policy anomaly is active, and the reward is perturbed in place when a
/// reward anomaly fires. Draw order: action, next state, reward, injection coin.
Transition sample_step_with_anomaly(const FiniteMdp& mdp, const Policy& pi,
                                    const AnomalySpec& spec, long step, int state, Rng& rng);

/// Reward-side injection alone (identity before onset).
double inject_reward(double reward, const AnomalySpec& spec, long step, Rng& rng);

struct DetectionRecord {
    long step = 0;
    int state = 0;
    double g_bar = 0.0;
    double anomaly_prob = 0.0;
};
using DetectionTrace = std::vector<DetectionRecord>;

/// Streaming detector: one reverse-return tracker plus a reference to the
/// trained quantile model. Holds no history, so its memory footprint is
/// independent of stream length; trace recording belongs to the harness.
class Detector {
public:
    Detector(const QuantileModel& model, double delta = 1.0, double sigma = 1.0)
        : model_(&model), delta_(delta), sigma_(sigma) {}

    /// Folds one step into the reverse return and scores the current state.
    double observe(double reward, double discount_of_prev, int state) {
        tracker_.update(reward, discount_of_prev);
        return anomaly_probability(*model_, state, tracker_.g_bar, delta_, sigma_);
    }

    double g_bar() const { return tracker_.g_bar; }

private:
    const QuantileModel* model_;
    ReverseReturnTracker tracker_;
    double delta_;
    double sigma_;
};

static_assert(sizeof(Detector) <= sizeof(void*) + 4 * sizeof(double),
              "detector state must stay constant-size");

struct Phase1Config {
    long steps = 200000;
    double alpha = 5e-3;
    long eval_every = 1000;
    QuantileModelConfig model;
};

struct Phase1Result {
    QuantileModel model;
    LearningCurve curve;  // mean-of-quantiles MVE against v_bar_pi
};

/// Off-policy distributional training: streams under `mu`, weights every
/// quantile update by rho(s, a) = pi(a|s)/mu(a|s), and syncs the target table
/// every model.sync_period steps. Throws CoverageViolation when mu does not
/// cover pi.
Phase1Result run_phase1(const FiniteMdp& mdp, const Policy& mu, const Policy& pi,
                        const Phase1Config& config, std::uint64_t seed);

/// Deployment phase: streams under `pi` with the anomaly applied from its
/// onset, scoring every step with a constant-memory Detector.
DetectionTrace run_phase2(const FiniteMdp& mdp, const Policy& pi, const QuantileModel& model,
                          const AnomalySpec& spec, long steps, double delta, double sigma,
                          std::uint64_t seed);

}  // namespace rrl
