#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rrl/mdp.hpp"

namespace rrl {

/// G_bar_t = R_t + gamma(S_{t-1}) G_bar_{t-1}. Shared by the tracker and the
/// lambda-return target so both produce the same bits on the same stream.
inline double accumulate_reverse_return(double reward, double discount_of_prev,
                                        double g_bar_prev) {
    return reward + discount_of_prev * g_bar_prev;
}

/// Constant-memory accumulator for the reverse return.
struct ReverseReturnTracker {
    double g_bar = 0.0;
    /// Discount of the most recently applied predecessor state.
    double prev_discount = 1.0;

    void update(double reward, double discount_of_prev) {
        g_bar = accumulate_reverse_return(reward, discount_of_prev, g_bar);
        prev_discount = discount_of_prev;
    }

    void reset() {
        g_bar = 0.0;
        prev_discount = 1.0;
    }
};

/// Linear estimate X w of a per-state value; tabular is X = I.
class LinearValueModel {
public:
    explicit LinearValueModel(Eigen::MatrixXd features);

    static LinearValueModel tabular(int n_states) {
        return LinearValueModel(Eigen::MatrixXd::Identity(n_states, n_states));
    }

    int n_features() const { return static_cast<int>(features_.cols()); }
    const Eigen::MatrixXd& features() const { return features_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    Eigen::VectorXd& weights() { return weights_; }

    double estimate(int state) const { return features_.row(state).dot(weights_); }
    Eigen::VectorXd values() const { return features_ * weights_; }

private:
    Eigen::MatrixXd features_;
    Eigen::VectorXd weights_;
};

struct LambdaStepResult {
    double td_error = 0.0;
    /// The bootstrapped regression target R_t + gamma(S_{t-1}) ((1-lambda) v_prev
    /// + lambda G_bar_{t-1}); equals the updated reverse return when lambda = 1.
    double target = 0.0;
};

/// w += alpha (R_t + gamma_prev x_prev.w - x_cur.w) x_cur; returns the TD error.
template <typename XPrev, typename XCur>
double reverse_td_update(Eigen::VectorXd& w, double alpha, double reward, double gamma_prev,
                         const Eigen::MatrixBase<XPrev>& x_prev,
                         const Eigen::MatrixBase<XCur>& x_cur) {
    const double td_error = reward + gamma_prev * x_prev.dot(w) - x_cur.dot(w);
    w += (alpha * td_error) * x_cur.transpose();
    return td_error;
}

template <typename XPrev, typename XCur>
LambdaStepResult reverse_td_lambda_update(Eigen::VectorXd& w, double alpha, double reward,
                                          double gamma_prev, double g_bar_prev, double lambda,
                                          const Eigen::MatrixBase<XPrev>& x_prev,
                                          const Eigen::MatrixBase<XCur>& x_cur) {
    const double bootstrap = (1.0 - lambda) * x_prev.dot(w) + lambda * g_bar_prev;
    LambdaStepResult out;
    out.target = accumulate_reverse_return(reward, gamma_prev, bootstrap);
    out.td_error = out.target - x_cur.dot(w);
    w += (alpha * out.td_error) * x_cur.transpose();
    return out;
}

/// w += alpha tau_prev rho_prev (R_t + gamma_prev x_prev.w - x_cur.w) x_cur.
template <typename XPrev, typename XCur>
double off_policy_reverse_td_update(Eigen::VectorXd& w, double alpha, double reward,
                                    double gamma_prev, double tau_prev, double rho_prev,
                                    const Eigen::MatrixBase<XPrev>& x_prev,
                                    const Eigen::MatrixBase<XCur>& x_cur) {
    const double td_error = reward + gamma_prev * x_prev.dot(w) - x_cur.dot(w);
    w += (alpha * tau_prev * rho_prev * td_error) * x_cur.transpose();
    return td_error;
}

double reverse_td_step(LinearValueModel& model, double alpha, const Transition& tr,
                       double gamma_prev);
LambdaStepResult reverse_td_lambda_step(LinearValueModel& model, double alpha,
                                        const Transition& tr, double gamma_prev,
                                        double g_bar_prev, double lambda);
double off_policy_reverse_td_step(LinearValueModel& model, double alpha, const Transition& tr,
                                  double gamma_prev, double tau_prev, double rho_prev);

struct StepSchedule {
    enum class Kind { constant, robbins_monro };

    Kind kind = Kind::robbins_monro;
    double alpha = 5e-3;  // constant step size
    double a = 0.5;       // robbins_monro: alpha_t = a / (1 + t / b)
    double b = 1e3;

    static StepSchedule constant_step(double alpha);
    static StepSchedule robbins_monro(double a = 0.5, double b = 1e3);

    double at(long t) const {
        return kind == Kind::constant ? alpha : a / (1.0 + static_cast<double>(t) / b);
    }

    /// Nominal step size reported in curve files.
    double nominal() const { return kind == Kind::constant ? alpha : a; }
};

struct OffPolicyWeights {
    Eigen::VectorXd tau;   // d_pi / d_mu per state
    Eigen::MatrixXd rho;   // pi / mu per (state, action)
};

struct LearnerConfig {
    double lambda = 0.0;
    StepSchedule schedule;
    /// Engaged for off-policy learning; the stream then follows the behavior policy.
    std::optional<OffPolicyWeights> off_policy;
    long total_steps = 1000000;
    std::uint64_t seed = 0;
    long eval_every = 1000;
    bool mve_normalized = false;
};

struct PolicyPair {
    Policy target;
    std::optional<Policy> behavior;  // present for off-policy streams
};

struct CurvePoint {
    long step = 0;
    double mve = 0.0;
};
using LearningCurve = std::vector<CurvePoint>;

/// Streams transitions, applies the configured update, and records
/// ||X w - v_bar_pi||_2^2 at step 0 and every eval_every steps. `reference`
/// is the reverse GVF of the target policy. Deterministic given config.seed.
LearningCurve run_learner(const FiniteMdp& mdp, const PolicyPair& policies,
                          const LearnerConfig& config, LinearValueModel& model,
                          const Eigen::VectorXd& reference);

/// Convenience overload: tabular model, reference computed via the oracle.
LearningCurve run_learner(const FiniteMdp& mdp, const PolicyPair& policies,
                          const LearnerConfig& config);

}  // namespace rrl
