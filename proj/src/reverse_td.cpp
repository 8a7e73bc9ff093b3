#include "rrl/reverse_td.hpp"

#include "rrl/oracle.hpp"

namespace rrl {

LinearValueModel::LinearValueModel(Eigen::MatrixXd features) : features_(std::move(features)) {
    if (features_.cols() > features_.rows())
        throw RankDeficientFeatures("more features than states");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(features_);
    qr.setThreshold(1e-10);
    if (qr.rank() < features_.cols())
        throw RankDeficientFeatures("feature matrix lacks linearly independent columns");
    weights_ = Eigen::VectorXd::Zero(features_.cols());
}

double reverse_td_step(LinearValueModel& model, double alpha, const Transition& tr,
                       double gamma_prev) {
    return reverse_td_update(model.weights(), alpha, tr.reward, gamma_prev,
                             model.features().row(tr.prev_state),
                             model.features().row(tr.next_state));
}

LambdaStepResult reverse_td_lambda_step(LinearValueModel& model, double alpha,
                                        const Transition& tr, double gamma_prev,
                                        double g_bar_prev, double lambda) {
    return reverse_td_lambda_update(model.weights(), alpha, tr.reward, gamma_prev, g_bar_prev,
                                    lambda, model.features().row(tr.prev_state),
                                    model.features().row(tr.next_state));
}

double off_policy_reverse_td_step(LinearValueModel& model, double alpha, const Transition& tr,
                                  double gamma_prev, double tau_prev, double rho_prev) {
    return off_policy_reverse_td_update(model.weights(), alpha, tr.reward, gamma_prev,
                                        tau_prev, rho_prev,
                                        model.features().row(tr.prev_state),
                                        model.features().row(tr.next_state));
}

StepSchedule StepSchedule::constant_step(double alpha) {
    StepSchedule s;
    s.kind = Kind::constant;
    s.alpha = alpha;
    return s;
}

StepSchedule StepSchedule::robbins_monro(double a, double b) {
    StepSchedule s;
    s.kind = Kind::robbins_monro;
    s.a = a;
    s.b = b;
    return s;
}

LearningCurve run_learner(const FiniteMdp& mdp, const PolicyPair& policies,
                          const LearnerConfig& config, LinearValueModel& model,
                          const Eigen::VectorXd& reference) {
    if (config.lambda < 0.0 || config.lambda > 1.0)
        throw std::invalid_argument("lambda must be in [0, 1]");
    const bool off_policy = config.off_policy.has_value();
    if (off_policy && !policies.behavior)
        throw std::invalid_argument("off-policy learning needs a behavior policy");
    const Policy& stream_policy =
        off_policy ? *policies.behavior : policies.target;

    const double denom = config.mve_normalized ? static_cast<double>(mdp.n_states) : 1.0;
    auto mve = [&]() { return (model.values() - reference).squaredNorm() / denom; };

    LearningCurve curve;
    curve.push_back({0, mve()});

    Rng rng(config.seed);
    int state = rng.categorical(mdp.initial_dist);
    ReverseReturnTracker tracker;

    for (long t = 1; t <= config.total_steps; ++t) {
        const Transition tr = sample_step(mdp, stream_policy, state, rng, t);
        const double gamma_prev = mdp.discount(tr.prev_state);
        const double alpha = config.schedule.at(t - 1);

        if (off_policy) {
            const auto& weights = *config.off_policy;
            off_policy_reverse_td_step(model, alpha, tr, gamma_prev,
                                       weights.tau(tr.prev_state),
                                       weights.rho(tr.prev_state, tr.action));
        } else if (config.lambda == 0.0) {
            reverse_td_step(model, alpha, tr, gamma_prev);
        } else {
            reverse_td_lambda_step(model, alpha, tr, gamma_prev, tracker.g_bar,
                                   config.lambda);
        }

        tracker.update(tr.reward, gamma_prev);
        state = tr.next_state;
        if (t % config.eval_every == 0) curve.push_back({t, mve()});
    }
    return curve;
}

LearningCurve run_learner(const FiniteMdp& mdp, const PolicyPair& policies,
                          const LearnerConfig& config) {
    LinearValueModel model = LinearValueModel::tabular(mdp.n_states);
    const Eigen::VectorXd reference = reverse_gvf(mdp, policies.target);
    return run_learner(mdp, policies, config, model, reference);
}

}  // namespace rrl
