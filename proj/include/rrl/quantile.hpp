#pragma once

#include <string>

#include <Eigen/Dense>

#include "rrl/mdp.hpp"

namespace rrl {

/// H_kappa(x) = 0.5 x^2 for |x| <= kappa, kappa (|x| - 0.5 kappa) otherwise.
double huber(double x, double kappa);

/// rho_tau^kappa(x) = |tau - 1{x < 0}| H_kappa(x)
double quantile_huber(double x, double tau, double kappa);

struct QuantileModelConfig {
    int n_quantiles = 20;
    double kappa = 1.0;
    long sync_period = 100;
};

/// Tabular quantile table q_i(s; theta) with a periodically synchronized target
/// copy. Levels are the midpoints tau_i = (2i - 1) / (2N). The table starts at
/// zero, the exact reverse-return distribution at time 0.
class QuantileModel {
public:
    QuantileModel(int n_states, QuantileModelConfig config = {});

    int n_states() const { return static_cast<int>(table_.rows()); }
    int n_quantiles() const { return static_cast<int>(table_.cols()); }
    double kappa() const { return kappa_; }
    long sync_period() const { return sync_period_; }

    double level(int i) const { return levels_(i); }
    const Eigen::VectorXd& levels() const { return levels_; }

    const Eigen::MatrixXd& quantiles() const { return table_; }
    Eigen::MatrixXd& quantiles() { return table_; }
    const Eigen::MatrixXd& target() const { return target_; }

    /// theta_bar <- theta; idempotent.
    void sync_target() { target_ = table_; }

    /// Per-state mean of the quantile table (the point estimate of the value).
    Eigen::VectorXd mean_values() const { return table_.rowwise().mean(); }

private:
    Eigen::MatrixXd table_;
    Eigen::MatrixXd target_;
    Eigen::VectorXd levels_;
    double kappa_;
    long sync_period_;
};

/// One SGD step on the quantile regression loss for transition (s, a, r, s'):
/// row s' of theta moves along -d/dq of
///   sum_i (1/N) sum_j rho_{tau_i}^kappa( r + gamma_prev q_j(s; theta_bar) - q_i(s'; theta) ),
/// scaled by alpha and the importance weight. The target table is not touched.
void quantile_update_step(QuantileModel& model, const Transition& tr, double gamma_prev,
                          double alpha, double is_weight = 1.0);

/// Uniform mixture of N Gaussians with common sigma.
struct GaussianMixture {
    Eigen::VectorXd means;
    double sigma = 1.0;

    double mean() const { return means.mean(); }
};

/// eta_hat^s = (1/N) sum_i Normal(q_i(s; theta), sigma^2)
GaussianMixture impute(const QuantileModel& model, int state, double sigma = 1.0);

/// Mixture probability of [lo, hi]; handles infinite bounds.
double interval_probability(const GaussianMixture& mixture, double lo, double hi);

/// 1 - eta_hat^s([g_bar - delta, g_bar + delta])
double anomaly_probability(const QuantileModel& model, int state, double g_bar,
                           double delta = 1.0, double sigma = 1.0);

/// CSV with columns state,i,tau_i,q (the live table).
void save_quantile_model(const QuantileModel& model, const std::string& path);
QuantileModel load_quantile_model(const std::string& path, QuantileModelConfig config = {});

}  // namespace rrl
