#include "rrl/quantile.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "rrl/io.hpp"

namespace rrl {

double huber(double x, double kappa) {
    const double ax = std::abs(x);
    if (ax <= kappa) return 0.5 * x * x;
    return kappa * (ax - 0.5 * kappa);
}

double quantile_huber(double x, double tau, double kappa) {
    const double weight = std::abs(tau - (x < 0.0 ? 1.0 : 0.0));
    return weight * huber(x, kappa);
}

namespace {

/// d/du H_kappa(u): u on the quadratic branch, kappa sign(u) on the linear one.
double huber_derivative(double u, double kappa) {
    if (std::abs(u) <= kappa) return u;
    return u > 0.0 ? kappa : -kappa;
}

}  // namespace

QuantileModel::QuantileModel(int n_states, QuantileModelConfig config)
    : table_(Eigen::MatrixXd::Zero(n_states, config.n_quantiles)),
      target_(Eigen::MatrixXd::Zero(n_states, config.n_quantiles)),
      levels_(config.n_quantiles),
      kappa_(config.kappa),
      sync_period_(config.sync_period) {
    if (config.n_quantiles < 1) throw std::invalid_argument("need at least one quantile");
    if (config.kappa <= 0.0) throw std::invalid_argument("kappa must be positive");
    const double n = static_cast<double>(config.n_quantiles);
    for (int i = 1; i <= config.n_quantiles; ++i)
        levels_(i - 1) = ((i - 1) / n + i / n) / 2.0;
}

void quantile_update_step(QuantileModel& model, const Transition& tr, double gamma_prev,
                          double alpha, double is_weight) {
    const int n = model.n_quantiles();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double kappa = model.kappa();
    const auto target_row = model.target().row(tr.prev_state);
    const auto current_row = model.quantiles().row(tr.next_state);

    // Gradient w.r.t. every q_i(s'; theta) from the snapshot, applied after.
    Eigen::VectorXd increment(n);
    for (int i = 0; i < n; ++i) {
        const double tau = model.level(i);
        const double q_i = current_row(i);
        double grad = 0.0;
        for (int j = 0; j < n; ++j) {
            const double u = tr.reward + gamma_prev * target_row(j) - q_i;
            const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
            grad += weight * huber_derivative(u, kappa);
        }
        increment(i) = alpha * is_weight * inv_n * grad;
    }
    model.quantiles().row(tr.next_state) += increment.transpose();
}

GaussianMixture impute(const QuantileModel& model, int state, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("sigma must be positive");
    GaussianMixture mix;
    mix.means = model.quantiles().row(state).transpose();
    mix.sigma = sigma;
    return mix;
}

namespace {

double normal_cdf(double z) {
    if (std::isinf(z)) return z > 0.0 ? 1.0 : 0.0;
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

}  // namespace

double interval_probability(const GaussianMixture& mixture, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("interval bounds out of order");
    double total = 0.0;
    for (Eigen::Index i = 0; i < mixture.means.size(); ++i) {
        const double m = mixture.means(i);
        total += normal_cdf((hi - m) / mixture.sigma) - normal_cdf((lo - m) / mixture.sigma);
    }
    total /= static_cast<double>(mixture.means.size());
    return std::min(std::max(total, 0.0), 1.0);
}

double anomaly_probability(const QuantileModel& model, int state, double g_bar, double delta,
                           double sigma) {
    if (delta < 0.0) throw std::invalid_argument("delta must be nonnegative");
    const double inside =
        interval_probability(impute(model, state, sigma), g_bar - delta, g_bar + delta);
    return 1.0 - inside;
}

void save_quantile_model(const QuantileModel& model, const std::string& path) {
    CsvWriter csv(path);
    csv.row({"state", "i", "tau_i", "q"});
    for (int s = 0; s < model.n_states(); ++s)
        for (int i = 0; i < model.n_quantiles(); ++i)
            csv.row({std::to_string(s), std::to_string(i + 1),
                     format_double(model.level(i)), format_double(model.quantiles()(s, i))});
}

QuantileModel load_quantile_model(const std::string& path, QuantileModelConfig config) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open quantile model file: " + path);
    std::string line;
    std::getline(in, line);  // header

    struct Cell {
        int state;
        int index;
        double q;
    };
    std::vector<Cell> cells;
    int max_state = -1, max_index = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f0, f1, f2, f3;
        std::getline(ss, f0, ',');
        std::getline(ss, f1, ',');
        std::getline(ss, f2, ',');
        std::getline(ss, f3, ',');
        Cell c{std::stoi(f0), std::stoi(f1), std::stod(f3)};
        max_state = std::max(max_state, c.state);
        max_index = std::max(max_index, c.index);
        cells.push_back(c);
    }
    if (cells.empty()) throw std::runtime_error("empty quantile model file: " + path);

    config.n_quantiles = max_index;
    QuantileModel model(max_state + 1, config);
    for (const Cell& c : cells) model.quantiles()(c.state, c.index - 1) = c.q;
    model.sync_target();
    return model;
}

}  // namespace rrl
