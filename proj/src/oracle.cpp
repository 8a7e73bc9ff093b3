#include "rrl/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "rrl/reverse_td.hpp"

namespace rrl {

namespace {

Eigen::Index sa_index(const FiniteMdp& mdp, int s, int a) {
    return static_cast<Eigen::Index>(s) * mdp.n_actions + a;
}

/// P~_pi^T D~_pi r without forming the |S||A| matrices.
Eigen::VectorXd backward_flow(const FiniteMdp& mdp, const Policy& policy,
                              const Eigen::VectorXd& d_pi) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double w = d_pi(s) * policy.probs(s, a) * mdp.mean_reward(s, a);
            if (w != 0.0) out += w * mdp.transition[a].row(s).transpose();
        }
    return out;
}

/// What the closed forms actually need: a unique stationary distribution and
/// rho(P_pi^T Gamma) < 1. Aperiodicity is not required here (a deterministic
/// cycle has a perfectly good backward kernel), so this is deliberately weaker
/// than check_assumption1's ergodicity report.
Eigen::VectorXd checked_stationary(const FiniteMdp& mdp, const Policy& policy) {
    const Eigen::MatrixXd p_pi = transition_matrix(mdp, policy);
    Eigen::VectorXd d_pi;
    try {
        d_pi = stationary_distribution(p_pi);
    } catch (const NotErgodic& e) {
        throw AssumptionViolated(std::string("assumption violated: ") + e.what());
    }
    const Eigen::MatrixXd reverse_core = p_pi.transpose() * mdp.discount.asDiagonal();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(
        Eigen::MatrixXd::Identity(p_pi.rows(), p_pi.rows()) - reverse_core);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible())
        throw AssumptionViolated("assumption violated: singular (I - P_pi^T Gamma)");
    return d_pi;
}

}  // namespace

Eigen::VectorXd forward_gvf(const FiniteMdp& mdp, const Policy& policy) {
    const Eigen::MatrixXd p_pi = transition_matrix(mdp, policy);
    const Eigen::VectorXd r_pi = reward_vector(mdp, policy);
    const Eigen::Index n = mdp.n_states;

    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(n, n) - p_pi * mdp.discount.asDiagonal();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) throw SingularSystem("(I - P_pi Gamma) is singular");

    Eigen::VectorXd v = lu.solve(r_pi);
    if ((v - r_pi - p_pi * mdp.discount.asDiagonal() * v).lpNorm<Eigen::Infinity>() > 1e-9)
        throw SingularSystem("forward GVF residual above tolerance");
    return v;
}

Eigen::VectorXd reverse_bellman_apply(const FiniteMdp& mdp, const Policy& policy,
                                      const Eigen::VectorXd& y) {
    const Eigen::MatrixXd p_pi = transition_matrix(mdp, policy);
    const Eigen::VectorXd d_pi = stationary_distribution(p_pi);
    const Eigen::VectorXd flow = backward_flow(mdp, policy, d_pi);
    const Eigen::VectorXd propagated =
        p_pi.transpose() * (mdp.discount.asDiagonal() * (d_pi.asDiagonal() * y));
    return (flow + propagated).cwiseQuotient(d_pi);
}

Eigen::VectorXd reverse_gvf(const FiniteMdp& mdp, const Policy& policy) {
    const Eigen::VectorXd d_pi = checked_stationary(mdp, policy);
    const Eigen::MatrixXd p_pi = transition_matrix(mdp, policy);
    const Eigen::Index n = mdp.n_states;

    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(n, n) - p_pi.transpose() * mdp.discount.asDiagonal();
    const Eigen::VectorXd y = system.partialPivLu().solve(backward_flow(mdp, policy, d_pi));
    Eigen::VectorXd v_bar = y.cwiseQuotient(d_pi);

    if ((reverse_bellman_apply(mdp, policy, v_bar) - v_bar).lpNorm<Eigen::Infinity>() > 1e-9)
        throw SingularSystem("reverse GVF residual above tolerance");
    return v_bar;
}

OracleReport oracle_report(const FiniteMdp& mdp, const Policy& policy) {
    OracleReport report;
    report.forward_values = forward_gvf(mdp, policy);
    report.reverse_values = reverse_gvf(mdp, policy);
    report.d_pi = stationary_distribution(transition_matrix(mdp, policy));
    const Eigen::MatrixXd reverse_core =
        transition_matrix(mdp, policy).transpose() * mdp.discount.asDiagonal();
    report.spectral_radius_reverse = reverse_core.eigenvalues().cwiseAbs().maxCoeff();
    report.method = OracleReport::Method::matrix_solve;
    return report;
}

LinearFixedPoint linear_fixed_point(const FiniteMdp& mdp, const Policy& policy,
                                    const Eigen::MatrixXd& features) {
    if (features.rows() != mdp.n_states)
        throw RankDeficientFeatures("feature matrix must have one row per state");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(features);
    qr.setThreshold(1e-10);
    if (qr.rank() < features.cols())
        throw RankDeficientFeatures("feature matrix lacks linearly independent columns");
    const Eigen::VectorXd d_pi = checked_stationary(mdp, policy);
    const Eigen::MatrixXd p_pi = transition_matrix(mdp, policy);
    const Eigen::Index n = mdp.n_states;

    LinearFixedPoint out;
    const Eigen::MatrixXd core =
        p_pi.transpose() * mdp.discount.asDiagonal() - Eigen::MatrixXd::Identity(n, n);
    out.a_bar = features.transpose() * core * d_pi.asDiagonal() * features;
    out.b_bar = features.transpose() * backward_flow(mdp, policy, d_pi);
    out.weights = -out.a_bar.partialPivLu().solve(out.b_bar);

    const Eigen::MatrixXd sym = 0.5 * (out.a_bar + out.a_bar.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    out.sym_eigenvalues = eig.eigenvalues();
    return out;
}

Eigen::VectorXd density_ratio(const FiniteMdp& mdp, const Policy& pi, const Policy& mu) {
    const Eigen::VectorXd d_pi = stationary_distribution(transition_matrix(mdp, pi));
    const Eigen::VectorXd d_mu = stationary_distribution(transition_matrix(mdp, mu));
    return d_pi.cwiseQuotient(d_mu);
}

Eigen::MatrixXd is_ratio(const FiniteMdp& mdp, const Policy& pi, const Policy& mu) {
    Eigen::MatrixXd rho(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double p = pi.probs(s, a);
            const double m = mu.probs(s, a);
            if (m <= 0.0) {
                if (p > 0.0)
                    throw CoverageViolation("pi(a|s) > 0 where mu(a|s) = 0 at (s=" +
                                            std::to_string(s) + ", a=" + std::to_string(a) +
                                            ")");
                rho(s, a) = 0.0;
            } else {
                rho(s, a) = p / m;
            }
        }
    return rho;
}

BackwardKernel backward_kernel(const FiniteMdp& mdp, const Policy& policy) {
    const Eigen::VectorXd d_pi = checked_stationary(mdp, policy);

    BackwardKernel kernel(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        // Group probability by (predecessor, reward value), merging rewards
        // that coincide up to 1e-9.
        std::vector<BackwardEntry> entries;
        for (int prev = 0; prev < mdp.n_states; ++prev) {
            std::vector<BackwardEntry> local;
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double base =
                    d_pi(prev) / d_pi(s) * policy.probs(prev, a) * mdp.p(prev, a, s);
                if (base <= 0.0) continue;
                for (const auto& outcome : mdp.outcomes(prev, a)) {
                    if (outcome.probability <= 0.0) continue;
                    local.push_back({prev, outcome.value, base * outcome.probability});
                }
            }
            std::sort(local.begin(), local.end(),
                      [](const BackwardEntry& x, const BackwardEntry& y) {
                          return x.reward < y.reward;
                      });
            for (const auto& e : local) {
                if (!entries.empty() && entries.back().prev_state == prev &&
                    e.reward - entries.back().reward <= 1e-9) {
                    entries.back().prob += e.prob;
                } else {
                    entries.push_back(e);
                }
            }
        }
        kernel[s] = std::move(entries);
    }
    return kernel;
}

std::vector<DiscreteDistribution> distributional_operator(
    const BackwardKernel& kernel, const Eigen::VectorXd& discount,
    const std::vector<DiscreteDistribution>& eta, const DistributionalConfig& config) {
    const int n = static_cast<int>(kernel.size());
    std::vector<DiscreteDistribution> out(n);
    for (int s = 0; s < n; ++s) {
        std::vector<DiscreteDistribution::Atom> raw;
        for (const BackwardEntry& entry : kernel[s]) {
            const double gamma_prev = discount(entry.prev_state);
            for (const auto& atom : eta[entry.prev_state].atoms())
                raw.push_back({entry.reward + gamma_prev * atom.value,
                               entry.prob * atom.mass});
            if (raw.size() > 16 * config.atom_cap)
                throw SupportExplosion("raw atom count exceeded cap during push-forward");
        }
        out[s] = DiscreteDistribution::from_atoms(std::move(raw), config.merge);
        if (out[s].size() > config.atom_cap)
            throw SupportExplosion("atom count " + std::to_string(out[s].size()) +
                                   " exceeds cap");
    }
    return out;
}

std::vector<DiscreteDistribution> distributional_fixed_point(
    const FiniteMdp& mdp, const Policy& policy, const DistributionalConfig& config) {
    const BackwardKernel kernel = backward_kernel(mdp, policy);

    std::vector<DiscreteDistribution> eta(mdp.n_states, DiscreteDistribution::point_mass(0.0));
    for (long it = 0; it < config.max_iters; ++it) {
        std::vector<DiscreteDistribution> next =
            distributional_operator(kernel, mdp.discount, eta, config);
        double dist = 0.0;
        for (int s = 0; s < mdp.n_states; ++s)
            dist = std::max(dist, cramer_distance(next[s], eta[s]));
        eta = std::move(next);
        if (dist <= config.tolerance) return eta;
    }
    throw SupportExplosion("distributional iteration exceeded max_iters");
}

McEstimate mc_reverse_values(const FiniteMdp& mdp, const Policy& policy, long steps,
                             int batches, std::uint64_t seed, long burn_in) {
    const int n = mdp.n_states;
    Rng rng(seed);
    int state = rng.categorical(mdp.initial_dist);
    ReverseReturnTracker tracker;

    for (long t = 0; t < burn_in; ++t) {
        const Transition tr = sample_step(mdp, policy, state, rng, t);
        tracker.update(tr.reward, mdp.discount(tr.prev_state));
        state = tr.next_state;
    }

    // Batch means over contiguous segments: per segment and state, the average
    // reverse return observed on visits.
    Eigen::MatrixXd batch_mean = Eigen::MatrixXd::Zero(batches, n);
    Eigen::MatrixXd batch_count = Eigen::MatrixXd::Zero(batches, n);
    const long seg_len = steps / batches;
    for (int b = 0; b < batches; ++b) {
        for (long t = 0; t < seg_len; ++t) {
            const Transition tr = sample_step(mdp, policy, state, rng, t);
            tracker.update(tr.reward, mdp.discount(tr.prev_state));
            state = tr.next_state;
            batch_mean(b, state) += tracker.g_bar;
            batch_count(b, state) += 1.0;
        }
    }

    McEstimate est;
    est.mean = Eigen::VectorXd::Zero(n);
    est.std_error = Eigen::VectorXd::Zero(n);
    for (int s = 0; s < n; ++s) {
        std::vector<double> means;
        means.reserve(batches);
        for (int b = 0; b < batches; ++b)
            if (batch_count(b, s) > 0.0) means.push_back(batch_mean(b, s) / batch_count(b, s));
        if (means.size() < 2)
            throw NotErgodic("state " + std::to_string(s) + " visited in too few batches");
        double m = 0.0;
        for (double x : means) m += x;
        m /= static_cast<double>(means.size());
        double var = 0.0;
        for (double x : means) var += (x - m) * (x - m);
        var /= static_cast<double>(means.size() - 1);
        est.mean(s) = m;
        est.std_error(s) = std::sqrt(var / static_cast<double>(means.size()));
    }
    return est;
}

McScalar mc_forward_value(const FiniteMdp& mdp, const Policy& policy, int start_state,
                          int episodes, std::uint64_t seed, long step_cap) {
    Rng rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        double g = 0.0;
        double weight = 1.0;
        int state = start_state;
        for (long t = 0; t < step_cap && weight > 1e-16; ++t) {
            const Transition tr = sample_step(mdp, policy, state, rng, t);
            g += weight * tr.reward;
            weight *= mdp.discount(tr.next_state);
            state = tr.next_state;
        }
        sum += g;
        sum_sq += g * g;
    }
    McScalar out;
    out.mean = sum / episodes;
    const double var = (sum_sq - sum * sum / episodes) / (episodes - 1);
    out.std_error = std::sqrt(std::max(var, 0.0) / episodes);
    return out;
}

}  // namespace rrl
