#include "rrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rrl {

namespace {

constexpr double kRowSumTol = 1e-12;

bool rows_stochastic(const Eigen::MatrixXd& m, double tol) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (m.row(r).minCoeff() < 0.0) return false;
        if (std::abs(m.row(r).sum() - 1.0) > tol) return false;
    }
    return true;
}

}  // namespace

std::vector<std::string> validate(const FiniteMdp& mdp) {
    std::vector<std::string> errors;
    auto fail = [&errors](const std::string& msg) { errors.push_back(msg); };

    if (mdp.n_states < 1) fail("n_states must be positive");
    if (mdp.n_actions < 1) fail("n_actions must be positive");
    if (static_cast<int>(mdp.transition.size()) != mdp.n_actions)
        fail("transition tensor must have one matrix per action");
    if (!errors.empty()) return errors;

    for (int a = 0; a < mdp.n_actions; ++a) {
        const auto& m = mdp.transition[a];
        if (m.rows() != mdp.n_states || m.cols() != mdp.n_states) {
            fail("transition matrix for action " + std::to_string(a) + " has wrong shape");
            continue;
        }
        for (int s = 0; s < mdp.n_states; ++s) {
            const double sum = m.row(s).sum();
            if (std::abs(sum - 1.0) > kRowSumTol) {
                std::ostringstream os;
                os << "transition row (s=" << s << ", a=" << a << "): row sum " << sum
                   << " != 1";
                fail(os.str());
            }
            if (m.row(s).minCoeff() < 0.0)
                fail("transition row (s=" + std::to_string(s) + ", a=" + std::to_string(a) +
                     ") has negative entries");
        }
    }

    if (mdp.reward_model.size() != static_cast<std::size_t>(mdp.n_states) * mdp.n_actions) {
        fail("reward_model must have one outcome list per (state, action)");
    } else {
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                const auto& outcomes = mdp.outcomes(s, a);
                if (outcomes.empty()) {
                    fail("empty reward outcome list at (s=" + std::to_string(s) +
                         ", a=" + std::to_string(a) + ")");
                    continue;
                }
                double sum = 0.0;
                for (const auto& o : outcomes) {
                    sum += o.probability;
                    if (o.probability < 0.0)
                        fail("negative reward probability at (s=" + std::to_string(s) +
                             ", a=" + std::to_string(a) + ")");
                }
                if (std::abs(sum - 1.0) > kRowSumTol)
                    fail("reward probabilities at (s=" + std::to_string(s) +
                         ", a=" + std::to_string(a) + ") sum to " + std::to_string(sum));
            }
        }
    }

    if (mdp.discount.size() != mdp.n_states) {
        fail("discount vector has wrong length");
    } else if (mdp.discount.minCoeff() < 0.0 || mdp.discount.maxCoeff() > 1.0) {
        fail("discount out of [0,1]");
    }

    if (mdp.initial_dist.size() != mdp.n_states) {
        fail("initial distribution has wrong length");
    } else {
        if (mdp.initial_dist.minCoeff() < 0.0) fail("initial distribution has negative entries");
        if (std::abs(mdp.initial_dist.sum() - 1.0) > kRowSumTol)
            fail("initial distribution does not sum to 1");
    }

    return errors;
}

std::vector<std::string> validate(const Policy& policy, const FiniteMdp& mdp) {
    std::vector<std::string> errors;
    if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions) {
        errors.push_back("policy table has wrong shape");
        return errors;
    }
    if (!rows_stochastic(policy.probs, kRowSumTol))
        errors.push_back("policy rows must be nonnegative and sum to 1");
    return errors;
}

Policy uniform_policy(int n_states, int n_actions) {
    Policy pi;
    pi.probs = Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions);
    return pi;
}

Policy microdrone_policy(double p_clockwise) {
    Policy pi;
    pi.probs.resize(4, 2);
    pi.probs.col(0).setConstant(p_clockwise);
    pi.probs.col(1).setConstant(1.0 - p_clockwise);
    return pi;
}

MdpWithPolicy build_microdrone(bool ideal_rewards) {
    constexpr int n = 4;
    constexpr double kFail = 0.01;

    FiniteMdp mdp;
    mdp.n_states = n;
    mdp.n_actions = 2;
    mdp.transition.assign(2, Eigen::MatrixXd::Zero(n, n));
    for (int s = 0; s < n; ++s) {
        const int cw = (s + 1) % n;
        const int ccw = (s + n - 1) % n;
        mdp.transition[0](s, cw) += 1.0 - kFail;
        mdp.transition[0](s, s) += kFail;
        mdp.transition[1](s, ccw) += 1.0 - kFail;
        mdp.transition[1](s, s) += kFail;
    }

    mdp.reward_model.resize(static_cast<std::size_t>(n) * 2);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < 2; ++a) {
            const double move_reward = (a == 0) ? 2.0 : 1.0;
            auto& outcomes = mdp.reward_model[static_cast<std::size_t>(s) * 2 + a];
            if (ideal_rewards) {
                outcomes = {{move_reward, 1.0}};
            } else {
                // A failed move consumes no energy.
                outcomes = {{move_reward, 1.0 - kFail}, {0.0, kFail}};
            }
        }
    }

    mdp.discount.resize(n);
    mdp.discount << 1.0, 1.0, 1.0, 0.0;
    mdp.initial_dist = Eigen::VectorXd::Constant(n, 1.0 / n);

    return {std::move(mdp), uniform_policy(n, 2)};
}

MdpWithPolicy build_random_mdp(std::uint64_t seed, int n_states, int n_actions,
                               int reward_outcomes) {
    if (n_states < 2 || n_actions < 2) throw std::invalid_argument("degenerate chain");
    if (reward_outcomes < 1) throw std::invalid_argument("need at least one reward outcome");

    Rng rng(seed);
    auto dirichlet_row = [&rng](double* out, int k) {
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
            out[i] = -std::log(1.0 - rng.next_double());
            sum += out[i];
        }
        for (int i = 0; i < k; ++i) out[i] /= sum;
    };

    FiniteMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.transition.assign(n_actions, Eigen::MatrixXd::Zero(n_states, n_states));
    std::vector<double> row(n_states);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            dirichlet_row(row.data(), n_states);
            for (int t = 0; t < n_states; ++t) mdp.transition[a](s, t) = row[t];
        }
    }

    mdp.reward_model.resize(static_cast<std::size_t>(n_states) * n_actions);
    std::vector<double> probs(reward_outcomes);
    for (auto& outcomes : mdp.reward_model) {
        dirichlet_row(probs.data(), reward_outcomes);
        outcomes.resize(reward_outcomes);
        for (int k = 0; k < reward_outcomes; ++k)
            outcomes[k] = {rng.uniform(-1.0, 1.0), probs[k]};
    }

    mdp.discount.resize(n_states);
    for (int s = 0; s < n_states; ++s) {
        const double u = rng.next_double();
        if (u < 0.25) {
            mdp.discount(s) = 1.0;
        } else if (u < 0.35) {
            mdp.discount(s) = 0.0;
        } else {
            mdp.discount(s) = rng.next_double();
        }
    }
    // At least one state must discount strictly, so rho(P_pi^T Gamma) < 1.
    const int forced = static_cast<int>(rng.next_u64() % n_states);
    mdp.discount(forced) = rng.uniform(0.0, 0.9);

    mdp.initial_dist.resize(n_states);
    dirichlet_row(mdp.initial_dist.data(), n_states);

    Policy policy;
    policy.probs.resize(n_states, n_actions);
    std::vector<double> prow(n_actions);
    for (int s = 0; s < n_states; ++s) {
        dirichlet_row(prow.data(), n_actions);
        for (int a = 0; a < n_actions; ++a) policy.probs(s, a) = prow[a];
    }

    return {std::move(mdp), std::move(policy)};
}

Transition sample_step(const FiniteMdp& mdp, const Policy& policy, int state, Rng& rng,
                       long time_index) {
    Transition tr;
    tr.prev_state = state;
    tr.time_index = time_index;
    tr.action = rng.categorical(policy.probs.row(state));
    tr.next_state = rng.categorical(mdp.transition[tr.action].row(state));

    const auto& outcomes = mdp.outcomes(state, tr.action);
    if (outcomes.size() == 1) {
        tr.reward = outcomes[0].value;
    } else {
        double u = rng.next_double();
        tr.reward = outcomes.back().value;
        for (const auto& o : outcomes) {
            u -= o.probability;
            if (u < 0.0) {
                tr.reward = o.value;
                break;
            }
        }
    }
    return tr;
}

Eigen::MatrixXd transition_matrix(const FiniteMdp& mdp, const Policy& policy) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    for (int a = 0; a < mdp.n_actions; ++a)
        p += policy.probs.col(a).asDiagonal() * mdp.transition[a];
    return p;
}

Eigen::MatrixXd state_action_matrix(const FiniteMdp& mdp) {
    Eigen::MatrixXd p(static_cast<Eigen::Index>(mdp.n_states) * mdp.n_actions, mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            p.row(static_cast<Eigen::Index>(s) * mdp.n_actions + a) =
                mdp.transition[a].row(s);
    return p;
}

Eigen::VectorXd reward_vector(const FiniteMdp& mdp, const Policy& policy) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            r(s) += policy.probs(s, a) * mdp.mean_reward(s, a);
    return r;
}

Eigen::VectorXd reward_sa_vector(const FiniteMdp& mdp) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(mdp.n_states) * mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            r(static_cast<Eigen::Index>(s) * mdp.n_actions + a) = mdp.mean_reward(s, a);
    return r;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p_pi) {
    const Eigen::Index n = p_pi.rows();
    Eigen::MatrixXd a = p_pi.transpose() - Eigen::MatrixXd::Identity(n, n);

    // Uniqueness: (P^T - I) must have a one-dimensional null space.
    Eigen::FullPivLU<Eigen::MatrixXd> rank_check(a);
    rank_check.setThreshold(1e-10);
    if (rank_check.rank() < n - 1)
        throw NotErgodic("no unique stationary distribution (reducible chain)");

    // Columns of (P^T - I) sum to zero, so any row is redundant; replace the
    // last one with the normalization sum(d) = 1.
    a.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::VectorXd d = a.partialPivLu().solve(rhs);

    const bool usable = d.allFinite() && d.minCoeff() > -1e-9 &&
                        (p_pi.transpose() * d - d).lpNorm<Eigen::Infinity>() <= 1e-10;
    if (!usable) d = power_iteration_stationary(p_pi);

    d = d.cwiseMax(0.0);
    d /= d.sum();
    if ((p_pi.transpose() * d - d).lpNorm<Eigen::Infinity>() > 1e-10)
        throw NotErgodic("stationary solve did not reach a fixed point");
    return d;
}

Eigen::VectorXd power_iteration_stationary(const Eigen::MatrixXd& p_pi, double tol,
                                           long max_iters) {
    const Eigen::Index n = p_pi.rows();
    Eigen::VectorXd d = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    for (long it = 0; it < max_iters; ++it) {
        Eigen::VectorXd next = p_pi.transpose() * d;
        next /= next.sum();
        if ((next - d).lpNorm<Eigen::Infinity>() <= tol) return next;
        d = std::move(next);
    }
    throw NotErgodic("power iteration did not converge");
}

namespace {

using BoolMatrix = std::vector<std::vector<bool>>;

BoolMatrix bool_product(const BoolMatrix& x, const BoolMatrix& y) {
    const int n = static_cast<int>(x.size());
    BoolMatrix out(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
            if (x[i][k])
                for (int j = 0; j < n; ++j)
                    if (y[k][j]) out[i][j] = true;
    return out;
}

bool all_true(const BoolMatrix& m) {
    for (const auto& row : m)
        for (bool v : row)
            if (!v) return false;
    return true;
}

/// Primitivity (irreducible + aperiodic) via Wielandt's bound: a primitive
/// nonnegative matrix satisfies M^k > 0 for some k <= (n-1)^2 + 1.
bool is_primitive(const Eigen::MatrixXd& p) {
    const int n = static_cast<int>(p.rows());
    BoolMatrix adj(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) adj[i][j] = p(i, j) > 0.0;
    BoolMatrix power = adj;
    const int bound = (n - 1) * (n - 1) + 1;
    for (int k = 1; k <= bound; ++k) {
        if (all_true(power)) return true;
        power = bool_product(power, adj);
    }
    return false;
}

}  // namespace

Assumption1Report check_assumption1(const FiniteMdp& mdp, const Policy& policy) {
    Assumption1Report report;
    const Eigen::MatrixXd p_pi = transition_matrix(mdp, policy);

    report.ergodic = is_primitive(p_pi);
    if (!report.ergodic) report.violations.push_back("not ergodic");

    const Eigen::Index n = p_pi.rows();
    const Eigen::MatrixXd reverse_core = p_pi.transpose() * mdp.discount.asDiagonal();
    report.spectral_radius = reverse_core.eigenvalues().cwiseAbs().maxCoeff();

    Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(n, n) - reverse_core);
    lu.setThreshold(1e-10);
    report.invertible = lu.isInvertible();
    if (!report.invertible) report.violations.push_back("singular (I - P_pi^T Gamma)");

    return report;
}

}  // namespace rrl
