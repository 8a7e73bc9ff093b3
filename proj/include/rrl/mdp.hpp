#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rrl/errors.hpp"
#include "rrl/rng.hpp"

namespace rrl {

struct RewardOutcome {
    double value = 0.0;
    double probability = 0.0;
};

/// Finite MDP with a per-(state, action) discrete reward distribution and a
/// per-state discount. Immutable after construction; safe to share across threads.
struct FiniteMdp {
    int n_states = 0;
    int n_actions = 0;
    /// transition[a](s, s') = p(s' | s, a)
    std::vector<Eigen::MatrixXd> transition;
    /// reward_model[s * n_actions + a] = outcomes of R given (s, a)
    std::vector<std::vector<RewardOutcome>> reward_model;
    /// gamma(s) in [0, 1]
    Eigen::VectorXd discount;
    /// mu0
    Eigen::VectorXd initial_dist;

    double p(int s, int a, int s_next) const { return transition[a](s, s_next); }

    const std::vector<RewardOutcome>& outcomes(int s, int a) const {
        return reward_model[static_cast<std::size_t>(s) * n_actions + a];
    }

    /// r(s, a) = E[R | s, a]
    double mean_reward(int s, int a) const {
        double m = 0.0;
        for (const auto& o : outcomes(s, a)) m += o.value * o.probability;
        return m;
    }
};

/// Row-stochastic action probabilities pi(a | s), indexed (s, a).
struct Policy {
    Eigen::MatrixXd probs;

    int n_states() const { return static_cast<int>(probs.rows()); }
    int n_actions() const { return static_cast<int>(probs.cols()); }
};

/// One sampled step (S_{t-1}, A_{t-1}, R_t, S_t).
struct Transition {
    int prev_state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    long time_index = 0;
};

struct MdpWithPolicy {
    FiniteMdp mdp;
    Policy policy;
};

/// Returns the list of violated invariants; empty when the MDP is valid.
std::vector<std::string> validate(const FiniteMdp& mdp);

/// Returns the list of violated invariants; empty when the policy is valid for `mdp`.
std::vector<std::string> validate(const Policy& policy, const FiniteMdp& mdp);

/// Four-location ring with a charging station: states {L1, L2, L3, L4}, action 0
/// moves clockwise (L1->L2->L3->L4->L1) for reward 2, action 1 counterclockwise
/// for reward 1; every move fails in place with probability 0.01. gamma is 1
/// everywhere except gamma(L4) = 0, so reverse returns reset when leaving L4.
///
/// With `ideal_rewards` the rewards are deterministic 2/1 per move; otherwise a
/// failed move also pays 0 (the outcome lists become {(2,.99),(0,.01)} etc).
MdpWithPolicy build_microdrone(bool ideal_rewards = false);

/// Policy taking the clockwise action with probability `p_clockwise` at every state.
Policy microdrone_policy(double p_clockwise);

/// Uniform policy over `n_actions` at every state.
Policy uniform_policy(int n_states, int n_actions);

/// Random ergodic MDP plus a strictly positive random policy. All transition and
/// policy rows are Dirichlet(1,..,1) draws (strictly positive, so the induced
/// chain is ergodic) and at least one state gets gamma(s) < 1, which keeps
/// (I - P_pi^T Gamma) invertible. Deterministic in `seed`.
MdpWithPolicy build_random_mdp(std::uint64_t seed, int n_states, int n_actions,
                               int reward_outcomes);

/// Samples A ~ pi(.|state), S' ~ p(.|state, A), R ~ reward_model(state, A).
/// Draw order: action, next state, reward.
Transition sample_step(const FiniteMdp& mdp, const Policy& policy, int state, Rng& rng,
                       long time_index = 0);

/// P_pi(s, s') = sum_a pi(a|s) p(s'|s, a)
Eigen::MatrixXd transition_matrix(const FiniteMdp& mdp, const Policy& policy);

/// P~_pi((s, a), s') = p(s'|s, a), with row index s * n_actions + a.
Eigen::MatrixXd state_action_matrix(const FiniteMdp& mdp);

/// r_pi(s) = sum_a pi(a|s) r(s, a)
Eigen::VectorXd reward_vector(const FiniteMdp& mdp, const Policy& policy);

/// r(s, a) flattened with index s * n_actions + a.
Eigen::VectorXd reward_sa_vector(const FiniteMdp& mdp);

/// Stationary distribution of a row-stochastic matrix, by dense LU on
/// (P^T - I) d = 0 with a normalization row. Throws NotErgodic when the chain
/// has no unique stationary distribution.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p_pi);

/// Independent cross-check for stationary_distribution. Returns the fixed point
/// of d <- P^T d from a uniform start, or throws NotErgodic when the iteration
/// does not converge within `max_iters`.
Eigen::VectorXd power_iteration_stationary(const Eigen::MatrixXd& p_pi, double tol = 1e-12,
                                           long max_iters = 1000000);

struct Assumption1Report {
    bool ergodic = false;
    bool invertible = false;
    /// rho(P_pi^T Gamma); < 1 whenever the assumption holds.
    double spectral_radius = 0.0;
    std::vector<std::string> violations;

    bool ok() const { return ergodic && invertible; }
};

/// Verifies ergodicity of the induced chain and invertibility of (I - P_pi^T Gamma).
Assumption1Report check_assumption1(const FiniteMdp& mdp, const Policy& policy);

}  // namespace rrl
