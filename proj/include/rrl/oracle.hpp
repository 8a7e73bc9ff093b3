#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rrl/distribution.hpp"
#include "rrl/mdp.hpp"

namespace rrl {

struct OracleReport {
    enum class Method { matrix_solve, monte_carlo };

    Eigen::VectorXd forward_values;   // v_pi
    Eigen::VectorXd reverse_values;   // v_bar_pi
    Eigen::VectorXd d_pi;
    double spectral_radius_reverse = 0.0;  // rho(P_pi^T Gamma)
    Method method = Method::matrix_solve;
};

/// v_pi = (I - P_pi Gamma)^{-1} r_pi, the fixed point of y -> r_pi + P_pi Gamma y.
Eigen::VectorXd forward_gvf(const FiniteMdp& mdp, const Policy& policy);

/// v_bar_pi = D_pi^{-1} (I - P_pi^T Gamma)^{-1} P~_pi^T D~_pi r, the fixed point
/// of the reverse Bellman operator. Throws AssumptionViolated when the induced
/// chain is not ergodic or (I - P_pi^T Gamma) is singular.
Eigen::VectorXd reverse_gvf(const FiniteMdp& mdp, const Policy& policy);

/// One application of the reverse Bellman operator
///   y -> D_pi^{-1} P~_pi^T D~_pi r + D_pi^{-1} P_pi^T Gamma D_pi y.
Eigen::VectorXd reverse_bellman_apply(const FiniteMdp& mdp, const Policy& policy,
                                      const Eigen::VectorXd& y);

OracleReport oracle_report(const FiniteMdp& mdp, const Policy& policy);

struct LinearFixedPoint {
    Eigen::VectorXd weights;          // -A_bar^{-1} b_bar
    Eigen::MatrixXd a_bar;            // X^T (P_pi^T Gamma - I) D_pi X
    Eigen::VectorXd b_bar;            // X^T P~_pi^T D~_pi r
    Eigen::VectorXd sym_eigenvalues;  // eigenvalues of (A_bar + A_bar^T) / 2
};

/// Convergence point of reverse TD with features X. Throws RankDeficientFeatures
/// when X lacks linearly independent columns.
LinearFixedPoint linear_fixed_point(const FiniteMdp& mdp, const Policy& policy,
                                    const Eigen::MatrixXd& features);

/// tau(s) = d_pi(s) / d_mu(s)
Eigen::VectorXd density_ratio(const FiniteMdp& mdp, const Policy& pi, const Policy& mu);

/// rho(s, a) = pi(a|s) / mu(a|s); 0 where both are 0. Throws CoverageViolation
/// when pi puts mass on an action mu never takes.
Eigen::MatrixXd is_ratio(const FiniteMdp& mdp, const Policy& pi, const Policy& mu);

/// One (predecessor, reward) outcome of the time-reversed kernel at some state.
struct BackwardEntry {
    int prev_state = 0;
    double reward = 0.0;
    double prob = 0.0;
};

/// backward_kernel(mdp, pi)[s] enumerates p(s_prev, r | s) =
/// d_pi(s_prev)/d_pi(s) * sum_a pi(a|s_prev) p(s|s_prev,a) Pr(r|s_prev,a),
/// with rewards equal up to 1e-9 merged. Each list sums to 1.
using BackwardKernel = std::vector<std::vector<BackwardEntry>>;
BackwardKernel backward_kernel(const FiniteMdp& mdp, const Policy& policy);

struct DistributionalConfig {
    double tolerance = 1e-8;
    std::size_t atom_cap = 1000000;
    long max_iters = 100000;
    AtomMergePolicy merge;
};

/// One application of the distributional reverse Bellman operator: pushes each
/// predecessor distribution through x -> r + gamma(s_prev) x and mixes by the
/// backward kernel.
std::vector<DiscreteDistribution> distributional_operator(
    const BackwardKernel& kernel, const Eigen::VectorXd& discount,
    const std::vector<DiscreteDistribution>& eta, const DistributionalConfig& config = {});

/// Iterates the distributional operator from point masses at 0 until the
/// max-over-states Cramer distance between successive iterates is below
/// tolerance. Throws SupportExplosion when the atom cap is hit first.
std::vector<DiscreteDistribution> distributional_fixed_point(
    const FiniteMdp& mdp, const Policy& policy, const DistributionalConfig& config = {});

/// Batched Monte Carlo estimate with batch-mean standard errors.
struct McEstimate {
    Eigen::VectorXd mean;
    Eigen::VectorXd std_error;
};

/// E[G_bar_t | S_t = s] estimated from one long trajectory under `policy`,
/// split into `batches` contiguous segments (>= 30 recommended). A burn-in
/// prefix of `burn_in` steps is discarded before recording.
McEstimate mc_reverse_values(const FiniteMdp& mdp, const Policy& policy, long steps,
                             int batches, std::uint64_t seed, long burn_in = 10000);

/// First-visit Monte Carlo estimate of v_pi(start_state) from independent
/// episodes; an episode is truncated once the accumulated discount falls
/// below 1e-16 or `step_cap` elapses.
struct McScalar {
    double mean = 0.0;
    double std_error = 0.0;
};
McScalar mc_forward_value(const FiniteMdp& mdp, const Policy& policy, int start_state,
                          int episodes, std::uint64_t seed, long step_cap = 1000000);

}  // namespace rrl
