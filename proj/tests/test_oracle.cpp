#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rrl/oracle.hpp"
#include "rrl/reverse_td.hpp"

using namespace rrl;

namespace {

FiniteMdp zero_reward_copy(FiniteMdp mdp) {
    for (auto& outcomes : mdp.reward_model)
        for (auto& o : outcomes) o.value = 0.0;
    return mdp;
}

FiniteMdp zero_discount_copy(FiniteMdp mdp) {
    mdp.discount.setZero();
    return mdp;
}

DiscreteDistribution random_distribution(Rng& rng, int max_atoms = 6) {
    const int n = 1 + static_cast<int>(rng.next_u64() % max_atoms);
    std::vector<DiscreteDistribution::Atom> atoms(n);
    for (auto& a : atoms) {
        a.value = rng.uniform(-5.0, 5.0);
        a.mass = 0.05 + rng.next_double();
    }
    return DiscreteDistribution::from_atoms(std::move(atoms));
}

}  // namespace

TEST_CASE("forward GVF") {
    const auto [mdp, policy] = build_microdrone();

    SUBCASE("zero rewards give zero values") {
        const Eigen::VectorXd v = forward_gvf(zero_reward_copy(mdp), policy);
        CHECK(v.lpNorm<Eigen::Infinity>() == 0.0);
    }
    SUBCASE("zero discount truncates to the one-step reward") {
        const FiniteMdp truncated = zero_discount_copy(mdp);
        const Eigen::VectorXd v = forward_gvf(truncated, policy);
        CHECK((v - reward_vector(truncated, policy)).lpNorm<Eigen::Infinity>() <= 1e-15);
    }
    SUBCASE("expected energy from L1 until the next charge, against first-visit MC") {
        const auto ideal = build_microdrone(true);
        const Eigen::VectorXd v = forward_gvf(ideal.mdp, ideal.policy);
        CHECK(v(0) == doctest::Approx(50.0 / 11.0).epsilon(1e-12));

        const McScalar mc = mc_forward_value(ideal.mdp, ideal.policy, 0, 100000, 17);
        CHECK(std::abs(mc.mean - v(0)) <= 3 * mc.std_error);
    }
}

TEST_CASE("reverse GVF") {
    const auto [mdp, policy] = build_microdrone();

    SUBCASE("zero rewards give zero values") {
        const Eigen::VectorXd v = reverse_gvf(zero_reward_copy(mdp), policy);
        CHECK(v.lpNorm<Eigen::Infinity>() == 0.0);
    }
    SUBCASE("zero discount reduces to the one-step backward average") {
        const FiniteMdp truncated = zero_discount_copy(mdp);
        const Eigen::VectorXd v = reverse_gvf(truncated, policy);
        const Eigen::VectorXd d = stationary_distribution(transition_matrix(truncated, policy));
        for (int s = 0; s < 4; ++s) {
            double expected = 0.0;
            for (int prev = 0; prev < 4; ++prev)
                for (int a = 0; a < 2; ++a)
                    expected += d(prev) * policy.probs(prev, a) * truncated.p(prev, a, s) *
                                truncated.mean_reward(prev, a);
            expected /= d(s);
            CHECK(v(s) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("closed form matches the long-run conditional mean of tracked returns") {
        const Eigen::VectorXd v = reverse_gvf(mdp, policy);
        const McEstimate mc = mc_reverse_values(mdp, policy, 10000000, 50, 3);
        for (int s = 0; s < 4; ++s)
            CHECK(std::abs(mc.mean(s) - v(s)) <= 3 * mc.std_error(s));
    }
    SUBCASE("operator residual vanishes on random instances") {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const auto inst = build_random_mdp(seed, 2 + seed % 9, 2 + seed % 4, 2);
            const Eigen::VectorXd v = reverse_gvf(inst.mdp, inst.policy);
            const Eigen::VectorXd applied = reverse_bellman_apply(inst.mdp, inst.policy, v);
            CHECK((applied - v).lpNorm<Eigen::Infinity>() <= 1e-9);
        }
    }
}

TEST_CASE("oracle report invariants") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = build_random_mdp(seed, 3 + seed % 5, 2, 2);
        const OracleReport report = oracle_report(inst.mdp, inst.policy);
        CHECK(report.spectral_radius_reverse < 1.0);
        CHECK(report.forward_values.allFinite());
        CHECK(report.reverse_values.allFinite());
        CHECK(report.d_pi.minCoeff() > 0.0);
    }
}

TEST_CASE("linear fixed point") {
    const auto [mdp, policy] = build_microdrone();

    SUBCASE("tabular features recover the reverse GVF") {
        const LinearFixedPoint fp =
            linear_fixed_point(mdp, policy, Eigen::MatrixXd::Identity(4, 4));
        const Eigen::VectorXd v = reverse_gvf(mdp, policy);
        CHECK((fp.weights - v).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK(fp.sym_eigenvalues.maxCoeff() < 0.0);
    }
    SUBCASE("a constant feature solves the 1-d normal equation") {
        const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
        const LinearFixedPoint fp = linear_fixed_point(mdp, policy, x);
        CHECK(std::abs(fp.a_bar(0, 0) * fp.weights(0) + fp.b_bar(0)) <= 1e-12);
    }
    SUBCASE("rank-deficient features are rejected") {
        Eigen::MatrixXd x(4, 2);
        x.col(0).setOnes();
        x.col(1).setOnes();
        CHECK_THROWS_AS(linear_fixed_point(mdp, policy, x), RankDeficientFeatures);
    }
    SUBCASE("quadratic form of A_bar is negative on random directions") {
        Rng rng(11);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto inst = build_random_mdp(seed, 5, 3, 2);
            Eigen::MatrixXd x(5, 3);
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
            const LinearFixedPoint fp = linear_fixed_point(inst.mdp, inst.policy, x);
            for (int k = 0; k < 100; ++k) {
                Eigen::VectorXd z(3);
                for (int j = 0; j < 3; ++j) z(j) = rng.uniform(-1.0, 1.0);
                if (z.norm() < 1e-3) continue;
                CHECK(z.dot(fp.a_bar * z) < 0.0);
            }
        }
    }
}

TEST_CASE("density and importance ratios") {
    const auto [mdp, policy] = build_microdrone();

    SUBCASE("identical policies give unit ratios") {
        const Eigen::VectorXd tau = density_ratio(mdp, policy, policy);
        const Eigen::MatrixXd rho = is_ratio(mdp, policy, policy);
        CHECK((tau - Eigen::VectorXd::Ones(4)).lpNorm<Eigen::Infinity>() <= 1e-12);
        CHECK((rho - Eigen::MatrixXd::Ones(4, 2)).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
    SUBCASE("the off-policy deployment pair") {
        const Policy target = microdrone_policy(0.1);
        const Policy behavior = microdrone_policy(0.5);
        const Eigen::MatrixXd rho = is_ratio(mdp, target, behavior);
        for (int s = 0; s < 4; ++s) {
            CHECK(rho(s, 0) == doctest::Approx(0.2).epsilon(1e-12));
            CHECK(rho(s, 1) == doctest::Approx(1.8).epsilon(1e-12));
        }
        // Both induced chains are doubly stochastic, so tau is exactly 1.
        const Eigen::VectorXd tau = density_ratio(mdp, target, behavior);
        CHECK((tau - Eigen::VectorXd::Ones(4)).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
    SUBCASE("missing coverage is rejected") {
        Policy target = microdrone_policy(1.0);
        Policy behavior = microdrone_policy(0.0);
        CHECK_THROWS_AS(is_ratio(mdp, target, behavior), CoverageViolation);
    }
}

TEST_CASE("backward kernel") {
    SUBCASE("deterministic cycle has a unique predecessor") {
        FiniteMdp mdp;
        mdp.n_states = 3;
        mdp.n_actions = 2;
        mdp.transition.assign(2, Eigen::MatrixXd::Zero(3, 3));
        for (int a = 0; a < 2; ++a)
            for (int s = 0; s < 3; ++s) mdp.transition[a](s, (s + 1) % 3) = 1.0;
        mdp.reward_model.assign(6, {{1.0, 1.0}});
        mdp.discount = Eigen::VectorXd::Constant(3, 0.5);
        mdp.initial_dist = Eigen::VectorXd::Constant(3, 1.0 / 3);

        const BackwardKernel kernel = backward_kernel(mdp, uniform_policy(3, 2));
        REQUIRE(kernel[0].size() == 1);
        CHECK(kernel[0][0].prev_state == 2);
        CHECK(kernel[0][0].reward == 1.0);
        CHECK(kernel[0][0].prob == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("rows are normalized") {
        const auto [mdp, policy] = build_microdrone();
        const BackwardKernel kernel = backward_kernel(mdp, policy);
        for (const auto& entries : kernel) {
            double sum = 0.0;
            for (const auto& e : entries) sum += e.prob;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
    SUBCASE("matches empirical predecessor-reward frequencies") {
        const auto [mdp, policy] = build_microdrone();
        const BackwardKernel kernel = backward_kernel(mdp, policy);

        Rng rng(23);
        int state = rng.categorical(mdp.initial_dist);
        const long n = 2000000;
        // Count (prev, reward rounded to int, next) triples; rewards are 0/1/2.
        std::vector<long> counts(4 * 3 * 4, 0);
        std::vector<long> visits(4, 0);
        for (long t = 0; t < n; ++t) {
            const Transition tr = sample_step(mdp, policy, state, rng, t);
            const int r = static_cast<int>(tr.reward);
            counts[(tr.prev_state * 3 + r) * 4 + tr.next_state]++;
            visits[tr.next_state]++;
            state = tr.next_state;
        }
        for (int s = 0; s < 4; ++s) {
            for (const auto& e : kernel[s]) {
                const int r = static_cast<int>(e.reward);
                const double freq =
                    static_cast<double>(counts[(e.prev_state * 3 + r) * 4 + s]) / visits[s];
                const double sigma =
                    std::sqrt(e.prob * (1 - e.prob) / static_cast<double>(visits[s]));
                CHECK(std::abs(freq - e.prob) <= 3.5 * sigma);
            }
        }
    }
}

TEST_CASE("distributional fixed point") {
    const auto [mdp, policy] = build_microdrone();

    SUBCASE("zero rewards collapse to a point mass at zero") {
        const auto eta = distributional_fixed_point(zero_reward_copy(mdp), policy);
        for (const auto& dist : eta) {
            REQUIRE(dist.size() == 1);
            CHECK(dist.atoms()[0].value == 0.0);
        }
    }
    SUBCASE("zero discount equals the backward reward marginal") {
        const FiniteMdp truncated = zero_discount_copy(mdp);
        const auto eta = distributional_fixed_point(truncated, policy);
        const BackwardKernel kernel = backward_kernel(truncated, policy);
        for (int s = 0; s < 4; ++s) {
            // Marginalize the kernel over predecessors.
            std::vector<DiscreteDistribution::Atom> atoms;
            for (const auto& e : kernel[s]) atoms.push_back({e.reward, e.prob});
            const auto marginal = DiscreteDistribution::from_atoms(std::move(atoms));
            CHECK(cramer_distance(eta[s], marginal) <= 1e-9);
        }
    }
    SUBCASE("per-state means agree with the reverse GVF") {
        DistributionalConfig config;
        config.tolerance = 1e-8;
        const auto eta = distributional_fixed_point(mdp, policy, config);
        const Eigen::VectorXd v = reverse_gvf(mdp, policy);
        for (int s = 0; s < 4; ++s) CHECK(std::abs(eta[s].mean() - v(s)) <= 1e-6);
    }
    SUBCASE("atom cap trips SupportExplosion") {
        DistributionalConfig config;
        config.atom_cap = 3;
        CHECK_THROWS_AS(distributional_fixed_point(mdp, policy, config), SupportExplosion);
    }
}

TEST_CASE("cramer distance") {
    SUBCASE("identical distributions have distance zero") {
        const auto d = DiscreteDistribution::from_atoms({{1.0, 0.25}, {2.0, 0.75}});
        CHECK(cramer_distance(d, d) == 0.0);
    }
    SUBCASE("unit point masses at 0 and 1 are at distance 1") {
        CHECK(cramer_distance(DiscreteDistribution::point_mass(0.0),
                              DiscreteDistribution::point_mass(1.0)) ==
              doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("symmetry, nonnegativity, triangle inequality on random triples") {
        Rng rng(31);
        for (int k = 0; k < 100; ++k) {
            const auto a = random_distribution(rng);
            const auto b = random_distribution(rng);
            const auto c = random_distribution(rng);
            const double ab = cramer_distance(a, b);
            const double ba = cramer_distance(b, a);
            const double ac = cramer_distance(a, c);
            const double cb = cramer_distance(c, b);
            CHECK(ab >= 0.0);
            CHECK(ab == doctest::Approx(ba).epsilon(1e-13));
            CHECK(ab <= ac + cb + 1e-12);
        }
    }
}

TEST_CASE("distributional operator is a contraction state by state") {
    // The squared Cramer distance after one operator application is bounded by
    // the discounted backward average of the squared distances.
    Rng rng(47);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto inst = build_random_mdp(seed, 2 + seed % 6, 2 + seed % 3, 2);
        const BackwardKernel kernel = backward_kernel(inst.mdp, inst.policy);
        const int n = inst.mdp.n_states;

        std::vector<DiscreteDistribution> eta1, eta2;
        for (int s = 0; s < n; ++s) {
            eta1.push_back(random_distribution(rng));
            eta2.push_back(random_distribution(rng));
        }
        const auto t1 = distributional_operator(kernel, inst.mdp.discount, eta1);
        const auto t2 = distributional_operator(kernel, inst.mdp.discount, eta2);

        for (int s = 0; s < n; ++s) {
            const double lhs = std::pow(cramer_distance(t1[s], t2[s]), 2);
            double rhs = 0.0;
            // Backward state marginal p(prev | s) times gamma(prev).
            for (int prev = 0; prev < n; ++prev) {
                double p_prev = 0.0;
                for (const auto& e : kernel[s])
                    if (e.prev_state == prev) p_prev += e.prob;
                rhs += p_prev * inst.mdp.discount(prev) *
                       std::pow(cramer_distance(eta1[prev], eta2[prev]), 2);
            }
            CHECK(lhs <= rhs + 1e-10);
        }
    }
}

TEST_CASE("monte carlo reverse estimator is internally consistent") {
    // Two disjoint seeds must agree within their combined error bars.
    const auto [mdp, policy] = build_microdrone();
    const McEstimate a = mc_reverse_values(mdp, policy, 1000000, 40, 101);
    const McEstimate b = mc_reverse_values(mdp, policy, 1000000, 40, 202);
    for (int s = 0; s < 4; ++s) {
        const double combined = std::hypot(a.std_error(s), b.std_error(s));
        CHECK(std::abs(a.mean(s) - b.mean(s)) <= 4 * combined);
    }
}
