#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "rrl/oracle.hpp"
#include "rrl/quantile.hpp"

using namespace rrl;

namespace {

/// Trains a tabular quantile model on the off-policy microdrone protocol.
QuantileModel train_microdrone_model(long steps, std::uint64_t seed, double alpha = 5e-3) {
    const auto [mdp, ignored] = build_microdrone();
    const Policy target = microdrone_policy(0.1);
    const Policy behavior = microdrone_policy(0.5);
    const Eigen::MatrixXd rho = is_ratio(mdp, target, behavior);

    QuantileModel model(4);
    Rng rng(seed);
    int state = rng.categorical(mdp.initial_dist);
    for (long t = 1; t <= steps; ++t) {
        const Transition tr = sample_step(mdp, behavior, state, rng, t);
        quantile_update_step(model, tr, mdp.discount(tr.prev_state), alpha,
                             rho(tr.prev_state, tr.action));
        if (t % model.sync_period() == 0) model.sync_target();
        state = tr.next_state;
    }
    return model;
}

}  // namespace

TEST_CASE("huber and quantile-huber values") {
    CHECK(huber(0.0, 1.0) == 0.0);
    CHECK(huber(2.0, 1.0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(huber(0.5, 1.0) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(huber(-2.0, 1.0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(quantile_huber(-1.0, 0.25, 1.0) == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(quantile_huber(1.0, 0.25, 1.0) == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("huber is C1 at the threshold") {
    const double kappa = 1.0;
    const double h = 1e-7;
    for (double x : {kappa, -kappa}) {
        const double left = (huber(x, kappa) - huber(x - h, kappa)) / h;
        const double right = (huber(x + h, kappa) - huber(x, kappa)) / h;
        CHECK(std::abs(left - right) <= 1e-6);
        CHECK(std::abs(huber(x + h, kappa) - huber(x, kappa)) <= 2 * h);
    }
}

TEST_CASE("quantile levels are the midpoints") {
    QuantileModel model(2, {20, 1.0, 100});
    CHECK(model.level(0) == doctest::Approx(0.025).epsilon(1e-15));
    CHECK(model.level(19) == doctest::Approx(0.975).epsilon(1e-15));
    for (int i = 1; i < 20; ++i) CHECK(model.level(i) > model.level(i - 1));
    CHECK(model.sync_period() == 100);
}

TEST_CASE("quantile update step") {
    SUBCASE("worked single-quantile example") {
        QuantileModel model(2, {1, 1.0, 100});
        Transition tr;
        tr.prev_state = 0;
        tr.action = 0;
        tr.reward = 2.0;
        tr.next_state = 1;
        // u = 2 (linear branch), weight |0.5 - 0| = 0.5, derivative kappa = 1.
        quantile_update_step(model, tr, 0.0, 0.1, 1.0);
        CHECK(model.quantiles()(1, 0) == doctest::Approx(0.05).epsilon(1e-15));
        CHECK(model.quantiles()(0, 0) == 0.0);
        CHECK(model.target()(1, 0) == 0.0);
    }
    SUBCASE("zero residuals leave the table untouched") {
        QuantileModel model(2, {4, 1.0, 100});
        Transition tr;
        tr.prev_state = 0;
        tr.reward = 0.0;
        tr.next_state = 1;
        quantile_update_step(model, tr, 1.0, 0.1, 1.0);
        CHECK(model.quantiles().cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("zero importance weight is a no-op") {
        QuantileModel model(2, {4, 1.0, 100});
        Transition tr;
        tr.prev_state = 0;
        tr.reward = 3.0;
        tr.next_state = 1;
        quantile_update_step(model, tr, 1.0, 0.1, 0.0);
        CHECK(model.quantiles().cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("only the arrived-at row moves") {
        QuantileModel model(3, {4, 1.0, 100});
        model.quantiles().setConstant(1.0);
        model.sync_target();
        Transition tr;
        tr.prev_state = 2;
        tr.reward = 5.0;
        tr.next_state = 1;
        const Eigen::MatrixXd before = model.quantiles();
        quantile_update_step(model, tr, 1.0, 0.1, 1.0);
        CHECK(model.quantiles().row(0) == before.row(0));
        CHECK(model.quantiles().row(2) == before.row(2));
        CHECK(model.quantiles().row(1) != before.row(1));
        CHECK(model.target() == before);
    }
}

TEST_CASE("gradient of the quantile loss matches a central difference") {
    // The step must descend the loss
    //   L(q) = sum_i (1/N) sum_j rho_{tau_i}(r + gamma q_target_j - q_i)
    // evaluated through the scalar quantile_huber, an independent route.
    QuantileModel model(2, {5, 1.0, 100});
    Eigen::MatrixXd& table = model.quantiles();
    table << 0.3, 0.9, 1.4, 2.2, 3.0, -0.2, 0.1, 0.4, 0.8, 1.5;
    model.sync_target();

    Transition tr;
    tr.prev_state = 0;
    tr.reward = 1.25;
    tr.next_state = 1;
    const double gamma_prev = 0.8;
    const double alpha = 1e-3;

    auto loss_at = [&](const Eigen::VectorXd& q_row) {
        double loss = 0.0;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                loss += (1.0 / 5.0) *
                        quantile_huber(tr.reward + gamma_prev * model.target()(0, j) - q_row(i),
                                       model.level(i), model.kappa());
        return loss;
    };

    const Eigen::VectorXd before = table.row(1).transpose();
    Eigen::VectorXd numeric_grad(5);
    const double h = 1e-6;
    for (int i = 0; i < 5; ++i) {
        Eigen::VectorXd hi = before, lo = before;
        hi(i) += h;
        lo(i) -= h;
        numeric_grad(i) = (loss_at(hi) - loss_at(lo)) / (2 * h);
    }

    quantile_update_step(model, tr, gamma_prev, alpha, 1.0);
    const Eigen::VectorXd applied = (table.row(1).transpose() - before) / alpha;
    CHECK((applied + numeric_grad).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("target synchronization") {
    QuantileModel model(2, {3, 1.0, 100});
    model.quantiles().setRandom();
    CHECK(model.target() != model.quantiles());
    model.sync_target();
    CHECK(model.target() == model.quantiles());
    const Eigen::MatrixXd snapshot = model.target();
    model.sync_target();
    CHECK(model.target() == snapshot);
}

TEST_CASE("imputation and interval probabilities") {
    SUBCASE("one quantile is a single gaussian") {
        QuantileModel model(1, {1, 1.0, 100});
        model.quantiles()(0, 0) = 2.5;
        const GaussianMixture mix = impute(model, 0, 1.0);
        REQUIRE(mix.means.size() == 1);
        CHECK(mix.means(0) == 2.5);
        CHECK(mix.mean() == 2.5);
    }
    SUBCASE("mixture mean is the mean of quantiles") {
        QuantileModel model(1, {4, 1.0, 100});
        model.quantiles().row(0) << 1.0, 2.0, 3.0, 6.0;
        CHECK(impute(model, 0, 0.7).mean() == doctest::Approx(3.0).epsilon(1e-15));
    }
    SUBCASE("degenerate and full intervals") {
        GaussianMixture mix{Eigen::VectorXd::Zero(3), 1.0};
        CHECK(interval_probability(mix, 0.7, 0.7) == 0.0);
        const double inf = std::numeric_limits<double>::infinity();
        CHECK(interval_probability(mix, -inf, inf) == 1.0);
    }
    SUBCASE("centered unit window of a standard gaussian") {
        GaussianMixture mix{Eigen::VectorXd::Zero(1), 1.0};
        CHECK(interval_probability(mix, -1.0, 1.0) ==
              doctest::Approx(0.682689492137086).epsilon(1e-12));
    }
    SUBCASE("monotone in width and additive over adjacent intervals") {
        Rng rng(3);
        Eigen::VectorXd means(4);
        for (int i = 0; i < 4; ++i) means(i) = rng.uniform(-2.0, 2.0);
        const GaussianMixture mix{means, 0.8};
        double prev = 0.0;
        for (double w = 0.0; w <= 4.0; w += 0.25) {
            const double p = interval_probability(mix, -w, w);
            CHECK(p >= prev - 1e-12);
            prev = p;
        }
        const double whole = interval_probability(mix, -3.0, 5.0);
        const double left = interval_probability(mix, -3.0, 0.5);
        const double right = interval_probability(mix, 0.5, 5.0);
        CHECK(std::abs(whole - left - right) <= 1e-10);
    }
}

TEST_CASE("anomaly probability") {
    QuantileModel model(1, {1, 1.0, 100});
    model.quantiles()(0, 0) = 3.0;

    SUBCASE("unit window around the quantile") {
        CHECK(anomaly_probability(model, 0, 3.0, 1.0, 1.0) ==
              doctest::Approx(1.0 - 0.682689492137086).epsilon(1e-12));
    }
    SUBCASE("zero window flags everything") {
        CHECK(anomaly_probability(model, 0, 3.0, 0.0, 1.0) == 1.0);
    }
    SUBCASE("huge window flags nothing") {
        CHECK(anomaly_probability(model, 0, 3.0, 1e9, 1.0) <= 1e-12);
    }
    SUBCASE("always a probability") {
        Rng rng(9);
        QuantileModel wide(1, {8, 1.0, 100});
        for (int i = 0; i < 8; ++i) wide.quantiles()(0, i) = rng.uniform(-10.0, 10.0);
        for (int k = 0; k < 200; ++k) {
            const double p =
                anomaly_probability(wide, 0, rng.uniform(-20.0, 20.0), rng.uniform(0.0, 5.0));
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
}

TEST_CASE("trained quantiles approximate the exact reverse-return distribution") {
    const auto [mdp, ignored] = build_microdrone();
    const Policy target = microdrone_policy(0.1);
    const Eigen::VectorXd v_bar = reverse_gvf(mdp, target);
    const auto eta = distributional_fixed_point(mdp, target);

    const int n_seeds = 30;
    std::vector<double> quantile_gaps(n_seeds), mve(n_seeds);
    std::vector<bool> monotone(n_seeds);
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < n_seeds; ++k) {
        const QuantileModel model = train_microdrone_model(200000, derive_seed(600, k));

        double gap = 0.0;
        for (int s = 0; s < 4; ++s)
            for (int i = 0; i < model.n_quantiles(); ++i)
                gap = std::max(gap, std::abs(model.quantiles()(s, i) -
                                             eta[s].quantile(model.level(i))));
        quantile_gaps[k] = gap;
        mve[k] = (model.mean_values() - v_bar).squaredNorm();

        bool sorted = true;
        for (int s = 0; s < 4; ++s)
            for (int i = 1; i < model.n_quantiles(); ++i)
                if (model.quantiles()(s, i) < model.quantiles()(s, i - 1) - 1e-6)
                    sorted = false;
        monotone[k] = sorted;
    }

    std::sort(quantile_gaps.begin(), quantile_gaps.end());
    std::sort(mve.begin(), mve.end());
    CHECK(quantile_gaps[n_seeds / 2] <= 0.25);
    CHECK(mve[n_seeds / 2] <= 0.1);
    CHECK(std::count(monotone.begin(), monotone.end(), true) >= n_seeds / 2);
}

TEST_CASE("model CSV round-trip") {
    QuantileModel model(3, {5, 1.0, 100});
    Rng rng(12);
    for (int s = 0; s < 3; ++s)
        for (int i = 0; i < 5; ++i) model.quantiles()(s, i) = rng.uniform(-4.0, 4.0);

    const std::string path =
        (std::filesystem::temp_directory_path() / "rrl_model_roundtrip.csv").string();
    save_quantile_model(model, path);
    const QuantileModel loaded = load_quantile_model(path);
    std::filesystem::remove(path);

    REQUIRE(loaded.n_states() == 3);
    REQUIRE(loaded.n_quantiles() == 5);
    CHECK(loaded.quantiles() == model.quantiles());
    CHECK(loaded.levels() == model.levels());
}
