#include <doctest.h>

#include <cmath>

#include "uqpe/error.hpp"
#include "uqpe/estimator.hpp"
#include "uqpe/rng.hpp"
#include "uqpe/simulation.hpp"

using namespace uqpe;

TEST_CASE("covariance structure of the control block") {
    const Eigen::MatrixXd& chol = sigma_cholesky(6);
    const Eigen::MatrixXd sigma = chol * chol.transpose();
    for (Eigen::Index r = 0; r < 6; ++r) {
        CHECK(sigma(r, r) == doctest::Approx(0.25).epsilon(1e-12));
        for (Eigen::Index c = 0; c < 6; ++c) {
            const double expected = std::pow(0.5, 2.0 * (std::abs(double(r - c)) + 1.0));
            CHECK(sigma(r, c) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    CHECK(sigma(0, 1) == doctest::Approx(0.0625).epsilon(1e-12));
}

TEST_CASE("sparsity coefficient schedules") {
    const Eigen::VectorXd ci = dgp_coefficients(100, 1);
    CHECK(ci[0] == doctest::Approx(0.25).epsilon(1e-15));       // 0.5^2
    CHECK(ci[1] == doctest::Approx(0.125).epsilon(1e-15));      // 0.5^3
    const Eigen::VectorXd cii = dgp_coefficients(100, 2);
    CHECK(cii[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(cii[1] == doctest::Approx(std::pow(0.5, 2.5)).epsilon(1e-15));
    const Eigen::VectorXd ciii = dgp_coefficients(100, 3);
    CHECK(ciii[1] == doctest::Approx(std::pow(0.5, 7.0 / 3.0)).epsilon(1e-15));
    const Eigen::VectorXd civ = dgp_coefficients(100, 4);
    CHECK(civ[1] == doctest::Approx(std::pow(0.5, 2.25)).epsilon(1e-15));
    CHECK(civ[98] == doctest::Approx(std::pow(0.5, 106.0 / 4.0)).epsilon(1e-12));
}

TEST_CASE("link functions per dgp") {
    CHECK(dgp_g(1, 2.0) == 2.0);
    CHECK(dgp_g(2, 2.0) == doctest::Approx(2.0 - 0.4));
    CHECK(dgp_g(3, 2.0) == doctest::Approx(2.0 - 0.4 + 0.08));
    CHECK(dgp_g_prime(1, -1.0) == 1.0);
    CHECK(dgp_g_prime(2, -1.0) == doctest::Approx(1.2));
    CHECK(dgp_g_prime(3, -1.0) == doctest::Approx(1.2 + 0.03));
}

TEST_CASE("simulated datasets are deterministic and shaped correctly") {
    DgpSpec spec;
    spec.n = 64;
    spec.p = 9;
    spec.seed = 4;
    const Dataset a = simulate_dataset(spec, 3);
    const Dataset b = simulate_dataset(spec, 3);
    const Dataset c = simulate_dataset(spec, 4);
    CHECK(a.n() == 64);
    CHECK(a.p() == 9);
    CHECK((a.outcome - b.outcome).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((a.covariates - b.covariates).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(a.outcome[0] != c.outcome[0]);
    a.validate();

    DgpSpec bad = spec;
    bad.dgp_id = 4;
    CHECK_THROWS_AS(simulate_dataset(bad, 0), Error);
}

TEST_CASE("simulated moments approach the design covariance") {
    DgpSpec spec;
    spec.n = 40000;
    spec.p = 5;
    spec.seed = 10;
    const Dataset ds = simulate_dataset(spec, 0);
    // control variances 0.25, lag-one covariance 0.0625
    for (Eigen::Index j = 1; j < 5; ++j) {
        const auto col = ds.covariates.col(j);
        const double var = (col.array() - col.mean()).square().mean();
        CHECK(var == doctest::Approx(0.25).epsilon(0.05));
    }
    const auto c1 = ds.covariates.col(1);
    const auto c2 = ds.covariates.col(2);
    const double cov = ((c1.array() - c1.mean()) * (c2.array() - c2.mean())).mean();
    CHECK(cov == doctest::Approx(0.0625).epsilon(0.15));
}

TEST_CASE("oracle returns exactly one for dgp 1") {
    DgpSpec spec;
    spec.p = 20;
    spec.seed = 5;
    const std::vector<double> v =
        true_uqpe_oracle(spec, {0.2, 0.5, 0.8}, 200000);
    for (double u : v) CHECK(u == 1.0);
}

TEST_CASE("oracle curves expose theta and density consistently") {
    DgpSpec spec;
    spec.dgp_id = 2;
    spec.p = 30;
    spec.seed = 6;
    const OracleCurves curves = true_curves_oracle(spec, {0.3, 0.6}, 400000);
    for (std::size_t t = 0; t < curves.tau.size(); ++t) {
        CHECK(curves.f_y[t] > 0.0);
        CHECK(curves.uqpe[t] ==
              doctest::Approx(-curves.theta[t] / curves.f_y[t]).epsilon(1e-12));
    }
    CHECK(curves.q[0] < curves.q[1]);
}

TEST_CASE("oracle is stable in the sample size") {
    DgpSpec spec;
    spec.dgp_id = 3;
    spec.p = 25;
    // spread of independent small-sample oracles estimates the MC noise
    std::vector<double> vals;
    for (std::uint64_t s = 0; s < 5; ++s) {
        DgpSpec ss = spec;
        ss.seed = 100 + s;
        vals.push_back(true_uqpe_oracle(ss, 0.4, 100000));
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double sd = 0.0;
    for (double v : vals) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / (vals.size() - 1));
    DgpSpec big = spec;
    big.seed = 999;
    const double doubled = true_uqpe_oracle(big, 0.4, 200000);
    CHECK(std::abs(doubled - mean) <= 3.0 * sd);
}

TEST_CASE("mc study aggregates are internally consistent") {
    DgpSpec spec;
    spec.n = 90;
    spec.p = 3;
    spec.seed = 12;
    UqpeConfig config;
    config.tau_set = {0.4, 0.6};
    config.upsilon_lo = 0.35;
    config.upsilon_hi = 0.65;
    config.grid_taus = equispaced_taus(0.3, 0.7, 9);
    config.bootstrap_B = 60;
    config.seed = 77;
    McOptions options;
    options.oracle_n = 100000;

    const McMetrics metrics = run_mc_study(spec, 6, config, EstimatorKind::debiased, options);
    CHECK(metrics.reps_completed == 6);
    CHECK(metrics.reps_failed == 0);
    CHECK(metrics.uniform_coverage >= 0.0);
    CHECK(metrics.uniform_coverage <= 1.0);
    for (std::size_t t = 0; t < metrics.tau.size(); ++t) {
        CHECK(metrics.rmse[t] >= std::abs(metrics.bias[t]));
        CHECK(metrics.pointwise_coverage[t] >= 0.0);
        CHECK(metrics.pointwise_coverage[t] <= 1.0);
    }

    // rmse^2 = bias^2 + variance of the estimates, reconstructed through the
    // documented replication seeding
    for (std::size_t t = 0; t < metrics.tau.size(); ++t) {
        double mean = 0.0, second = 0.0;
        for (std::uint64_t r = 0; r < 6; ++r) {
            const Dataset ds = simulate_dataset(spec, r);
            UqpeConfig cfg = config;
            cfg.estimator = EstimatorKind::debiased;
            cfg.threads = 1;
            cfg.seed = derive_seed(config.seed, kMcReplicationTag, r);
            const UqpeEstimate est = estimate_all(ds, cfg);
            const double u = est.per_tau[t].uqpe_hat;
            mean += u;
            second += u * u;
        }
        mean /= 6.0;
        second /= 6.0;
        const double var = second - mean * mean;
        CHECK(metrics.mean_estimate[t] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(metrics.rmse[t] * metrics.rmse[t] ==
              doctest::Approx(metrics.bias[t] * metrics.bias[t] + var).epsilon(1e-9));
    }

    // identical seeds give identical studies regardless of threading
    McOptions threaded = options;
    threaded.threads = 3;
    const McMetrics again = run_mc_study(spec, 6, config, EstimatorKind::debiased, threaded);
    for (std::size_t t = 0; t < metrics.tau.size(); ++t) {
        CHECK(again.mean_estimate[t] == metrics.mean_estimate[t]);
        CHECK(again.rmse[t] == metrics.rmse[t]);
    }
    CHECK(again.uniform_coverage == metrics.uniform_coverage);

    CHECK_THROWS_AS(run_mc_study(spec, 1, config, EstimatorKind::debiased, options), Error);
}
