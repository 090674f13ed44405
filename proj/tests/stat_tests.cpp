#include <doctest.h>

#include <cmath>

#include "reference_minimizers.hpp"
#include "uqpe/basis.hpp"
#include "uqpe/bootstrap.hpp"
#include "uqpe/density.hpp"
#include "uqpe/estimator.hpp"
#include "uqpe/lasso_logit.hpp"
#include "uqpe/math.hpp"
#include "uqpe/riesz.hpp"
#include "uqpe/rng.hpp"
#include "uqpe/simulation.hpp"

using namespace uqpe;

namespace {

// Analytic score derivative of the conditional Gaussian treatment law.
Eigen::VectorXd true_omega(const Dataset& ds, const Eigen::VectorXd& coef) {
    const Eigen::Index n = ds.n();
    Eigen::VectorXd omega(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double cond_mean = coef.dot(ds.covariates.row(i).tail(ds.p() - 1));
        omega[i] = -(ds.covariates(i, 0) - cond_mean);
    }
    return omega;
}

}  // namespace

TEST_CASE("integration-by-parts moment identity at scale") {
    DgpSpec spec;
    spec.n = 100000;
    spec.p = 10;
    spec.seed = 301;
    const Dataset ds = simulate_dataset(spec, 0);
    const Eigen::VectorXd coef = dgp_coefficients(spec.p, spec.sparsity);
    const Eigen::VectorXd omega = true_omega(ds, coef);

    const BasisExpansion basis = build_basis(ds, 3);
    const Eigen::MatrixXd H = evaluate_basis_matrix(basis, ds.covariates);
    const Eigen::MatrixXd dH = evaluate_basis_derivative_matrix(basis, ds.covariates);
    const double n = static_cast<double>(ds.n());
    for (Eigen::Index j = 0; j < H.cols(); ++j) {
        const Eigen::ArrayXd contrib = H.col(j).array() * omega.array() + dH.col(j).array();
        const double mean = contrib.mean();
        const double sd = std::sqrt((contrib - mean).square().sum() / (n - 1.0));
        CHECK(std::abs(mean) <= 3.0 * sd / std::sqrt(n) + 1e-12);
    }
}

TEST_CASE("fitted riesz representer tracks the analytic score") {
    DgpSpec spec;
    spec.n = 2000;
    spec.p = 100;
    spec.seed = 302;
    const Dataset ds = simulate_dataset(spec, 0);
    const BasisExpansion basis = build_basis(ds, 3);
    const Eigen::MatrixXd H = evaluate_basis_matrix(basis, ds.covariates);
    const Eigen::MatrixXd dH = evaluate_basis_derivative_matrix(basis, ds.covariates);
    const RieszMoments m = compute_moments(H, dH);
    const RieszFit fit = fit_riesz(m.Ghat, m.Mhat, lambda_riesz(ds.n(), H.cols()));

    const Eigen::VectorXd fitted = H * fit.rho;
    const Eigen::VectorXd truth = true_omega(ds, dgp_coefficients(spec.p, spec.sparsity));
    const double cf = (fitted.array() - fitted.mean()).matrix().norm();
    const double ct = (truth.array() - truth.mean()).matrix().norm();
    const double corr = (fitted.array() - fitted.mean()).matrix().dot(
                            (truth.array() - truth.mean()).matrix()) /
                        (cf * ct);
    CHECK(corr > 0.9);
}

TEST_CASE("median logit-lasso on the dense design stays sparse and optimal") {
    DgpSpec spec;
    spec.n = 500;
    spec.p = 100;
    spec.seed = 303;
    const Dataset ds = simulate_dataset(spec, 0);
    const BasisExpansion basis = build_basis(ds, 3);
    const Eigen::MatrixXd B = evaluate_basis_matrix(basis, ds.covariates);
    const double q = empirical_quantile(ds.outcome, 0.5);
    Eigen::VectorXd y_ind(ds.n());
    for (Eigen::Index i = 0; i < ds.n(); ++i) y_ind[i] = ds.outcome[i] <= q ? 1.0 : 0.0;
    const double lambda = lambda_logit(ds.n(), B.cols());
    const LogitLassoFit fit = fit_logit_lasso(B, y_ind, lambda, 2);
    CHECK(fit.converged);
    CHECK(static_cast<Eigen::Index>(fit.support.size()) < ds.n() / 5);

    const double mine = logit_lasso_objective(B, y_ind, fit.beta, lambda, fit.loadings);
    const refmin::Result ref =
        refmin::fista_logit_lasso(B, y_ind, lambda, fit.loadings, 25000);
    CHECK(std::abs(mine - ref.objective) <= 1e-8);
}

TEST_CASE("theta matches the analytic curve under dgp 1") {
    DgpSpec spec;
    spec.n = 500;
    spec.p = 100;
    spec.seed = 304;
    const OracleCurves truth = true_curves_oracle(spec, {0.5}, 1000000);

    UqpeConfig config;
    config.tau_set = {0.5};
    config.seed = 304;
    const int reps = 36;
    double mean = 0.0, second = 0.0;
    for (int r = 0; r < reps; ++r) {
        const Dataset ds = simulate_dataset(spec, static_cast<std::uint64_t>(r));
        const FittedNuisance nu = fit_nuisance(ds, config);
        const PointEstimates pt = point_estimates(nu, config.tau_set);
        mean += pt.theta[0];
        second += pt.theta[0] * pt.theta[0];
    }
    mean /= reps;
    const double var = second / reps - mean * mean;
    const double se = std::sqrt(var / reps);
    // UQPE = 1 under dgp 1, so theta(0.5) = -f_Y(q_0.5)
    CHECK(std::abs(mean - truth.theta[0]) <= 3.0 * se);
    CHECK(truth.theta[0] == doctest::Approx(-truth.f_y[0]).epsilon(1e-9));
}

TEST_CASE("bootstrap spread approximates the sampling spread of theta") {
    DgpSpec spec;
    spec.n = 500;
    spec.p = 100;
    spec.seed = 305;
    UqpeConfig config;
    config.tau_set = {0.5};
    config.bootstrap_B = 1000;

    // sampling distribution of the point estimator over independent draws
    const int reps = 110;
    std::vector<double> thetas(reps);
    double mean = 0.0;
    for (int r = 0; r < reps; ++r) {
        const Dataset ds = simulate_dataset(spec, static_cast<std::uint64_t>(r));
        const FittedNuisance nu = fit_nuisance(ds, config);
        const PointEstimates pt = point_estimates(nu, config.tau_set);
        thetas[static_cast<std::size_t>(r)] = pt.theta[0];
        mean += pt.theta[0];
    }
    mean /= reps;
    double var = 0.0;
    for (double t : thetas) var += (t - mean) * (t - mean);
    const double mc_sd = std::sqrt(var / (reps - 1));

    // bootstrap standard errors on a few of the same datasets
    double se_sum = 0.0;
    const int se_reps = 6;
    for (int r = 0; r < se_reps; ++r) {
        const Dataset ds = simulate_dataset(spec, static_cast<std::uint64_t>(r));
        UqpeConfig cfg = config;
        cfg.seed = 1000 + static_cast<std::uint64_t>(r);
        const UqpeEstimate est = estimate_all(ds, cfg);
        se_sum += est.per_tau[0].se_theta;
    }
    const double boot_se = se_sum / se_reps;
    CHECK(std::abs(boot_se - mc_sd) / mc_sd <= 0.2);
}

TEST_CASE("rif-logit agrees with the debiased estimator on a small design") {
    DgpSpec spec;
    spec.n = 4000;
    spec.p = 2;
    spec.seed = 306;
    const Dataset ds = simulate_dataset(spec, 0);

    UqpeConfig config;
    config.tau_set = {0.5};
    config.bootstrap_B = 100;
    config.seed = 306;
    const UqpeEstimate debiased = estimate_all(ds, config);

    const double rif = rif_logit_baseline(ds, 0.5, bandwidth_rot(ds.outcome));
    CHECK(std::abs(rif - debiased.per_tau[0].uqpe_hat) <= 0.15);
}

TEST_CASE("quick double-robustness spot check") {
    // Gaussian partial-linear design with analytic nuisances.
    DgpSpec spec;
    spec.dgp_id = 2;
    spec.n = 20000;
    spec.p = 5;
    spec.seed = 307;
    const Dataset ds = simulate_dataset(spec, 0);
    const Eigen::VectorXd coef = dgp_coefficients(spec.p, spec.sparsity);
    const OracleCurves truth = true_curves_oracle(spec, {0.5}, 2000000);
    const double q = truth.q[0];

    const Eigen::Index n = ds.n();
    Eigen::VectorXd mu(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mu[i] = dgp_g(spec.dgp_id, ds.covariates(i, 0)) +
                coef.dot(ds.covariates.row(i).tail(spec.p - 1));
    }
    const Eigen::VectorXd omega = true_omega(ds, coef);
    Eigen::ArrayXd ind(n);
    for (Eigen::Index i = 0; i < n; ++i) ind[i] = ds.outcome[i] <= q ? 1.0 : 0.0;

    // (a) true omega, wrong outcome regression (logistic in x1 only)
    Eigen::ArrayXd score_a(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = 0.7 * (q - 0.8 * ds.covariates(i, 0) - 0.2 * ds.covariates(i, 1));
        const double m0_bad = logistic(z);
        const double m1_bad = -0.56 * m0_bad * (1.0 - m0_bad);
        score_a[i] = m1_bad - omega[i] * (ind[i] - m0_bad);
    }
    // (b) true outcome regression, wrong omega
    Eigen::ArrayXd score_b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m0 = normal_cdf(q - mu[i]);
        const double m1 = -normal_pdf(q - mu[i]) * dgp_g_prime(spec.dgp_id, ds.covariates(i, 0));
        const double omega_bad = 0.5 + 0.3 * ds.covariates(i, 0) - 0.2 * ds.covariates(i, 1);
        score_b[i] = m1 - omega_bad * (ind[i] - m0);
    }
    for (const Eigen::ArrayXd& score : {score_a, score_b}) {
        const double mean = score.mean();
        const double sd = std::sqrt((score - mean).square().sum() / (n - 1.0));
        CHECK(std::abs(mean - truth.theta[0]) <= 3.0 * sd / std::sqrt(double(n)) + 2e-3);
    }
}
