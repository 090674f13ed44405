#include <doctest.h>

#include <cmath>

#include "reference_minimizers.hpp"
#include "uqpe/basis.hpp"
#include "uqpe/error.hpp"
#include "uqpe/lasso_logit.hpp"
#include "uqpe/math.hpp"
#include "uqpe/riesz.hpp"
#include "uqpe/rng.hpp"
#include "uqpe/simulation.hpp"

using namespace uqpe;

namespace {

struct Instance {
    Eigen::MatrixXd B;
    Eigen::VectorXd y;
};

// Well-conditioned random logit instance: standardized design with intercept,
// response from a true sparse model so separation is essentially impossible.
Instance random_logit_instance(RngStream& stream, Eigen::Index n, Eigen::Index p) {
    Instance inst;
    inst.B.resize(n, p);
    inst.B.col(0).setOnes();
    for (Eigen::Index j = 1; j < p; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) inst.B(i, j) = stream.normal();
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta[0] = 0.2;
    for (Eigen::Index j = 1; j < std::min<Eigen::Index>(p, 4); ++j) {
        beta[j] = 0.8 / static_cast<double>(j);
    }
    inst.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pr = logistic(inst.B.row(i).dot(beta));
        inst.y[i] = stream.uniform01() < pr ? 1.0 : 0.0;
    }
    return inst;
}

void check_logit_kkt(const Eigen::MatrixXd& B, const Eigen::VectorXd& y,
                     const LogitLassoFit& fit, double tol = 1e-6) {
    const double n = static_cast<double>(B.rows());
    const Eigen::VectorXd z = B * fit.beta;
    const Eigen::VectorXd mu = ((-z.array()).exp() + 1.0).inverse();
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
        const double score = B.col(j).dot(y - mu) / n;
        const double bound = fit.lambda * fit.loadings[j] / n;
        if (fit.beta[j] == 0.0) {
            CHECK(std::abs(score) <= bound + tol);
        } else {
            CHECK(std::abs(score - bound * (fit.beta[j] > 0 ? 1.0 : -1.0)) <= tol);
        }
    }
}

void check_riesz_kkt(const Eigen::MatrixXd& G, const Eigen::VectorXd& M,
                     const RieszFit& fit, double tol = 1e-8) {
    const Eigen::VectorXd grad = 2.0 * (M - G * fit.rho);
    for (Eigen::Index j = 0; j < M.size(); ++j) {
        if (fit.rho[j] == 0.0) {
            CHECK(std::abs(grad[j]) <= fit.lambda + tol);
        } else {
            CHECK(std::abs(grad[j] - fit.lambda * (fit.rho[j] > 0 ? 1.0 : -1.0)) <= tol);
        }
    }
}

Eigen::MatrixXd random_psd(RngStream& stream, Eigen::Index p) {
    Eigen::MatrixXd A(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) A(i, j) = stream.normal();
    Eigen::MatrixXd G = A.transpose() * A / static_cast<double>(p);
    G.diagonal().array() += 0.1;
    return G;
}

}  // namespace

TEST_CASE("lambda rule for the logit lasso") {
    CHECK(lambda_logit(500, 301) == doctest::Approx(98.2937843369339).epsilon(1e-12));
    CHECK(lambda_logit(500, 1000) == doctest::Approx(102.259701720033).epsilon(1e-12));
    CHECK(lambda_logit(500, 1000) > lambda_logit(500, 301));
    // doubling N rescales the sqrt factor by sqrt(2), with the quantile
    // argument re-evaluated at the new N
    const double ratio = lambda_logit(1000, 301) / lambda_logit(500, 301);
    const double tail_1000 = (0.1 / std::log(1000.0)) / 1000.0;
    const double tail_500 = (0.1 / std::log(500.0)) / 500.0;
    const double expected =
        std::sqrt(2.0) * normal_icdf(1.0 - tail_1000) / normal_icdf(1.0 - tail_500);
    CHECK(ratio == doctest::Approx(expected).epsilon(1e-12));
    CHECK_THROWS_AS(lambda_logit(2, 10), Error);
}

TEST_CASE("lambda rule for the riesz representer") {
    CHECK(lambda_riesz(500, 301) == doctest::Approx(0.390362899084787).epsilon(1e-12));
    CHECK(lambda_riesz(500, 2) < lambda_riesz(500, 301));
    CHECK(lambda_riesz(4000000, 301) < 0.02);
    CHECK_THROWS_AS(lambda_riesz(2, 301), Error);
}

TEST_CASE("zero-penalty lasso matches the unpenalized MLE") {
    RngStream stream(derive_seed(21, streamtag::test, 0));
    const Instance inst = random_logit_instance(stream, 150, 2);
    const LogitLassoFit fit = fit_logit_lasso(inst.B, inst.y, 0.0, 2);
    const refmin::Result newton = refmin::newton_logistic(inst.B, inst.y);
    CHECK((fit.beta - newton.x).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("huge penalty keeps only the intercept") {
    RngStream stream(derive_seed(22, streamtag::test, 0));
    const Instance inst = random_logit_instance(stream, 120, 6);
    const LogitLassoFit fit = fit_logit_lasso(inst.B, inst.y, 1e8, 2);
    for (Eigen::Index j = 1; j < 6; ++j) CHECK(fit.beta[j] == 0.0);
    CHECK(fit.beta[0] ==
          doctest::Approx(logit(inst.y.mean())).epsilon(1e-5));
}

TEST_CASE("degenerate indicators are rejected") {
    RngStream stream(derive_seed(23, streamtag::test, 0));
    Instance inst = random_logit_instance(stream, 50, 3);
    inst.y.setZero();
    CHECK_THROWS_AS(fit_logit_lasso(inst.B, inst.y, 1.0, 2), Error);
    inst.y.setOnes();
    CHECK_THROWS_AS(fit_logit_lasso(inst.B, inst.y, 1.0, 2), Error);
}

TEST_CASE("initial penalty loadings follow the step-1 formula") {
    RngStream stream(derive_seed(24, streamtag::test, 0));
    const Instance inst = random_logit_instance(stream, 90, 5);
    // K = 0 skips every refinement, so the reported loadings are psi^0.
    const LogitLassoFit fit = fit_logit_lasso(inst.B, inst.y, 25.0, 0);
    for (Eigen::Index j = 0; j < 5; ++j) {
        if (j == 0) {
            CHECK(fit.loadings[j] == 0.0);  // unpenalized intercept
            continue;
        }
        const double expected = std::sqrt(
            (inst.y.array() * inst.B.col(j).array().square()).mean());
        CHECK(fit.loadings[j] == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("iterated loadings stay finite and nonnegative, KKT holds") {
    RngStream stream(derive_seed(25, streamtag::test, 0));
    for (int rep = 0; rep < 12; ++rep) {
        const Eigen::Index n = 80 + static_cast<Eigen::Index>(stream.raw() % 120);
        const Eigen::Index p = 4 + static_cast<Eigen::Index>(stream.raw() % 12);
        const Instance inst = random_logit_instance(stream, n, p);
        const double lambda = lambda_logit(n, p) * (0.2 + stream.uniform01());
        const LogitLassoFit fit = fit_logit_lasso(inst.B, inst.y, lambda, 2);
        CHECK(fit.converged);
        CHECK(fit.loadings.allFinite());
        CHECK((fit.loadings.array() >= 0.0).all());
        check_logit_kkt(inst.B, inst.y, fit);
    }
}

TEST_CASE("post-lasso refit restricts support and honors S1") {
    RngStream stream(derive_seed(26, streamtag::test, 0));
    const Instance inst = random_logit_instance(stream, 200, 8);
    const double lambda = 2.5 * lambda_logit(200, 8);
    const LogitLassoFit lasso = fit_logit_lasso(inst.B, inst.y, lambda, 2);
    const std::vector<Eigen::Index> s1{0, 5, 6};
    const LogitLassoFit post = post_lasso_refit(lasso, inst.B, inst.y, s1);
    CHECK(post.post_lasso);
    for (Eigen::Index j : post.support) {
        const bool in_lasso =
            std::find(lasso.support.begin(), lasso.support.end(), j) != lasso.support.end();
        const bool in_s1 = std::find(s1.begin(), s1.end(), j) != s1.end();
        CHECK((in_lasso || in_s1));
    }
    // forced columns enter even though the lasso dropped them
    CHECK(post.beta[5] != 0.0);
    CHECK(post.beta[6] != 0.0);

    // union idempotence: restricting to the lasso support changes nothing
    const LogitLassoFit again = post_lasso_refit(lasso, inst.B, inst.y, lasso.support);
    const LogitLassoFit plain = post_lasso_refit(lasso, inst.B, inst.y, {});
    CHECK((again.beta - plain.beta).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("post-lasso with empty support is the intercept-only MLE") {
    Eigen::MatrixXd B(8, 2);
    B.col(0).setOnes();
    B.col(1) << 0.3, -0.2, 0.6, -0.5, 0.1, -0.4, 0.2, -0.1;
    Eigen::VectorXd y(8);
    y << 1, 0, 0, 0, 1, 0, 0, 0;  // mean 0.25
    LogitLassoFit empty;
    empty.beta = Eigen::VectorXd::Zero(2);
    empty.loadings = Eigen::VectorXd::Zero(2);
    empty.lambda = 0.0;
    const LogitLassoFit post = post_lasso_refit(empty, B, y, {});
    CHECK(post.beta[1] == 0.0);
    CHECK(post.beta[0] == doctest::Approx(logit(0.25)).epsilon(1e-8));
}

TEST_CASE("coordinate descent agrees with the proximal-gradient reference") {
    RngStream stream(derive_seed(27, streamtag::test, 0));
    for (int rep = 0; rep < 5; ++rep) {
        const Instance inst = random_logit_instance(stream, 120, 10);
        const double lambda = 0.4 * lambda_logit(120, 10);
        const LogitLassoFit fit = fit_logit_lasso(inst.B, inst.y, lambda, 1);
        const double mine =
            logit_lasso_objective(inst.B, inst.y, fit.beta, lambda, fit.loadings);
        const refmin::Result ref =
            refmin::fista_logit_lasso(inst.B, inst.y, lambda, fit.loadings, 30000);
        CHECK(std::abs(mine - ref.objective) <= 1e-8);
    }
}

TEST_CASE("q-grid fitting over a simulated design") {
    DgpSpec spec;
    spec.n = 200;
    spec.p = 4;
    spec.seed = 99;
    const Dataset ds = simulate_dataset(spec, 0);
    const BasisExpansion basis = build_basis(ds, 3);
    const std::vector<double> taus = equispaced_taus(0.15, 0.85, 41);
    const QGridFits fits = fit_q_grid(ds, basis, taus, 2, default_s1(basis));
    CHECK(fits.size() == 41);
    CHECK(fits.dropped_degenerate == 0);
    for (Eigen::Index g = 1; g < fits.size(); ++g) {
        CHECK(fits.q_grid[g] > fits.q_grid[g - 1]);
    }
    for (const auto& fit : fits.fits) {
        CHECK(fit.post_lasso);
        CHECK(static_cast<Eigen::Index>(fit.support.size()) < ds.n());
        // S1 powers of the treatment always survive
        CHECK(fit.beta[1] != 0.0);
    }

    Dataset flat = ds;
    flat.outcome.setConstant(1.0);
    CHECK_THROWS_AS(fit_q_grid(flat, basis, taus, 2, default_s1(basis)), Error);
}

TEST_CASE("m0/m1 prediction examples") {
    BasisExpansion basis;
    basis.n_variables = 1;
    basis.treatment_index = 0;
    basis.degree = 1;
    basis.terms = {{0, 1}};
    basis.scale_factors = Eigen::VectorXd::Ones(1);

    QGridFits fits;
    fits.q_grid.resize(2);
    fits.q_grid << 0.0, 1.0;
    fits.tau_grid = {0.4, 0.6};
    fits.fits.resize(2);
    fits.fits[0].beta = Eigen::VectorXd::Zero(2);
    fits.fits[1].beta = Eigen::VectorXd::Zero(2);
    fits.fits[1].beta[0] = logit(0.3);

    Eigen::VectorXd x(1);
    x << 0.0;
    CHECK(predict_m0(fits, basis, x, 0.0) == doctest::Approx(0.5));
    CHECK(predict_m0(fits, basis, x, 1.0) == doctest::Approx(0.3));
    // midway between grid points resolves to the lower one
    CHECK(predict_m0(fits, basis, x, 0.5) == doctest::Approx(0.5));
    // within one spacing beyond the ends is allowed, farther is not
    CHECK(predict_m0(fits, basis, x, 1.9) == doctest::Approx(0.3));
    CHECK_THROWS_AS(predict_m0(fits, basis, x, 2.5), Error);

    // m1 at z = 0 with unit slope: logistic derivative 0.25
    fits.fits[0].beta[1] = 1.0;
    CHECK(predict_m1(fits, basis, x, 0.0) == doctest::Approx(0.25));
    // no treatment weight means zero derivative
    CHECK(predict_m1(fits, basis, x, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("predict_m1 matches finite differences of predict_m0") {
    DgpSpec spec;
    spec.n = 150;
    spec.p = 3;
    spec.seed = 17;
    const Dataset ds = simulate_dataset(spec, 0);
    const BasisExpansion basis = build_basis(ds, 3);
    const QGridFits fits =
        fit_q_grid(ds, basis, equispaced_taus(0.3, 0.7, 5), 2, default_s1(basis));
    RngStream stream(derive_seed(28, streamtag::test, 0));
    const double step = 1e-5;
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd x(3);
        x << stream.normal(), stream.normal(), stream.normal();
        const double q = fits.q_grid[static_cast<Eigen::Index>(stream.raw() % 5)];
        Eigen::VectorXd xp = x, xm = x;
        xp[0] += step;
        xm[0] -= step;
        const double fd =
            (predict_m0(fits, basis, xp, q) - predict_m0(fits, basis, xm, q)) / (2 * step);
        const double an = predict_m1(fits, basis, x, q);
        CHECK(std::abs(fd - an) / std::max(1.0, std::abs(an)) <= 1e-6);
    }
}

TEST_CASE("riesz moments from evaluated dictionaries") {
    Eigen::MatrixXd H(2, 2), dH(2, 2);
    H << 1, 1, 2, 4;    // h = (x, x^2) at x = 1, 2
    dH << 1, 2, 1, 4;   // dh = (1, 2x)
    const RieszMoments m = compute_moments(H, dH);
    CHECK(m.Mhat[0] == doctest::Approx(-1.0));
    CHECK(m.Mhat[1] == doctest::Approx(-3.0));
    CHECK((m.Ghat - m.Ghat.transpose()).lpNorm<Eigen::Infinity>() == 0.0);

    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, 1);
    Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(1, 1);
    CHECK(compute_moments(ones, zeros).Ghat(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("riesz closed forms under simple geometry") {
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(4, 4);
    Eigen::VectorXd M(4);
    M << 0.5, -0.2, 0.0, 0.9;
    const RieszFit free = fit_riesz(id, M, 0.0);
    CHECK((free.rho - M).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK(riesz_objective(id, M, free.rho, 0.0) <= 0.0);

    const RieszFit dead = fit_riesz(id, M, 2.0 * M.lpNorm<Eigen::Infinity>());
    CHECK(dead.rho.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("riesz coordinate descent: KKT, trace, order invariance, reference") {
    RngStream stream(derive_seed(29, streamtag::test, 0));
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::Index p = 10;
        const Eigen::MatrixXd G = random_psd(stream, p);
        const Eigen::VectorXd M = stream.normals(p);
        const double lambda = 0.1;
        const RieszFit fit = fit_riesz(G, M, lambda);
        CHECK(fit.converged);
        check_riesz_kkt(G, M, fit);
        CHECK(riesz_objective(G, M, fit.rho, lambda) <= 0.0);
        for (std::size_t s = 1; s < fit.objective_trace.size(); ++s) {
            CHECK(fit.objective_trace[s] <= fit.objective_trace[s - 1] + 1e-12);
        }

        const refmin::Result ref = refmin::fista_quadratic_l1(G, M, lambda, 30000);
        CHECK(std::abs(riesz_objective(G, M, fit.rho, lambda) - ref.objective) <= 1e-8);

        // permuting coordinates leaves the optimum value unchanged
        Eigen::VectorXi perm(p);
        for (Eigen::Index j = 0; j < p; ++j) perm[j] = static_cast<int>((j + 3) % p);
        Eigen::MatrixXd Gp(p, p);
        Eigen::VectorXd Mp(p);
        for (Eigen::Index a = 0; a < p; ++a) {
            Mp[a] = M[perm[a]];
            for (Eigen::Index b = 0; b < p; ++b) Gp(a, b) = G(perm[a], perm[b]);
        }
        const RieszFit pfit = fit_riesz(Gp, Mp, lambda);
        CHECK(std::abs(riesz_objective(Gp, Mp, pfit.rho, lambda) -
                       riesz_objective(G, M, fit.rho, lambda)) <= 1e-8);
    }
}

TEST_CASE("predict_omega basics") {
    BasisExpansion basis;
    basis.n_variables = 1;
    basis.treatment_index = 0;
    basis.degree = 1;
    basis.terms = {{0, 1}};
    basis.scale_factors = Eigen::VectorXd::Ones(1);

    RieszFit fit;
    fit.rho = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd x(1);
    x << 1.7;
    CHECK(predict_omega(fit, basis, x) == 0.0);

    fit.rho[0] = 2.5;  // intercept-only prediction is constant
    CHECK(predict_omega(fit, basis, x) == doctest::Approx(2.5));
    x << -4.0;
    CHECK(predict_omega(fit, basis, x) == doctest::Approx(2.5));
}
