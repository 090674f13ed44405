#include "uqpe/estimator.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "uqpe/bootstrap.hpp"
#include "uqpe/density.hpp"
#include "uqpe/error.hpp"
#include "uqpe/math.hpp"

namespace uqpe {
namespace {

double density_floor_for(const Eigen::VectorXd& y) {
    const double range = y.maxCoeff() - y.minCoeff();
    if (!(range > 0.0)) {
        throw Error(errkind::zero_bandwidth, "uqpe_core", "constant outcome");
    }
    return 1e-4 / range;
}

// Share of adjacent-grid-point monotonicity violations of m0 over the sample.
double crossing_rate(const Eigen::MatrixXd& m0) {
    if (m0.cols() < 2) return 0.0;
    Eigen::Index violations = 0;
    for (Eigen::Index g = 0; g + 1 < m0.cols(); ++g) {
        violations += (m0.col(g).array() > m0.col(g + 1).array()).count();
    }
    return static_cast<double>(violations) /
           static_cast<double>(m0.rows() * (m0.cols() - 1));
}

// Unpenalized logit grid over the raw design (1, X); iteration-capped fits
// are returned as-is so the baseline reproduces its textbook behavior under
// near-separation.
QGridFits fit_rif_grid(const Dataset& dataset, const std::vector<double>& tau_grid,
                       const Eigen::MatrixXd& D) {
    const Eigen::VectorXd& y = dataset.outcome;
    const Eigen::Index n = y.size();
    Eigen::VectorXd y_sorted = y;
    std::sort(y_sorted.data(), y_sorted.data() + n);

    QGridFits out;
    std::vector<double> qs, taus;
    for (double tau : tau_grid) {
        const double q = sorted_quantile(y_sorted, tau);
        if (!qs.empty() && !(q > qs.back())) {
            ++out.dropped_duplicate;
            continue;
        }
        Eigen::Index n_le = 0;
        for (Eigen::Index i = 0; i < n; ++i) n_le += (y[i] <= q) ? 1 : 0;
        if (n_le < 5 || n - n_le < 5) {
            ++out.dropped_degenerate;
            continue;
        }
        qs.push_back(q);
        taus.push_back(tau);
    }
    if (qs.empty()) {
        throw Error(errkind::degenerate_outcome, "rif_logit", "no usable grid points");
    }
    out.q_grid = Eigen::Map<Eigen::VectorXd>(qs.data(), static_cast<Eigen::Index>(qs.size()));
    out.tau_grid = std::move(taus);
    out.fits.resize(qs.size());

    for (std::size_t g = 0; g < qs.size(); ++g) {
        Eigen::VectorXd y_ind(n);
        for (Eigen::Index i = 0; i < n; ++i) y_ind[i] = y[i] <= qs[g] ? 1.0 : 0.0;
        const LogisticMle mle = logistic_mle(D, y_ind, 0.0, 100);
        if (!mle.beta.allFinite()) {
            throw Error(errkind::baseline_infeasible, "rif_logit",
                        "non-finite baseline fit");
        }
        LogitLassoFit fit;
        fit.q = qs[g];
        fit.beta = mle.beta;
        fit.loadings = Eigen::VectorXd::Zero(D.cols());
        fit.post_lasso = true;
        fit.iterations_used = mle.iterations;
        fit.converged = mle.converged;
        fit.refresh_support();
        out.fits[g] = std::move(fit);
    }
    return out;
}

}  // namespace

std::string estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::debiased: return "debiased";
        case EstimatorKind::plugin_only: return "plugin-only";
        case EstimatorKind::rif_logit: return "rif-logit";
    }
    return "debiased";
}

EstimatorKind estimator_from_name(const std::string& name) {
    if (name == "debiased") return EstimatorKind::debiased;
    if (name == "plugin-only" || name == "plugin_only") return EstimatorKind::plugin_only;
    if (name == "rif-logit" || name == "rif_logit") return EstimatorKind::rif_logit;
    throw Error(errkind::precondition, "config", "unknown estimator: " + name);
}

void UqpeConfig::validate() const {
    if (!(upsilon_lo > 0.0 && upsilon_hi < 1.0 && upsilon_lo < upsilon_hi)) {
        throw Error(errkind::precondition, "config", "upsilon must satisfy 0 < lo < hi < 1");
    }
    if (tau_set.empty()) {
        throw Error(errkind::precondition, "config", "tau_set is empty");
    }
    for (std::size_t i = 0; i < tau_set.size(); ++i) {
        if (tau_set[i] < upsilon_lo - 1e-12 || tau_set[i] > upsilon_hi + 1e-12) {
            throw Error(errkind::precondition, "config", "tau_set must lie inside upsilon");
        }
        if (i > 0 && !(tau_set[i] > tau_set[i - 1])) {
            throw Error(errkind::precondition, "config", "tau_set must be strictly increasing");
        }
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw Error(errkind::precondition, "config", "alpha must lie in (0,1)");
    }
    if (bootstrap_B < 2) {
        throw Error(errkind::precondition, "config", "bootstrap_B must be >= 2");
    }
    if (k_loadings < 1) {
        throw Error(errkind::precondition, "config", "K must be >= 1");
    }
    if (grid_taus.size() < 1) {
        throw Error(errkind::precondition, "config", "grid_taus is empty");
    }
}

double estimate_theta(const Dataset& dataset, const QGridFits& qfits,
                      const RieszFit& riesz, const BasisExpansion& basis_b,
                      const BasisExpansion& basis_h, double q) {
    const Eigen::Index g = qfits.lookup_strict(q);
    const LogitLassoFit& fit = qfits.fits[static_cast<std::size_t>(g)];
    const Eigen::MatrixXd B = evaluate_basis_matrix(basis_b, dataset.covariates);
    const Eigen::MatrixXd dB = evaluate_basis_derivative_matrix(basis_b, dataset.covariates);
    const Eigen::MatrixXd H = evaluate_basis_matrix(basis_h, dataset.covariates);

    const Eigen::VectorXd z = B * fit.beta;
    const Eigen::ArrayXd mu = ((-z.array()).exp() + 1.0).inverse();
    const Eigen::ArrayXd m1 = mu * (1.0 - mu) * (dB * fit.beta).array();
    const Eigen::ArrayXd omega = (H * riesz.rho).array();
    const Eigen::ArrayXd ind =
        (dataset.outcome.array() <= q).cast<double>();
    return (m1 - omega * (ind - mu)).mean();
}

double estimate_theta_plugin_only(const Dataset& dataset, const QGridFits& qfits,
                                  const BasisExpansion& basis_b, double q) {
    const Eigen::Index g = qfits.lookup_strict(q);
    const LogitLassoFit& fit = qfits.fits[static_cast<std::size_t>(g)];
    const Eigen::MatrixXd B = evaluate_basis_matrix(basis_b, dataset.covariates);
    const Eigen::MatrixXd dB = evaluate_basis_derivative_matrix(basis_b, dataset.covariates);
    const Eigen::VectorXd z = B * fit.beta;
    const Eigen::ArrayXd mu = ((-z.array()).exp() + 1.0).inverse();
    return (mu * (1.0 - mu) * (dB * fit.beta).array()).mean();
}

double estimate_uqpe(double theta_hat, double f_hat, double f_floor) {
    if (!(f_hat > 0.0) || f_hat <= f_floor) {
        throw Error(errkind::density_floor, "uqpe_core",
                    "density estimate at or below floor");
    }
    return -theta_hat / f_hat;
}

double rif_logit_baseline(const Dataset& dataset, double tau, double h1) {
    dataset.validate();
    const Eigen::Index n = dataset.n();
    const Eigen::Index p = dataset.p();
    if (p + 1 >= n) {
        throw Error(errkind::baseline_infeasible, "rif_logit",
                    "unpenalized logit needs p + 1 < N");
    }
    Eigen::MatrixXd D(n, p + 1);
    D.col(0).setOnes();
    D.rightCols(p) = dataset.covariates;

    const double q = empirical_quantile(dataset.outcome, tau);
    Eigen::VectorXd y_ind(n);
    for (Eigen::Index i = 0; i < n; ++i) y_ind[i] = dataset.outcome[i] <= q ? 1.0 : 0.0;

    const LogisticMle mle = logistic_mle(D, y_ind, 0.0, 100);
    if (!mle.beta.allFinite()) {
        throw Error(errkind::baseline_infeasible, "rif_logit", "non-finite baseline fit");
    }

    const Eigen::VectorXd z = D * mle.beta;
    const Eigen::ArrayXd mu = ((-z.array()).exp() + 1.0).inverse();
    const double slope = mle.beta[1 + dataset.treatment_index];
    const double theta = (mu * (1.0 - mu) * slope).mean();
    const double f = kde(dataset.outcome, q, h1);
    return estimate_uqpe(theta, f, density_floor_for(dataset.outcome));
}

FittedNuisance fit_nuisance(const Dataset& dataset, const UqpeConfig& config) {
    dataset.validate();
    config.validate();

    FittedNuisance nu;
    nu.kind = config.estimator;
    nu.y = dataset.outcome;
    nu.y_sorted = dataset.outcome;
    std::sort(nu.y_sorted.data(), nu.y_sorted.data() + nu.y_sorted.size());
    nu.h1 = bandwidth_rot(nu.y);
    nu.f_floor = density_floor_for(nu.y);

    const Eigen::Index n = dataset.n();
    if (config.estimator == EstimatorKind::rif_logit) {
        if (dataset.p() + 1 >= n) {
            throw Error(errkind::baseline_infeasible, "rif_logit",
                        "unpenalized logit needs p + 1 < N");
        }
        Eigen::MatrixXd D(n, dataset.p() + 1);
        D.col(0).setOnes();
        D.rightCols(dataset.p()) = dataset.covariates;
        Eigen::MatrixXd dD = Eigen::MatrixXd::Zero(n, dataset.p() + 1);
        dD.col(1 + dataset.treatment_index).setOnes();

        nu.qfits = fit_rif_grid(dataset, config.grid_taus, D);
        nu.riesz.rho = Eigen::VectorXd::Zero(D.cols());
        nu.m0 = m0_matrix(nu.qfits, D);
        nu.m1 = m1_matrix(nu.qfits, D, dD);
        nu.omega = Eigen::VectorXd::Zero(n);
        return nu;
    }

    nu.basis_b = build_basis(dataset, 3);
    nu.basis_h = build_basis(dataset, 3);
    const Eigen::MatrixXd B = evaluate_basis_matrix(nu.basis_b, dataset.covariates);
    const Eigen::MatrixXd dB = evaluate_basis_derivative_matrix(nu.basis_b, dataset.covariates);

    nu.qfits = fit_q_grid(dataset, nu.basis_b, config.grid_taus, config.k_loadings,
                          default_s1(nu.basis_b), config.threads);
    nu.m0 = m0_matrix(nu.qfits, B);
    nu.m1 = m1_matrix(nu.qfits, B, dB);

    if (config.effective_debias()) {
        const Eigen::MatrixXd H = evaluate_basis_matrix(nu.basis_h, dataset.covariates);
        const Eigen::MatrixXd dH =
            evaluate_basis_derivative_matrix(nu.basis_h, dataset.covariates);
        const RieszMoments moments = compute_moments(H, dH);
        nu.riesz = fit_riesz(moments.Ghat, moments.Mhat, lambda_riesz(n, H.cols()));
        nu.omega = H * nu.riesz.rho;
    } else {
        nu.riesz.rho = Eigen::VectorXd::Zero(B.cols());
        nu.omega = Eigen::VectorXd::Zero(n);
    }
    return nu;
}

double theta_at(const FittedNuisance& nuisance, double q, Eigen::Index* edge_clamps) {
    const Eigen::Index g = nuisance.qfits.nearest_index(q);
    if (edge_clamps) {
        const Eigen::Index last = nuisance.qfits.size() - 1;
        if ((g == 0 && q < nuisance.qfits.q_grid[0]) ||
            (g == last && q > nuisance.qfits.q_grid[last])) {
            ++*edge_clamps;
        }
    }
    const Eigen::ArrayXd ind = (nuisance.y.array() <= q).cast<double>();
    return (nuisance.m1.col(g).array() -
            nuisance.omega.array() * (ind - nuisance.m0.col(g).array()))
        .mean();
}

PointEstimates point_estimates(const FittedNuisance& nuisance,
                               const std::vector<double>& tau_set,
                               Eigen::Index* edge_clamps) {
    const Eigen::Index t_count = static_cast<Eigen::Index>(tau_set.size());
    const Eigen::Index n = nuisance.n();
    PointEstimates pt;
    pt.tau = tau_set;
    pt.q_hat.resize(t_count);
    pt.ind_q_hat.resize(n, t_count);
    pt.theta.resize(t_count);
    pt.f_hat.resize(t_count);
    pt.uqpe.resize(t_count);
    for (Eigen::Index t = 0; t < t_count; ++t) {
        const double q = sorted_quantile(nuisance.y_sorted, tau_set[static_cast<std::size_t>(t)]);
        pt.q_hat[t] = q;
        pt.ind_q_hat.col(t) = (nuisance.y.array() <= q).cast<double>();
        pt.theta[t] = theta_at(nuisance, q, edge_clamps);
        pt.f_hat[t] = kde(nuisance.y, q, nuisance.h1);
        pt.uqpe[t] = estimate_uqpe(pt.theta[t], pt.f_hat[t], nuisance.f_floor);
    }
    return pt;
}

UqpeEstimate estimate_all(const Dataset& dataset, const UqpeConfig& config) {
    FittedNuisance nu = fit_nuisance(dataset, config);

    UqpeEstimate est;
    est.config = config;
    est.diagnostics.bandwidth = nu.h1;
    est.diagnostics.f_floor = nu.f_floor;
    est.diagnostics.grid_dropped_degenerate = nu.qfits.dropped_degenerate;
    est.diagnostics.grid_dropped_duplicate = nu.qfits.dropped_duplicate;
    est.diagnostics.m0_crossing_rate = crossing_rate(nu.m0);
    if (config.estimator != EstimatorKind::rif_logit) {
        est.diagnostics.lambda_logit_value =
            lambda_logit(dataset.n(), nu.basis_b.dimension());
        if (config.effective_debias()) {
            est.diagnostics.lambda_riesz_value =
                lambda_riesz(dataset.n(), nu.basis_h.dimension());
            est.diagnostics.riesz_converged = nu.riesz.converged;
        }
    }
    for (const auto& fit : nu.qfits.fits) {
        if (!fit.converged) ++est.diagnostics.nonconverged_fits;
        if (fit.ridge_stabilized) est.diagnostics.any_ridge_stabilized = true;
    }

    Eigen::Index point_edge_clamps = 0;
    const PointEstimates pt = point_estimates(nu, config.tau_set, &point_edge_clamps);

    const BootstrapDraws draws = run_bootstrap_draws(nu, pt, config.bootstrap_B,
                                                     config.seed, config.threads);
    est.diagnostics.redraw_count = draws.redraw_count;
    est.diagnostics.rstar_clamp_count = draws.rstar_clamp_count;
    est.diagnostics.grid_edge_clamp_count =
        draws.grid_edge_clamp_count + point_edge_clamps;

    const InferenceResult inf =
        bootstrap_inference(draws, pt.theta, pt.uqpe, config.alpha);
    est.c_theta_uniform = inf.c_theta_uniform;
    est.c_uqpe_uniform = inf.c_uqpe_uniform;
    est.zero_uqpe_rejected = inf.zero_uqpe_rejected;

    const Eigen::Index t_count = static_cast<Eigen::Index>(config.tau_set.size());
    est.per_tau.resize(static_cast<std::size_t>(t_count));
    for (Eigen::Index t = 0; t < t_count; ++t) {
        PerTauEstimate& row = est.per_tau[static_cast<std::size_t>(t)];
        row.tau = config.tau_set[static_cast<std::size_t>(t)];
        row.q_tau = pt.q_hat[t];
        row.theta_hat = pt.theta[t];
        row.f_hat = pt.f_hat[t];
        row.uqpe_hat = pt.uqpe[t];
        row.se_theta = inf.se_theta[t];
        row.se_uqpe = inf.se_uqpe[t];
        row.c_theta_pointwise = inf.c_theta_pw[t];
        row.c_uqpe_pointwise = inf.c_uqpe_pw[t];
        row.theta_pw_lo = inf.theta_pw.lo[t];
        row.theta_pw_hi = inf.theta_pw.hi[t];
        row.theta_unif_lo = inf.theta_unif.lo[t];
        row.theta_unif_hi = inf.theta_unif.hi[t];
        row.uqpe_pw_lo = inf.uqpe_pw.lo[t];
        row.uqpe_pw_hi = inf.uqpe_pw.hi[t];
        row.uqpe_unif_lo = inf.uqpe_unif.lo[t];
        row.uqpe_unif_hi = inf.uqpe_unif.hi[t];
    }
    return est;
}

}  // namespace uqpe
