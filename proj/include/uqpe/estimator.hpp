#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "uqpe/basis.hpp"
#include "uqpe/dataset.hpp"
#include "uqpe/lasso_logit.hpp"
#include "uqpe/riesz.hpp"

namespace uqpe {

enum class EstimatorKind { debiased, plugin_only, rif_logit };

std::string estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

struct UqpeConfig {
    std::vector<double> tau_set{0.2, 0.4, 0.6, 0.8};
    double upsilon_lo = 0.20;
    double upsilon_hi = 0.80;
    std::vector<double> grid_taus = equispaced_taus(0.15, 0.85, 41);
    double alpha = 0.05;
    int bootstrap_B = 1000;
    std::uint64_t seed = 0;
    int k_loadings = 2;
    bool debias = true;
    EstimatorKind estimator = EstimatorKind::debiased;
    unsigned threads = 1;

    bool effective_debias() const {
        return estimator == EstimatorKind::debiased && debias;
    }
    void validate() const;
};

struct PerTauEstimate {
    double tau = 0.0;
    double q_tau = 0.0;
    double theta_hat = 0.0;
    double f_hat = 0.0;
    double uqpe_hat = 0.0;
    double se_theta = 0.0;
    double se_uqpe = 0.0;
    double c_theta_pointwise = 0.0;
    double c_uqpe_pointwise = 0.0;
    double theta_pw_lo = 0.0, theta_pw_hi = 0.0;
    double theta_unif_lo = 0.0, theta_unif_hi = 0.0;
    double uqpe_pw_lo = 0.0, uqpe_pw_hi = 0.0;
    double uqpe_unif_lo = 0.0, uqpe_unif_hi = 0.0;
};

struct Diagnostics {
    double bandwidth = 0.0;
    double f_floor = 0.0;
    double lambda_logit_value = 0.0;
    double lambda_riesz_value = 0.0;
    Eigen::Index rstar_clamp_count = 0;
    Eigen::Index grid_edge_clamp_count = 0;
    Eigen::Index redraw_count = 0;
    Eigen::Index grid_dropped_degenerate = 0;
    Eigen::Index grid_dropped_duplicate = 0;
    Eigen::Index nonconverged_fits = 0;
    bool riesz_converged = true;
    bool any_ridge_stabilized = false;
    double m0_crossing_rate = 0.0;  // reported, never asserted
};

struct UqpeEstimate {
    std::vector<PerTauEstimate> per_tau;
    double c_theta_uniform = 0.0;
    double c_uqpe_uniform = 0.0;
    bool zero_uqpe_rejected = false;
    Diagnostics diagnostics;
    UqpeConfig config;
};

// Everything the bootstrap needs, fitted once on the sample. m0/m1 columns
// follow the q grid of qfits; omega is identically zero when no debiasing.
struct FittedNuisance {
    BasisExpansion basis_b;
    BasisExpansion basis_h;
    QGridFits qfits;
    RieszFit riesz;
    EstimatorKind kind = EstimatorKind::debiased;

    Eigen::MatrixXd m0;      // N x G
    Eigen::MatrixXd m1;      // N x G
    Eigen::VectorXd omega;   // N
    Eigen::VectorXd y;       // original observation order
    Eigen::VectorXd y_sorted;
    double h1 = 0.0;
    double f_floor = 0.0;

    Eigen::Index n() const { return y.size(); }
};

// Per-tau point-estimate context consumed by the multiplier bootstrap.
struct PointEstimates {
    std::vector<double> tau;
    Eigen::VectorXd q_hat;       // T
    Eigen::MatrixXd ind_q_hat;   // N x T, 1{Y_i <= q_hat_tau}
    Eigen::VectorXd theta;       // T
    Eigen::VectorXd f_hat;       // T
    Eigen::VectorXd uqpe;        // T
};

// Plug-in doubly robust moment at a fixed q (Eq.-(6)-style sample average).
double estimate_theta(const Dataset& dataset, const QGridFits& qfits,
                      const RieszFit& riesz, const BasisExpansion& basis_b,
                      const BasisExpansion& basis_h, double q);

// Same moment without the correction term (mean of m1 only).
double estimate_theta_plugin_only(const Dataset& dataset, const QGridFits& qfits,
                                  const BasisExpansion& basis_b, double q);

// -theta / f; f at or below the floor raises a density-floor error.
double estimate_uqpe(double theta_hat, double f_hat, double f_floor = 0.0);

// Unpenalized logit of 1{Y <= q_hat_tau} on (1, X); theta from the average
// logistic derivative of the treatment coefficient. No debiasing.
double rif_logit_baseline(const Dataset& dataset, double tau, double h1);

// Fits all nuisances for the configured estimator and caches their values on
// the sample. Exposed for the bootstrap and for tests.
FittedNuisance fit_nuisance(const Dataset& dataset, const UqpeConfig& config);

PointEstimates point_estimates(const FittedNuisance& nuisance,
                               const std::vector<double>& tau_set,
                               Eigen::Index* edge_clamps = nullptr);

// Full pipeline: nuisance fits, per-tau estimates, multiplier bootstrap,
// bands, zero-UQPE test.
UqpeEstimate estimate_all(const Dataset& dataset, const UqpeConfig& config);

// theta at q via the cached nuisance values; lookup clamps to the grid ends
// and counts clamp events when edge_clamps is non-null.
double theta_at(const FittedNuisance& nuisance, double q,
                Eigen::Index* edge_clamps = nullptr);

}  // namespace uqpe
