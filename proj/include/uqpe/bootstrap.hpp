#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "uqpe/estimator.hpp"

namespace uqpe {

struct BootstrapDraws {
    Eigen::MatrixXd theta_star;  // B x T
    Eigen::MatrixXd uqpe_star;   // B x T
    Eigen::MatrixXd q_star;      // B x T
    Eigen::Index redraw_count = 0;
    Eigen::Index rstar_clamp_count = 0;
    Eigen::Index grid_edge_clamp_count = 0;
};

Eigen::VectorXd draw_multipliers(Eigen::Index n, std::uint64_t stream_seed);

struct ReplicateResult {
    Eigen::VectorXd theta;  // T
    Eigen::VectorXd uqpe;   // T
    Eigen::VectorXd q;      // T
    Eigen::Index rstar_clamps = 0;
    Eigen::Index grid_edge_clamps = 0;
    bool density_floor_hit = false;  // caller redraws
};

// One multiplier-bootstrap replicate: perturbed quantile, weighted score
// average and weighted KDE per tau, reusing the fitted nuisances. Throws
// degenerate-weights when |sum(eta + 1)| is too small; a density-floor hit is
// reported through the flag so the caller can redraw.
ReplicateResult bootstrap_replicate(const FittedNuisance& nuisance,
                                    const PointEstimates& point,
                                    const Eigen::Ref<const Eigen::VectorXd>& eta);

// B replicates with per-replication streams derived from (seed, b, attempt);
// at most 5 redraws per replicate. Deterministic for any thread count.
BootstrapDraws run_bootstrap_draws(const FittedNuisance& nuisance,
                                   const PointEstimates& point, int B,
                                   std::uint64_t seed, unsigned threads);

// IQR of the draws over Phi^-1(.75) - Phi^-1(.25); zero IQR raises
// degenerate-draws.
double se_iqr(const Eigen::Ref<const Eigen::VectorXd>& draws);

// (1-alpha) empirical quantile of sup_tau |(draw - point)/sigma|.
double uniform_critical_value(const Eigen::Ref<const Eigen::MatrixXd>& draws_star,
                              const Eigen::Ref<const Eigen::VectorXd>& point,
                              const Eigen::Ref<const Eigen::VectorXd>& sigma,
                              double alpha);

struct Band {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

Band build_bands(const Eigen::Ref<const Eigen::VectorXd>& point,
                 const Eigen::Ref<const Eigen::VectorXd>& sigma, double critical);

// Reject when the zero function leaves the theta band at some tau.
bool test_zero_uqpe(const Band& theta_band);

struct InferenceResult {
    Eigen::VectorXd se_theta, se_uqpe;          // T
    Eigen::VectorXd c_theta_pw, c_uqpe_pw;      // per-tau critical values
    double c_theta_uniform = 0.0, c_uqpe_uniform = 0.0;
    Band theta_pw, theta_unif, uqpe_pw, uqpe_unif;
    bool zero_uqpe_rejected = false;
};

InferenceResult bootstrap_inference(const BootstrapDraws& draws,
                                    const Eigen::Ref<const Eigen::VectorXd>& theta_point,
                                    const Eigen::Ref<const Eigen::VectorXd>& uqpe_point,
                                    double alpha);

}  // namespace uqpe
