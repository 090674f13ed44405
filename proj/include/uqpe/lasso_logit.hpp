#pragma once

#include <vector>

#include <Eigen/Core>

#include "uqpe/basis.hpp"
#include "uqpe/dataset.hpp"

namespace uqpe {

// One penalized logistic fit of 1{Y <= q} on the dictionary B.
struct LogitLassoFit {
    double q = 0.0;
    Eigen::VectorXd beta;      // length p_b, dense storage of a sparse vector
    double lambda = 0.0;
    Eigen::VectorXd loadings;  // final penalty loadings psi_q (intercept entry 0)
    std::vector<Eigen::Index> support;
    bool post_lasso = false;
    int iterations_used = 0;  // coordinate-descent sweeps / Newton steps
    bool converged = true;
    bool ridge_stabilized = false;  // post-lasso fell back to a ridge refit

    void refresh_support(double eps = 0.0);
};

// Post-lasso fits over the q grid. q_grid is strictly increasing; degenerate
// or duplicated grid points are dropped and counted.
struct QGridFits {
    Eigen::VectorXd q_grid;
    std::vector<double> tau_grid;
    std::vector<LogitLassoFit> fits;
    Eigen::Index dropped_degenerate = 0;
    Eigen::Index dropped_duplicate = 0;

    Eigen::Index size() const { return q_grid.size(); }

    // Nearest grid point, ties toward the lower point. Total on the reals.
    Eigen::Index nearest_index(double q) const;

    // As nearest_index but raises an extrapolation error when q lies more
    // than one grid spacing beyond either end.
    Eigen::Index lookup_strict(double q) const;
};

// lambda_L = 1.1 * Phi^-1(1 - (0.1/log N)/(p_b v N)) * sqrt(N).
double lambda_logit(Eigen::Index n, Eigen::Index p_b);

// Iterated-loadings lasso-penalized logistic regression. Loadings start at
// psi0_j = sqrt(mean(y * b_j^2)), are refined K times from squared residuals,
// and the returned fit solves the weighted problem under the K-th loadings.
// The intercept (column interpreted via intercept_col) is never penalized.
LogitLassoFit fit_logit_lasso(const Eigen::Ref<const Eigen::MatrixXd>& B,
                              const Eigen::Ref<const Eigen::VectorXd>& y_ind,
                              double lambda, int K,
                              Eigen::Index intercept_col = 0);

// Plain logistic Newton with step halving; ridge > 0 adds (ridge/2)||beta||^2.
// Divergence (separation drift past ||beta||_inf = 1e3, failed line search)
// stops early with converged = false and the current iterate.
struct LogisticMle {
    Eigen::VectorXd beta;
    int iterations = 0;
    bool converged = false;
};
LogisticMle logistic_mle(const Eigen::Ref<const Eigen::MatrixXd>& B,
                         const Eigen::Ref<const Eigen::VectorXd>& y_ind,
                         double ridge = 0.0, int max_iter = 50);

// Unpenalized logistic MLE restricted to Supp(beta) u S1 u {intercept};
// outside coordinates stay exactly 0. Falls back to a ridge-stabilized refit
// (1e-6 * identity) when the restricted MLE separates or diverges.
LogitLassoFit post_lasso_refit(const LogitLassoFit& fit,
                               const Eigen::Ref<const Eigen::MatrixXd>& B,
                               const Eigen::Ref<const Eigen::VectorXd>& y_ind,
                               const std::vector<Eigen::Index>& S1,
                               Eigen::Index intercept_col = 0);

// Default forced-inclusion set: intercept plus every power of the treatment.
std::vector<Eigen::Index> default_s1(const BasisExpansion& basis);

// Equispaced tau grid (41 points on [0.15, 0.85] by default elsewhere).
std::vector<double> equispaced_taus(double lo, double hi, int count);

QGridFits fit_q_grid(const Dataset& dataset, const BasisExpansion& basis,
                     const std::vector<double>& tau_grid, int K,
                     const std::vector<Eigen::Index>& S1, unsigned threads = 1);

double predict_m0(const QGridFits& fits, const BasisExpansion& basis,
                  const Eigen::Ref<const Eigen::VectorXd>& x, double q);
double predict_m1(const QGridFits& fits, const BasisExpansion& basis,
                  const Eigen::Ref<const Eigen::VectorXd>& x, double q);

// Full prediction matrices over evaluated dictionaries: column g holds
// m0 / m1 at grid point g for every row of B.
Eigen::MatrixXd m0_matrix(const QGridFits& fits,
                          const Eigen::Ref<const Eigen::MatrixXd>& B);
Eigen::MatrixXd m1_matrix(const QGridFits& fits,
                          const Eigen::Ref<const Eigen::MatrixXd>& B,
                          const Eigen::Ref<const Eigen::MatrixXd>& dB);

// Penalized objective of the weighted problem (used by tests and KKT checks):
// (1/N) sum log(1+e^z) - y z + (lambda/N) sum_j psi_j |beta_j|.
double logit_lasso_objective(const Eigen::Ref<const Eigen::MatrixXd>& B,
                             const Eigen::Ref<const Eigen::VectorXd>& y_ind,
                             const Eigen::Ref<const Eigen::VectorXd>& beta,
                             double lambda,
                             const Eigen::Ref<const Eigen::VectorXd>& loadings);

}  // namespace uqpe
