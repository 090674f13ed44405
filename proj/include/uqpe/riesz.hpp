#pragma once

#include <vector>

#include <Eigen/Core>

#include "uqpe/basis.hpp"

namespace uqpe {

// Penalized Riesz representer fit: rho minimizing
// -2 Mhat' rho + rho' Ghat rho + lambda ||rho||_1.
struct RieszFit {
    Eigen::VectorXd rho;
    double lambda = 0.0;
    Eigen::VectorXd gram_diag;
    std::vector<Eigen::Index> support;
    bool converged = true;
    std::vector<Eigen::Index> skipped;     // zero-diagonal coordinates with nonzero moment
    std::vector<double> objective_trace;   // objective after each sweep

    void refresh_support();
};

// lambda_R = 2 log(log N) sqrt(log(p_h) / N).
double lambda_riesz(Eigen::Index n, Eigen::Index p_h);

struct RieszMoments {
    Eigen::MatrixXd Ghat;  // (1/N) sum h h'
    Eigen::VectorXd Mhat;  // -(1/N) sum d/dx1 h
};

RieszMoments compute_moments(const Eigen::Ref<const Eigen::MatrixXd>& H,
                             const Eigen::Ref<const Eigen::MatrixXd>& dH);

RieszFit fit_riesz(const Eigen::Ref<const Eigen::MatrixXd>& Ghat,
                   const Eigen::Ref<const Eigen::VectorXd>& Mhat, double lambda);

double predict_omega(const RieszFit& fit, const BasisExpansion& basis,
                     const Eigen::Ref<const Eigen::VectorXd>& x);

double riesz_objective(const Eigen::Ref<const Eigen::MatrixXd>& Ghat,
                       const Eigen::Ref<const Eigen::VectorXd>& Mhat,
                       const Eigen::Ref<const Eigen::VectorXd>& rho, double lambda);

}  // namespace uqpe
