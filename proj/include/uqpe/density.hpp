#pragma once

#include <Eigen/Core>

namespace uqpe {

// Second-order symmetric compactly supported kernel. Only Epanechnikov is
// provided: K(u) = 0.75 (1 - u^2) on |u| <= 1.
struct KernelSpec {
    double support_radius = 1.0;
    double operator()(double u) const {
        const double a = std::abs(u);
        return a <= support_radius ? 0.75 * (1.0 - u * u) : 0.0;
    }
};

// ceil(N*tau)-th order statistic (type-1 quantile). The product N*tau is
// nudged by 1e-9 before the ceiling so values meant to be exact integers
// (e.g. 5 * 0.2) are not pushed up by IEEE noise.
double empirical_quantile(const Eigen::Ref<const Eigen::VectorXd>& y, double tau);

// Same convention on a pre-sorted sample.
double sorted_quantile(const Eigen::Ref<const Eigen::VectorXd>& y_sorted, double tau);

// Undersmoothed rule of thumb 1.06 * sd(Y) * N^(-0.21).
double bandwidth_rot(const Eigen::Ref<const Eigen::VectorXd>& y);

double kde(const Eigen::Ref<const Eigen::VectorXd>& y, double at, double h1,
           const KernelSpec& kernel = {});

// Normalized by the (possibly negative) weight sum; caller guards the sign.
double weighted_kde(const Eigen::Ref<const Eigen::VectorXd>& y,
                    const Eigen::Ref<const Eigen::VectorXd>& weights, double at,
                    double h1, const KernelSpec& kernel = {});

struct BootstrapQuantileResult {
    double value = 0.0;
    Eigen::Index order_index = 0;  // 1-based r*
    bool clamped = false;          // r* fell outside [1, N]
};

// Multiplier-bootstrap quantile: the r*-th order statistic of Y with
// r* = floor(1 + N*tau + sum_i eta_i (tau - 1{Y_i <= q_hat})), clamped to [1, N].
// y_sorted must be ascending; eta and indicator_leq_qhat are in original
// observation order (only their inner product with tau matters).
BootstrapQuantileResult bootstrap_quantile(
    const Eigen::Ref<const Eigen::VectorXd>& y_sorted, double tau, double q_hat,
    const Eigen::Ref<const Eigen::VectorXd>& eta,
    const Eigen::Ref<const Eigen::VectorXd>& indicator_leq_qhat);

// Convenience overload computing the indicator from unsorted y.
BootstrapQuantileResult bootstrap_quantile(const Eigen::Ref<const Eigen::VectorXd>& y,
                                           double tau, double q_hat,
                                           const Eigen::Ref<const Eigen::VectorXd>& eta);

}  // namespace uqpe
