#include "uqpe/density.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "uqpe/error.hpp"

namespace uqpe {
namespace {

Eigen::Index quantile_rank(Eigen::Index n, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw Error(errkind::precondition, "density", "tau must lie in (0,1)");
    }
    if (n < 1) {
        throw Error(errkind::empty_data, "density", "empty sample");
    }
    auto k = static_cast<Eigen::Index>(
        std::ceil(static_cast<double>(n) * tau - 1e-9));
    return std::clamp<Eigen::Index>(k, 1, n);
}

}  // namespace

double sorted_quantile(const Eigen::Ref<const Eigen::VectorXd>& y_sorted, double tau) {
    return y_sorted[quantile_rank(y_sorted.size(), tau) - 1];
}

double empirical_quantile(const Eigen::Ref<const Eigen::VectorXd>& y, double tau) {
    const Eigen::Index k = quantile_rank(y.size(), tau);
    std::vector<double> v(y.data(), y.data() + y.size());
    std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
    return v[static_cast<std::size_t>(k - 1)];
}

double bandwidth_rot(const Eigen::Ref<const Eigen::VectorXd>& y) {
    const Eigen::Index n = y.size();
    if (n < 2) {
        throw Error(errkind::precondition, "density", "bandwidth needs N >= 2");
    }
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().sum() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
        throw Error(errkind::zero_bandwidth, "density", "constant outcome: zero bandwidth");
    }
    return 1.06 * sd * std::pow(static_cast<double>(n), -0.21);
}

double kde(const Eigen::Ref<const Eigen::VectorXd>& y, double at, double h1,
           const KernelSpec& kernel) {
    if (!(h1 > 0.0)) {
        throw Error(errkind::precondition, "density", "bandwidth must be positive");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        sum += kernel((y[i] - at) / h1);
    }
    return sum / (static_cast<double>(y.size()) * h1);
}

double weighted_kde(const Eigen::Ref<const Eigen::VectorXd>& y,
                    const Eigen::Ref<const Eigen::VectorXd>& weights, double at,
                    double h1, const KernelSpec& kernel) {
    if (!(h1 > 0.0)) {
        throw Error(errkind::precondition, "density", "bandwidth must be positive");
    }
    if (y.size() != weights.size()) {
        throw Error(errkind::dimension, "density", "weights/sample length mismatch");
    }
    const double wsum = weights.sum();
    if (std::abs(wsum) <= static_cast<double>(y.size()) * 1e-9) {
        throw Error(errkind::degenerate_weights, "density", "weight sum too close to zero");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        sum += weights[i] * kernel((y[i] - at) / h1);
    }
    return sum / (wsum * h1);
}

BootstrapQuantileResult bootstrap_quantile(
    const Eigen::Ref<const Eigen::VectorXd>& y_sorted, double tau, double q_hat,
    const Eigen::Ref<const Eigen::VectorXd>& eta,
    const Eigen::Ref<const Eigen::VectorXd>& indicator_leq_qhat) {
    (void)q_hat;
    const Eigen::Index n = y_sorted.size();
    if (eta.size() != n || indicator_leq_qhat.size() != n) {
        throw Error(errkind::dimension, "density", "eta length mismatch");
    }
    const double shift = (eta.array() * (tau - indicator_leq_qhat.array())).sum();
    const double raw = 1.0 + static_cast<double>(n) * tau + shift;
    auto r = static_cast<Eigen::Index>(std::floor(raw));
    BootstrapQuantileResult res;
    if (r < 1 || r > n) {
        res.clamped = true;
        r = std::clamp<Eigen::Index>(r, 1, n);
    }
    res.order_index = r;
    res.value = y_sorted[r - 1];
    return res;
}

BootstrapQuantileResult bootstrap_quantile(const Eigen::Ref<const Eigen::VectorXd>& y,
                                           double tau, double q_hat,
                                           const Eigen::Ref<const Eigen::VectorXd>& eta) {
    Eigen::VectorXd ind(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) ind[i] = y[i] <= q_hat ? 1.0 : 0.0;
    Eigen::VectorXd sorted = y;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    return bootstrap_quantile(sorted, tau, q_hat, eta, ind);
}

}  // namespace uqpe
