#include "uqpe/riesz.hpp"

#include <cmath>

#include "uqpe/error.hpp"

namespace uqpe {
namespace {

constexpr double kCoordTol = 1e-10;
constexpr double kKktTol = 1e-9;  // keeps the 1e-8 contract with margin
constexpr int kMaxSweeps = 10000;

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

void RieszFit::refresh_support() {
    support.clear();
    for (Eigen::Index j = 0; j < rho.size(); ++j) {
        if (rho[j] != 0.0) support.push_back(j);
    }
}

double lambda_riesz(Eigen::Index n, Eigen::Index p_h) {
    if (n < 3 || p_h < 2) {
        throw Error(errkind::precondition, "riesz", "need N >= 3 and p_h >= 2");
    }
    const double nn = static_cast<double>(n);
    return 2.0 * std::log(std::log(nn)) *
           std::sqrt(std::log(static_cast<double>(p_h)) / nn);
}

RieszMoments compute_moments(const Eigen::Ref<const Eigen::MatrixXd>& H,
                             const Eigen::Ref<const Eigen::MatrixXd>& dH) {
    if (H.rows() != dH.rows() || H.cols() != dH.cols()) {
        throw Error(errkind::dimension, "riesz", "H/dH shape mismatch");
    }
    if (!H.allFinite() || !dH.allFinite()) {
        throw Error(errkind::data, "riesz", "non-finite dictionary entries");
    }
    const double inv_n = 1.0 / static_cast<double>(H.rows());
    RieszMoments m;
    m.Ghat = Eigen::MatrixXd::Zero(H.cols(), H.cols());
    m.Ghat.selfadjointView<Eigen::Lower>().rankUpdate(H.transpose(), inv_n);
    m.Ghat.triangularView<Eigen::StrictlyUpper>() =
        m.Ghat.triangularView<Eigen::StrictlyLower>().transpose();
    m.Mhat = -dH.colwise().mean();
    return m;
}

RieszFit fit_riesz(const Eigen::Ref<const Eigen::MatrixXd>& Ghat,
                   const Eigen::Ref<const Eigen::VectorXd>& Mhat, double lambda) {
    const Eigen::Index p = Ghat.rows();
    if (Ghat.cols() != p || Mhat.size() != p) {
        throw Error(errkind::dimension, "riesz", "Ghat/Mhat shape mismatch");
    }

    RieszFit fit;
    fit.lambda = lambda;
    fit.gram_diag = Ghat.diagonal();
    fit.rho = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (fit.gram_diag[j] <= 0.0 && Mhat[j] != 0.0) fit.skipped.push_back(j);
    }

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);  // Ghat * rho, kept incrementally
    const double half_lambda = 0.5 * lambda;

    auto update_coord = [&](Eigen::Index j) -> double {
        const double diag = fit.gram_diag[j];
        if (diag <= 0.0) return 0.0;
        const double partial = Mhat[j] - (grad[j] - diag * fit.rho[j]);
        const double next = soft_threshold(partial, half_lambda) / diag;
        const double delta = next - fit.rho[j];
        if (delta != 0.0) {
            fit.rho[j] = next;
            grad += Ghat.col(j) * delta;
        }
        return std::abs(delta);
    };

    // KKT residual of the penalized quadratic at the current iterate, from a
    // freshly computed gradient (the incremental one is only used inside
    // sweeps).
    auto kkt_violation = [&]() {
        grad = Ghat * fit.rho;
        double worst = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (fit.gram_diag[j] <= 0.0) continue;
            const double score = 2.0 * (Mhat[j] - grad[j]);
            if (fit.rho[j] == 0.0) {
                worst = std::max(worst, std::abs(score) - lambda);
            } else {
                worst = std::max(worst,
                                 std::abs(score - lambda * (fit.rho[j] > 0 ? 1.0 : -1.0)));
            }
        }
        return worst;
    };

    int sweeps = 0;
    fit.converged = false;
    while (sweeps < kMaxSweeps) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            max_delta = std::max(max_delta, update_coord(j));
        }
        ++sweeps;
        fit.objective_trace.push_back(riesz_objective(Ghat, Mhat, fit.rho, lambda));
        if (max_delta < kCoordTol && kkt_violation() <= kKktTol) {
            fit.converged = true;
            break;
        }
        std::vector<Eigen::Index> active;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (fit.rho[j] != 0.0) active.push_back(j);
        }
        while (sweeps < kMaxSweeps) {
            double d = 0.0;
            for (Eigen::Index j : active) d = std::max(d, update_coord(j));
            ++sweeps;
            fit.objective_trace.push_back(riesz_objective(Ghat, Mhat, fit.rho, lambda));
            if (d < kCoordTol) break;
        }
    }
    fit.refresh_support();
    return fit;
}

double predict_omega(const RieszFit& fit, const BasisExpansion& basis,
                     const Eigen::Ref<const Eigen::VectorXd>& x) {
    const Eigen::VectorXd h = evaluate_basis(basis, x);
    if (h.size() != fit.rho.size()) {
        throw Error(errkind::dimension, "riesz", "dictionary/rho length mismatch");
    }
    return h.dot(fit.rho);
}

double riesz_objective(const Eigen::Ref<const Eigen::MatrixXd>& Ghat,
                       const Eigen::Ref<const Eigen::VectorXd>& Mhat,
                       const Eigen::Ref<const Eigen::VectorXd>& rho, double lambda) {
    return -2.0 * Mhat.dot(rho) + rho.dot(Ghat * rho) + lambda * rho.lpNorm<1>();
}

}  // namespace uqpe
