#include "uqpe/lasso_logit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "uqpe/density.hpp"
#include "uqpe/error.hpp"
#include "uqpe/math.hpp"
#include "uqpe/threading.hpp"

namespace uqpe {
namespace {

constexpr double kSweepTol = 1e-7;
constexpr int kMaxSweeps = 1000;
constexpr int kMinSideCount = 5;  // stability floor for 1{Y <= q}

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

inline void logistic_inplace(const Eigen::VectorXd& z, Eigen::VectorXd& mu) {
    mu = ((-z.array()).exp() + 1.0).inverse();
}

double nll(const Eigen::MatrixXd& B, const Eigen::VectorXd& y,
           const Eigen::VectorXd& beta) {
    const Eigen::VectorXd z = B * beta;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        acc += log1pexp(z[i]) - y[i] * z[i];
    }
    return acc / static_cast<double>(z.size());
}

struct CdOutcome {
    Eigen::VectorXd beta;
    int sweeps = 0;
    bool converged = false;
};

// Cyclic coordinate descent with the global curvature bound 1/4: every
// coordinate step minimizes the quadratic majorizer, so the fixed point
// satisfies the exact KKT system of the weighted problem. An active-set
// cycle runs between full sweeps; convergence is only declared after a
// full sweep moves no coordinate by more than kSweepTol.
CdOutcome coordinate_descent(const Eigen::MatrixXd& B, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& penalty,  // weight on |beta_j|
                             const Eigen::VectorXd& curvature,
                             Eigen::VectorXd beta) {
    const Eigen::Index n = B.rows();
    const Eigen::Index p = B.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    Eigen::VectorXd z = B * beta;
    Eigen::VectorXd mu(n);
    logistic_inplace(z, mu);

    CdOutcome out;
    auto update_coord = [&](Eigen::Index j) -> double {
        if (curvature[j] <= 0.0) return 0.0;
        const double grad = B.col(j).dot(mu - y) * inv_n;
        const double cand = beta[j] - grad / curvature[j];
        const double next = soft_threshold(cand, penalty[j] / curvature[j]);
        const double delta = next - beta[j];
        if (delta != 0.0) {
            beta[j] = next;
            z += B.col(j) * delta;
            logistic_inplace(z, mu);
        }
        return std::abs(delta);
    };

    int sweeps = 0;
    while (sweeps < kMaxSweeps) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            max_delta = std::max(max_delta, update_coord(j));
        }
        ++sweeps;
        if (max_delta < kSweepTol) {
            out.converged = true;
            break;
        }
        std::vector<Eigen::Index> active;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (beta[j] != 0.0) active.push_back(j);
        }
        while (sweeps < kMaxSweeps) {
            double d = 0.0;
            for (Eigen::Index j : active) d = std::max(d, update_coord(j));
            ++sweeps;
            if (d < kSweepTol) break;
        }
    }
    out.beta = std::move(beta);
    out.sweeps = sweeps;
    return out;
}

Eigen::VectorXd loading_step(const Eigen::MatrixXd& B, const Eigen::VectorXd& sq_resid,
                             Eigen::Index intercept_col) {
    const double inv_n = 1.0 / static_cast<double>(B.rows());
    Eigen::VectorXd psi(B.cols());
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
        psi[j] = std::sqrt(B.col(j).array().square().matrix().dot(sq_resid) * inv_n);
    }
    if (intercept_col >= 0 && intercept_col < psi.size()) psi[intercept_col] = 0.0;
    return psi;
}

}  // namespace

LogisticMle logistic_mle(const Eigen::Ref<const Eigen::MatrixXd>& Bs,
                         const Eigen::Ref<const Eigen::VectorXd>& y,
                         double ridge, int max_iter) {
    const Eigen::Index n = Bs.rows();
    const Eigen::Index s = Bs.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    LogisticMle out;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(s);
    auto objective = [&](const Eigen::VectorXd& b) {
        return nll(Bs, y, b) + 0.5 * ridge * b.squaredNorm();
    };
    double f = objective(beta);

    Eigen::VectorXd z(n), mu(n), w(n), grad(s);
    Eigen::MatrixXd hess(s, s);
    for (int it = 0; it < max_iter; ++it) {
        z = Bs * beta;
        logistic_inplace(z, mu);
        grad = Bs.transpose() * (mu - y) * inv_n + ridge * beta;
        if (grad.lpNorm<Eigen::Infinity>() < 1e-10) {
            out.converged = true;
            out.iterations = it;
            break;
        }
        w = (mu.array() * (1.0 - mu.array())).max(1e-10);
        hess = Bs.transpose() * w.asDiagonal() * Bs * inv_n;
        hess.diagonal().array() += ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        if (ldlt.info() != Eigen::Success) break;
        const Eigen::VectorXd step = ldlt.solve(grad);
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            const Eigen::VectorXd cand = beta - t * step;
            const double fc = objective(cand);
            if (fc <= f - 1e-12 * t * grad.dot(step) || fc < f) {
                beta = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        out.iterations = it + 1;
        if (!accepted) break;
        if (beta.lpNorm<Eigen::Infinity>() > 1e3) break;  // separation drift
    }
    out.beta = std::move(beta);
    return out;
}

void LogitLassoFit::refresh_support(double eps) {
    support.clear();
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (std::abs(beta[j]) > eps) support.push_back(j);
    }
}

double lambda_logit(Eigen::Index n, Eigen::Index p_b) {
    if (n < 3 || p_b < 1) {
        throw Error(errkind::precondition, "lasso_logit", "need N >= 3 and p_b >= 1");
    }
    const double nn = static_cast<double>(n);
    const double dim = static_cast<double>(std::max(p_b, n));
    const double tail = (0.1 / std::log(nn)) / dim;
    return 1.1 * normal_icdf(1.0 - tail) * std::sqrt(nn);
}

LogitLassoFit fit_logit_lasso(const Eigen::Ref<const Eigen::MatrixXd>& B,
                              const Eigen::Ref<const Eigen::VectorXd>& y_ind,
                              double lambda, int K, Eigen::Index intercept_col) {
    const Eigen::Index n = B.rows();
    const Eigen::Index p = B.cols();
    if (y_ind.size() != n) {
        throw Error(errkind::dimension, "lasso_logit", "y length mismatch");
    }
    const double ones = y_ind.sum();
    if (ones <= 0.0 || ones >= static_cast<double>(n)) {
        throw Error(errkind::degenerate_outcome, "lasso_logit",
                    "indicator 1{Y<=q} is constant");
    }
    if (!B.allFinite()) {
        throw Error(errkind::data, "lasso_logit", "non-finite design entries");
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::VectorXd curvature(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        curvature[j] = 0.25 * B.col(j).squaredNorm() * inv_n;
    }

    Eigen::VectorXd psi = loading_step(B, y_ind, intercept_col);  // step-1 loadings
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    int sweeps = 0;
    bool converged = true;
    const double scale = lambda * inv_n;
    for (int k = 0; k < K; ++k) {
        CdOutcome cd = coordinate_descent(B, y_ind, scale * psi, curvature, beta);
        beta = std::move(cd.beta);
        sweeps += cd.sweeps;
        converged = converged && cd.converged;
        Eigen::VectorXd mu(n);
        {
            const Eigen::VectorXd z = B * beta;
            logistic_inplace(z, mu);
        }
        const Eigen::VectorXd sq_resid = (y_ind - mu).array().square();
        psi = loading_step(B, sq_resid, intercept_col);
    }
    CdOutcome final_cd = coordinate_descent(B, y_ind, scale * psi, curvature, beta);

    LogitLassoFit fit;
    fit.beta = std::move(final_cd.beta);
    fit.lambda = lambda;
    fit.loadings = std::move(psi);
    fit.iterations_used = sweeps + final_cd.sweeps;
    fit.converged = converged && final_cd.converged;
    fit.refresh_support();
    return fit;
}

LogitLassoFit post_lasso_refit(const LogitLassoFit& fit,
                               const Eigen::Ref<const Eigen::MatrixXd>& B,
                               const Eigen::Ref<const Eigen::VectorXd>& y_ind,
                               const std::vector<Eigen::Index>& S1,
                               Eigen::Index intercept_col) {
    const Eigen::Index p = B.cols();
    std::vector<char> keep(static_cast<std::size_t>(p), 0);
    for (Eigen::Index j : fit.support) keep[static_cast<std::size_t>(j)] = 1;
    for (Eigen::Index j : S1) {
        if (j < 0 || j >= p) {
            throw Error(errkind::dimension, "lasso_logit", "S1 index out of range");
        }
        keep[static_cast<std::size_t>(j)] = 1;
    }
    keep[static_cast<std::size_t>(intercept_col)] = 1;  // intercept-only MLE when all else empty

    std::vector<Eigen::Index> restricted;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (keep[static_cast<std::size_t>(j)]) restricted.push_back(j);
    }

    Eigen::MatrixXd Bs(B.rows(), static_cast<Eigen::Index>(restricted.size()));
    for (std::size_t k = 0; k < restricted.size(); ++k) {
        Bs.col(static_cast<Eigen::Index>(k)) = B.col(restricted[k]);
    }

    LogisticMle mle = logistic_mle(Bs, y_ind, 0.0);
    LogitLassoFit post = fit;
    post.post_lasso = true;
    post.ridge_stabilized = false;
    if (!mle.converged || !mle.beta.allFinite()) {
        mle = logistic_mle(Bs, y_ind, 1e-6, 200);
        post.ridge_stabilized = true;
    }
    post.beta = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k < restricted.size(); ++k) {
        post.beta[restricted[k]] = mle.beta[static_cast<Eigen::Index>(k)];
    }
    post.iterations_used = mle.iterations;
    post.converged = mle.converged || post.ridge_stabilized;
    post.refresh_support();
    return post;
}

std::vector<Eigen::Index> default_s1(const BasisExpansion& basis) {
    std::vector<Eigen::Index> s1{BasisExpansion::intercept_index()};
    const auto powers = basis.treatment_term_indices();
    s1.insert(s1.end(), powers.begin(), powers.end());
    return s1;
}

std::vector<double> equispaced_taus(double lo, double hi, int count) {
    std::vector<double> taus(static_cast<std::size_t>(count));
    for (int g = 0; g < count; ++g) {
        taus[static_cast<std::size_t>(g)] =
            count == 1 ? lo : lo + (hi - lo) * g / static_cast<double>(count - 1);
    }
    return taus;
}

QGridFits fit_q_grid(const Dataset& dataset, const BasisExpansion& basis,
                     const std::vector<double>& tau_grid, int K,
                     const std::vector<Eigen::Index>& S1, unsigned threads) {
    dataset.validate();
    for (std::size_t g = 0; g < tau_grid.size(); ++g) {
        if (!(tau_grid[g] > 0.0 && tau_grid[g] < 1.0)) {
            throw Error(errkind::precondition, "lasso_logit", "tau grid must lie in (0,1)");
        }
        if (g > 0 && !(tau_grid[g] > tau_grid[g - 1])) {
            throw Error(errkind::precondition, "lasso_logit",
                        "tau grid must be strictly increasing");
        }
    }

    const Eigen::VectorXd& y = dataset.outcome;
    const Eigen::Index n = y.size();
    Eigen::VectorXd y_sorted = y;
    std::sort(y_sorted.data(), y_sorted.data() + n);

    QGridFits out;
    std::vector<double> qs;
    std::vector<double> taus;
    for (double tau : tau_grid) {
        const double q = sorted_quantile(y_sorted, tau);
        if (!qs.empty() && !(q > qs.back())) {
            ++out.dropped_duplicate;
            continue;
        }
        Eigen::Index n_le = 0;
        for (Eigen::Index i = 0; i < n; ++i) n_le += (y[i] <= q) ? 1 : 0;
        if (n_le < kMinSideCount || n - n_le < kMinSideCount) {
            ++out.dropped_degenerate;
            continue;
        }
        qs.push_back(q);
        taus.push_back(tau);
    }
    if (qs.empty()) {
        throw Error(errkind::degenerate_outcome, "lasso_logit",
                    "every grid point has a degenerate indicator");
    }

    const Eigen::MatrixXd B = evaluate_basis_matrix(basis, dataset.covariates);
    const double lambda = lambda_logit(n, B.cols());

    out.q_grid = Eigen::Map<Eigen::VectorXd>(qs.data(), static_cast<Eigen::Index>(qs.size()));
    out.tau_grid = std::move(taus);
    out.fits.resize(qs.size());

    parallel_for(
        qs.size(),
        [&](std::size_t g) {
            const double q = qs[g];
            Eigen::VectorXd y_ind(n);
            for (Eigen::Index i = 0; i < n; ++i) y_ind[i] = y[i] <= q ? 1.0 : 0.0;
            LogitLassoFit lasso = fit_logit_lasso(B, y_ind, lambda, K);
            LogitLassoFit post = post_lasso_refit(lasso, B, y_ind, S1);
            post.q = q;
            out.fits[g] = std::move(post);
        },
        threads);
    return out;
}

Eigen::Index QGridFits::nearest_index(double q) const {
    const Eigen::Index g = q_grid.size();
    if (g == 0) {
        throw Error(errkind::empty_data, "lasso_logit", "empty q grid");
    }
    const double* begin = q_grid.data();
    const double* end = begin + g;
    const double* it = std::lower_bound(begin, end, q);
    if (it == begin) return 0;
    if (it == end) return g - 1;
    const Eigen::Index hi = static_cast<Eigen::Index>(it - begin);
    const Eigen::Index lo = hi - 1;
    const double d_lo = q - q_grid[lo];
    const double d_hi = q_grid[hi] - q;
    return d_hi < d_lo ? hi : lo;  // ties to the lower point
}

Eigen::Index QGridFits::lookup_strict(double q) const {
    const Eigen::Index g = q_grid.size();
    if (g == 0) {
        throw Error(errkind::empty_data, "lasso_logit", "empty q grid");
    }
    double tol = std::numeric_limits<double>::infinity();
    if (g > 1) {
        tol = 0.0;
        for (Eigen::Index i = 1; i < g; ++i) tol = std::max(tol, q_grid[i] - q_grid[i - 1]);
    }
    if (q < q_grid[0] - tol || q > q_grid[g - 1] + tol) {
        throw Error(errkind::extrapolation, "lasso_logit",
                    "q=" + std::to_string(q) + " outside fitted grid range [" +
                        std::to_string(q_grid[0]) + ", " + std::to_string(q_grid[g - 1]) + "]");
    }
    return nearest_index(q);
}

double predict_m0(const QGridFits& fits, const BasisExpansion& basis,
                  const Eigen::Ref<const Eigen::VectorXd>& x, double q) {
    const Eigen::Index g = fits.lookup_strict(q);
    const Eigen::VectorXd b = evaluate_basis(basis, x);
    return logistic(b.dot(fits.fits[static_cast<std::size_t>(g)].beta));
}

double predict_m1(const QGridFits& fits, const BasisExpansion& basis,
                  const Eigen::Ref<const Eigen::VectorXd>& x, double q) {
    const Eigen::Index g = fits.lookup_strict(q);
    const LogitLassoFit& fit = fits.fits[static_cast<std::size_t>(g)];
    const Eigen::VectorXd b = evaluate_basis(basis, x);
    const Eigen::VectorXd db = evaluate_basis_derivative(basis, x);
    const double m0 = logistic(b.dot(fit.beta));
    return m0 * (1.0 - m0) * db.dot(fit.beta);
}

Eigen::MatrixXd m0_matrix(const QGridFits& fits,
                          const Eigen::Ref<const Eigen::MatrixXd>& B) {
    const Eigen::Index g = fits.size();
    Eigen::MatrixXd beta(B.cols(), g);
    for (Eigen::Index k = 0; k < g; ++k) beta.col(k) = fits.fits[static_cast<std::size_t>(k)].beta;
    Eigen::MatrixXd z = B * beta;
    return ((-z.array()).exp() + 1.0).inverse();
}

Eigen::MatrixXd m1_matrix(const QGridFits& fits,
                          const Eigen::Ref<const Eigen::MatrixXd>& B,
                          const Eigen::Ref<const Eigen::MatrixXd>& dB) {
    const Eigen::Index g = fits.size();
    Eigen::MatrixXd beta(B.cols(), g);
    for (Eigen::Index k = 0; k < g; ++k) beta.col(k) = fits.fits[static_cast<std::size_t>(k)].beta;
    Eigen::MatrixXd mu = B * beta;
    mu = ((-mu.array()).exp() + 1.0).inverse();
    const Eigen::MatrixXd slope = dB * beta;
    return mu.array() * (1.0 - mu.array()) * slope.array();
}

double logit_lasso_objective(const Eigen::Ref<const Eigen::MatrixXd>& B,
                             const Eigen::Ref<const Eigen::VectorXd>& y_ind,
                             const Eigen::Ref<const Eigen::VectorXd>& beta,
                             double lambda,
                             const Eigen::Ref<const Eigen::VectorXd>& loadings) {
    double penalty = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        penalty += loadings[j] * std::abs(beta[j]);
    }
    return nll(B, y_ind, beta) + lambda / static_cast<double>(B.rows()) * penalty;
}

}  // namespace uqpe
