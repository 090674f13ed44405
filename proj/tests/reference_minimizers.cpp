#include "reference_minimizers.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace refmin {
namespace {

double log1pexp(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
    return ((-z.array()).exp() + 1.0).inverse();
}

Eigen::VectorXd soft(const Eigen::VectorXd& v, const Eigen::VectorXd& t) {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (v[j] > t[j]) {
            out[j] = v[j] - t[j];
        } else if (v[j] < -t[j]) {
            out[j] = v[j] + t[j];
        } else {
            out[j] = 0.0;
        }
    }
    return out;
}

double largest_eigenvalue(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    return es.eigenvalues().maxCoeff();
}

}  // namespace

double logit_objective(const Eigen::MatrixXd& B, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double lambda,
                       const Eigen::VectorXd& psi) {
    const Eigen::VectorXd z = B * beta;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) acc += log1pexp(z[i]) - y[i] * z[i];
    double pen = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) pen += psi[j] * std::abs(beta[j]);
    const double n = static_cast<double>(B.rows());
    return acc / n + lambda / n * pen;
}

double quadratic_objective(const Eigen::MatrixXd& G, const Eigen::VectorXd& M,
                           const Eigen::VectorXd& rho, double lambda) {
    return -2.0 * M.dot(rho) + rho.dot(G * rho) + lambda * rho.lpNorm<1>();
}

Result fista_logit_lasso(const Eigen::MatrixXd& B, const Eigen::VectorXd& y,
                         double lambda, const Eigen::VectorXd& psi, int iters) {
    const double n = static_cast<double>(B.rows());
    const double lip = largest_eigenvalue(B.transpose() * B) / (4.0 * n) + 1e-12;
    const double step = 1.0 / lip;
    const Eigen::VectorXd thresholds = (lambda / n) * step * psi;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(B.cols());
    Eigen::VectorXd v = x;
    double t = 1.0;
    for (int k = 0; k < iters; ++k) {
        const Eigen::VectorXd grad = B.transpose() * (sigmoid(B * v) - y) / n;
        const Eigen::VectorXd x_next = soft(v - step * grad, thresholds);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        v = x_next + ((t - 1.0) / t_next) * (x_next - x);
        x = x_next;
        t = t_next;
    }
    return {x, logit_objective(B, y, x, lambda, psi)};
}

Result fista_quadratic_l1(const Eigen::MatrixXd& G, const Eigen::VectorXd& M,
                          double lambda, int iters) {
    const double lip = 2.0 * largest_eigenvalue(G) + 1e-12;
    const double step = 1.0 / lip;
    const Eigen::VectorXd thresholds =
        Eigen::VectorXd::Constant(G.cols(), step * lambda);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(G.cols());
    Eigen::VectorXd v = x;
    double t = 1.0;
    for (int k = 0; k < iters; ++k) {
        const Eigen::VectorXd grad = 2.0 * (G * v - M);
        const Eigen::VectorXd x_next = soft(v - step * grad, thresholds);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        v = x_next + ((t - 1.0) / t_next) * (x_next - x);
        x = x_next;
        t = t_next;
    }
    return {x, quadratic_objective(G, M, x, lambda)};
}

Result newton_logistic(const Eigen::MatrixXd& B, const Eigen::VectorXd& y, int iters) {
    const double n = static_cast<double>(B.rows());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(B.cols());
    for (int k = 0; k < iters; ++k) {
        const Eigen::VectorXd mu = sigmoid(B * beta);
        const Eigen::VectorXd grad = B.transpose() * (mu - y) / n;
        if (grad.lpNorm<Eigen::Infinity>() < 1e-13) break;
        const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).max(1e-12);
        const Eigen::MatrixXd hess =
            B.transpose() * w.asDiagonal() * B / n +
            1e-14 * Eigen::MatrixXd::Identity(B.cols(), B.cols());
        beta -= hess.ldlt().solve(grad);
    }
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(B.cols());
    return {beta, logit_objective(B, y, beta, 0.0, zero)};
}

Result solve_quadratic(const Eigen::MatrixXd& G, const Eigen::VectorXd& M) {
    const Eigen::VectorXd rho = G.ldlt().solve(M);
    return {rho, quadratic_objective(G, M, rho, 0.0)};
}

}  // namespace refmin
