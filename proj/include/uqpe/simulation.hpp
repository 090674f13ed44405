#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "uqpe/dataset.hpp"
#include "uqpe/estimator.hpp"

namespace uqpe {

// Partial linear Gaussian designs: Y|X ~ N(g(X_1) + sum a_j X_j, 1),
// X_1|X_-1 ~ N(sum c_j X_j, 1), X_-1 ~ N(0, Sigma) with
// Sigma(r,c) = 0.5^(2(|r-c|+1)). dgp_id picks g, sparsity picks the
// coefficient decay (i)-(iv).
struct DgpSpec {
    int dgp_id = 1;    // 1: x, 2: x - 0.10 x^2, 3: x - 0.10 x^2 + 0.01 x^3
    int sparsity = 1;  // 1..4 for (i)..(iv)
    Eigen::Index n = 500;
    Eigen::Index p = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

int sparsity_from_label(const std::string& label);       // "i".."iv"
std::string sparsity_label(int sparsity);

double dgp_g(int dgp_id, double x);
double dgp_g_prime(int dgp_id, double x);

// alpha_j = gamma_j = 0.5^((j + 2(k-1))/k) for j = 2..p, k = sparsity.
Eigen::VectorXd dgp_coefficients(Eigen::Index p, int sparsity);

// Lower Cholesky factor of Sigma_{p-1}; factorizations are cached per p.
const Eigen::MatrixXd& sigma_cholesky(Eigen::Index p_minus_1);

Dataset simulate_dataset(const DgpSpec& spec, std::uint64_t rep_seed);

// Large-sample truth under the analytic conditional law Y|X ~ N(mu(X), 1):
// theta(tau) = -E[phi(q_tau - mu) g'(X_1)], f_Y(q_tau) = E[phi(q_tau - mu)],
// UQPE = -theta/f, with q_tau the empirical quantile of simulated Y.
struct OracleCurves {
    std::vector<double> tau;
    std::vector<double> q;
    std::vector<double> theta;
    std::vector<double> f_y;
    std::vector<double> uqpe;
};

OracleCurves true_curves_oracle(const DgpSpec& spec, const std::vector<double>& taus,
                                Eigen::Index n0, unsigned threads = 1);

// Analytic phi-ratio truth: UQPE(tau) = E[phi(q - mu) g'(X_1)] / E[phi(q - mu)]
// with q the large-sample quantile of simulated Y.
std::vector<double> true_uqpe_oracle(const DgpSpec& spec, const std::vector<double>& taus,
                                     Eigen::Index n0, unsigned threads = 1);
double true_uqpe_oracle(const DgpSpec& spec, double tau, Eigen::Index n0,
                        unsigned threads = 1);

// Bootstrap-seed derivation tag for replication r inside run_mc_study:
// replication config seed = derive_seed(config.seed, kMcReplicationTag, r).
inline constexpr std::uint64_t kMcReplicationTag = 0x4d435f5245505f42ULL;

struct McMetrics {
    std::vector<double> tau;
    std::vector<double> true_uqpe;
    std::vector<double> mean_estimate;
    std::vector<double> bias;
    std::vector<double> rmse;
    std::vector<double> pointwise_coverage;
    double uniform_coverage = 0.0;
    int reps_completed = 0;
    int reps_failed = 0;
    double runtime_seconds = 0.0;
};

struct McOptions {
    Eigen::Index oracle_n = 1000000;
    unsigned threads = 1;  // across replications
};

// Per replication: fresh dataset from (spec, r), full estimate under config
// (with a replication-derived bootstrap seed), coverage flags against the
// oracle truth. Replication failures are excluded; above 5% they abort.
McMetrics run_mc_study(const DgpSpec& spec, int reps, const UqpeConfig& config,
                       EstimatorKind estimator, const McOptions& options = {});

}  // namespace uqpe
