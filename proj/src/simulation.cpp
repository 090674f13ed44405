#include "uqpe/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Cholesky>

#include "uqpe/density.hpp"
#include "uqpe/error.hpp"
#include "uqpe/math.hpp"
#include "uqpe/rng.hpp"
#include "uqpe/threading.hpp"

namespace uqpe {
namespace {

constexpr Eigen::Index kOracleBlock = 16384;

}  // namespace

void DgpSpec::validate() const {
    if (dgp_id < 1 || dgp_id > 3) {
        throw Error(errkind::precondition, "simulation", "dgp_id must be 1, 2 or 3");
    }
    if (sparsity < 1 || sparsity > 4) {
        throw Error(errkind::precondition, "simulation", "sparsity must be 1..4 (i..iv)");
    }
    if (p < 2) {
        throw Error(errkind::precondition, "simulation", "p must be >= 2");
    }
    if (n < 2) {
        throw Error(errkind::precondition, "simulation", "n must be >= 2");
    }
}

int sparsity_from_label(const std::string& label) {
    if (label == "i" || label == "1") return 1;
    if (label == "ii" || label == "2") return 2;
    if (label == "iii" || label == "3") return 3;
    if (label == "iv" || label == "4") return 4;
    throw Error(errkind::precondition, "simulation", "unknown sparsity: " + label);
}

std::string sparsity_label(int sparsity) {
    switch (sparsity) {
        case 1: return "i";
        case 2: return "ii";
        case 3: return "iii";
        case 4: return "iv";
    }
    throw Error(errkind::precondition, "simulation", "unknown sparsity index");
}

double dgp_g(int dgp_id, double x) {
    switch (dgp_id) {
        case 1: return x;
        case 2: return x - 0.10 * x * x;
        default: return x - 0.10 * x * x + 0.01 * x * x * x;
    }
}

double dgp_g_prime(int dgp_id, double x) {
    switch (dgp_id) {
        case 1: return 1.0;
        case 2: return 1.0 - 0.20 * x;
        default: return 1.0 - 0.20 * x + 0.03 * x * x;
    }
}

Eigen::VectorXd dgp_coefficients(Eigen::Index p, int sparsity) {
    Eigen::VectorXd coef(p - 1);
    const double k = static_cast<double>(sparsity);
    for (Eigen::Index j = 2; j <= p; ++j) {
        const double expo = (static_cast<double>(j) + 2.0 * (k - 1.0)) / k;
        coef[j - 2] = std::pow(0.5, expo);
    }
    return coef;
}

const Eigen::MatrixXd& sigma_cholesky(Eigen::Index p_minus_1) {
    static std::mutex mutex;
    static std::map<Eigen::Index, Eigen::MatrixXd> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(p_minus_1);
    if (it != cache.end()) return it->second;

    Eigen::MatrixXd sigma(p_minus_1, p_minus_1);
    for (Eigen::Index r = 0; r < p_minus_1; ++r) {
        for (Eigen::Index c = 0; c < p_minus_1; ++c) {
            sigma(r, c) = std::pow(0.5, 2.0 * (std::abs(static_cast<double>(r - c)) + 1.0));
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw Error(errkind::data, "simulation", "covariance factorization failed");
    }
    return cache.emplace(p_minus_1, llt.matrixL()).first->second;
}

Dataset simulate_dataset(const DgpSpec& spec, std::uint64_t rep_seed) {
    spec.validate();
    const Eigen::Index n = spec.n;
    const Eigen::Index p = spec.p;
    const Eigen::MatrixXd& chol = sigma_cholesky(p - 1);
    const Eigen::VectorXd coef = dgp_coefficients(p, spec.sparsity);

    RngStream stream(derive_seed(spec.seed, streamtag::simulate, rep_seed));

    Dataset ds;
    ds.outcome.resize(n);
    ds.covariates.resize(n, p);
    ds.treatment_index = 0;

    // Per observation: p-1 normals for the controls, one for the treatment
    // noise, one for the outcome noise, in that fixed order.
    Eigen::VectorXd z(p - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p - 1; ++j) z[j] = stream.normal();
        const Eigen::VectorXd controls = chol.triangularView<Eigen::Lower>() * z;
        const double x1 = coef.dot(controls) + stream.normal();
        const double y = dgp_g(spec.dgp_id, x1) + coef.dot(controls) + stream.normal();
        ds.covariates(i, 0) = x1;
        ds.covariates.row(i).tail(p - 1) = controls.transpose();
        ds.outcome[i] = y;
    }
    return ds;
}

OracleCurves true_curves_oracle(const DgpSpec& spec, const std::vector<double>& taus,
                                Eigen::Index n0, unsigned threads) {
    spec.validate();
    if (n0 < 2) {
        throw Error(errkind::precondition, "simulation", "oracle sample too small");
    }
    const Eigen::Index p = spec.p;
    const Eigen::MatrixXd& chol = sigma_cholesky(p - 1);
    const Eigen::VectorXd coef = dgp_coefficients(p, spec.sparsity);

    Eigen::VectorXd mu(n0);       // E[Y|X]
    Eigen::VectorXd gprime(n0);   // g'(X_1)
    Eigen::VectorXd y(n0);

    const Eigen::Index blocks = (n0 + kOracleBlock - 1) / kOracleBlock;
    parallel_for(
        static_cast<std::size_t>(blocks),
        [&](std::size_t blk) {
            const Eigen::Index lo = static_cast<Eigen::Index>(blk) * kOracleBlock;
            const Eigen::Index len = std::min(kOracleBlock, n0 - lo);
            RngStream stream(derive_seed(spec.seed, streamtag::oracle, blk));
            Eigen::MatrixXd z(len, p - 1);
            for (Eigen::Index i = 0; i < len; ++i) {
                for (Eigen::Index j = 0; j < p - 1; ++j) z(i, j) = stream.normal();
            }
            const Eigen::MatrixXd controls = z * chol.transpose();
            const Eigen::VectorXd lin = controls * coef;
            for (Eigen::Index i = 0; i < len; ++i) {
                const double x1 = lin[i] + stream.normal();
                const double m = dgp_g(spec.dgp_id, x1) + lin[i];
                mu[lo + i] = m;
                gprime[lo + i] = dgp_g_prime(spec.dgp_id, x1);
                y[lo + i] = m + stream.normal();
            }
        },
        threads);

    static const double inv_sqrt_2pi = 0.3989422804014326779;
    OracleCurves curves;
    curves.tau = taus;
    for (double tau : taus) {
        const double q = empirical_quantile(y, tau);
        // Ordered block reduction keeps the result thread-count independent.
        double num = 0.0, den = 0.0;
        for (Eigen::Index lo = 0; lo < n0; lo += kOracleBlock) {
            const Eigen::Index len = std::min(kOracleBlock, n0 - lo);
            const Eigen::ArrayXd phi =
                (-0.5 * (q - mu.segment(lo, len).array()).square()).exp();
            num += (phi * gprime.segment(lo, len).array()).sum();
            den += phi.sum();
        }
        if (!(den > 0.0)) {
            throw Error(errkind::data, "simulation", "oracle density underflow");
        }
        curves.q.push_back(q);
        curves.uqpe.push_back(num / den);
        curves.theta.push_back(-inv_sqrt_2pi * num / static_cast<double>(n0));
        curves.f_y.push_back(inv_sqrt_2pi * den / static_cast<double>(n0));
    }
    return curves;
}

std::vector<double> true_uqpe_oracle(const DgpSpec& spec, const std::vector<double>& taus,
                                     Eigen::Index n0, unsigned threads) {
    return true_curves_oracle(spec, taus, n0, threads).uqpe;
}

double true_uqpe_oracle(const DgpSpec& spec, double tau, Eigen::Index n0,
                        unsigned threads) {
    return true_uqpe_oracle(spec, std::vector<double>{tau}, n0, threads)[0];
}

McMetrics run_mc_study(const DgpSpec& spec, int reps, const UqpeConfig& config,
                       EstimatorKind estimator, const McOptions& options) {
    spec.validate();
    config.validate();
    if (reps < 2) {
        throw Error(errkind::precondition, "simulation", "reps must be >= 2");
    }
    const auto start = std::chrono::steady_clock::now();

    UqpeConfig rep_config = config;
    rep_config.estimator = estimator;
    rep_config.threads = 1;  // replications carry the parallelism

    const std::vector<double>& taus = config.tau_set;
    const auto t_count = taus.size();
    const std::vector<double> truth = true_uqpe_oracle(spec, taus, options.oracle_n,
                                                       options.threads);

    struct RepRecord {
        std::vector<double> estimate;
        std::vector<char> pw_cover;
        char unif_cover = 0;
        bool failed = false;
    };
    std::vector<RepRecord> records(static_cast<std::size_t>(reps));

    parallel_for(
        static_cast<std::size_t>(reps),
        [&](std::size_t r) {
            RepRecord& rec = records[r];
            try {
                const Dataset ds = simulate_dataset(spec, r);
                UqpeConfig cfg = rep_config;
                cfg.seed = derive_seed(config.seed, kMcReplicationTag, r);
                const UqpeEstimate est = estimate_all(ds, cfg);
                rec.estimate.resize(t_count);
                rec.pw_cover.resize(t_count);
                bool unif = true;
                for (std::size_t t = 0; t < t_count; ++t) {
                    const PerTauEstimate& row = est.per_tau[t];
                    rec.estimate[t] = row.uqpe_hat;
                    rec.pw_cover[t] =
                        (truth[t] >= row.uqpe_pw_lo && truth[t] <= row.uqpe_pw_hi) ? 1 : 0;
                    unif = unif && truth[t] >= row.uqpe_unif_lo && truth[t] <= row.uqpe_unif_hi;
                }
                rec.unif_cover = unif ? 1 : 0;
            } catch (const std::exception&) {
                rec.failed = true;
            }
        },
        options.threads);

    McMetrics metrics;
    metrics.tau = taus;
    metrics.true_uqpe = truth;
    metrics.mean_estimate.assign(t_count, 0.0);
    metrics.bias.assign(t_count, 0.0);
    metrics.rmse.assign(t_count, 0.0);
    metrics.pointwise_coverage.assign(t_count, 0.0);

    int completed = 0;
    int failed = 0;
    double unif_sum = 0.0;
    for (const RepRecord& rec : records) {
        if (rec.failed) {
            ++failed;
            continue;
        }
        ++completed;
        unif_sum += rec.unif_cover;
        for (std::size_t t = 0; t < t_count; ++t) {
            metrics.mean_estimate[t] += rec.estimate[t];
            metrics.rmse[t] += (rec.estimate[t] - truth[t]) * (rec.estimate[t] - truth[t]);
            metrics.pointwise_coverage[t] += rec.pw_cover[t];
        }
    }
    if (failed > 0 && failed * 20 > reps) {  // > 5%
        throw Error(errkind::study, "simulation",
                    "replication failure rate above 5%: " + std::to_string(failed) + "/" +
                        std::to_string(reps));
    }
    if (completed == 0) {
        throw Error(errkind::study, "simulation", "all replications failed");
    }
    for (std::size_t t = 0; t < t_count; ++t) {
        metrics.mean_estimate[t] /= completed;
        metrics.rmse[t] = std::sqrt(metrics.rmse[t] / completed);
        metrics.bias[t] = metrics.mean_estimate[t] - truth[t];
        metrics.pointwise_coverage[t] /= completed;
    }
    metrics.uniform_coverage = unif_sum / completed;
    metrics.reps_completed = completed;
    metrics.reps_failed = failed;
    metrics.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return metrics;
}

}  // namespace uqpe
