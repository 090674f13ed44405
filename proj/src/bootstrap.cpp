#include "uqpe/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "uqpe/density.hpp"
#include "uqpe/error.hpp"
#include "uqpe/math.hpp"
#include "uqpe/rng.hpp"
#include "uqpe/threading.hpp"

namespace uqpe {
namespace {

constexpr int kMaxRedraws = 5;

// ceil(B * level) order statistic, the convention shared with
// empirical_quantile.
double draw_quantile(std::vector<double> v, double level) {
    const auto b = static_cast<double>(v.size());
    auto k = static_cast<std::ptrdiff_t>(std::ceil(b * level - 1e-9));
    k = std::clamp<std::ptrdiff_t>(k, 1, static_cast<std::ptrdiff_t>(v.size()));
    std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
    return v[static_cast<std::size_t>(k - 1)];
}

}  // namespace

Eigen::VectorXd draw_multipliers(Eigen::Index n, std::uint64_t stream_seed) {
    RngStream stream(stream_seed);
    return stream.normals(n);
}

ReplicateResult bootstrap_replicate(const FittedNuisance& nuisance,
                                    const PointEstimates& point,
                                    const Eigen::Ref<const Eigen::VectorXd>& eta) {
    const Eigen::Index n = nuisance.n();
    if (eta.size() != n) {
        throw Error(errkind::dimension, "bootstrap", "eta length mismatch");
    }
    const Eigen::VectorXd weights = eta.array() + 1.0;
    const double wsum = weights.sum();
    if (std::abs(wsum) <= static_cast<double>(n) * 1e-9) {
        throw Error(errkind::degenerate_weights, "bootstrap", "weight sum near zero");
    }

    const auto t_count = static_cast<Eigen::Index>(point.tau.size());
    ReplicateResult rep;
    rep.theta.resize(t_count);
    rep.uqpe.resize(t_count);
    rep.q.resize(t_count);
    for (Eigen::Index t = 0; t < t_count; ++t) {
        const double tau = point.tau[static_cast<std::size_t>(t)];
        const BootstrapQuantileResult bq = bootstrap_quantile(
            nuisance.y_sorted, tau, point.q_hat[t], eta, point.ind_q_hat.col(t));
        if (bq.clamped) ++rep.rstar_clamps;
        const double q_star = bq.value;
        rep.q[t] = q_star;

        const Eigen::Index g = nuisance.qfits.nearest_index(q_star);
        const Eigen::Index last = nuisance.qfits.size() - 1;
        if ((g == 0 && q_star < nuisance.qfits.q_grid[0]) ||
            (g == last && q_star > nuisance.qfits.q_grid[last])) {
            ++rep.grid_edge_clamps;
        }
        const Eigen::ArrayXd ind = (nuisance.y.array() <= q_star).cast<double>();
        const Eigen::ArrayXd score =
            nuisance.m1.col(g).array() -
            nuisance.omega.array() * (ind - nuisance.m0.col(g).array());
        rep.theta[t] = (weights.array() * score).sum() / wsum;

        const double f_star = weighted_kde(nuisance.y, weights, q_star, nuisance.h1);
        if (f_star <= nuisance.f_floor) {
            rep.density_floor_hit = true;
            return rep;
        }
        rep.uqpe[t] = -rep.theta[t] / f_star;
    }
    return rep;
}

BootstrapDraws run_bootstrap_draws(const FittedNuisance& nuisance,
                                   const PointEstimates& point, int B,
                                   std::uint64_t seed, unsigned threads) {
    if (B < 2) {
        throw Error(errkind::precondition, "bootstrap", "B must be >= 2");
    }
    const auto t_count = static_cast<Eigen::Index>(point.tau.size());
    const Eigen::Index n = nuisance.n();

    BootstrapDraws draws;
    draws.theta_star.resize(B, t_count);
    draws.uqpe_star.resize(B, t_count);
    draws.q_star.resize(B, t_count);

    std::vector<ReplicateResult> slots(static_cast<std::size_t>(B));
    std::vector<Eigen::Index> redraws(static_cast<std::size_t>(B), 0);

    parallel_for(
        static_cast<std::size_t>(B),
        [&](std::size_t b) {
            for (int attempt = 0;; ++attempt) {
                if (attempt > kMaxRedraws) {
                    throw Error(errkind::degenerate_weights, "bootstrap",
                                "replicate exceeded redraw budget");
                }
                const Eigen::VectorXd eta = draw_multipliers(
                    n, derive_seed(seed, streamtag::bootstrap, b, static_cast<std::uint64_t>(attempt)));
                try {
                    ReplicateResult rep = bootstrap_replicate(nuisance, point, eta);
                    if (rep.density_floor_hit) {
                        ++redraws[b];
                        continue;
                    }
                    slots[b] = std::move(rep);
                    break;
                } catch (const Error& e) {
                    if (std::string(e.kind()) == errkind::degenerate_weights) {
                        ++redraws[b];
                        continue;
                    }
                    throw;
                }
            }
        },
        threads);

    for (int b = 0; b < B; ++b) {
        const ReplicateResult& rep = slots[static_cast<std::size_t>(b)];
        draws.theta_star.row(b) = rep.theta.transpose();
        draws.uqpe_star.row(b) = rep.uqpe.transpose();
        draws.q_star.row(b) = rep.q.transpose();
        draws.rstar_clamp_count += rep.rstar_clamps;
        draws.grid_edge_clamp_count += rep.grid_edge_clamps;
        draws.redraw_count += redraws[static_cast<std::size_t>(b)];
    }
    if (!draws.theta_star.allFinite() || !draws.uqpe_star.allFinite()) {
        throw Error(errkind::data, "bootstrap", "non-finite bootstrap draws");
    }
    return draws;
}

double se_iqr(const Eigen::Ref<const Eigen::VectorXd>& draws) {
    if (draws.size() < 4) {
        throw Error(errkind::precondition, "bootstrap", "se_iqr needs B >= 4");
    }
    std::vector<double> v(draws.data(), draws.data() + draws.size());
    const double q75 = draw_quantile(v, 0.75);
    const double q25 = draw_quantile(v, 0.25);
    const double iqr = q75 - q25;
    if (!(iqr > 0.0)) {
        throw Error(errkind::degenerate_draws, "bootstrap", "zero interquartile range");
    }
    return iqr / kNormalQuartileSpread;
}

double uniform_critical_value(const Eigen::Ref<const Eigen::MatrixXd>& draws_star,
                              const Eigen::Ref<const Eigen::VectorXd>& point,
                              const Eigen::Ref<const Eigen::VectorXd>& sigma,
                              double alpha) {
    const Eigen::Index B = draws_star.rows();
    const Eigen::Index T = draws_star.cols();
    if (point.size() != T || sigma.size() != T) {
        throw Error(errkind::dimension, "bootstrap", "point/sigma length mismatch");
    }
    if ((sigma.array() <= 0.0).any()) {
        throw Error(errkind::precondition, "bootstrap", "sigma must be positive");
    }
    if (!draws_star.allFinite() || !point.allFinite()) {
        throw Error(errkind::data, "bootstrap", "non-finite inputs");
    }
    std::vector<double> sup(static_cast<std::size_t>(B));
    for (Eigen::Index b = 0; b < B; ++b) {
        double s = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) {
            s = std::max(s, std::abs((draws_star(b, t) - point[t]) / sigma[t]));
        }
        sup[static_cast<std::size_t>(b)] = s;
    }
    return draw_quantile(std::move(sup), 1.0 - alpha);
}

Band build_bands(const Eigen::Ref<const Eigen::VectorXd>& point,
                 const Eigen::Ref<const Eigen::VectorXd>& sigma, double critical) {
    if (critical < 0.0) {
        throw Error(errkind::precondition, "bootstrap", "critical value must be >= 0");
    }
    Band band;
    band.lo = point - critical * sigma;
    band.hi = point + critical * sigma;
    return band;
}

bool test_zero_uqpe(const Band& theta_band) {
    for (Eigen::Index t = 0; t < theta_band.lo.size(); ++t) {
        if (theta_band.lo[t] > 0.0 || theta_band.hi[t] < 0.0) return true;
    }
    return false;
}

InferenceResult bootstrap_inference(const BootstrapDraws& draws,
                                    const Eigen::Ref<const Eigen::VectorXd>& theta_point,
                                    const Eigen::Ref<const Eigen::VectorXd>& uqpe_point,
                                    double alpha) {
    const Eigen::Index T = draws.theta_star.cols();
    InferenceResult inf;
    inf.se_theta.resize(T);
    inf.se_uqpe.resize(T);
    inf.c_theta_pw.resize(T);
    inf.c_uqpe_pw.resize(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        inf.se_theta[t] = se_iqr(draws.theta_star.col(t));
        inf.se_uqpe[t] = se_iqr(draws.uqpe_star.col(t));
        inf.c_theta_pw[t] = uniform_critical_value(
            draws.theta_star.col(t), theta_point.segment(t, 1), inf.se_theta.segment(t, 1), alpha);
        inf.c_uqpe_pw[t] = uniform_critical_value(
            draws.uqpe_star.col(t), uqpe_point.segment(t, 1), inf.se_uqpe.segment(t, 1), alpha);
    }
    inf.c_theta_uniform =
        uniform_critical_value(draws.theta_star, theta_point, inf.se_theta, alpha);
    inf.c_uqpe_uniform =
        uniform_critical_value(draws.uqpe_star, uqpe_point, inf.se_uqpe, alpha);

    inf.theta_pw.lo.resize(T);
    inf.theta_pw.hi.resize(T);
    inf.uqpe_pw.lo.resize(T);
    inf.uqpe_pw.hi.resize(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        inf.theta_pw.lo[t] = theta_point[t] - inf.c_theta_pw[t] * inf.se_theta[t];
        inf.theta_pw.hi[t] = theta_point[t] + inf.c_theta_pw[t] * inf.se_theta[t];
        inf.uqpe_pw.lo[t] = uqpe_point[t] - inf.c_uqpe_pw[t] * inf.se_uqpe[t];
        inf.uqpe_pw.hi[t] = uqpe_point[t] + inf.c_uqpe_pw[t] * inf.se_uqpe[t];
    }
    inf.theta_unif = build_bands(theta_point, inf.se_theta, inf.c_theta_uniform);
    inf.uqpe_unif = build_bands(uqpe_point, inf.se_uqpe, inf.c_uqpe_uniform);
    inf.zero_uqpe_rejected = test_zero_uqpe(inf.theta_unif);
    return inf;
}

}  // namespace uqpe
