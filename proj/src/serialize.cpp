#include "uqpe/serialize.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uqpe/error.hpp"
#include "uqpe/version.hpp"

namespace uqpe {
namespace {

using nlohmann::json;

json sparse_vector(const Eigen::VectorXd& v) {
    json idx = json::array();
    json val = json::array();
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (v[j] != 0.0) {
            idx.push_back(j);
            val.push_back(v[j]);
        }
    }
    return json{{"size", v.size()}, {"index", idx}, {"value", val}};
}

json dense_vector(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index j = 0; j < v.size(); ++j) out.push_back(v[j]);
    return out;
}

json basis_to_json(const BasisExpansion& basis) {
    json terms = json::array();
    for (const BasisTerm& t : basis.terms) {
        terms.push_back(json{{"variable", t.variable}, {"power", t.power}});
    }
    return json{{"n_variables", basis.n_variables},
                {"treatment_index", basis.treatment_index},
                {"degree", basis.degree},
                {"terms", terms},
                {"scale_factors", dense_vector(basis.scale_factors)}};
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

json config_to_json(const UqpeConfig& config) {
    return json{{"tau_set", config.tau_set},
                {"upsilon", {config.upsilon_lo, config.upsilon_hi}},
                {"grid_taus", config.grid_taus},
                {"alpha", config.alpha},
                {"bootstrap_B", config.bootstrap_B},
                {"seed", config.seed},
                {"k_loadings", config.k_loadings},
                {"debias", config.debias},
                {"estimator", estimator_name(config.estimator)}};
}

json estimate_to_json(const UqpeEstimate& estimate) {
    json rows = json::array();
    for (const PerTauEstimate& r : estimate.per_tau) {
        rows.push_back(json{{"tau", r.tau},
                            {"q_tau", r.q_tau},
                            {"theta_hat", r.theta_hat},
                            {"f_hat", r.f_hat},
                            {"uqpe_hat", r.uqpe_hat},
                            {"se_theta", r.se_theta},
                            {"se_uqpe", r.se_uqpe},
                            {"theta_pointwise", {r.theta_pw_lo, r.theta_pw_hi}},
                            {"theta_uniform", {r.theta_unif_lo, r.theta_unif_hi}},
                            {"uqpe_pointwise", {r.uqpe_pw_lo, r.uqpe_pw_hi}},
                            {"uqpe_uniform", {r.uqpe_unif_lo, r.uqpe_unif_hi}},
                            {"c_theta_pointwise", r.c_theta_pointwise},
                            {"c_uqpe_pointwise", r.c_uqpe_pointwise}});
    }
    const Diagnostics& d = estimate.diagnostics;
    return json{{"schema_version", kSchemaVersion},
                {"library_version", kVersion},
                {"config", config_to_json(estimate.config)},
                {"per_tau", rows},
                {"c_theta_uniform", estimate.c_theta_uniform},
                {"c_uqpe_uniform", estimate.c_uqpe_uniform},
                {"zero_uqpe_test",
                 estimate.zero_uqpe_rejected ? "reject" : "fail_to_reject"},
                {"diagnostics",
                 json{{"bandwidth", d.bandwidth},
                      {"f_floor", d.f_floor},
                      {"lambda_logit", d.lambda_logit_value},
                      {"lambda_riesz", d.lambda_riesz_value},
                      {"rstar_clamp_count", d.rstar_clamp_count},
                      {"grid_edge_clamp_count", d.grid_edge_clamp_count},
                      {"redraw_count", d.redraw_count},
                      {"grid_dropped_degenerate", d.grid_dropped_degenerate},
                      {"grid_dropped_duplicate", d.grid_dropped_duplicate},
                      {"nonconverged_fits", d.nonconverged_fits},
                      {"riesz_converged", d.riesz_converged},
                      {"any_ridge_stabilized", d.any_ridge_stabilized},
                      {"m0_crossing_rate", d.m0_crossing_rate}}}};
}

json metrics_to_json(const McMetrics& metrics, const DgpSpec& spec) {
    json rows = json::array();
    for (std::size_t t = 0; t < metrics.tau.size(); ++t) {
        rows.push_back(json{{"tau", metrics.tau[t]},
                            {"true_uqpe", metrics.true_uqpe[t]},
                            {"mean", metrics.mean_estimate[t]},
                            {"bias", metrics.bias[t]},
                            {"rmse", metrics.rmse[t]},
                            {"pointwise_coverage", metrics.pointwise_coverage[t]}});
    }
    return json{{"schema_version", kSchemaVersion},
                {"dgp", spec.dgp_id},
                {"sparsity", sparsity_label(spec.sparsity)},
                {"n", spec.n},
                {"p", spec.p},
                {"per_tau", rows},
                {"uniform_coverage", metrics.uniform_coverage},
                {"reps_completed", metrics.reps_completed},
                {"reps_failed", metrics.reps_failed},
                {"runtime_seconds", metrics.runtime_seconds}};
}

json model_to_json(const FittedNuisance& nuisance) {
    json fits = json::array();
    for (const LogitLassoFit& f : nuisance.qfits.fits) {
        fits.push_back(json{{"q", f.q},
                            {"beta", sparse_vector(f.beta)},
                            {"lambda", f.lambda},
                            {"loadings", dense_vector(f.loadings)},
                            {"post_lasso", f.post_lasso},
                            {"iterations_used", f.iterations_used},
                            {"converged", f.converged},
                            {"ridge_stabilized", f.ridge_stabilized}});
    }
    json model{{"schema_version", kSchemaVersion},
               {"library_version", kVersion},
               {"estimator", estimator_name(nuisance.kind)},
               {"q_grid", dense_vector(nuisance.qfits.q_grid)},
               {"tau_grid", nuisance.qfits.tau_grid},
               {"fits", fits},
               {"bandwidth", nuisance.h1},
               {"riesz",
                json{{"rho", sparse_vector(nuisance.riesz.rho)},
                     {"lambda", nuisance.riesz.lambda},
                     {"converged", nuisance.riesz.converged}}}};
    if (nuisance.kind != EstimatorKind::rif_logit) {
        model["basis_b"] = basis_to_json(nuisance.basis_b);
        model["basis_h"] = basis_to_json(nuisance.basis_h);
    }
    return model;
}

std::string bands_csv(const UqpeEstimate& estimate, double scale,
                      const std::vector<std::string>& row_kinds) {
    std::ostringstream os;
    os << "tau,estimate,pw_lo,pw_hi,unif_lo,unif_hi,kind\n";
    for (std::size_t t = 0; t < estimate.per_tau.size(); ++t) {
        const PerTauEstimate& r = estimate.per_tau[t];
        const std::string kind = t < row_kinds.size() ? row_kinds[t] : "requested";
        os << format_double(r.tau) << ',' << format_double(scale * r.uqpe_hat) << ','
           << format_double(scale * r.uqpe_pw_lo) << ',' << format_double(scale * r.uqpe_pw_hi)
           << ',' << format_double(scale * r.uqpe_unif_lo) << ','
           << format_double(scale * r.uqpe_unif_hi) << ',' << kind << '\n';
    }
    return os.str();
}

std::string metrics_csv(const McMetrics& metrics, const DgpSpec& spec) {
    std::ostringstream os;
    os << "dgp,n,p,tau,true,mean,bias,rmse,pointwise,uniform\n";
    for (std::size_t t = 0; t < metrics.tau.size(); ++t) {
        os << spec.dgp_id << "(" << sparsity_label(spec.sparsity) << ")," << spec.n << ','
           << spec.p << ',' << format_double(metrics.tau[t]) << ','
           << format_double(metrics.true_uqpe[t]) << ','
           << format_double(metrics.mean_estimate[t]) << ','
           << format_double(metrics.bias[t]) << ',' << format_double(metrics.rmse[t]) << ','
           << format_double(metrics.pointwise_coverage[t]) << ','
           << format_double(metrics.uniform_coverage) << '\n';
    }
    return os.str();
}

namespace {

// Compact SHA-256 (FIPS 180-4), enough for content digests in run manifests.
struct Sha256 {
    std::array<std::uint32_t, 8> h{0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                                   0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    std::array<std::uint8_t, 64> buffer{};
    std::uint64_t total = 0;
    std::size_t fill = 0;

    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void process(const std::uint8_t* p) {
        static const std::uint32_t k[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
            0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
            0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
            0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
            0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
            0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
            0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
            0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
            0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
            0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i) {
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        }
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        auto a = h;
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t s1 = rotr(a[4], 6) ^ rotr(a[4], 11) ^ rotr(a[4], 25);
            const std::uint32_t ch = (a[4] & a[5]) ^ (~a[4] & a[6]);
            const std::uint32_t t1 = a[7] + s1 + ch + k[i] + w[i];
            const std::uint32_t s0 = rotr(a[0], 2) ^ rotr(a[0], 13) ^ rotr(a[0], 22);
            const std::uint32_t maj = (a[0] & a[1]) ^ (a[0] & a[2]) ^ (a[1] & a[2]);
            const std::uint32_t t2 = s0 + maj;
            a[7] = a[6]; a[6] = a[5]; a[5] = a[4]; a[4] = a[3] + t1;
            a[3] = a[2]; a[2] = a[1]; a[1] = a[0]; a[0] = t1 + t2;
        }
        for (int i = 0; i < 8; ++i) h[static_cast<std::size_t>(i)] += a[static_cast<std::size_t>(i)];
    }

    void update(const std::uint8_t* data, std::size_t len) {
        total += len;
        while (len > 0) {
            const std::size_t take = std::min(len, buffer.size() - fill);
            std::memcpy(buffer.data() + fill, data, take);
            fill += take;
            data += take;
            len -= take;
            if (fill == buffer.size()) {
                process(buffer.data());
                fill = 0;
            }
        }
    }

    std::string finish() {
        const std::uint64_t bits = total * 8;
        const std::uint8_t pad = 0x80;
        update(&pad, 1);
        const std::uint8_t zero = 0x00;
        while (fill != 56) update(&zero, 1);
        std::uint8_t len_be[8];
        for (int i = 0; i < 8; ++i) len_be[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
        update(len_be, 8);
        std::ostringstream os;
        for (std::uint32_t v : h) os << std::hex << std::setw(8) << std::setfill('0') << v;
        return os.str();
    }
};

}  // namespace

std::string sha256_bytes(const void* data, std::size_t len) {
    Sha256 s;
    s.update(static_cast<const std::uint8_t*>(data), len);
    return s.finish();
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(errkind::io, "manifest", "cannot open file for digest: " + path);
    }
    Sha256 s;
    std::array<char, 65536> buf;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0) s.update(reinterpret_cast<const std::uint8_t*>(buf.data()),
                              static_cast<std::size_t>(got));
    }
    return s.finish();
}

}  // namespace uqpe
