#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "uqpe/bootstrap.hpp"
#include "uqpe/dataset.hpp"
#include "uqpe/density.hpp"
#include "uqpe/error.hpp"
#include "uqpe/estimator.hpp"
#include "uqpe/lasso_logit.hpp"
#include "uqpe/riesz.hpp"
#include "uqpe/simulation.hpp"
#include "uqpe/version.hpp"

namespace py = pybind11;

namespace {

uqpe::UqpeConfig make_config(const py::dict& kwargs) {
    uqpe::UqpeConfig config;
    if (kwargs.contains("tau_set"))
        config.tau_set = kwargs["tau_set"].cast<std::vector<double>>();
    if (kwargs.contains("upsilon")) {
        const auto u = kwargs["upsilon"].cast<std::pair<double, double>>();
        config.upsilon_lo = u.first;
        config.upsilon_hi = u.second;
    }
    if (kwargs.contains("grid_taus"))
        config.grid_taus = kwargs["grid_taus"].cast<std::vector<double>>();
    if (kwargs.contains("alpha")) config.alpha = kwargs["alpha"].cast<double>();
    if (kwargs.contains("bootstrap_B"))
        config.bootstrap_B = kwargs["bootstrap_B"].cast<int>();
    if (kwargs.contains("seed")) config.seed = kwargs["seed"].cast<std::uint64_t>();
    if (kwargs.contains("k_loadings"))
        config.k_loadings = kwargs["k_loadings"].cast<int>();
    if (kwargs.contains("debias")) config.debias = kwargs["debias"].cast<bool>();
    if (kwargs.contains("estimator"))
        config.estimator = uqpe::estimator_from_name(kwargs["estimator"].cast<std::string>());
    if (kwargs.contains("threads")) config.threads = kwargs["threads"].cast<unsigned>();
    return config;
}

py::dict estimate_to_dict(const uqpe::UqpeEstimate& est) {
    py::list rows;
    for (const auto& r : est.per_tau) {
        py::dict d;
        d["tau"] = r.tau;
        d["q_tau"] = r.q_tau;
        d["theta_hat"] = r.theta_hat;
        d["f_hat"] = r.f_hat;
        d["uqpe_hat"] = r.uqpe_hat;
        d["se_theta"] = r.se_theta;
        d["se_uqpe"] = r.se_uqpe;
        d["theta_pointwise"] = py::make_tuple(r.theta_pw_lo, r.theta_pw_hi);
        d["theta_uniform"] = py::make_tuple(r.theta_unif_lo, r.theta_unif_hi);
        d["uqpe_pointwise"] = py::make_tuple(r.uqpe_pw_lo, r.uqpe_pw_hi);
        d["uqpe_uniform"] = py::make_tuple(r.uqpe_unif_lo, r.uqpe_unif_hi);
        rows.append(d);
    }
    py::dict out;
    out["per_tau"] = rows;
    out["c_theta_uniform"] = est.c_theta_uniform;
    out["c_uqpe_uniform"] = est.c_uqpe_uniform;
    out["zero_uqpe_rejected"] = est.zero_uqpe_rejected;
    py::dict diag;
    diag["bandwidth"] = est.diagnostics.bandwidth;
    diag["lambda_logit"] = est.diagnostics.lambda_logit_value;
    diag["lambda_riesz"] = est.diagnostics.lambda_riesz_value;
    diag["redraw_count"] = est.diagnostics.redraw_count;
    diag["rstar_clamp_count"] = est.diagnostics.rstar_clamp_count;
    diag["grid_edge_clamp_count"] = est.diagnostics.grid_edge_clamp_count;
    diag["nonconverged_fits"] = est.diagnostics.nonconverged_fits;
    diag["m0_crossing_rate"] = est.diagnostics.m0_crossing_rate;
    out["diagnostics"] = diag;
    return out;
}

}  // namespace

PYBIND11_MODULE(_uqpe, m) {
    m.doc() = "Debiased UQPE estimation and multiplier-bootstrap inference";
    m.attr("__version__") = uqpe::kVersion;

    py::register_exception<uqpe::Error>(m, "UqpeError");

    m.def("lambda_logit", &uqpe::lambda_logit, py::arg("n"), py::arg("p_b"));
    m.def("lambda_riesz", &uqpe::lambda_riesz, py::arg("n"), py::arg("p_h"));
    m.def(
        "empirical_quantile",
        [](const Eigen::VectorXd& y, double tau) { return uqpe::empirical_quantile(y, tau); },
        py::arg("y"), py::arg("tau"));
    m.def(
        "bandwidth_rot",
        [](const Eigen::VectorXd& y) { return uqpe::bandwidth_rot(y); }, py::arg("y"));
    m.def(
        "kde",
        [](const Eigen::VectorXd& y, double at, double h1) { return uqpe::kde(y, at, h1); },
        py::arg("y"), py::arg("at"), py::arg("h1"));
    m.def(
        "bootstrap_quantile",
        [](const Eigen::VectorXd& y, double tau, double q_hat, const Eigen::VectorXd& eta) {
            return uqpe::bootstrap_quantile(y, tau, q_hat, eta).value;
        },
        py::arg("y"), py::arg("tau"), py::arg("q_hat"), py::arg("eta"));

    m.def(
        "simulate_dataset",
        [](int dgp, const std::string& sparsity, Eigen::Index n, Eigen::Index p,
           std::uint64_t seed, std::uint64_t rep_seed) {
            uqpe::DgpSpec spec{dgp, uqpe::sparsity_from_label(sparsity), n, p, seed};
            const uqpe::Dataset ds = uqpe::simulate_dataset(spec, rep_seed);
            return py::make_tuple(ds.outcome, ds.covariates);
        },
        py::arg("dgp"), py::arg("sparsity"), py::arg("n"), py::arg("p"),
        py::arg("seed") = 0, py::arg("rep_seed") = 0);

    m.def(
        "true_uqpe",
        [](int dgp, const std::string& sparsity, const std::vector<double>& taus,
           Eigen::Index n0, Eigen::Index p, std::uint64_t seed, unsigned threads) {
            uqpe::DgpSpec spec{dgp, uqpe::sparsity_from_label(sparsity), 2, p, seed};
            return uqpe::true_uqpe_oracle(spec, taus, n0, threads);
        },
        py::arg("dgp"), py::arg("sparsity"), py::arg("taus"), py::arg("n0") = 1000000,
        py::arg("p") = 100, py::arg("seed") = 0, py::arg("threads") = 1);

    m.def(
        "estimate",
        [](const Eigen::VectorXd& y, const Eigen::MatrixXd& X, Eigen::Index treatment_index,
           const py::kwargs& kwargs) {
            uqpe::Dataset ds;
            ds.outcome = y;
            ds.covariates = X;
            ds.treatment_index = treatment_index;
            const uqpe::UqpeConfig config = make_config(kwargs);
            return estimate_to_dict(uqpe::estimate_all(ds, config));
        },
        py::arg("y"), py::arg("X"), py::arg("treatment_index") = 0);

    m.def(
        "run_mc_study",
        [](int dgp, const std::string& sparsity, Eigen::Index n, Eigen::Index p, int reps,
           Eigen::Index oracle_n, unsigned threads, const py::kwargs& kwargs) {
            const uqpe::UqpeConfig config = make_config(kwargs);
            uqpe::DgpSpec spec{dgp, uqpe::sparsity_from_label(sparsity), n, p, config.seed};
            uqpe::McOptions options;
            options.oracle_n = oracle_n;
            options.threads = threads;
            const uqpe::McMetrics metrics =
                uqpe::run_mc_study(spec, reps, config, config.estimator, options);
            py::dict out;
            out["tau"] = metrics.tau;
            out["true_uqpe"] = metrics.true_uqpe;
            out["mean"] = metrics.mean_estimate;
            out["bias"] = metrics.bias;
            out["rmse"] = metrics.rmse;
            out["pointwise_coverage"] = metrics.pointwise_coverage;
            out["uniform_coverage"] = metrics.uniform_coverage;
            out["reps_completed"] = metrics.reps_completed;
            out["reps_failed"] = metrics.reps_failed;
            return out;
        },
        py::arg("dgp"), py::arg("sparsity"), py::arg("n"), py::arg("p"), py::arg("reps"),
        py::arg("oracle_n") = 1000000, py::arg("threads") = 1);
}
