#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uqpe/dataset.hpp"
#include "uqpe/error.hpp"
#include "uqpe/estimator.hpp"
#include "uqpe/serialize.hpp"
#include "uqpe/simulation.hpp"
#include "uqpe/threading.hpp"
#include "uqpe/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit_error(const std::string& stage, const std::string& message,
                const std::string& hint) {
    json err{{"stage", stage}, {"error", message}, {"hint", hint}};
    std::cerr << err.dump() << std::endl;
}

int exit_code_for(const uqpe::Error& e) {
    return std::string(e.kind()) == uqpe::errkind::precondition ? 2 : 1;
}

std::vector<double> parse_tau_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) {
        throw uqpe::Error(uqpe::errkind::precondition, "cli", "empty tau list");
    }
    return out;
}

unsigned resolve_threads(int flag_value) {
    if (flag_value > 0) return static_cast<unsigned>(flag_value);
    if (const char* env = std::getenv("UQPE_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return uqpe::hardware_threads();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw uqpe::Error(uqpe::errkind::io, "cli", "cannot write " + path.string());
    }
    out << text;
}

json manifest_base(const std::string& command, const uqpe::UqpeConfig& config,
                   unsigned threads) {
    return json{{"schema_version", uqpe::kSchemaVersion},
                {"library_version", uqpe::kVersion},
                {"command", command},
                {"config", uqpe::config_to_json(config)},
                {"seed", config.seed},
                {"threads", threads}};
}

struct EstimateArgs {
    std::string data, outcome, treatment, controls;
    std::string taus = "0.2,0.4,0.6,0.8";
    std::string upsilon = "0.2,0.8";
    int grid = 41;
    int bootstrap = 1000;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::string estimator = "debiased";
    std::string out_dir = ".";
    bool save_model = false;
    double report_scale = 1.0;
    int threads = 0;
};

int run_estimate(const EstimateArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::string> controls;
    if (!args.controls.empty()) {
        std::stringstream ss(args.controls);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) controls.push_back(item);
        }
    }
    uqpe::IngestReport report;
    const uqpe::Dataset dataset =
        uqpe::ingest_csv(args.data, args.outcome, args.treatment, controls, &report);
    dataset.validate();

    const std::vector<double> upsilon = parse_tau_list(args.upsilon);
    if (upsilon.size() != 2) {
        throw uqpe::Error(uqpe::errkind::precondition, "cli",
                          "--upsilon expects two comma-separated values");
    }
    const std::vector<double> requested = parse_tau_list(args.taus);

    uqpe::UqpeConfig config;
    config.upsilon_lo = upsilon[0];
    config.upsilon_hi = upsilon[1];
    config.grid_taus = uqpe::equispaced_taus(std::max(0.01, upsilon[0] - 0.05),
                                             std::min(0.99, upsilon[1] + 0.05), args.grid);
    config.alpha = args.alpha;
    config.bootstrap_B = args.bootstrap;
    config.seed = args.seed;
    config.estimator = uqpe::estimator_from_name(args.estimator);
    config.threads = resolve_threads(args.threads);

    // Evaluation set: requested taus plus the grid taus inside upsilon, so the
    // band table is plot-ready. Uniform critical values use this full set.
    std::vector<double> eval = requested;
    std::vector<std::string> kinds(requested.size(), "requested");
    for (double g : config.grid_taus) {
        if (g < upsilon[0] - 1e-12 || g > upsilon[1] + 1e-12) continue;
        bool dup = false;
        for (double r : requested) dup = dup || std::abs(r - g) < 1e-9;
        if (!dup) {
            eval.push_back(g);
            kinds.push_back("grid");
        }
    }
    std::vector<std::size_t> order(eval.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return eval[a] < eval[b]; });
    std::vector<double> eval_sorted;
    std::vector<std::string> kinds_sorted;
    for (std::size_t i : order) {
        eval_sorted.push_back(eval[i]);
        kinds_sorted.push_back(kinds[i]);
    }
    config.tau_set = eval_sorted;
    config.validate();

    const uqpe::UqpeEstimate estimate = uqpe::estimate_all(dataset, config);

    const fs::path out_dir(args.out_dir);
    fs::create_directories(out_dir);

    json results = uqpe::estimate_to_json(estimate);
    results["dropped_rows"] = report.rows_dropped;
    results["rows_read"] = report.rows_read;
    results["report_scale"] = args.report_scale;
    json tau_kinds = json::array();
    for (const auto& k : kinds_sorted) tau_kinds.push_back(k);
    results["tau_kinds"] = tau_kinds;
    write_text(out_dir / "results.json", results.dump(2) + "\n");
    write_text(out_dir / "bands.csv",
               uqpe::bands_csv(estimate, args.report_scale, kinds_sorted));

    json manifest = manifest_base("estimate", config, config.threads);
    manifest["input"] = args.data;
    manifest["input_digest"] = uqpe::sha256_file(args.data);
    manifest["dropped_rows"] = report.rows_dropped;
    manifest["report_scale"] = args.report_scale;
    manifest["no_debiasing"] = !config.effective_debias();
    json outputs = json::array({"results.json", "bands.csv"});

    if (args.save_model) {
        const uqpe::FittedNuisance nuisance = uqpe::fit_nuisance(dataset, config);
        write_text(out_dir / "model.json", uqpe::model_to_json(nuisance).dump(2) + "\n");
        outputs.push_back("model.json");
    }
    manifest["outputs"] = outputs;
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

    std::cout << "wrote " << (out_dir / "results.json").string() << " ("
              << estimate.per_tau.size() << " tau rows, dropped " << report.rows_dropped
              << " incomplete rows)\n";
    for (const auto& row : estimate.per_tau) {
        bool is_requested = false;
        for (double r : requested) is_requested = is_requested || std::abs(r - row.tau) < 1e-9;
        if (!is_requested) continue;
        std::cout << std::fixed << std::setprecision(4) << "tau=" << row.tau
                  << "  uqpe=" << args.report_scale * row.uqpe_hat << "  pw=["
                  << args.report_scale * row.uqpe_pw_lo << ", "
                  << args.report_scale * row.uqpe_pw_hi << "]  unif=["
                  << args.report_scale * row.uqpe_unif_lo << ", "
                  << args.report_scale * row.uqpe_unif_hi << "]\n";
    }
    std::cout << "zero-UQPE test: "
              << (estimate.zero_uqpe_rejected ? "reject" : "fail_to_reject") << "\n";
    return 0;
}

struct SimulateArgs {
    int dgp = 1;
    std::string sparsity = "i";
    int n = 500;
    int p = 100;
    int reps = 500;
    std::uint64_t seed = 0;
    std::string estimator = "debiased";
    long long oracle_n = 1000000;
    std::string out_dir = ".";
    int bootstrap = 1000;
    int threads = 0;
};

int run_simulate(const SimulateArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();
    uqpe::DgpSpec spec;
    spec.dgp_id = args.dgp;
    spec.sparsity = uqpe::sparsity_from_label(args.sparsity);
    spec.n = args.n;
    spec.p = args.p;
    spec.seed = args.seed;
    spec.validate();

    uqpe::UqpeConfig config;
    config.seed = args.seed;
    config.bootstrap_B = args.bootstrap;
    config.estimator = uqpe::estimator_from_name(args.estimator);
    uqpe::McOptions options;
    options.oracle_n = args.oracle_n;
    options.threads = resolve_threads(args.threads);

    uqpe::McMetrics metrics;
    if (args.reps == 1) {
        // run_mc_study wants reps >= 2; a single replication still produces a
        // valid (if degenerate) table with coverage in {0, 1}.
        const std::vector<double> truth =
            uqpe::true_uqpe_oracle(spec, config.tau_set, options.oracle_n, options.threads);
        const uqpe::Dataset ds = uqpe::simulate_dataset(spec, 0);
        const uqpe::UqpeEstimate est = uqpe::estimate_all(ds, config);
        metrics.tau = config.tau_set;
        metrics.true_uqpe = truth;
        bool unif = true;
        for (std::size_t t = 0; t < config.tau_set.size(); ++t) {
            const auto& row = est.per_tau[t];
            metrics.mean_estimate.push_back(row.uqpe_hat);
            metrics.bias.push_back(row.uqpe_hat - truth[t]);
            metrics.rmse.push_back(std::abs(row.uqpe_hat - truth[t]));
            metrics.pointwise_coverage.push_back(
                truth[t] >= row.uqpe_pw_lo && truth[t] <= row.uqpe_pw_hi ? 1.0 : 0.0);
            unif = unif && truth[t] >= row.uqpe_unif_lo && truth[t] <= row.uqpe_unif_hi;
        }
        metrics.uniform_coverage = unif ? 1.0 : 0.0;
        metrics.reps_completed = 1;
    } else {
        metrics = uqpe::run_mc_study(spec, args.reps, config, config.estimator, options);
    }

    const fs::path out_dir(args.out_dir);
    fs::create_directories(out_dir);
    write_text(out_dir / "metrics.csv", uqpe::metrics_csv(metrics, spec));
    write_text(out_dir / "metrics.json", uqpe::metrics_to_json(metrics, spec).dump(2) + "\n");

    json manifest = manifest_base("simulate", config, options.threads);
    manifest["dgp"] = spec.dgp_id;
    manifest["sparsity"] = uqpe::sparsity_label(spec.sparsity);
    manifest["n"] = spec.n;
    manifest["p"] = spec.p;
    manifest["reps"] = args.reps;
    manifest["oracle_n"] = args.oracle_n;
    manifest["no_debiasing"] = !config.effective_debias();
    manifest["outputs"] = json::array({"metrics.csv", "metrics.json"});
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

    std::cout << uqpe::metrics_csv(metrics, spec);
    return 0;
}

struct TrueUqpeArgs {
    int dgp = 1;
    std::string sparsity = "i";
    std::string taus = "0.2,0.4,0.6,0.8";
    long long oracle_n = 10000000;
    int p = 100;
    std::uint64_t seed = 0;
    int threads = 0;
};

int run_true_uqpe(const TrueUqpeArgs& args) {
    uqpe::DgpSpec spec;
    spec.dgp_id = args.dgp;
    spec.sparsity = uqpe::sparsity_from_label(args.sparsity);
    spec.p = args.p;
    spec.n = 2;
    spec.seed = args.seed;
    spec.validate();

    const std::vector<double> taus = parse_tau_list(args.taus);
    const std::vector<double> values =
        uqpe::true_uqpe_oracle(spec, taus, args.oracle_n, resolve_threads(args.threads));
    std::cout << "tau,true_uqpe\n";
    for (std::size_t t = 0; t < taus.size(); ++t) {
        std::cout << std::fixed << std::setprecision(4) << taus[t] << ","
                  << values[t] << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Debiased estimation and multiplier-bootstrap inference for "
                 "unconditional quantile partial effects"};
    app.set_version_flag("--version", uqpe::kVersion);
    app.require_subcommand(1);

    EstimateArgs est;
    CLI::App* cmd_est = app.add_subcommand("estimate", "Estimate UQPE from a CSV dataset");
    cmd_est->add_option("--data", est.data, "CSV file")->required();
    cmd_est->add_option("--outcome", est.outcome, "outcome column")->required();
    cmd_est->add_option("--treatment", est.treatment, "treatment column")->required();
    cmd_est->add_option("--controls", est.controls, "comma-separated control columns");
    cmd_est->add_option("--taus", est.taus, "evaluation quantiles");
    cmd_est->add_option("--upsilon", est.upsilon, "inference interval lo,hi");
    cmd_est->add_option("--grid", est.grid, "q-grid size")->check(CLI::PositiveNumber);
    cmd_est->add_option("--bootstrap", est.bootstrap, "bootstrap replications");
    cmd_est->add_option("--alpha", est.alpha, "significance level");
    cmd_est->add_option("--seed", est.seed, "master RNG seed");
    cmd_est->add_option("--estimator", est.estimator, "debiased|plugin-only|rif-logit");
    cmd_est->add_option("--out", est.out_dir, "output directory");
    cmd_est->add_flag("--save-model", est.save_model, "persist fitted model JSON");
    cmd_est->add_option("--report-scale", est.report_scale, "display scale factor");
    cmd_est->add_option("--threads", est.threads, "worker threads");

    SimulateArgs sim;
    CLI::App* cmd_sim = app.add_subcommand("simulate", "Monte Carlo coverage study");
    cmd_sim->add_option("--dgp", sim.dgp, "1|2|3")->required();
    cmd_sim->add_option("--sparsity", sim.sparsity, "i|ii|iii|iv")->required();
    cmd_sim->add_option("--n", sim.n, "sample size");
    cmd_sim->add_option("--p", sim.p, "covariate dimension");
    cmd_sim->add_option("--reps", sim.reps, "Monte Carlo replications");
    cmd_sim->add_option("--seed", sim.seed, "master RNG seed");
    cmd_sim->add_option("--estimator", sim.estimator, "debiased|plugin-only|rif-logit");
    cmd_sim->add_option("--oracle-n", sim.oracle_n, "oracle sample size");
    cmd_sim->add_option("--bootstrap", sim.bootstrap, "bootstrap replications");
    cmd_sim->add_option("--out", sim.out_dir, "output directory");
    cmd_sim->add_option("--threads", sim.threads, "worker threads");

    TrueUqpeArgs tru;
    CLI::App* cmd_tru = app.add_subcommand("true-uqpe", "Oracle true UQPE values");
    cmd_tru->add_option("--dgp", tru.dgp, "1|2|3")->required();
    cmd_tru->add_option("--sparsity", tru.sparsity, "i|ii|iii|iv")->required();
    cmd_tru->add_option("--taus", tru.taus, "quantiles");
    cmd_tru->add_option("--oracle-n", tru.oracle_n, "oracle sample size");
    cmd_tru->add_option("--p", tru.p, "covariate dimension");
    cmd_tru->add_option("--seed", tru.seed, "oracle RNG seed");
    cmd_tru->add_option("--threads", tru.threads, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help/--version
        emit_error("cli", e.what(), "run with --help for usage");
        return 2;
    }

    try {
        if (cmd_est->parsed()) return run_estimate(est);
        if (cmd_sim->parsed()) return run_simulate(sim);
        if (cmd_tru->parsed()) return run_true_uqpe(tru);
        emit_error("cli", "no subcommand", "run with --help for usage");
        return 2;
    } catch (const uqpe::Error& e) {
        emit_error(e.stage(), e.what(),
                   std::string("error kind: ") + e.kind());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        emit_error("internal", e.what(), "unexpected failure");
        return 1;
    }
}
