#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "uqpe/estimator.hpp"
#include "uqpe/simulation.hpp"

namespace uqpe {

nlohmann::json config_to_json(const UqpeConfig& config);
nlohmann::json estimate_to_json(const UqpeEstimate& estimate);
nlohmann::json metrics_to_json(const McMetrics& metrics, const DgpSpec& spec);

// Persistable model document: bases, grid fits (sparse coefficients), Riesz fit.
nlohmann::json model_to_json(const FittedNuisance& nuisance);

// Plot-ready band table: tau, estimate, pw_lo, pw_hi, unif_lo, unif_hi, kind.
// scale multiplies every value column (the tau column is untouched).
std::string bands_csv(const UqpeEstimate& estimate, double scale,
                      const std::vector<std::string>& row_kinds);

// Table-1 layout: dgp, n, p, tau, true, mean, bias, rmse, pointwise, uniform.
std::string metrics_csv(const McMetrics& metrics, const DgpSpec& spec);

// SHA-256 hex digest of a file's bytes (run-manifest input digest).
std::string sha256_file(const std::string& path);
std::string sha256_bytes(const void* data, std::size_t len);

}  // namespace uqpe
