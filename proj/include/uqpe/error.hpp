#pragma once

#include <stdexcept>
#include <string>

namespace uqpe {

// All library failures carry a machine-readable kind plus the pipeline stage
// that raised them; the CLI maps these onto its JSON error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, std::string stage, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)), stage_(std::move(stage)) {}

    const std::string& kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string kind_;
    std::string stage_;
};

namespace errkind {
inline constexpr const char* schema = "schema_error";
inline constexpr const char* empty_data = "empty_data";
inline constexpr const char* degenerate_basis = "degenerate_basis";
inline constexpr const char* dimension = "dimension_error";
inline constexpr const char* degenerate_outcome = "degenerate_outcome";
inline constexpr const char* extrapolation = "extrapolation_error";
inline constexpr const char* zero_bandwidth = "zero_bandwidth";
inline constexpr const char* degenerate_weights = "degenerate_weights";
inline constexpr const char* degenerate_draws = "degenerate_draws";
inline constexpr const char* density_floor = "density_floor";
inline constexpr const char* baseline_infeasible = "baseline_infeasible";
inline constexpr const char* data = "data_error";
inline constexpr const char* study = "study_error";
inline constexpr const char* precondition = "precondition_violation";
inline constexpr const char* io = "io_error";
}  // namespace errkind

}  // namespace uqpe
