#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace uqpe {

// Sample {(Y_i, X_i)}. The treatment coordinate X_1 is covariates.col(treatment_index).
struct Dataset {
    Eigen::VectorXd outcome;        // length N
    Eigen::MatrixXd covariates;     // N x p
    Eigen::Index treatment_index = 0;
    std::vector<std::string> column_names;  // optional, length p when present

    Eigen::Index n() const { return outcome.size(); }
    Eigen::Index p() const { return covariates.cols(); }

    // Throws on violated invariants (N >= 2, p >= 1, finite values,
    // treatment_index < p).
    void validate() const;
};

struct IngestReport {
    Eigen::Index rows_read = 0;
    Eigen::Index rows_dropped = 0;  // listwise deletion over the selected columns
};

// RFC-4180-style CSV with a header row; "" and "NA" are missing; any row with
// a missing or non-numeric cell in a selected column is dropped. The treatment
// column becomes covariate column 0, followed by control_cols in order. An
// empty control_cols selects every remaining column.
Dataset ingest_csv(const std::string& path, const std::string& outcome_col,
                   const std::string& treatment_col,
                   const std::vector<std::string>& control_cols,
                   IngestReport* report = nullptr);

}  // namespace uqpe
