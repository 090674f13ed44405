#include "uqpe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "uqpe/error.hpp"

namespace uqpe {
namespace {

// One CSV record, honoring quoted fields (embedded commas, doubled quotes)
// and CRLF endings. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        any = true;
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(ch);
        }
    }
    if (!any) return false;
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(std::move(field));
    return true;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) {
    const std::string t = trim(cell);
    return t.empty() || t == "NA";
}

std::optional<double> parse_number(const std::string& cell) {
    const std::string t = trim(cell);
    if (t.empty()) return std::nullopt;
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(t, &pos);
    } catch (...) {
        return std::nullopt;
    }
    if (pos != t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

void Dataset::validate() const {
    if (outcome.size() < 2) {
        throw Error(errkind::empty_data, "data_model", "dataset needs at least 2 rows");
    }
    if (covariates.rows() != outcome.size()) {
        throw Error(errkind::dimension, "data_model", "outcome/covariate row mismatch");
    }
    if (covariates.cols() < 1) {
        throw Error(errkind::dimension, "data_model", "dataset needs at least 1 covariate");
    }
    if (treatment_index < 0 || treatment_index >= covariates.cols()) {
        throw Error(errkind::dimension, "data_model", "treatment_index out of range");
    }
    if (!outcome.allFinite() || !covariates.allFinite()) {
        throw Error(errkind::data, "data_model", "dataset contains non-finite values");
    }
}

Dataset ingest_csv(const std::string& path, const std::string& outcome_col,
                   const std::string& treatment_col,
                   const std::vector<std::string>& control_cols, IngestReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(errkind::io, "ingest", "cannot open file: " + path);
    }

    std::vector<std::string> header;
    if (!read_record(in, header)) {
        throw Error(errkind::empty_data, "ingest", "file is empty: " + path);
    }
    for (auto& h : header) h = trim(h);

    auto find_col = [&](const std::string& name) -> Eigen::Index {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error(errkind::schema, "ingest", "column not found: " + name);
        }
        return static_cast<Eigen::Index>(it - header.begin());
    };

    const Eigen::Index outcome_idx = find_col(outcome_col);
    const Eigen::Index treatment_idx = find_col(treatment_col);
    if (outcome_idx == treatment_idx) {
        throw Error(errkind::schema, "ingest", "outcome and treatment must differ");
    }

    std::vector<Eigen::Index> control_idx;
    std::vector<std::string> control_names;
    if (control_cols.empty()) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(header.size()); ++j) {
            if (j == outcome_idx || j == treatment_idx) continue;
            control_idx.push_back(j);
            control_names.push_back(header[static_cast<std::size_t>(j)]);
        }
    } else {
        for (const auto& name : control_cols) {
            const Eigen::Index j = find_col(name);
            if (j == outcome_idx || j == treatment_idx) {
                throw Error(errkind::schema, "ingest",
                            "control column duplicates outcome/treatment: " + name);
            }
            control_idx.push_back(j);
            control_names.push_back(name);
        }
    }

    const std::size_t p = 1 + control_idx.size();
    std::vector<double> y_vals;
    std::vector<double> x_vals;  // row-major staging, p per row
    Eigen::Index rows_read = 0;
    Eigen::Index dropped = 0;

    std::vector<std::string> fields;
    std::vector<double> row(p);
    while (read_record(in, fields)) {
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
        ++rows_read;
        if (fields.size() < header.size()) {
            ++dropped;
            continue;
        }
        bool ok = true;
        auto cell = [&](Eigen::Index j) -> const std::string& {
            return fields[static_cast<std::size_t>(j)];
        };
        double y = 0.0;
        if (is_missing(cell(outcome_idx))) {
            ok = false;
        } else if (auto v = parse_number(cell(outcome_idx))) {
            y = *v;
        } else {
            ok = false;
        }
        if (ok) {
            const std::string& tc = cell(treatment_idx);
            if (is_missing(tc)) {
                ok = false;
            } else if (auto v = parse_number(tc)) {
                row[0] = *v;
            } else {
                ok = false;
            }
        }
        for (std::size_t k = 0; ok && k < control_idx.size(); ++k) {
            const std::string& cc = cell(control_idx[k]);
            if (is_missing(cc)) {
                ok = false;
            } else if (auto v = parse_number(cc)) {
                row[k + 1] = *v;
            } else {
                ok = false;
            }
        }
        if (!ok) {
            ++dropped;
            continue;
        }
        y_vals.push_back(y);
        x_vals.insert(x_vals.end(), row.begin(), row.end());
    }

    if (report) {
        report->rows_read = rows_read;
        report->rows_dropped = dropped;
    }
    if (y_vals.empty()) {
        throw Error(errkind::empty_data, "ingest", "no complete rows in: " + path);
    }

    Dataset ds;
    const Eigen::Index n = static_cast<Eigen::Index>(y_vals.size());
    ds.outcome = Eigen::Map<Eigen::VectorXd>(y_vals.data(), n);
    ds.covariates.resize(n, static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
            ds.covariates(i, j) = x_vals[static_cast<std::size_t>(i) * p + static_cast<std::size_t>(j)];
        }
    }
    ds.treatment_index = 0;
    ds.column_names.push_back(treatment_col);
    ds.column_names.insert(ds.column_names.end(), control_names.begin(), control_names.end());
    return ds;
}

}  // namespace uqpe
