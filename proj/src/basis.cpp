#include "uqpe/basis.hpp"

#include <cmath>
#include <string>

#include "uqpe/error.hpp"

namespace uqpe {
namespace {

double sample_sd(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    const double mean = v.mean();
    const double ss = (v.array() - mean).square().sum();
    return std::sqrt(ss / static_cast<double>(n - 1));
}

void check_length(const BasisExpansion& basis, Eigen::Index got) {
    if (got != basis.n_variables) {
        throw Error(errkind::dimension, "basis",
                    "x has length " + std::to_string(got) + ", basis expects " +
                        std::to_string(basis.n_variables));
    }
}

}  // namespace

std::vector<Eigen::Index> BasisExpansion::treatment_term_indices() const {
    std::vector<Eigen::Index> out;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        if (terms[t].variable == treatment_index) {
            out.push_back(static_cast<Eigen::Index>(t) + 1);
        }
    }
    return out;
}

BasisExpansion build_basis(const Dataset& dataset, int degree) {
    dataset.validate();
    if (degree < 1) {
        throw Error(errkind::precondition, "basis", "degree must be >= 1");
    }

    const Eigen::Index n = dataset.n();
    const Eigen::Index p = dataset.p();
    BasisExpansion basis;
    basis.n_variables = p;
    basis.treatment_index = dataset.treatment_index;
    basis.degree = degree;
    basis.terms.reserve(static_cast<std::size_t>(degree) * static_cast<std::size_t>(p));
    basis.scale_factors.resize(static_cast<Eigen::Index>(degree) * p);

    Eigen::VectorXd col(n);
    Eigen::Index t = 0;
    for (int d = 1; d <= degree; ++d) {
        for (Eigen::Index j = 0; j < p; ++j) {
            col = dataset.covariates.col(j).array().pow(d);
            const double sd = sample_sd(col);
            if (!(sd > 0.0) || !std::isfinite(sd)) {
                const std::string name =
                    dataset.column_names.size() == static_cast<std::size_t>(p)
                        ? dataset.column_names[static_cast<std::size_t>(j)]
                        : "column " + std::to_string(j);
                throw Error(errkind::degenerate_basis, "basis",
                            "zero-variance term: " + name + "^" + std::to_string(d));
            }
            basis.terms.push_back({j, d});
            basis.scale_factors[t++] = sd;
        }
    }
    return basis;
}

Eigen::VectorXd evaluate_basis(const BasisExpansion& basis,
                               const Eigen::Ref<const Eigen::VectorXd>& x) {
    check_length(basis, x.size());
    Eigen::VectorXd out(basis.dimension());
    out[0] = 1.0;
    for (std::size_t t = 0; t < basis.terms.size(); ++t) {
        const BasisTerm& term = basis.terms[t];
        out[static_cast<Eigen::Index>(t) + 1] =
            std::pow(x[term.variable], term.power) / basis.scale_factors[static_cast<Eigen::Index>(t)];
    }
    return out;
}

Eigen::VectorXd evaluate_basis_derivative(const BasisExpansion& basis,
                                          const Eigen::Ref<const Eigen::VectorXd>& x) {
    check_length(basis, x.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(basis.dimension());
    for (std::size_t t = 0; t < basis.terms.size(); ++t) {
        const BasisTerm& term = basis.terms[t];
        if (term.variable != basis.treatment_index) continue;
        out[static_cast<Eigen::Index>(t) + 1] =
            term.power * std::pow(x[term.variable], term.power - 1) /
            basis.scale_factors[static_cast<Eigen::Index>(t)];
    }
    return out;
}

Eigen::MatrixXd evaluate_basis_matrix(const BasisExpansion& basis,
                                      const Eigen::Ref<const Eigen::MatrixXd>& X) {
    check_length(basis, X.cols());
    Eigen::MatrixXd out(X.rows(), basis.dimension());
    out.col(0).setOnes();
    for (std::size_t t = 0; t < basis.terms.size(); ++t) {
        const BasisTerm& term = basis.terms[t];
        out.col(static_cast<Eigen::Index>(t) + 1) =
            X.col(term.variable).array().pow(term.power) /
            basis.scale_factors[static_cast<Eigen::Index>(t)];
    }
    return out;
}

Eigen::MatrixXd evaluate_basis_derivative_matrix(const BasisExpansion& basis,
                                                 const Eigen::Ref<const Eigen::MatrixXd>& X) {
    check_length(basis, X.cols());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(X.rows(), basis.dimension());
    for (std::size_t t = 0; t < basis.terms.size(); ++t) {
        const BasisTerm& term = basis.terms[t];
        if (term.variable != basis.treatment_index) continue;
        out.col(static_cast<Eigen::Index>(t) + 1) =
            term.power * X.col(term.variable).array().pow(term.power - 1) /
            basis.scale_factors[static_cast<Eigen::Index>(t)];
    }
    return out;
}

}  // namespace uqpe
