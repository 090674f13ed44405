#pragma once

#include <vector>

#include <Eigen/Core>

#include "uqpe/dataset.hpp"

namespace uqpe {

// Polynomial dictionary (x^T, (x^2)^T, (x^3)^T)^T plus an intercept, each
// power term divided by its sample standard deviation so the scaled column
// has unit variance. Layout: index 0 is the intercept, then all variables at
// power 1, then power 2, then power 3 (so p_b = degree*p + 1).
struct BasisTerm {
    Eigen::Index variable = 0;  // 0-based column of X
    int power = 1;
};

struct BasisExpansion {
    std::vector<BasisTerm> terms;        // non-intercept terms, dictionary order
    Eigen::VectorXd scale_factors;       // per non-intercept term, > 0
    Eigen::Index n_variables = 0;
    Eigen::Index treatment_index = 0;
    int degree = 3;

    Eigen::Index dimension() const {
        return static_cast<Eigen::Index>(terms.size()) + 1;
    }
    static constexpr Eigen::Index intercept_index() { return 0; }

    // Dictionary indices of the treatment powers x_1, x_1^2, ..., x_1^degree.
    std::vector<Eigen::Index> treatment_term_indices() const;
};

BasisExpansion build_basis(const Dataset& dataset, int degree = 3);

Eigen::VectorXd evaluate_basis(const BasisExpansion& basis,
                               const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd evaluate_basis_derivative(const BasisExpansion& basis,
                                          const Eigen::Ref<const Eigen::VectorXd>& x);

// Row-wise evaluation over a whole covariate matrix.
Eigen::MatrixXd evaluate_basis_matrix(const BasisExpansion& basis,
                                      const Eigen::Ref<const Eigen::MatrixXd>& X);
Eigen::MatrixXd evaluate_basis_derivative_matrix(const BasisExpansion& basis,
                                                 const Eigen::Ref<const Eigen::MatrixXd>& X);

}  // namespace uqpe
