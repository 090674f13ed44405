#pragma once

#include <cmath>

namespace uqpe {

inline constexpr double kNormalQuartileSpread = 1.3489795003921634;  // Phi^-1(.75) - Phi^-1(.25)

double normal_cdf(double z);
double normal_pdf(double z);

// Inverse standard normal CDF, Wichura's AS241 (PPND16). Relative error is
// about 1e-15 over (0,1), well inside the 1e-12 the lambda rule needs.
double normal_icdf(double p);

// Numerically stable logistic helpers.
inline double logistic(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double log1pexp(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace uqpe
