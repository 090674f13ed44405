#include "uqpe/rng.hpp"

#include "uqpe/math.hpp"

namespace uqpe {

double RngStream::normal() { return normal_icdf(uniform01()); }

Eigen::VectorXd RngStream::normals(Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = normal();
    return out;
}

}  // namespace uqpe
