#include "ratweyl/spectral.hpp"

namespace ratweyl {

static void check_index(int k, const PoleSet& poles) {
    if (k < 0 || k >= poles.size()) throw validation_error("pole index out of range");
}

cplx map_mu_to_lambda(int k, cplx mu, const PoleSet& poles) {
    check_index(k, poles);
    if (mu == cplx(0.0, 0.0))
        throw std::domain_error("map_mu_to_lambda: mu = 0 is the point at infinity of the pole chart");
    return poles.d[k] + static_cast<double>(poles.b[k]) / (2.0 * mu);
}

cplx map_lambda_to_mu(int k, cplx lambda, const PoleSet& poles) {
    check_index(k, poles);
    cplx shift = lambda - poles.d[k];
    if (shift == cplx(0.0, 0.0))
        throw std::domain_error("map_lambda_to_mu: lambda coincides with the pole d_k");
    return static_cast<double>(poles.b[k]) / (2.0 * shift);
}

SpectralPoint make_spectral_point(int k, cplx mu, const PoleSet& poles) {
    return SpectralPoint{k, mu, map_mu_to_lambda(k, mu, poles)};
}

Eigen::Matrix2cd gauge_matrix(const Eigen::RowVector2cd& beta_row, double tol) {
    double nrm = beta_row.norm();
    if (std::abs(nrm - 1.0) > tol)
        throw validation_error("gauge_matrix: row norm deviates from 1 beyond tolerance");
    Eigen::Matrix2cd q;
    q << beta_row(0), beta_row(1), -std::conj(beta_row(1)), std::conj(beta_row(0));
    return q;
}

}  // namespace ratweyl
