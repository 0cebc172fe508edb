#pragma once

#include <Eigen/Dense>

#include "ratweyl/types.hpp"

namespace ratweyl {

// One point of the spectral-parameter chart at pole k:
// lambda = d_k + b_k/(2 mu)  and  mu = b_k/(2 (lambda - d_k)).
struct SpectralPoint {
    int k = 0;
    cplx mu;
    cplx lambda;
};

cplx map_mu_to_lambda(int k, cplx mu, const PoleSet& poles);
cplx map_lambda_to_mu(int k, cplx lambda, const PoleSet& poles);

SpectralPoint make_spectral_point(int k, cplx mu, const PoleSet& poles);

// Unitary gauge matrix built from a unit row [b1 b2]:
//   [  b1        b2      ]
//   [ -conj(b2)  conj(b1)]
// Rows whose norm deviates from 1 by more than `tol` are rejected.
Eigen::Matrix2cd gauge_matrix(const Eigen::RowVector2cd& beta_row, double tol = 1e-8);

}  // namespace ratweyl
