#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ratweyl/types.hpp"

namespace ratweyl {

// Closed-form exponential of a 2x2 complex matrix.
Eigen::Matrix2cd expm2(const Eigen::Matrix2cd& a);

using Coeff2x2 = std::function<Eigen::Matrix2cd(double)>;

// Integration scheme for y' = A(x) y. The Magnus scheme evaluates a matrix
// exponential per step and stays accurate on strongly oscillatory
// coefficients; RK4 samples the coefficient at step endpoints and midpoint.
enum class OdeScheme { magnus4, rk4 };

// Propagator matrix over [x0, x1] with `steps` uniform steps.
Eigen::Matrix2cd propagate(const Coeff2x2& a, double x0, double x1, int steps,
                           OdeScheme scheme = OdeScheme::magnus4);

// Solution samples y(x_j), x_j = x0 + j (x1-x0)/samples, starting from y0,
// with `substeps` integration steps between consecutive sample points.
std::vector<Eigen::Matrix2cd> propagate_samples(const Coeff2x2& a, double x0, double x1,
                                                int samples, int substeps,
                                                const Eigen::Matrix2cd& y0,
                                                OdeScheme scheme = OdeScheme::magnus4);

}  // namespace ratweyl
