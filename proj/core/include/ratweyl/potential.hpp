#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ratweyl/types.hpp"

namespace ratweyl {

// Not-a-knot cubic spline on a uniform grid, complex-valued.
class CubicSpline {
  public:
    CubicSpline() = default;
    CubicSpline(const GridSpec& grid, const Eigen::VectorXcd& values);

    cplx value(double x) const;
    cplx derivative(double x) const;
    cplx second_derivative(double x) const;

  private:
    GridSpec grid_;
    Eigen::VectorXcd y_;
    Eigen::VectorXcd m_;  // second derivatives at the nodes
    int segment(double x, double& t) const;
};

struct PotentialOptions {
    double accept_tol = 1e-8;  // row norms within this of 1 are taken as-is
    double renorm_tol = 1e-4;  // rows within this are renormalized, beyond rejected
};

// Sampled potential: unit rows beta_k(x_i) on a uniform grid, one row family
// per pole. Off-node values come from componentwise cubic splines.
class PotentialField {
  public:
    PotentialField() = default;
    PotentialField(GridSpec grid, std::vector<Eigen::Matrix<cplx, Eigen::Dynamic, 2>> rows,
                   const PotentialOptions& opts = {});

    static PotentialField sample(GridSpec grid, int m,
                                 const std::function<Eigen::RowVector2cd(int, double)>& beta,
                                 const PotentialOptions& opts = {});

    const GridSpec& grid() const { return grid_; }
    int poles() const { return static_cast<int>(rows_.size()); }

    Eigen::RowVector2cd row(int k, int i) const { return rows_[k].row(i); }
    Eigen::RowVector2cd row_at(int k, double x) const;
    Eigen::RowVector2cd row_derivative_at(int k, double x) const;

    // Largest |  ||beta_k(x_i)|| - 1 | over the grid (after ingest normalization).
    double row_norm_drift() const;

    // Throws unless beta_{k1}(0) != 0 for every k (the strict boundary condition).
    void check_strict_boundary(double floor = 1e-12) const;

  private:
    GridSpec grid_;
    std::vector<Eigen::Matrix<cplx, Eigen::Dynamic, 2>> rows_;
    std::vector<std::array<CubicSpline, 2>> splines_;
    void build_splines();
};

}  // namespace ratweyl
