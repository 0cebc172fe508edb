#pragma once

#include "ratweyl/synthesis.hpp"

namespace ratweyl {

// Source columns [Phi_1(x) Phi_2(x)] with two derivatives. Per pole exactly
// one column is identically 1; the other one varies (which of the two may
// differ per pole in Weyl-set mode).
struct SourceColumns {
    GridSpec grid;
    int m = 0;
    std::vector<int> varying;  // per pole: index (0 or 1) of the varying column
    std::vector<std::array<Eigen::VectorXcd, 2>> value;
    std::vector<std::array<Eigen::VectorXcd, 2>> d1;
    std::vector<std::array<Eigen::VectorXcd, 2>> d2;

    // Phi(x_i) row [Phi_{k1}, Phi_{k2}] and its derivatives.
    Eigen::RowVector2cd phi(int k, int i) const { return {value[k][0](i), value[k][1](i)}; }
    Eigen::RowVector2cd phi_d1(int k, int i) const { return {d1[k][0](i), d1[k][1](i)}; }

    // Standard mode: Phi_1 = 1, Phi_2 synthesized from a Weyl function.
    static SourceColumns standard(const Phi2Field& phi2);
    // Direct construction for tests and presets.
    static SourceColumns from_functions(const GridSpec& grid, int m, std::vector<int> varying,
                                        const std::function<cplx(int, double)>& f,
                                        const std::function<cplx(int, double)>& fd1,
                                        const std::function<cplx(int, double)>& fd2);
};

struct ContourOptions {
    double radius_factor = 0.5;  // epsilon = factor * |d_k - d_p|
    int points = 64;
};

// Discretized triple (A, S, Pi). The kernel matrix holds the unweighted
// values s(x_i, x_j); smat is the weight-symmetrized Nystrom matrix
// B*Dtilde + sqrt(w_i) s(x_i,x_j) sqrt(w_j), Hermitian by construction.
struct SNode {
    PoleSet poles;
    GridSpec grid;
    SourceColumns cols;
    Eigen::VectorXd dtilde;
    Eigen::MatrixXcd kernel;
    Eigen::MatrixXcd smat;

    int dim() const { return poles.size() * grid.nodes(); }
};

// Trapezoid weights of the restriction to [0, x_r].
Eigen::VectorXd trapezoid_weights(const GridSpec& grid, int r);

// Resolvent of A_k = d_k I + i b_k A_0 applied to grid samples,
// (lambda - d)^{-1} f + i b (lambda - d)^{-2} int_0^x exp(i b (x-u)/(lambda-d)) f du,
// with composite-trapezoid inner quadrature.
Eigen::VectorXcd resolvent_apply(const PoleSet& poles, int k, cplx lambda, const GridSpec& grid,
                                 const Eigen::VectorXcd& f);
// d/dx of the same expression; needs the sampled derivative of f.
Eigen::VectorXcd resolvent_apply_derivative(const PoleSet& poles, int k, cplx lambda,
                                            const GridSpec& grid, const Eigen::VectorXcd& f,
                                            const Eigen::VectorXcd& fd1);

// Pointwise kernel entries (assembly uses vectorized equivalents; these back
// the unit tests).
cplx kernel_diag(const PoleSet& poles, const SourceColumns& cols, int k, int i, int j);
cplx kernel_offdiag(const PoleSet& poles, const SourceColumns& cols, int k, int p, int i, int j,
                    const ContourOptions& contour = {});

SNode assemble_S(const SourceColumns& cols, const PoleSet& poles, const GridSpec& grid,
                 const ContourOptions& contour = {});

// Relative discrete operator-norm residual of A S - S A* - i Pi Pi*.
double identity_residual(const SNode& node);

// Kernel rows T_r(x_r, x_j) of the restricted inverses, swept incrementally
// by bordering (reweight + Schur updates); rows[r] is m x (r+1)m.
struct InverseSweep {
    GridSpec grid;
    int m = 0;
    std::vector<Eigen::MatrixXcd> rows;
    Eigen::MatrixXd dtilde_inv_b;  // (B Dtilde)^{-1}, diagonal, kept for formulas

    Eigen::MatrixXcd diag_block(int r) const { return rows[r].rightCols(rows[r].rows()); }
};

struct SweepOptions {
    double condition_limit = 1e12;
    bool cross_check = false;     // verify against direct inversion at probe r
    double cross_check_tol = 1e-8;
};

InverseSweep inverse_sweep(const SNode& node, const SweepOptions& opts = {});

// Direct per-r principal-block inversion (test oracle for the sweep).
Eigen::MatrixXcd restricted_inverse(const SNode& node, int r);

struct RecoveredField {
    PotentialField field;
    double row_norm_drift = 0;
};

RecoveredField recover_beta(const SNode& node, const InverseSweep& sweep);

// beta'(r) from the sweep data (derivative of the reconstruction formula).
Eigen::Matrix<cplx, Eigen::Dynamic, 2> beta_derivative(const SNode& node,
                                                       const InverseSweep& sweep, int r);

struct TransferSample {
    int r = 0;
    cplx lambda;
    Eigen::Matrix2cd w;
};

TransferSample transfer_matrix(const SNode& node, int r, cplx lambda);
// w_A(r, lambda) for every r in one sweep.
std::vector<Eigen::Matrix2cd> transfer_profile(const SNode& node, cplx lambda);

double transfer_ode_residual(const SNode& node, const PotentialField& beta, cplx lambda);

// Triangular factorization S^{-1} = V* B V with block-lower-triangular V.
struct Factorization {
    Eigen::MatrixXcd v;      // symmetrized factor
    double residual = 0;     // ||V* B V S - I|| / ||S||
};

Factorization factorize(const SNode& node);

// V assembled from the sweep kernels (diagonal Dtilde^{-1/2}, kernel rows
// B Dtilde^{1/2} T_r(r,u)); agrees with `factorize` to quadrature order.
Eigen::MatrixXcd kernel_factor_v(const SNode& node, const InverseSweep& sweep);

// Spectral norm by power iteration (deterministic start).
double operator_norm(const Eigen::MatrixXcd& a);

}  // namespace ratweyl
