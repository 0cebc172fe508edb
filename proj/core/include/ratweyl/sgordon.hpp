#pragma once

#include "ratweyl/inverse.hpp"

namespace ratweyl::sg {

// Pole structures of the two auxiliary systems: the x-equation uses
// b = (1, 1), the t-equation b = (1, -1), both with d = (1, -1).
PoleSet x_poles();
PoleSet t_poles();

// Boundary data omega(0,t) = omega0, omega_x(0,t) = omega1 on a uniform grid
// over [-t_max, t_max].
struct BoundaryData {
    double t_max = 0;
    int n = 0;  // 2n+1 nodes
    Eigen::VectorXd omega0;
    Eigen::VectorXd omega1;

    int nodes() const { return 2 * n + 1; }
    double dt() const { return t_max / n; }
    double t(int j) const { return -t_max + j * dt(); }

    static BoundaryData from_functions(double t_max, int n, const std::function<double(double)>& f0,
                                       const std::function<double(double)>& f1);
    void validate() const;
};

// 4th-order finite-difference derivative of uniformly sampled data.
Eigen::VectorXd stencil_derivative(const Eigen::VectorXd& f, double step);

// 2x2 coefficient matrices: the pair G, F of the zero-curvature representation
// and the potential-free pair driving q.
Eigen::Matrix2cd coef_G(const Eigen::RowVector2cd& beta1, const Eigen::RowVector2cd& beta2,
                        cplx lambda);
Eigen::Matrix2cd coef_F(const Eigen::RowVector2cd& beta1, const Eigen::RowVector2cd& beta2,
                        cplx lambda);
Eigen::Matrix2cd coef_G_breve(double omega, double omega_t);
Eigen::Matrix2cd coef_F_breve(double omega, double omega_x);

// Rows beta_1, beta_2 from the field value and the unitary q.
std::pair<Eigen::RowVector2cd, Eigen::RowVector2cd> beta_from_omega(double omega,
                                                                    const Eigen::Matrix2cd& q);

// Everything the t-evolutions need along x = 0: q(0,t), rows beta_k(0,t)
// (splined for substep access), and derivative bounds of the data.
class BoundaryFrame {
  public:
    explicit BoundaryFrame(const BoundaryData& data, int substeps = 8);

    const BoundaryData& data() const { return data_; }
    const Eigen::Matrix2cd& q_node(int j) const { return q_[j]; }
    Eigen::RowVector2cd beta_node(int k, int j) const;
    Eigen::RowVector2cd beta(int k, double t) const;   // splined
    double beta_t_sup(int k) const { return beta_t_sup_[k]; }
    double q_unitarity_drift() const { return q_drift_; }
    int node_of(double t) const;

  private:
    BoundaryData data_;
    std::vector<Eigen::Matrix2cd> q_;
    std::array<std::array<CubicSpline, 2>, 2> splines_;
    std::array<double, 2> beta_t_sup_{};
    double q_drift_ = 0;
};

// Coefficient cutoff of the t-equation (same fixed-point bound as the direct
// module, with the time-derivative bounds of the boundary data).
double time_cutoff(const BoundaryFrame& frame, double margin = 0.1);

// U_k(t, mu) on the half-line t in [0, sign_k * horizon], sampled at the
// boundary nodes covered by the horizon. u[j] corresponds to t = sign * j * dt.
struct UFamily {
    int k = 0;
    cplx mu;
    int sign = 1;  // +1: forward in t, -1: backward
    double dt = 0;
    std::vector<Eigen::Matrix2cd> u;

    const Eigen::Matrix2cd& at_time(double t) const;
};

UFamily build_U(const BoundaryFrame& frame, int k, cplx mu, double horizon,
                double phase_per_step = 0.04, int base_substeps = 2, int sign_override = 0);

// Weyl points at t = 0 from the horizon limits, with a stabilization check
// between the full and half horizon.
std::pair<cplx, cplx> psi_at_origin(const UFamily& u1, const UFamily& u2,
                                    double stabilization_tol = 1e-4);

// Moebius action of U on the Weyl point.
cplx evolve_psi(cplx psi0, const Eigen::Matrix2cd& u);

// Analytic field oracles (used for diagnostics and bundled presets).
struct FieldOracle {
    std::function<double(double, double)> omega;
    std::function<double(double, double)> omega_x;
    std::function<double(double, double)> omega_t;
};

FieldOracle kink_oracle(double v);
FieldOracle constant_pi_oracle();
BoundaryData boundary_from_oracle(const FieldOracle& oracle, double t_max, int n);

// q(x,t) integrated along the path (0,0) -> (x,0) -> (x,t) or the other order.
Eigen::Matrix2cd evolve_q_path(const FieldOracle& oracle, double x, double t, int steps,
                               bool x_first);

// Oracle-mode space-time field on [0, l] x [-t_max, t_max].
struct SGField {
    GridSpec xgrid;
    double t_max = 0;
    int nt = 0;
    std::vector<std::vector<double>> omega;                  // [i][j]
    std::vector<std::vector<Eigen::Matrix2cd>> q;            // [i][j]
    std::vector<std::vector<Eigen::RowVector2cd>> beta1, beta2;

    double dt() const { return 2.0 * t_max / nt; }
    double t(int j) const { return -t_max + j * dt(); }
    double q_unitarity_drift() const;
};

SGField build_field(const FieldOracle& oracle, const GridSpec& xgrid, double t_max, int nt,
                    int substeps = 8);

// max grid norm of G_t - F_x + GF - FG by central differences.
double zero_curvature_residual(const SGField& field, cplx lambda);

struct SGOptions {
    double eta = 0;        // 0: choose from the time cutoff
    double zeta_max = 0;   // 0: 64 * max(1, cutoff)
    int zeta_count = 768;
    double horizon = 0;    // 0: 20 / (|eta| - cutoff/2), capped by the data
    double margin = 0.1;
    double stabilization_tol = 1e-3;
    double range_tol = 1e-2;
    int workers = 0;
    double phase_per_step = 0.04;
    RecoverOptions recover;
};

struct CosRecovery {
    Eigen::VectorXd cos_omega;  // at the x-grid nodes
    ReconstructionReport report;
    double eta = 0;
    double horizon = 0;
    double cutoff = 0;
    double psi_stabilization = 0;  // worst ratio change between horizons
};

// t_eval must land on the boundary time grid; the evolution to t != 0 is
// well conditioned for moderate |t_eval| only (the horizon error of the t = 0
// Weyl point excites the growing U column).
CosRecovery recover_cos_omega(const BoundaryData& boundary, double t_eval, const GridSpec& grid,
                              const SGOptions& opts = {});

}  // namespace ratweyl::sg
