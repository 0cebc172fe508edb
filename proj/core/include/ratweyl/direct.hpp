#pragma once

#include <optional>
#include <vector>

#include "ratweyl/potential.hpp"
#include "ratweyl/propagator.hpp"
#include "ratweyl/spectral.hpp"

namespace ratweyl {

// Step-count policy for the fundamental-solution solves. The coefficient of
// the system oscillates at rate sum_k |lambda-d_k|^{-1}, so the step count
// scales with that rate; `phase_per_step` is the coefficient phase resolved by
// one Magnus step.
struct OdeOptions {
    int base_steps = 768;
    double phase_per_step = 0.04;
    int fixed_steps = 0;  // > 0 overrides the policy
    OdeScheme scheme = OdeScheme::magnus4;
    // when set, repeat the solve with doubled steps and require agreement
    double verify_tol = 0;
};

double coefficient_rate(const PoleSet& poles, cplx lambda);
int recommended_steps(const PoleSet& poles, cplx lambda, double l, const OdeOptions& opts);

// Fundamental solution w(x, lambda), normalized to the identity at x = 0,
// sampled at the grid nodes of the potential.
struct FundamentalSolution {
    cplx lambda;
    GridSpec grid;
    std::vector<Eigen::Matrix2cd> w;
};

FundamentalSolution integrate_fundamental(const PotentialField& pot, const PoleSet& poles,
                                          cplx lambda, const OdeOptions& opts = {});

// Endpoint-only solve of the same system over [0, l].
Eigen::Matrix2cd fundamental_endpoint(const PotentialField& pot, const PoleSet& poles,
                                      cplx lambda, double l, const OdeOptions& opts = {});

// Gauge transform W_k(x, mu) = e^{-i x mu} Q_k(x) w(x, lambda(mu)).
struct GaugeSolution {
    int k = 0;
    cplx mu;
    GridSpec grid;
    std::vector<Eigen::Matrix2cd> w;
};

GaugeSolution gauge_transform_W(const FundamentalSolution& w, int k, cplx mu,
                                const PotentialField& pot, const PoleSet& poles);

// Coefficient matrix of the Weyl-disk Moebius transform, A(x,mu) = Q(0) W(x,mu)^{-1}.
// The default route evaluates Q(0) W(x, conj mu)^* (one solve at conj mu, no
// inversion); the explicit-inversion route is kept as a cross-check.
struct DiskMatrixSamples {
    int k = 0;
    cplx mu;
    GridSpec grid;
    std::vector<Eigen::Matrix2cd> a;
};

DiskMatrixSamples disk_matrix(const PotentialField& pot, const PoleSet& poles, int k, cplx mu,
                              const OdeOptions& opts = {});
DiskMatrixSamples disk_matrix_by_inversion(const GaugeSolution& w_at_mu);

// Endpoint disk matrix A(l, mu); cheap path used by the Weyl-function sampler.
Eigen::Matrix2cd disk_matrix_endpoint(const PotentialField& pot, const PoleSet& poles, int k,
                                      cplx mu, double l, const OdeOptions& opts = {});

// Weyl disk at interval length l: center rho0 and radius (rho1 rho2)^{-1/2}
// of the nested image disks, plus the underlying matrix R(l, mu).
struct WeylDisk {
    double l = 0;
    cplx mu;
    cplx rho0;
    double rho1 = 0;
    double rho2 = 0;
    Eigen::Matrix2cd R;
    double radius() const { return 1.0 / std::sqrt(rho1 * rho2); }
};

WeylDisk weyl_disk(const GaugeSolution& w_at_mu, const PotentialField& pot);

// Moebius image of theta under the disk matrix evaluated at x = l.
cplx approx_weyl_point(const Eigen::Matrix2cd& disk_matrix_at_l, cplx theta = cplx(0, 0));

// WT value from a Weyl-point value and the boundary row beta_k(0).
cplx wt_from_psi(cplx psi, const Eigen::RowVector2cd& beta0, double eps = 1e-8);

// Coefficient cutoff M: fixed point of the bound
//   M/4 >= sup_x ||Q_k'|| + sum_{p != k} (|d_k - d_p| - 2/M)^{-1},
// inflated by (1 + margin), with floor 4*margin.
double bound_M(const PotentialField& pot, const PoleSet& poles, double margin = 0.1);

// Sampled norms ||xi(x_i, mu_j)|| of the gauge residual coefficient, used to
// recheck a cutoff M on a probe set.
struct XiField {
    int k = 0;
    std::vector<cplx> mu;
    std::vector<std::vector<double>> norms;  // [i][j]
    double sup = 0;
};

XiField xi_field(const PotentialField& pot, const PoleSet& poles, int k,
                 const std::vector<cplx>& mu_probe);

// Sampled Weyl function: per-pole WT samples on the line Im mu = eta.
struct WeylData {
    PoleSet poles;
    double eta = 0;
    std::vector<double> zeta;
    std::vector<std::vector<cplx>> samples;  // [k][j]
    std::vector<cplx> c;                     // asymptotic constants (exact or estimated)
    double cutoff_M = 0;
    double interval_l = 0;
    double truncation_bound = 0;    // 2 exp((2 eta + M/2) l)
    bool truncation_warning = false;  // bound above the requested tolerance

    int pole_count() const { return poles.size(); }
    int sample_count() const { return static_cast<int>(zeta.size()); }
    cplx mu(int j) const { return cplx(zeta[j], eta); }
    double sup_norm() const;
};

std::vector<double> make_zeta_grid(double zeta_max, int count);

// One WT sample phi_k(mu) through the finite-interval Weyl-point approximant.
cplx wt_sample(const PotentialField& pot, const PoleSet& poles, int k, cplx mu, double l,
               const OdeOptions& ode = {}, double mobius_eps = 1e-8);

struct WeylSampleOptions {
    OdeOptions ode;
    double mobius_eps = 1e-8;
    int workers = 0;
    double margin = 0.1;                  // margin for bound_M
    std::optional<double> cutoff_M;       // reuse a precomputed M
    bool require_admissible = true;       // enforce eta < -M/4
    double truncation_tol = 5e-2;         // warn when 2 exp((2 eta + M/2) l) exceeds this
};

WeylData sample_weyl_function(const PotentialField& pot, const PoleSet& poles, double l,
                              double eta, const std::vector<double>& zeta,
                              const WeylSampleOptions& opts = {});

}  // namespace ratweyl
