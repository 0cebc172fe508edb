#pragma once

#include <optional>

#include "ratweyl/snode.hpp"

namespace ratweyl {

// Weyl set: boundary rows beta_k(0) plus Weyl-point samples on a horizontal
// line, with the index partition by which boundary entry is nonzero
// (partition[k] = 1: beta_k1(0) != 0; = 2: beta_k2(0) != 0).
struct WeylSetData {
    PoleSet poles;
    double eta = 0;
    std::vector<double> zeta;
    std::vector<Eigen::RowVector2cd> beta0;
    std::vector<int> partition;
    std::vector<std::vector<cplx>> psi;  // [k][j]

    void validate() const;
};

struct ReconstructionReport {
    PotentialField beta;
    Phi2Field columns;
    double identity_residual = 0;
    double row_norm_drift = 0;
    double truncation_bound = 0;
    double synthesis_tail_estimate = 0;
    std::vector<cplx> c_estimates;
    std::optional<double> projector_error;  // vs supplied ground truth
};

struct RecoverOptions {
    SynthesisOptions synthesis;
    ContourOptions contour;
    SweepOptions sweep;
    bool compute_identity_residual = true;
};

// Reconstruction from a sampled Weyl function (strict-boundary systems).
ReconstructionReport recover_from_weyl_function(const WeylData& weyl, const GridSpec& grid,
                                                const RecoverOptions& opts = {});

// Reconstruction from a Weyl set; handles poles with beta_k1(0) = 0 by
// swapping which source column varies.
ReconstructionReport recover_from_weyl_set(const WeylSetData& ws, const GridSpec& grid,
                                           const RecoverOptions& opts = {});

// Gauge-invariant comparison max_{k,i} || bhat_k* bhat_k - beta_k* beta_k ||.
double projector_error(const PotentialField& recovered, const PotentialField& truth);

// Borg-Marchenko gap harness: potentials equal on [0, l0] have Weyl functions
// whose difference decays like exp(2 Im mu l0) along rays; the harness fits
// that rate.
struct GapFit {
    double rate = 0;        // fitted decay exponent (expected ~ l0)
    double noise_floor = 0;
    bool degenerate = false;  // difference below the noise floor everywhere
    int points_used = 0;
};

struct GapOptions {
    double ray_slope = 1.0;     // ray Re mu = slope * Im mu
    double eta_min = 4.0;       // |Im mu| range of the fit
    double eta_max = 16.0;
    int points = 16;
    double noise_floor = 1e-9;  // solver noise on the WT samples
    WeylSampleOptions sample;
};

GapFit borg_marchenko_gap(const PotentialField& pot_a, const PotentialField& pot_b,
                          const PoleSet& poles, double l0, const GapOptions& opts = {});

}  // namespace ratweyl
