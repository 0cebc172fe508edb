#pragma once

#include "ratweyl/direct.hpp"

namespace ratweyl {

// Fitted asymptotic tail of a WT sample family: phi(mu) ~ sum_s alpha_s mu^{-s}.
// The fit minimizes the misfit on the outer zeta windows; the subtracted part
// is inverted in closed form, so only its residual leaks into the transform.
struct AsymptoticFit {
    Eigen::VectorXcd alpha;
    double residual_rms = 0;
    double residual_edge = 0;  // mean |residual| at the outermost samples
    cplx c_decile;             // plain average over the outer |zeta| decile
};

struct SynthesisOptions {
    int fit_terms = 5;           // alpha_0 .. alpha_{fit_terms-1}
    double fit_fraction = 0.25;  // per-side share of the zeta grid used by the fit
    double tail_warn = 5e-3;     // warning threshold on the amplified tail estimate
};

AsymptoticFit fit_asymptotic_tail(const std::vector<double>& zeta, double eta,
                                  const std::vector<cplx>& samples,
                                  const SynthesisOptions& opts = {});

// Recovered column family Phi2 with two derivatives on the grid nodes.
struct Phi2Field {
    GridSpec grid;
    int m = 0;
    std::vector<Eigen::VectorXcd> value;
    std::vector<Eigen::VectorXcd> d1;
    std::vector<Eigen::VectorXcd> d2;
    std::vector<AsymptoticFit> fits;
    std::vector<cplx> c;       // fitted constants alpha_0 per pole
    double tail_estimate = 0;  // amplified truncation-tail estimate at x = l
    bool tail_warning = false;
};

Phi2Field synth_phi2(const WeylData& weyl, const GridSpec& grid,
                     const SynthesisOptions& opts = {});

// Pointwise evaluation of the transform for one pole; 0 for x < 0.
cplx synth_value_at(const WeylData& weyl, int k, double x, const SynthesisOptions& opts = {});

}  // namespace ratweyl
