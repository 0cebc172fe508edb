#include "ratweyl/synthesis.hpp"

#include <cmath>

namespace ratweyl {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct PolePrep {
    Eigen::VectorXcd alpha;
    std::vector<cplx> remainder;  // samples minus fitted tail
    AsymptoticFit fit;
};

PolePrep prepare_pole(const std::vector<double>& zeta, double eta, const std::vector<cplx>& samples,
                      const SynthesisOptions& opts) {
    PolePrep prep;
    prep.fit = fit_asymptotic_tail(zeta, eta, samples, opts);
    prep.alpha = prep.fit.alpha;
    const int count = static_cast<int>(zeta.size());
    prep.remainder.resize(count);
    for (int j = 0; j < count; ++j) {
        const cplx mu(zeta[j], eta);
        cplx fitval = 0.0;
        cplx p = 1.0;
        for (int s = 0; s < prep.alpha.size(); ++s) {
            fitval += prep.alpha(s) * p;
            p /= mu;
        }
        prep.remainder[j] = samples[j] - fitval;
    }
    return prep;
}

// Closed-form part: the mu^{-s} tail term transforms to -alpha_s (2ix)^s / s!.
cplx poly_part(const Eigen::VectorXcd& alpha, double x, int derivative) {
    cplx acc = 0.0;
    for (int s = derivative; s < alpha.size(); ++s) {
        cplx term = alpha(s);
        for (int f = 0; f < derivative; ++f) term *= cplx(0.0, 2.0);
        // (2ix)^{s-d} / (s-d)!
        cplx p = 1.0;
        for (int f = 1; f <= s - derivative; ++f) p *= cplx(0.0, 2.0 * x) / static_cast<double>(f);
        acc += term * p;
    }
    return -acc;
}

}  // namespace

AsymptoticFit fit_asymptotic_tail(const std::vector<double>& zeta, double eta,
                                  const std::vector<cplx>& samples, const SynthesisOptions& opts) {
    const int count = static_cast<int>(zeta.size());
    if (count != static_cast<int>(samples.size()) || count < 4)
        throw validation_error("fit_asymptotic_tail: bad sample family");
    int terms = std::max(1, opts.fit_terms);
    int per_side = std::max(terms + 1, static_cast<int>(std::floor(opts.fit_fraction * count / 2.0)));
    per_side = std::min(per_side, count / 2);
    std::vector<int> idx;
    for (int j = 0; j < per_side; ++j) idx.push_back(j);
    for (int j = count - per_side; j < count; ++j) idx.push_back(j);
    terms = std::min<int>(terms, static_cast<int>(idx.size()) - 1);

    // column scaling by the smallest |mu| in the window keeps the LS well posed
    double mu_min = std::numeric_limits<double>::infinity();
    for (int j : idx) mu_min = std::min(mu_min, std::abs(cplx(zeta[j], eta)));

    Eigen::MatrixXcd a(idx.size(), terms);
    Eigen::VectorXcd b(idx.size());
    for (size_t r = 0; r < idx.size(); ++r) {
        const cplx mu(zeta[idx[r]], eta);
        cplx p = 1.0;
        for (int s = 0; s < terms; ++s) {
            a(r, s) = p;
            p *= mu_min / mu;
        }
        b(r) = samples[idx[r]];
    }
    Eigen::VectorXcd scaled = a.colPivHouseholderQr().solve(b);

    AsymptoticFit fit;
    fit.alpha.resize(terms);
    double scale = 1.0;
    for (int s = 0; s < terms; ++s) {
        fit.alpha(s) = scaled(s) * scale;
        scale *= mu_min;
    }
    const Eigen::VectorXcd resid = a * scaled - b;
    fit.residual_rms = std::sqrt(resid.squaredNorm() / resid.size());
    fit.residual_edge = 0.5 * (std::abs(resid(0)) + std::abs(resid(resid.size() - 1)));
    const int decile = std::max(1, count / 20);
    cplx acc = 0.0;
    for (int j = 0; j < decile; ++j) acc += samples[j] + samples[count - 1 - j];
    fit.c_decile = acc / static_cast<double>(2 * decile);
    return fit;
}

Phi2Field synth_phi2(const WeylData& weyl, const GridSpec& grid, const SynthesisOptions& opts) {
    const int m = weyl.pole_count();
    const int count = weyl.sample_count();
    if (count < 8) throw validation_error("synth_phi2: too few zeta samples");
    const double eta = weyl.eta;
    const double dz = weyl.zeta[1] - weyl.zeta[0];
    for (int j = 1; j < count; ++j)
        if (std::abs(weyl.zeta[j] - weyl.zeta[j - 1] - dz) > 1e-9 * std::max(1.0, std::abs(dz)))
            throw validation_error("synth_phi2: zeta grid must be uniform");

    Phi2Field out;
    out.grid = grid;
    out.m = m;
    out.value.assign(m, Eigen::VectorXcd::Zero(grid.nodes()));
    out.d1.assign(m, Eigen::VectorXcd::Zero(grid.nodes()));
    out.d2.assign(m, Eigen::VectorXcd::Zero(grid.nodes()));
    out.fits.resize(m);
    out.c.resize(m);

    const double h = grid.step();
    for (int k = 0; k < m; ++k) {
        PolePrep prep = prepare_pole(weyl.zeta, eta, weyl.samples[k], opts);
        out.fits[k] = prep.fit;
        out.c[k] = prep.alpha(0);

        // trapezoid sums  sum_j w_j rho_j mu^{-p} e^{2 i zeta_j x}  accumulated
        // with per-sample phase rotations across the x grid
        Eigen::VectorXcd t0 = Eigen::VectorXcd::Zero(grid.nodes());
        Eigen::VectorXcd t1 = Eigen::VectorXcd::Zero(grid.nodes());
        Eigen::VectorXcd t2 = Eigen::VectorXcd::Zero(grid.nodes());
        for (int j = 0; j < count; ++j) {
            const cplx mu(weyl.zeta[j], eta);
            const double wq = (j == 0 || j == count - 1) ? 0.5 : 1.0;
            const cplx base = wq * prep.remainder[j];
            const cplx rot = std::exp(cplx(0.0, 2.0 * weyl.zeta[j] * h));
            cplx ph = 1.0;
            const cplx v0 = base / mu, v1 = base, v2 = base * mu;
            for (int i = 0; i < grid.nodes(); ++i) {
                t0(i) += v0 * ph;
                t1(i) += v1 * ph;
                t2(i) += v2 * ph;
                ph *= rot;
            }
        }
        for (int i = 0; i < grid.nodes(); ++i) {
            const double x = grid.x(i);
            const double amp = std::exp(-2.0 * eta * x);
            const cplx f0 = (iu / (2.0 * kPi)) * amp * dz * t0(i);
            const cplx f1 = (-1.0 / kPi) * amp * dz * t1(i);
            const cplx f2 = (-2.0 * iu / kPi) * amp * dz * t2(i);
            out.value[k](i) = poly_part(prep.alpha, x, 0) + f0;
            out.d1[k](i) = poly_part(prep.alpha, x, 1) + f1;
            out.d2[k](i) = poly_part(prep.alpha, x, 2) + f2;
        }

        // amplified estimate of the neglected |zeta| > a tail at x = l
        const double a_max = std::max(std::abs(weyl.zeta.front()), std::abs(weyl.zeta.back()));
        const double est = prep.fit.residual_edge * std::exp(-2.0 * eta * grid.l) /
                           (kPi * std::max(1.0, 2.0 * a_max * grid.l));
        out.tail_estimate = std::max(out.tail_estimate, est);
    }
    out.tail_warning = out.tail_estimate > opts.tail_warn;
    return out;
}

cplx synth_value_at(const WeylData& weyl, int k, double x, const SynthesisOptions& opts) {
    if (x < 0.0) return cplx(0.0, 0.0);
    PolePrep prep = prepare_pole(weyl.zeta, weyl.eta, weyl.samples[k], opts);
    const double dz = weyl.zeta[1] - weyl.zeta[0];
    cplx t0 = 0.0;
    const int count = weyl.sample_count();
    for (int j = 0; j < count; ++j) {
        const cplx mu(weyl.zeta[j], weyl.eta);
        const double wq = (j == 0 || j == count - 1) ? 0.5 : 1.0;
        t0 += wq * prep.remainder[j] / mu * std::exp(cplx(0.0, 2.0 * weyl.zeta[j] * x));
    }
    return poly_part(prep.alpha, x, 0) +
           (iu / (2.0 * kPi)) * std::exp(-2.0 * weyl.eta * x) * dz * t0;
}

}  // namespace ratweyl
