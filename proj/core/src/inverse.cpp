#include "ratweyl/inverse.hpp"

#include <cmath>

#include "ratweyl/parallel.hpp"

namespace ratweyl {

void WeylSetData::validate() const {
    poles.validate();
    const size_t m = poles.d.size();
    if (beta0.size() != m || partition.size() != m || psi.size() != m)
        throw validation_error("WeylSetData: per-pole families do not match the pole set");
    for (size_t k = 0; k < m; ++k) {
        if (partition[k] != 1 && partition[k] != 2)
            throw validation_error("WeylSetData: every pole must belong to exactly one partition");
        const double nrm = beta0[k].norm();
        if (std::abs(nrm - 1.0) > 1e-6)
            throw validation_error("WeylSetData: boundary rows must be unit rows");
        const cplx pivot = partition[k] == 1 ? beta0[k](0) : beta0[k](1);
        if (std::abs(pivot) < 1e-12)
            throw validation_error("WeylSetData: partition does not match the boundary row");
        if (psi[k].size() != zeta.size())
            throw validation_error("WeylSetData: sample family size mismatch");
    }
}

namespace {

ReconstructionReport finish_recovery(const WeylData& weyl_like, const Phi2Field& columns,
                                     SourceColumns cols, const GridSpec& grid,
                                     const RecoverOptions& opts) {
    SNode node = assemble_S(cols, weyl_like.poles, grid, opts.contour);
    InverseSweep sweep = inverse_sweep(node, opts.sweep);
    RecoveredField rec = recover_beta(node, sweep);

    ReconstructionReport report{std::move(rec.field), columns, 0.0, rec.row_norm_drift,
                                weyl_like.truncation_bound, columns.tail_estimate,
                                columns.c, std::nullopt};
    if (opts.compute_identity_residual) report.identity_residual = identity_residual(node);
    return report;
}

}  // namespace

ReconstructionReport recover_from_weyl_function(const WeylData& weyl, const GridSpec& grid,
                                                const RecoverOptions& opts) {
    if (!std::isfinite(weyl.sup_norm()))
        throw validation_error("recover_from_weyl_function: unbounded Weyl samples");
    Phi2Field columns = synth_phi2(weyl, grid, opts.synthesis);
    return finish_recovery(weyl, columns, SourceColumns::standard(columns), grid, opts);
}

ReconstructionReport recover_from_weyl_set(const WeylSetData& ws, const GridSpec& grid,
                                           const RecoverOptions& opts) {
    ws.validate();
    const int m = ws.poles.size();
    const int count = static_cast<int>(ws.zeta.size());

    // poles with a regular first boundary entry get the WT function itself,
    // the others its reciprocal variant
    WeylData derived;
    derived.poles = ws.poles;
    derived.eta = ws.eta;
    derived.zeta = ws.zeta;
    derived.samples.assign(m, std::vector<cplx>(count));
    derived.c.resize(m);
    for (int k = 0; k < m; ++k) {
        const cplx b1 = ws.beta0[k](0), b2 = ws.beta0[k](1);
        for (int j = 0; j < count; ++j) {
            const cplx p = ws.psi[k][j];
            const cplx num = std::conj(b1) * p - b2;
            const cplx den = std::conj(b2) * p + b1;
            if (ws.partition[k] == 1) {
                if (std::abs(den) < 1e-12)
                    throw numeric_error("recover_from_weyl_set: singular Moebius transform");
                derived.samples[k][j] = num / den;
            } else {
                if (std::abs(num) < 1e-12)
                    throw numeric_error("recover_from_weyl_set: singular Moebius transform");
                derived.samples[k][j] = den / num;
            }
        }
        derived.c[k] = ws.partition[k] == 1 ? -b2 / b1 : -b1 / b2;
    }

    Phi2Field columns = synth_phi2(derived, grid, opts.synthesis);

    SourceColumns cols;
    cols.grid = grid;
    cols.m = m;
    cols.varying.resize(m);
    cols.value.resize(m);
    cols.d1.resize(m);
    cols.d2.resize(m);
    const int nodes = grid.nodes();
    for (int k = 0; k < m; ++k) {
        const int vc = ws.partition[k] == 1 ? 1 : 0;
        cols.varying[k] = vc;
        cols.value[k][1 - vc] = Eigen::VectorXcd::Ones(nodes);
        cols.d1[k][1 - vc] = Eigen::VectorXcd::Zero(nodes);
        cols.d2[k][1 - vc] = Eigen::VectorXcd::Zero(nodes);
        cols.value[k][vc] = columns.value[k];
        cols.d1[k][vc] = columns.d1[k];
        cols.d2[k][vc] = columns.d2[k];
    }
    return finish_recovery(derived, columns, std::move(cols), grid, opts);
}

double projector_error(const PotentialField& recovered, const PotentialField& truth) {
    if (recovered.poles() != truth.poles())
        throw validation_error("projector_error: pole count mismatch");
    double worst = 0.0;
    const GridSpec& g = recovered.grid();
    for (int k = 0; k < recovered.poles(); ++k)
        for (int i = 0; i < g.nodes(); ++i) {
            Eigen::RowVector2cd a = recovered.row(k, i);
            Eigen::RowVector2cd b = truth.row_at(k, g.x(i));
            b /= b.norm();
            const Eigen::Matrix2cd diff = a.adjoint() * a - b.adjoint() * b;
            worst = std::max(worst, diff.operatorNorm());
        }
    return worst;
}

GapFit borg_marchenko_gap(const PotentialField& pot_a, const PotentialField& pot_b,
                          const PoleSet& poles, double l0, const GapOptions& opts) {
    if (l0 <= 0 || l0 >= pot_a.grid().l)
        throw validation_error("borg_marchenko_gap: l0 must lie inside the interval");
    const double l = std::min(pot_a.grid().l, pot_b.grid().l);
    const int m = poles.size();
    const int count = opts.points;

    std::vector<double> xs(count);
    std::vector<double> logdiff(count);
    std::vector<int> usable(count, 0);
    OdeOptions ode = opts.sample.ode;
    parallel_for(count, opts.sample.workers, [&](int j) {
        const double tau = opts.eta_min + (opts.eta_max - opts.eta_min) * j / (count - 1);
        const cplx mu(-opts.ray_slope * tau, -tau);  // ray Re mu = slope * Im mu
        double s = 0.0;
        for (int k = 0; k < m; ++k) {
            const cplx fa = wt_sample(pot_a, poles, k, mu, l, ode, opts.sample.mobius_eps);
            const cplx fb = wt_sample(pot_b, poles, k, mu, l, ode, opts.sample.mobius_eps);
            s += std::norm(fa - fb);
        }
        const double diff = std::sqrt(s);
        xs[j] = -2.0 * mu.imag();
        if (diff > 30.0 * opts.noise_floor) {
            usable[j] = 1;
            // the |mu| factor flattens the generic 1/mu prefactor of a
            // first-order junction, leaving the exponential rate
            logdiff[j] = std::log(diff * std::abs(mu));
        }
    });

    GapFit fit;
    fit.noise_floor = opts.noise_floor;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int j = 0; j < count; ++j) {
        if (!usable[j]) continue;
        ++fit.points_used;
        sx += xs[j];
        sy += logdiff[j];
        sxx += xs[j] * xs[j];
        sxy += xs[j] * logdiff[j];
    }
    if (fit.points_used < 4) {
        fit.degenerate = true;
        return fit;
    }
    const double n = fit.points_used;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.rate = -slope;
    return fit;
}

}  // namespace ratweyl
