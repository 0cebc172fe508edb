#include "ratweyl/direct.hpp"

#include <cmath>

#include "ratweyl/parallel.hpp"

namespace ratweyl {

namespace {

const Eigen::Matrix2cd kSignature = (Eigen::Matrix2cd() << 1, 0, 0, -1).finished();

void check_not_pole(const PoleSet& poles, cplx lambda) {
    for (double dk : poles.d)
        if (lambda == cplx(dk, 0.0))
            throw std::domain_error("lambda coincides with a pole of the system");
}

Coeff2x2 system_coefficient(const PotentialField& pot, const PoleSet& poles, cplx lambda) {
    return [&pot, &poles, lambda](double x) {
        Eigen::Matrix2cd a = Eigen::Matrix2cd::Zero();
        for (int k = 0; k < poles.size(); ++k) {
            const Eigen::RowVector2cd row = pot.row_at(k, x);
            const cplx c = iu * static_cast<double>(poles.b[k]) / (lambda - poles.d[k]);
            a += c * (row.adjoint() * row);
        }
        return a;
    };
}

}  // namespace

double coefficient_rate(const PoleSet& poles, cplx lambda) {
    double rate = 0.0;
    for (double dk : poles.d) rate += 1.0 / std::abs(lambda - dk);
    return rate;
}

int recommended_steps(const PoleSet& poles, cplx lambda, double l, const OdeOptions& opts) {
    if (opts.fixed_steps > 0) return opts.fixed_steps;
    const double phase = coefficient_rate(poles, lambda) * l;
    const int by_phase = static_cast<int>(std::ceil(phase / opts.phase_per_step));
    return std::max(opts.base_steps, by_phase);
}

FundamentalSolution integrate_fundamental(const PotentialField& pot, const PoleSet& poles,
                                          cplx lambda, const OdeOptions& opts) {
    check_not_pole(poles, lambda);
    const GridSpec& g = pot.grid();
    const int total = recommended_steps(poles, lambda, g.l, opts);
    const int substeps = std::max(1, (total + g.n - 1) / g.n);
    auto a = system_coefficient(pot, poles, lambda);
    FundamentalSolution out;
    out.lambda = lambda;
    out.grid = g;
    out.w = propagate_samples(a, 0.0, g.l, g.n, substeps, Eigen::Matrix2cd::Identity(), opts.scheme);
    if (opts.verify_tol > 0) {
        const Eigen::Matrix2cd refined =
            propagate(a, 0.0, g.l, 2 * substeps * g.n, opts.scheme);
        const double diff = (refined - out.w.back()).norm() / refined.norm();
        if (diff > opts.verify_tol)
            throw numeric_error("integrate_fundamental: step-doubling check failed, disagreement " +
                                std::to_string(diff));
    }
    return out;
}

Eigen::Matrix2cd fundamental_endpoint(const PotentialField& pot, const PoleSet& poles,
                                      cplx lambda, double l, const OdeOptions& opts) {
    check_not_pole(poles, lambda);
    if (l <= 0 || l > pot.grid().l + 1e-12)
        throw validation_error("fundamental_endpoint: l outside the potential's interval");
    auto a = system_coefficient(pot, poles, lambda);
    return propagate(a, 0.0, l, recommended_steps(poles, lambda, l, opts), opts.scheme);
}

GaugeSolution gauge_transform_W(const FundamentalSolution& w, int k, cplx mu,
                                const PotentialField& pot, const PoleSet& poles) {
    const cplx expected = map_lambda_to_mu(k, w.lambda, poles);
    if (std::abs(mu - expected) > 1e-10 * std::max(1.0, std::abs(expected)))
        throw validation_error("gauge_transform_W: mu does not match the lambda of this solution");
    GaugeSolution out;
    out.k = k;
    out.mu = mu;
    out.grid = w.grid;
    out.w.resize(w.w.size());
    for (size_t i = 0; i < w.w.size(); ++i) {
        const double x = w.grid.x(static_cast<int>(i));
        const Eigen::Matrix2cd q = gauge_matrix(pot.row(k, static_cast<int>(i)));
        out.w[i] = std::exp(-iu * x * mu) * q * w.w[i];
    }
    return out;
}

DiskMatrixSamples disk_matrix(const PotentialField& pot, const PoleSet& poles, int k, cplx mu,
                              const OdeOptions& opts) {
    const cplx lambda_bar = map_mu_to_lambda(k, std::conj(mu), poles);
    FundamentalSolution wbar = integrate_fundamental(pot, poles, lambda_bar, opts);
    GaugeSolution gauge = gauge_transform_W(wbar, k, std::conj(mu), pot, poles);
    const Eigen::Matrix2cd q0 = gauge_matrix(pot.row(k, 0));
    DiskMatrixSamples out;
    out.k = k;
    out.mu = mu;
    out.grid = pot.grid();
    out.a.resize(gauge.w.size());
    for (size_t i = 0; i < gauge.w.size(); ++i) out.a[i] = q0 * gauge.w[i].adjoint();
    return out;
}

DiskMatrixSamples disk_matrix_by_inversion(const GaugeSolution& w_at_mu) {
    DiskMatrixSamples out;
    out.k = w_at_mu.k;
    out.mu = w_at_mu.mu;
    out.grid = w_at_mu.grid;
    out.a.resize(w_at_mu.w.size());
    const Eigen::Matrix2cd q0 = w_at_mu.w.front();  // W(0, mu) = Q(0)
    for (size_t i = 0; i < w_at_mu.w.size(); ++i) out.a[i] = q0 * w_at_mu.w[i].inverse();
    return out;
}

Eigen::Matrix2cd disk_matrix_endpoint(const PotentialField& pot, const PoleSet& poles, int k,
                                      cplx mu, double l, const OdeOptions& opts) {
    const cplx lambda_bar = map_mu_to_lambda(k, std::conj(mu), poles);
    const Eigen::Matrix2cd wbar = fundamental_endpoint(pot, poles, lambda_bar, l, opts);
    const Eigen::Matrix2cd q0 = gauge_matrix(pot.row(k, 0));
    Eigen::RowVector2cd row_l = pot.row_at(k, l);
    row_l /= row_l.norm();
    const Eigen::Matrix2cd ql = gauge_matrix(row_l);
    const Eigen::Matrix2cd w_gauge = std::exp(-iu * l * std::conj(mu)) * ql * wbar;
    return q0 * w_gauge.adjoint();
}

WeylDisk weyl_disk(const GaugeSolution& w_at_mu, const PotentialField& pot) {
    const Eigen::Matrix2cd q0 = gauge_matrix(pot.row(w_at_mu.k, 0));
    const Eigen::Matrix2cd wl = w_at_mu.w.back();
    WeylDisk disk;
    disk.l = w_at_mu.grid.l;
    disk.mu = w_at_mu.mu;
    disk.R = q0 * wl.adjoint() * kSignature * wl * q0.adjoint();
    const double r11 = disk.R(0, 0).real();
    const double r22 = disk.R(1, 1).real();
    if (r11 <= 0.0)
        throw numeric_error("weyl_disk: R11 <= 0, mu outside the admissible half-plane (M too small)");
    disk.rho0 = -disk.R(0, 1) / r11;
    disk.rho1 = r11;
    const double inv_rho2 = std::norm(disk.R(0, 1)) / r11 - r22;
    if (inv_rho2 <= 0.0)
        throw numeric_error("weyl_disk: rho2 <= 0, mu outside the admissible half-plane (M too small)");
    disk.rho2 = 1.0 / inv_rho2;
    return disk;
}

cplx approx_weyl_point(const Eigen::Matrix2cd& a, cplx theta) {
    const cplx den = a(1, 0) * theta + a(1, 1);
    if (std::abs(den) < 1e-13 * (std::abs(a(1, 0) * theta) + std::abs(a(1, 1))))
        throw numeric_error("approx_weyl_point: degenerate disk (vanishing Moebius denominator)");
    return (a(0, 0) * theta + a(0, 1)) / den;
}

cplx wt_from_psi(cplx psi, const Eigen::RowVector2cd& beta0, double eps) {
    const cplx den = std::conj(beta0(1)) * psi + beta0(0);
    if (std::abs(den) <= eps)
        throw numeric_error("wt_from_psi: near-singular Moebius transform at this mu");
    return (std::conj(beta0(0)) * psi - beta0(1)) / den;
}

double bound_M(const PotentialField& pot, const PoleSet& poles, double margin) {
    if (margin < 0) throw validation_error("bound_M: margin must be nonnegative");
    const int m = poles.size();
    // sup ||Q_k'|| = sup ||beta_k'||, probed at nodes and midpoints
    std::vector<double> qprime(m, 0.0);
    const GridSpec& g = pot.grid();
    for (int k = 0; k < m; ++k)
        for (int i = 0; i <= 2 * g.n; ++i) {
            const double x = std::min(g.l, 0.5 * i * g.step());
            qprime[k] = std::max(qprime[k], pot.row_derivative_at(k, x).norm());
        }

    auto rhs = [&](double M) {
        double worst = 0.0;
        for (int k = 0; k < m; ++k) {
            double sum = qprime[k];
            for (int p = 0; p < m; ++p) {
                if (p == k) continue;
                const double gap = std::abs(poles.d[k] - poles.d[p]) - 2.0 / M;
                if (gap <= 0.0) return std::numeric_limits<double>::infinity();
                sum += 1.0 / gap;
            }
            worst = std::max(worst, sum);
        }
        return 4.0 * worst;
    };

    const double floor_value = 4.0 * margin;
    if (m == 1) return std::max(4.0 * qprime[0] * (1.0 + margin), floor_value);

    // Smallest M with M >= rhs(M). rhs decreases in M, so M - rhs(M) is
    // increasing and bisection applies.
    double lo = 2.0 / poles.min_gap();
    double hi = std::max(8.0, 4.0 * lo);
    int expand = 0;
    while (!(std::isfinite(rhs(hi)) && rhs(hi) <= hi)) {
        hi *= 2.0;
        if (++expand > 100)
            throw numeric_error("bound_M: fixed-point search failed (unbounded coefficient)");
    }
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double r = rhs(mid);
        if (std::isfinite(r) && r <= mid)
            hi = mid;
        else
            lo = mid;
    }
    return std::max(hi * (1.0 + margin), floor_value);
}

XiField xi_field(const PotentialField& pot, const PoleSet& poles, int k,
                 const std::vector<cplx>& mu_probe) {
    XiField out;
    out.k = k;
    out.mu = mu_probe;
    const GridSpec& g = pot.grid();
    out.norms.assign(g.nodes(), std::vector<double>(mu_probe.size(), 0.0));
    for (int i = 0; i < g.nodes(); ++i) {
        const double x = g.x(i);
        const Eigen::Matrix2cd q = gauge_matrix(pot.row(k, i));
        Eigen::Matrix2cd qp;
        const Eigen::RowVector2cd dr = pot.row_derivative_at(k, x);
        qp << dr(0), dr(1), -std::conj(dr(1)), std::conj(dr(0));
        const Eigen::Matrix2cd base = qp * q.adjoint();
        for (size_t j = 0; j < mu_probe.size(); ++j) {
            const cplx lambda = map_mu_to_lambda(k, mu_probe[j], poles);
            Eigen::Matrix2cd cross = Eigen::Matrix2cd::Zero();
            for (int p = 0; p < poles.size(); ++p) {
                if (p == k) continue;
                const Eigen::RowVector2cd row = pot.row(p, i);
                cross += (static_cast<double>(poles.b[p]) / (lambda - poles.d[p])) *
                         (row.adjoint() * row);
            }
            const Eigen::Matrix2cd xi = base + iu * (q * cross * q.adjoint());
            const double nrm = xi.operatorNorm();
            out.norms[i][j] = nrm;
            out.sup = std::max(out.sup, nrm);
        }
    }
    return out;
}

double WeylData::sup_norm() const {
    double sup = 0.0;
    for (int j = 0; j < sample_count(); ++j) {
        double s = 0.0;
        for (int k = 0; k < pole_count(); ++k) s += std::norm(samples[k][j]);
        sup = std::max(sup, std::sqrt(s));
    }
    return sup;
}

std::vector<double> make_zeta_grid(double zeta_max, int count) {
    if (count < 2) throw validation_error("make_zeta_grid: need at least two samples");
    std::vector<double> z(count);
    const double step = 2.0 * zeta_max / (count - 1);
    for (int j = 0; j < count; ++j) z[j] = -zeta_max + j * step;
    return z;
}

cplx wt_sample(const PotentialField& pot, const PoleSet& poles, int k, cplx mu, double l,
               const OdeOptions& ode, double mobius_eps) {
    const Eigen::Matrix2cd a = disk_matrix_endpoint(pot, poles, k, mu, l, ode);
    const cplx psi = approx_weyl_point(a, cplx(0, 0));
    return wt_from_psi(psi, pot.row(k, 0), mobius_eps);
}

WeylData sample_weyl_function(const PotentialField& pot, const PoleSet& poles, double l,
                              double eta, const std::vector<double>& zeta,
                              const WeylSampleOptions& opts) {
    if (eta >= 0) throw validation_error("sample_weyl_function: eta must be negative");
    const int m = poles.size();
    const double M = opts.cutoff_M ? *opts.cutoff_M : bound_M(pot, poles, opts.margin);
    if (opts.require_admissible && !(eta < -M / 4.0))
        throw validation_error("sample_weyl_function: eta is not below -M/4");

    WeylData out;
    out.poles = poles;
    out.eta = eta;
    out.zeta = zeta;
    out.samples.assign(m, std::vector<cplx>(zeta.size()));
    out.cutoff_M = M;
    out.interval_l = l;
    out.truncation_bound = 2.0 * std::exp((2.0 * eta + M / 2.0) * l);
    out.truncation_warning = out.truncation_bound > opts.truncation_tol;
    out.c.resize(m);
    for (int k = 0; k < m; ++k) {
        const Eigen::RowVector2cd b0 = pot.row(k, 0);
        if (std::abs(b0(0)) < 1e-12)
            throw validation_error("sample_weyl_function: beta_k1(0) = 0, WT function undefined (use the Weyl-set path)");
        out.c[k] = -b0(1) / b0(0);
    }

    // One fixed step count for the whole sweep (worst-|mu| sample) keeps the
    // solver error smooth across the zeta grid.
    OdeOptions ode = opts.ode;
    if (ode.fixed_steps == 0) {
        double worst = 0.0;
        for (int k = 0; k < m; ++k)
            for (double z : zeta) {
                const cplx lambda = map_mu_to_lambda(k, cplx(z, -eta), poles);
                worst = std::max(worst, coefficient_rate(poles, lambda));
            }
        ode.fixed_steps =
            std::max(ode.base_steps, static_cast<int>(std::ceil(worst * l / ode.phase_per_step)));
    }

    const int count = static_cast<int>(zeta.size());
    parallel_for(count * m, opts.workers, [&](int idx) {
        const int k = idx / count;
        const int j = idx % count;
        out.samples[k][j] = wt_sample(pot, poles, k, cplx(zeta[j], eta), l, ode, opts.mobius_eps);
    });
    return out;
}

}  // namespace ratweyl
