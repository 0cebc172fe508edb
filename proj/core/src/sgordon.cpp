#include "ratweyl/sgordon.hpp"

#include <cmath>

#include "ratweyl/parallel.hpp"
#include "ratweyl/propagator.hpp"
#include "ratweyl/spectral.hpp"

namespace ratweyl::sg {

namespace {

const Eigen::Matrix2cd kJ = (Eigen::Matrix2cd() << 1, 0, 0, -1).finished();
const Eigen::Matrix2cd kX = (Eigen::Matrix2cd() << 0, 1, 1, 0).finished();

}  // namespace

PoleSet x_poles() { return PoleSet{{1.0, -1.0}, {1, 1}}; }
PoleSet t_poles() { return PoleSet{{1.0, -1.0}, {1, -1}}; }

BoundaryData BoundaryData::from_functions(double t_max, int n,
                                          const std::function<double(double)>& f0,
                                          const std::function<double(double)>& f1) {
    BoundaryData d;
    d.t_max = t_max;
    d.n = n;
    d.omega0.resize(d.nodes());
    d.omega1.resize(d.nodes());
    for (int j = 0; j < d.nodes(); ++j) {
        d.omega0(j) = f0(d.t(j));
        d.omega1(j) = f1(d.t(j));
    }
    d.validate();
    return d;
}

void BoundaryData::validate() const {
    if (!(t_max > 0) || n < 4) throw validation_error("BoundaryData: need t_max > 0 and n >= 4");
    if (omega0.size() != nodes() || omega1.size() != nodes())
        throw validation_error("BoundaryData: sample counts do not match the grid");
    if (!omega0.allFinite() || !omega1.allFinite())
        throw validation_error("BoundaryData: samples must be finite");
}

Eigen::VectorXd stencil_derivative(const Eigen::VectorXd& f, double step) {
    const int n = static_cast<int>(f.size());
    if (n < 5) throw validation_error("stencil_derivative: need at least 5 samples");
    Eigen::VectorXd d(n);
    for (int i = 2; i < n - 2; ++i)
        d(i) = (f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)) / (12.0 * step);
    // one-sided 4th order at the ends
    auto edge = [&](int i, int s) {
        return s *
               (-25.0 * f(i) + 48.0 * f(i + s) - 36.0 * f(i + 2 * s) + 16.0 * f(i + 3 * s) -
                3.0 * f(i + 4 * s)) /
               (12.0 * step);
    };
    d(0) = edge(0, 1);
    d(1) = (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) / (12.0 * step);
    d(n - 1) = edge(n - 1, -1);
    d(n - 2) = (3.0 * f(n - 1) + 10.0 * f(n - 2) - 18.0 * f(n - 3) + 6.0 * f(n - 4) - f(n - 5)) /
               (12.0 * step);
    return d;
}

Eigen::Matrix2cd coef_G(const Eigen::RowVector2cd& beta1, const Eigen::RowVector2cd& beta2,
                        cplx lambda) {
    if (lambda == cplx(1, 0) || lambda == cplx(-1, 0))
        throw std::domain_error("coef_G: lambda is a pole");
    return iu * ((beta1.adjoint() * beta1) / (lambda - 1.0) +
                 (beta2.adjoint() * beta2) / (lambda + 1.0));
}

Eigen::Matrix2cd coef_F(const Eigen::RowVector2cd& beta1, const Eigen::RowVector2cd& beta2,
                        cplx lambda) {
    if (lambda == cplx(1, 0) || lambda == cplx(-1, 0))
        throw std::domain_error("coef_F: lambda is a pole");
    return iu * ((beta1.adjoint() * beta1) / (lambda - 1.0) -
                 (beta2.adjoint() * beta2) / (lambda + 1.0));
}

Eigen::Matrix2cd coef_G_breve(double omega, double omega_t) {
    return -iu * (omega_t / 4.0 * kJ + 0.5 * std::sin(omega / 2.0) * kX);
}

Eigen::Matrix2cd coef_F_breve(double omega, double omega_x) {
    return -iu * (omega_x / 4.0) * kJ + 0.5 * std::cos(omega / 2.0) * (kX * kJ);
}

std::pair<Eigen::RowVector2cd, Eigen::RowVector2cd> beta_from_omega(double omega,
                                                                    const Eigen::Matrix2cd& q) {
    const double s = 1.0 / std::sqrt(2.0);
    Eigen::RowVector2cd a, b;
    a << s, s * iu * std::exp(iu * omega / 2.0);
    b << s, s * iu * std::exp(-iu * omega / 2.0);
    return {a * q, b * q};
}

BoundaryFrame::BoundaryFrame(const BoundaryData& data, int substeps) : data_(data) {
    data_.validate();
    const int nodes = data_.nodes();

    // q_t = F_breve(omega0(t), omega1(t)) q along x = 0, splined coefficients
    GridSpec span(2.0 * data_.t_max, nodes - 1);
    CubicSpline s_omega(span, data_.omega0.cast<cplx>());
    CubicSpline s_omega1(span, data_.omega1.cast<cplx>());
    auto coef = [&](double s) {
        return coef_F_breve(s_omega.value(s).real(), s_omega1.value(s).real());
    };

    q_.resize(nodes);
    const int j0 = data_.n;  // node at t = 0
    q_[j0] = Eigen::Matrix2cd::Identity();
    for (int j = j0; j < nodes - 1; ++j) {
        const double s = j * data_.dt();
        q_[j + 1] =
            propagate([&](double u) { return coef(s + u); }, 0.0, data_.dt(), substeps) * q_[j];
    }
    for (int j = j0; j > 0; --j) {
        const double s = j * data_.dt();
        // backward flow y(u) = q(s-u): y' = -F_breve(s-u) y
        q_[j - 1] = propagate(
                        [&](double u) {
                            return static_cast<Eigen::Matrix2cd>(-coef(s - u));
                        },
                        0.0, data_.dt(), substeps) *
                    q_[j];
    }
    for (const auto& q : q_)
        q_drift_ = std::max(q_drift_, (q.adjoint() * q - Eigen::Matrix2cd::Identity()).norm());

    // beta rows at the nodes, then componentwise splines
    std::array<std::array<Eigen::VectorXcd, 2>, 2> comp;
    for (auto& a : comp)
        for (auto& v : a) v.resize(nodes);
    for (int j = 0; j < nodes; ++j) {
        auto [b1, b2] = beta_from_omega(data_.omega0(j), q_[j]);
        comp[0][0](j) = b1(0);
        comp[0][1](j) = b1(1);
        comp[1][0](j) = b2(0);
        comp[1][1](j) = b2(1);
    }
    for (int k = 0; k < 2; ++k)
        for (int c = 0; c < 2; ++c) splines_[k][c] = CubicSpline(span, comp[k][c]);

    // derivative bounds from the 4th-order stencil on the sampled rows
    for (int k = 0; k < 2; ++k) {
        Eigen::MatrixXd d(nodes, 4);
        for (int c = 0; c < 2; ++c) {
            Eigen::VectorXd re(nodes), im(nodes);
            for (int j = 0; j < nodes; ++j) {
                re(j) = comp[k][c](j).real();
                im(j) = comp[k][c](j).imag();
            }
            d.col(2 * c) = stencil_derivative(re, data_.dt());
            d.col(2 * c + 1) = stencil_derivative(im, data_.dt());
        }
        beta_t_sup_[k] = std::sqrt(d.array().square().rowwise().sum().maxCoeff());
    }
}

Eigen::RowVector2cd BoundaryFrame::beta_node(int k, int j) const {
    auto [b1, b2] = beta_from_omega(data_.omega0(j), q_[j]);
    return k == 0 ? b1 : b2;
}

Eigen::RowVector2cd BoundaryFrame::beta(int k, double t) const {
    const double s = t + data_.t_max;
    Eigen::RowVector2cd r;
    r << splines_[k][0].value(s), splines_[k][1].value(s);
    return r;
}

int BoundaryFrame::node_of(double t) const {
    const double j = (t + data_.t_max) / data_.dt();
    const int jj = static_cast<int>(std::lround(j));
    if (std::abs(j - jj) > 1e-9 || jj < 0 || jj >= data_.nodes())
        throw validation_error("BoundaryFrame: requested time is not a grid node");
    return jj;
}

double time_cutoff(const BoundaryFrame& frame, double margin) {
    // same fixed point as the direct-module cutoff, with t-derivative bounds
    const double gap = 2.0;  // |d_1 - d_2|
    auto rhs = [&](double m_val) -> double {
        const double g = gap - 2.0 / m_val;
        if (g <= 0.0) return std::numeric_limits<double>::infinity();
        return 4.0 * (std::max(frame.beta_t_sup(0), frame.beta_t_sup(1)) + 1.0 / g);
    };
    double lo = 2.0 / gap, hi = 8.0;
    int expand = 0;
    while (!(std::isfinite(rhs(hi)) && rhs(hi) <= hi)) {
        hi *= 2.0;
        if (++expand > 60) throw numeric_error("time_cutoff: no fixed point");
    }
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double r = rhs(mid);
        if (std::isfinite(r) && r <= mid)
            hi = mid;
        else
            lo = mid;
    }
    return std::max(hi * (1.0 + margin), 4.0 * margin);
}

const Eigen::Matrix2cd& UFamily::at_time(double t) const {
    const double j = t / (sign * dt);
    const int jj = static_cast<int>(std::lround(j));
    if (jj < 0 || jj >= static_cast<int>(u.size()) || std::abs(j - jj) > 1e-9)
        throw validation_error("UFamily: time outside the computed horizon");
    return u[static_cast<size_t>(jj)];
}

namespace {

// Q_k(0, t) from the splined boundary rows, renormalized
Eigen::Matrix2cd boundary_gauge(const BoundaryFrame& frame, int k, double t) {
    Eigen::RowVector2cd row = frame.beta(k, t);
    row /= row.norm();
    return gauge_matrix(row);
}

}  // namespace

UFamily build_U(const BoundaryFrame& frame, int k, cplx mu, double horizon, double phase_per_step,
                int base_substeps, int sign_override) {
    if (k != 0 && k != 1) throw validation_error("build_U: k must be 0 or 1");
    const PoleSet tp = t_poles();
    const cplx lambda = (k == 0 ? 1.0 : -1.0) + 1.0 / (2.0 * mu);
    const double dt = frame.data().dt();
    const int sign = sign_override != 0 ? sign_override : (k == 0 ? 1 : -1);
    const int count =
        std::min(static_cast<int>(std::floor(horizon / dt + 1e-9)), frame.data().n);
    if (count < 2) throw validation_error("build_U: horizon too short for the data grid");
    UFamily fam;
    fam.k = k;
    fam.mu = mu;
    fam.sign = sign;
    fam.dt = dt;
    fam.u.resize(count + 1);
    fam.u[0] = Eigen::Matrix2cd::Identity();

    const double rate = 1.0 / std::abs(lambda - tp.d[0]) + 1.0 / std::abs(lambda - tp.d[1]);
    const int substeps =
        std::max(base_substeps, static_cast<int>(std::ceil(rate * dt / phase_per_step)));
    // prefactor exp(-+ i t mu) per pole, step size sign*dt
    const cplx phase_step = std::exp((k == 0 ? -1.0 : 1.0) * iu * (sign * dt) * mu);

    Eigen::Matrix2cd qprev = boundary_gauge(frame, k, 0.0);
    for (int j = 0; j < count; ++j) {
        const double t0 = sign * j * dt;
        auto coef = [&](double s) {
            const double t = t0 + sign * s;
            const Eigen::RowVector2cd b1 = frame.beta(0, t);
            const Eigen::RowVector2cd b2 = frame.beta(1, t);
            return static_cast<Eigen::Matrix2cd>(static_cast<double>(sign) *
                                                 coef_F(b1, b2, lambda));
        };
        const Eigen::Matrix2cd step = propagate(coef, 0.0, dt, substeps);
        const Eigen::Matrix2cd qnext = boundary_gauge(frame, k, t0 + sign * dt);
        fam.u[j + 1] = phase_step * qnext * step * qprev.adjoint() * fam.u[j];
        qprev = qnext;
    }
    return fam;
}

std::pair<cplx, cplx> psi_at_origin(const UFamily& u1, const UFamily& u2,
                                    double stabilization_tol) {
    auto ratio = [](const Eigen::Matrix2cd& u) {
        if (std::abs(u(0, 0)) == 0.0) throw numeric_error("psi_at_origin: vanishing u11");
        return -u(0, 1) / u(0, 0);
    };
    auto limit = [&](const UFamily& fam) {
        const size_t last = fam.u.size() - 1;
        const cplx full = ratio(fam.u[last]);
        const cplx half = ratio(fam.u[last / 2]);
        if (std::abs(full - half) > stabilization_tol)
            throw numeric_error("psi_at_origin: horizon too short, ratio not stabilized");
        return full;
    };
    return {limit(u1), limit(u2)};
}

cplx evolve_psi(cplx psi0, const Eigen::Matrix2cd& u) {
    const cplx den = u(1, 0) * psi0 + u(1, 1);
    // the entries are exponentially dichotomous, so the guard is against
    // catastrophic cancellation rather than smallness relative to ||u||
    if (std::abs(den) < 1e-13 * (std::abs(u(1, 0) * psi0) + std::abs(u(1, 1))))
        throw numeric_error("evolve_psi: degenerate Moebius transform");
    return (u(0, 0) * psi0 + u(0, 1)) / den;
}

FieldOracle kink_oracle(double v) {
    if (!(v > -1.0 && v < 1.0)) throw validation_error("kink_oracle: need |v| < 1");
    const double g = 1.0 / std::sqrt(1.0 - v * v);
    FieldOracle o;
    o.omega = [g, v](double x, double t) { return 4.0 * std::atan(std::exp(g * (x - v * t))); };
    o.omega_x = [g, v](double x, double t) {
        return 2.0 * g / std::cosh(g * (x - v * t));
    };
    o.omega_t = [g, v](double x, double t) {
        return -2.0 * g * v / std::cosh(g * (x - v * t));
    };
    return o;
}

FieldOracle constant_pi_oracle() {
    FieldOracle o;
    o.omega = [](double, double) { return 3.14159265358979323846; };
    o.omega_x = [](double, double) { return 0.0; };
    o.omega_t = [](double, double) { return 0.0; };
    return o;
}

BoundaryData boundary_from_oracle(const FieldOracle& oracle, double t_max, int n) {
    return BoundaryData::from_functions(
        t_max, n, [&](double t) { return oracle.omega(0.0, t); },
        [&](double t) { return oracle.omega_x(0.0, t); });
}

Eigen::Matrix2cd evolve_q_path(const FieldOracle& oracle, double x, double t, int steps,
                               bool x_first) {
    auto x_leg = [&](double t_fixed, const Eigen::Matrix2cd& q0) {
        auto coef = [&](double s) {
            return coef_G_breve(oracle.omega(s, t_fixed), oracle.omega_t(s, t_fixed));
        };
        return static_cast<Eigen::Matrix2cd>(propagate(coef, 0.0, x, steps) * q0);
    };
    auto t_leg = [&](double x_fixed, const Eigen::Matrix2cd& q0) {
        auto coef = [&](double s) {
            const double tt = t >= 0 ? s : -s;
            return static_cast<Eigen::Matrix2cd>(
                (t >= 0 ? 1.0 : -1.0) *
                coef_F_breve(oracle.omega(x_fixed, tt), oracle.omega_x(x_fixed, tt)));
        };
        return static_cast<Eigen::Matrix2cd>(propagate(coef, 0.0, std::abs(t), steps) * q0);
    };
    if (x_first) return t_leg(x, x_leg(0.0, Eigen::Matrix2cd::Identity()));
    return x_leg(t, t_leg(0.0, Eigen::Matrix2cd::Identity()));
}

SGField build_field(const FieldOracle& oracle, const GridSpec& xgrid, double t_max, int nt,
                    int substeps) {
    SGField f;
    f.xgrid = xgrid;
    f.t_max = t_max;
    f.nt = nt;
    const int nx = xgrid.nodes();
    f.omega.assign(nx, std::vector<double>(nt + 1));
    f.q.assign(nx, std::vector<Eigen::Matrix2cd>(nt + 1));
    f.beta1.assign(nx, std::vector<Eigen::RowVector2cd>(nt + 1));
    f.beta2.assign(nx, std::vector<Eigen::RowVector2cd>(nt + 1));

    // q along the t-axis at x = 0, then along x per time column
    std::vector<Eigen::Matrix2cd> q0(nt + 1);
    const int j0 = nt / 2;
    if (2 * j0 != nt) throw validation_error("build_field: nt must be even");
    q0[j0] = Eigen::Matrix2cd::Identity();
    const double dt = f.dt();
    for (int j = j0; j < nt; ++j) {
        const double t = f.t(j);
        auto coef = [&](double s) { return coef_F_breve(oracle.omega(0, t + s), oracle.omega_x(0, t + s)); };
        q0[j + 1] = propagate(coef, 0.0, dt, substeps) * q0[j];
    }
    for (int j = j0; j > 0; --j) {
        const double t = f.t(j);
        auto coef = [&](double s) {
            return static_cast<Eigen::Matrix2cd>(-coef_F_breve(oracle.omega(0, t - s), oracle.omega_x(0, t - s)));
        };
        q0[j - 1] = propagate(coef, 0.0, dt, substeps) * q0[j];
    }
    const double hx = xgrid.step();
    for (int j = 0; j <= nt; ++j) {
        const double t = f.t(j);
        Eigen::Matrix2cd q = q0[j];
        for (int i = 0; i < nx; ++i) {
            const double x = xgrid.x(i);
            f.omega[i][j] = oracle.omega(x, t);
            f.q[i][j] = q;
            auto [b1, b2] = beta_from_omega(f.omega[i][j], q);
            f.beta1[i][j] = b1;
            f.beta2[i][j] = b2;
            if (i + 1 < nx) {
                auto coef = [&](double s) {
                    return coef_G_breve(oracle.omega(x + s, t), oracle.omega_t(x + s, t));
                };
                q = propagate(coef, 0.0, hx, substeps) * q;
            }
        }
    }
    return f;
}

double SGField::q_unitarity_drift() const {
    double drift = 0.0;
    for (const auto& col : q)
        for (const auto& m : col)
            drift = std::max(drift, (m.adjoint() * m - Eigen::Matrix2cd::Identity()).norm());
    return drift;
}

double zero_curvature_residual(const SGField& field, cplx lambda) {
    const int nx = field.xgrid.nodes();
    const double hx = field.xgrid.step();
    const double ht = field.dt();
    double worst = 0.0;
    for (int i = 1; i < nx - 1; ++i)
        for (int j = 1; j < field.nt; ++j) {
            const Eigen::Matrix2cd g = coef_G(field.beta1[i][j], field.beta2[i][j], lambda);
            const Eigen::Matrix2cd f = coef_F(field.beta1[i][j], field.beta2[i][j], lambda);
            const Eigen::Matrix2cd gt =
                (coef_G(field.beta1[i][j + 1], field.beta2[i][j + 1], lambda) -
                 coef_G(field.beta1[i][j - 1], field.beta2[i][j - 1], lambda)) /
                (2.0 * ht);
            const Eigen::Matrix2cd fx =
                (coef_F(field.beta1[i + 1][j], field.beta2[i + 1][j], lambda) -
                 coef_F(field.beta1[i - 1][j], field.beta2[i - 1][j], lambda)) /
                (2.0 * hx);
            worst = std::max(worst, (gt - fx + g * f - f * g).norm());
        }
    return worst;
}

CosRecovery recover_cos_omega(const BoundaryData& boundary, double t_eval, const GridSpec& grid,
                              const SGOptions& opts) {
    BoundaryFrame frame(boundary);
    if (frame.q_unitarity_drift() > 1e-6)
        throw numeric_error("recover_cos_omega: q unitarity drift beyond tolerance");

    CosRecovery out;
    out.cutoff = time_cutoff(frame, opts.margin);
    out.eta = opts.eta != 0 ? opts.eta : -(out.cutoff / 2.0 + 2.0);
    if (!(out.eta < 0)) throw validation_error("recover_cos_omega: eta must be negative");
    const double growth = -out.eta - out.cutoff / 2.0;
    out.horizon = opts.horizon != 0
                      ? opts.horizon
                      : std::min(boundary.t_max - std::abs(t_eval),
                                 20.0 / std::max(0.5, growth));
    const double zeta_max = opts.zeta_max != 0 ? opts.zeta_max : 64.0 * std::max(1.0, out.cutoff);
    const std::vector<double> zg = make_zeta_grid(zeta_max, opts.zeta_count);

    WeylSetData ws;
    ws.poles = x_poles();
    ws.eta = out.eta;
    ws.zeta = zg;
    ws.psi.assign(2, std::vector<cplx>(zg.size()));
    for (int k = 0; k < 2; ++k) {
        const Eigen::RowVector2cd b0 = frame.beta(k, t_eval);
        ws.beta0.push_back(b0 / b0.norm());
    }
    ws.partition.resize(2);
    for (int k = 0; k < 2; ++k)
        ws.partition[k] = std::abs(ws.beta0[k](0)) >= std::abs(ws.beta0[k](1)) ? 1 : 2;

    std::vector<double> stab(zg.size(), 0.0);
    const int t_sign = t_eval > 0 ? 1 : -1;
    parallel_for(static_cast<int>(zg.size()), opts.workers, [&](int j) {
        const cplx mu(zg[j], out.eta);
        UFamily u1 = build_U(frame, 0, mu, out.horizon, opts.phase_per_step);
        UFamily u2 = build_U(frame, 1, mu, out.horizon, opts.phase_per_step);
        auto [p1, p2] = psi_at_origin(u1, u2, opts.stabilization_tol);
        if (t_eval == 0.0) {
            ws.psi[0][j] = p1;
            ws.psi[1][j] = p2;
        } else {
            // evolve both Weyl points to t_eval with U_k over [0, t_eval]
            UFamily e1 = build_U(frame, 0, mu, std::abs(t_eval) + 1e-12, opts.phase_per_step,
                                 2, t_sign);
            UFamily e2 = build_U(frame, 1, mu, std::abs(t_eval) + 1e-12, opts.phase_per_step,
                                 2, t_sign);
            ws.psi[0][j] = evolve_psi(p1, e1.at_time(t_eval));
            ws.psi[1][j] = evolve_psi(p2, e2.at_time(t_eval));
        }
        const size_t last1 = u1.u.size() - 1, last2 = u2.u.size() - 1;
        auto r = [](const Eigen::Matrix2cd& u) { return -u(0, 1) / u(0, 0); };
        stab[j] = std::max(std::abs(r(u1.u[last1]) - r(u1.u[last1 / 2])),
                           std::abs(r(u2.u[last2]) - r(u2.u[last2 / 2])));
    });
    for (double s : stab) out.psi_stabilization = std::max(out.psi_stabilization, s);

    ReconstructionReport report = recover_from_weyl_set(ws, grid, opts.recover);
    out.cos_omega.resize(grid.nodes());
    for (int i = 0; i < grid.nodes(); ++i) {
        const Eigen::RowVector2cd b1 = report.beta.row(0, i);
        const Eigen::RowVector2cd b2 = report.beta.row(1, i);
        const cplx cross = (b1 * b2.adjoint())(0, 0);
        const double value = 2.0 * std::norm(cross) - 1.0;
        if (value < -1.0 - opts.range_tol || value > 1.0 + opts.range_tol)
            throw numeric_error("recover_cos_omega: value outside the cosine range");
        out.cos_omega(i) = value;
    }
    out.report = std::move(report);
    return out;
}

}  // namespace ratweyl::sg
