#include <cmath>

#include "doctest.h"
#include "ratweyl/direct.hpp"
#include "ratweyl/sgordon.hpp"

using namespace ratweyl;
using namespace ratweyl::sg;

namespace {
const Eigen::Matrix2cd kJ = (Eigen::Matrix2cd() << 1, 0, 0, -1).finished();
constexpr double kPi = 3.14159265358979323846;
}  // namespace

TEST_CASE("q evolution: normalization, unitarity, path consistency") {
    auto kink = kink_oracle(0.5);
    CHECK((evolve_q_path(kink, 0.0, 0.0, 1, true) - Eigen::Matrix2cd::Identity()).norm() == 0.0);

    // unit-length paths stay unitary to machine precision (skew coefficients,
    // exact exponentials)
    const Eigen::Matrix2cd q = evolve_q_path(kink, 1.0, 1.0, 256, true);
    CHECK((q.adjoint() * q - Eigen::Matrix2cd::Identity()).norm() < 1e-8);

    // path-ordering discrepancy vanishes at second order for a solution
    const Eigen::Matrix2cd a1 = evolve_q_path(kink, 0.8, 0.6, 64, true);
    const Eigen::Matrix2cd b1 = evolve_q_path(kink, 0.8, 0.6, 64, false);
    const Eigen::Matrix2cd a2 = evolve_q_path(kink, 0.8, 0.6, 128, true);
    const Eigen::Matrix2cd b2 = evolve_q_path(kink, 0.8, 0.6, 128, false);
    const double d1 = (a1 - b1).norm();
    const double d2 = (a2 - b2).norm();
    CAPTURE(d1);
    CAPTURE(d2);
    CHECK(d1 / d2 >= 3.0);
}

TEST_CASE("beta rows from the field value") {
    Eigen::Matrix2cd q;
    q << cplx(0.6, 0.3), cplx(-0.2, 0.7), cplx(0.2, 0.7), cplx(0.6, -0.3);
    q /= std::sqrt(std::abs(q.determinant()));
    // make q strictly unitary via its polar factor
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(q, Eigen::ComputeFullU | Eigen::ComputeFullV);
    q = svd.matrixU() * svd.matrixV().adjoint();

    for (double omega : {0.3, 1.7, kPi, 4.8}) {
        auto [b1, b2] = beta_from_omega(omega, q);
        CHECK(std::abs(b1.norm() - 1.0) < 1e-14);
        CHECK(std::abs(b2.norm() - 1.0) < 1e-14);
        const cplx cross = (b1 * b2.adjoint())(0, 0);
        CHECK(std::abs(2.0 * std::norm(cross) - 1.0 - std::cos(omega)) < 1e-10);
        if (omega == kPi) CHECK(std::abs(cross) < 1e-12);
    }
}

TEST_CASE("zero-curvature residual") {
    auto kink = kink_oracle(0.5);
    const cplx lambda(0.4, 0.8);
    SGField f1 = build_field(kink, GridSpec(1.0, 64), 0.5, 64);
    SGField f2 = build_field(kink, GridSpec(1.0, 128), 0.5, 128);
    const double r1 = zero_curvature_residual(f1, lambda);
    const double r2 = zero_curvature_residual(f2, lambda);
    CAPTURE(r1);
    CAPTURE(r2);
    CHECK(r1 / r2 >= 3.0);
    CHECK(f2.q_unitarity_drift() < 1e-8);

    SGField fpi = build_field(constant_pi_oracle(), GridSpec(1.0, 256), 0.5, 256);
    CHECK(zero_curvature_residual(fpi, lambda) < 1e-6);

    // a non-solution leaves an order-one residual
    FieldOracle bogus;
    bogus.omega = [](double x, double t) { return 1.3 * x + 0.4 * t * t; };
    bogus.omega_x = [](double, double) { return 1.3; };
    bogus.omega_t = [](double, double t) { return 0.8 * t; };
    SGField fb = build_field(bogus, GridSpec(1.0, 64), 0.5, 64);
    CHECK(zero_curvature_residual(fb, lambda) > 1e-2);
}

TEST_CASE("potential-free pair satisfies the compatibility condition on a solution") {
    auto kink = kink_oracle(0.5);
    auto residual = [&](int n) {
        const double h = 1.0 / n;
        double worst = 0.0;
        for (int i = 1; i < n; ++i)
            for (int j = 1; j < n; ++j) {
                const double x = i * h, t = -0.5 + j * h;
                auto gb = [&](double xx, double tt) {
                    return coef_G_breve(kink.omega(xx, tt), kink.omega_t(xx, tt));
                };
                auto fb = [&](double xx, double tt) {
                    return coef_F_breve(kink.omega(xx, tt), kink.omega_x(xx, tt));
                };
                const Eigen::Matrix2cd gt = (gb(x, t + h) - gb(x, t - h)) / (2.0 * h);
                const Eigen::Matrix2cd fx = (fb(x + h, t) - fb(x - h, t)) / (2.0 * h);
                const Eigen::Matrix2cd g = gb(x, t), f = fb(x, t);
                worst = std::max(worst, (gt - fx + g * f - f * g).norm());
            }
        return worst;
    };
    const double r1 = residual(48), r2 = residual(96);
    CAPTURE(r1);
    CAPTURE(r2);
    CHECK(r1 / r2 >= 3.0);
}

TEST_CASE("boundary stencil derivative is fourth order") {
    auto f = [](double t) { return std::sin(1.3 * t) + 0.2 * t * t; };
    auto df = [](double t) { return 1.3 * std::cos(1.3 * t) + 0.4 * t; };
    auto err = [&](int n) {
        const double h = 2.0 / n;
        Eigen::VectorXd v(n + 1);
        for (int j = 0; j <= n; ++j) v(j) = f(-1.0 + j * h);
        const Eigen::VectorXd d = stencil_derivative(v, h);
        double worst = 0.0;
        for (int j = 0; j <= n; ++j) worst = std::max(worst, std::abs(d(j) - df(-1.0 + j * h)));
        return worst;
    };
    const double e1 = err(64), e2 = err(128);
    CHECK(e1 / e2 >= 12.0);
    CHECK(e2 < 1e-6);
}

TEST_CASE("U families: normalization, definiteness, growth") {
    auto kink = kink_oracle(0.5);
    BoundaryData bd = boundary_from_oracle(kink, 10.0, 1024);
    BoundaryFrame frame(bd);
    CHECK(frame.q_unitarity_drift() < 1e-8);

    const double cutoff = time_cutoff(frame);
    const cplx mu(1.3, -(cutoff / 2.0 + 1.5));
    UFamily u1 = build_U(frame, 0, mu, 8.0);
    UFamily u2 = build_U(frame, 1, mu, 8.0);
    CHECK((u1.u[0] - Eigen::Matrix2cd::Identity()).norm() == 0.0);

    // (-1)^{k+1} (U_k^* j U_k - j) >= 0 on the corresponding half-line.
    // Forming U* j U squares the exponential dichotomy of U, so the check is
    // meaningful only while ||U||^2 eps stays below the O(1) small eigenvalue.
    for (size_t j = 4; j < u1.u.size(); j += 20) {
        const double scale = u1.u[j].squaredNorm();
        if (scale > 1e8) break;
        Eigen::Matrix2cd gap = u1.u[j].adjoint() * kJ * u1.u[j] - kJ;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(0.5 * (gap + gap.adjoint()));
        CHECK(es.eigenvalues().minCoeff() > -1e-6 * std::max(1.0, scale));
    }
    // same inequality for U_2 on its own half-line t < 0
    for (size_t j = 4; j < u2.u.size(); j += 20) {
        const double scale = u2.u[j].squaredNorm();
        if (scale > 1e8) break;
        Eigen::Matrix2cd gap = u2.u[j].adjoint() * kJ * u2.u[j] - kJ;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(0.5 * (gap + gap.adjoint()));
        CHECK(es.eigenvalues().minCoeff() > -1e-6 * std::max(1.0, scale));
    }

    // |u11(t)|^2 > 1 + eps t along the admissible half-line
    const double t_last = u1.dt * (u1.u.size() - 1);
    CHECK(std::norm(u1.u.back()(0, 0)) > 1.0 + 0.05 * t_last);
    CHECK(std::norm(u2.u.back()(0, 0)) > 1.0 + 0.05 * t_last);

    auto [p1, p2] = psi_at_origin(u1, u2, 1e-3);
    CHECK(std::abs(p1) < 1.0);
    CHECK(std::abs(p2) < 1.0);

    // doubling the horizon moves the ratio within the stabilization budget
    UFamily u1_half = build_U(frame, 0, mu, 4.0);
    auto r = [](const UFamily& f) { return -f.u.back()(0, 1) / f.u.back()(0, 0); };
    CHECK(std::abs(r(u1) - r(u1_half)) < 1e-3);
}

TEST_CASE("weyl point consistency with the direct module at t = 0") {
    auto kink = kink_oracle(0.5);
    BoundaryData bd = boundary_from_oracle(kink, 10.0, 1024);
    BoundaryFrame frame(bd);
    const double cutoff = time_cutoff(frame);
    const cplx mu(0.8, -(cutoff / 2.0 + 1.5));

    UFamily u1 = build_U(frame, 0, mu, 9.0);
    UFamily u2 = build_U(frame, 1, mu, 9.0);
    auto [p1, p2] = psi_at_origin(u1, u2, 1e-3);

    // direct route: beta_k(x, 0) sampled from the oracle, psi-hat at finite l
    GridSpec grid(3.0, 768);
    auto pot = PotentialField::sample(grid, 2, [&](int k, double x) {
        const Eigen::Matrix2cd q = evolve_q_path(kink, x, 0.0, 512, true);
        auto [b1, b2] = beta_from_omega(kink.omega(x, 0.0), q);
        Eigen::RowVector2cd row = k == 0 ? b1 : b2;
        return static_cast<Eigen::RowVector2cd>(row / row.norm());
    });
    const PoleSet poles = x_poles();
    for (int k = 0; k < 2; ++k) {
        const Eigen::Matrix2cd al = disk_matrix_endpoint(pot, poles, k, mu, 3.0, OdeOptions{});
        const cplx psi_direct = approx_weyl_point(al, cplx(0, 0));
        const cplx psi_sg = k == 0 ? p1 : p2;
        CAPTURE(k);
        CHECK(std::abs(psi_direct - psi_sg) < 2e-3);
    }
}

TEST_CASE("evolve_psi: identity, bound, cocycle") {
    auto kink = kink_oracle(0.5);
    BoundaryData bd = boundary_from_oracle(kink, 10.0, 1024);
    BoundaryFrame frame(bd);
    const double cutoff = time_cutoff(frame);
    const cplx mu(0.5, -(cutoff / 2.0 + 1.5));
    UFamily u1 = build_U(frame, 0, mu, 8.0);
    UFamily u2 = build_U(frame, 1, mu, 8.0);
    auto [p1, p2] = psi_at_origin(u1, u2, 1e-3);

    CHECK(evolve_psi(p1, Eigen::Matrix2cd::Identity()) == p1);
    // |psi(t)| < 1 on the window where the evolution is well conditioned:
    // the horizon error in psi(0) excites the growing column of U, so the
    // evolved point is meaningful while ||U|| stays moderate
    for (size_t j = 0; j < u1.u.size() && u1.u[j].norm() < 1e4; j += 25)
        CHECK(std::abs(evolve_psi(p1, u1.u[j])) < 1.0);
    for (size_t j = 0; j < u2.u.size() && u2.u[j].norm() < 1e4; j += 25)
        CHECK(std::abs(evolve_psi(p2, u2.u[j])) < 1.0);

    // cocycle of the linear evolution
    const size_t j1 = 60, j2 = 150;
    const cplx via_mid =
        evolve_psi(evolve_psi(p1, u1.u[j1]),
                   Eigen::Matrix2cd(u1.u[j2] * u1.u[j1].inverse()));
    CHECK(std::abs(via_mid - evolve_psi(p1, u1.u[j2])) < 1e-8);
}

TEST_CASE("cos omega recovery away from t = 0") {
    auto kink = kink_oracle(0.5);
    BoundaryData bd = boundary_from_oracle(kink, 12.0, 1024);
    const double t_eval = 64.0 * bd.dt();  // a grid node, 0.75
    SGOptions opts;
    opts.zeta_max = 128.0;
    opts.zeta_count = 256;
    GridSpec grid(1.0, 64);
    CosRecovery rec = recover_cos_omega(bd, t_eval, grid, opts);
    double worst = 0.0;
    for (int i = 0; i < rec.cos_omega.size(); ++i)
        worst = std::max(worst,
                         std::abs(rec.cos_omega(i) - std::cos(kink.omega(grid.x(i), t_eval))));
    CAPTURE(worst);
    CAPTURE(rec.eta);
    CHECK(worst < 5e-2);
}

TEST_CASE("cos omega recovery for the constant-pi data") {
    BoundaryData bd = boundary_from_oracle(constant_pi_oracle(), 12.0, 1024);
    SGOptions opts;
    opts.zeta_max = 96.0;
    opts.zeta_count = 256;
    CosRecovery rec = recover_cos_omega(bd, 0.0, GridSpec(1.0, 64), opts);
    CAPTURE(rec.eta);
    CAPTURE(rec.cutoff);
    CAPTURE(rec.psi_stabilization);
    double worst = 0.0;
    for (int i = 0; i < rec.cos_omega.size(); ++i)
        worst = std::max(worst, std::abs(rec.cos_omega(i) + 1.0));
    CAPTURE(worst);
    CHECK(worst < 5e-2);
}
