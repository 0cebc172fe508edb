#include <cmath>

#include "doctest.h"
#include "ratweyl/direct.hpp"
#include "ratweyl/presets.hpp"

using namespace ratweyl;

namespace {

PotentialField constant_e1(const GridSpec& grid) {
    return PotentialField::sample(grid, 1, [](int, double) {
        Eigen::RowVector2cd r;
        r << 1, 0;
        return r;
    });
}

const Eigen::Matrix2cd kJ = (Eigen::Matrix2cd() << 1, 0, 0, -1).finished();

}  // namespace

TEST_CASE("bound_M examples") {
    GridSpec grid(1.0, 64);
    PoleSet one{{0.4}, {1}};
    auto pot1 = constant_e1(grid);
    CHECK(bound_M(pot1, one, 0.1) == doctest::Approx(0.4));  // floor 4*margin
    CHECK(bound_M(pot1, one, 0.3) == doctest::Approx(1.2));

    const PoleSet poles = presets::two_pole();
    auto pot2 = presets::smooth_beta(grid);
    const double m_small = bound_M(pot2, poles, 0.05);
    const double m_large = bound_M(pot2, poles, 0.5);
    CHECK(m_large >= m_small);

    // recheck the defining inequality on a probe grid
    std::vector<cplx> probes;
    for (double z : {-40.0, -5.0, 0.0, 3.0, 60.0})
        for (double e : {1.01, 2.0, 8.0}) probes.push_back(cplx(z, -e * m_small / 4.0));
    for (int k = 0; k < 2; ++k) {
        XiField xi = xi_field(pot2, poles, k, probes);
        CHECK(xi.sup < m_small / 4.0);
    }
}

TEST_CASE("fundamental solution identities") {
    GridSpec grid(1.0, 128);
    PoleSet one{{0.4}, {1}};
    auto pot = constant_e1(grid);

    const cplx lambda(1.1, 0.8);
    FundamentalSolution w = integrate_fundamental(pot, one, lambda, OdeOptions{});
    CHECK((w.w.front() - Eigen::Matrix2cd::Identity()).norm() == 0.0);
    for (int i = 0; i <= 128; i += 16) {
        const cplx e = std::exp(iu * grid.x(i) / (lambda - one.d[0]));
        Eigen::Matrix2cd expect;
        expect << e, 0, 0, 1;
        CHECK((w.w[i] - expect).norm() < 1e-8);
    }

    // generic potential: conjugate-unitarity and determinant identities
    const PoleSet poles = presets::two_pole();
    GridSpec g2(1.0, 256);
    auto pot2 = presets::smooth_beta(g2);
    for (cplx probe : {cplx(0.3, 1.1), cplx(-2.0, -0.6), cplx(4.0, 2.0)}) {
        FundamentalSolution wa = integrate_fundamental(pot2, poles, probe, OdeOptions{});
        FundamentalSolution wb = integrate_fundamental(pot2, poles, std::conj(probe), OdeOptions{});
        cplx expo = 0.0;
        for (int k = 0; k < 2; ++k)
            expo += static_cast<double>(poles.b[k]) / (probe - poles.d[k]);
        for (int i : {32, 128, 256}) {
            CHECK((wb.w[i].adjoint() * wa.w[i] - Eigen::Matrix2cd::Identity()).norm() < 1e-8);
            CHECK(std::abs(wa.w[i].determinant() - std::exp(iu * g2.x(i) * expo)) < 1e-8);
        }
    }
    CHECK_THROWS_AS(integrate_fundamental(pot2, poles, cplx(1.0, 0.0), OdeOptions{}),
                    std::domain_error);
}

TEST_CASE("step-doubling convergence check") {
    const PoleSet poles = presets::two_pole();
    GridSpec grid(1.0, 128);
    auto pot = presets::smooth_beta(grid);
    OdeOptions opts;
    opts.verify_tol = 1e-6;
    CHECK_NOTHROW(integrate_fundamental(pot, poles, cplx(0.4, 1.1), opts));
    // starved step count must trip the check
    opts.fixed_steps = 3;
    opts.verify_tol = 1e-12;
    CHECK_THROWS_AS(integrate_fundamental(pot, poles, cplx(0.05, 0.9), opts), numeric_error);
}

TEST_CASE("gauge transform") {
    GridSpec grid(1.0, 96);
    PoleSet one{{0.4}, {1}};
    auto pot = constant_e1(grid);
    const cplx mu(1.3, -2.0);
    const cplx lambda = map_mu_to_lambda(0, mu, one);
    FundamentalSolution w = integrate_fundamental(pot, one, lambda, OdeOptions{});
    GaugeSolution gw = gauge_transform_W(w, 0, mu, pot, one);

    // W(0, mu) = Q(0); here Q = I and W = diag(e^{i mu x}, e^{-i mu x})
    CHECK((gw.w.front() - Eigen::Matrix2cd::Identity()).norm() == 0.0);
    for (int i : {24, 96}) {
        Eigen::Matrix2cd expect;
        expect << std::exp(iu * mu * grid.x(i)), 0, 0, std::exp(-iu * mu * grid.x(i)), 0;
        expect(1, 1) = std::exp(-iu * mu * grid.x(i));
        CHECK((gw.w[i] - expect).norm() < 1e-7);
    }
    CHECK_THROWS_AS(gauge_transform_W(w, 0, mu * 1.01, pot, one), validation_error);

    // W(x, conj mu)^* W(x, mu) = I on a generic potential
    const PoleSet poles = presets::two_pole();
    GridSpec g2(1.0, 192);
    auto pot2 = presets::smooth_beta(g2);
    const cplx mu2(0.8, -1.7);
    const cplx l2 = map_mu_to_lambda(1, mu2, poles);
    GaugeSolution wa = gauge_transform_W(integrate_fundamental(pot2, poles, l2, OdeOptions{}), 1,
                                         mu2, pot2, poles);
    GaugeSolution wb =
        gauge_transform_W(integrate_fundamental(pot2, poles, std::conj(l2), OdeOptions{}), 1,
                          std::conj(mu2), pot2, poles);
    for (int i : {48, 192})
        CHECK((wb.w[i].adjoint() * wa.w[i] - Eigen::Matrix2cd::Identity()).norm() < 1e-8);
}

TEST_CASE("disk matrix") {
    const PoleSet poles = presets::two_pole();
    GridSpec grid(1.0, 192);
    auto pot = presets::smooth_beta(grid);
    const double m_cut = bound_M(pot, poles, 0.1);
    const cplx mu(0.9, -std::max(1.0, m_cut / 4.0) * 1.5);

    DiskMatrixSamples a = disk_matrix(pot, poles, 0, mu, OdeOptions{});
    CHECK((a.a.front() - Eigen::Matrix2cd::Identity()).norm() < 1e-12);

    // adjoint route equals direct inversion of W(x, mu)
    const cplx lambda = map_mu_to_lambda(0, mu, poles);
    GaugeSolution w_mu = gauge_transform_W(integrate_fundamental(pot, poles, lambda, OdeOptions{}),
                                           0, mu, pot, poles);
    DiskMatrixSamples b = disk_matrix_by_inversion(w_mu);
    for (int i : {48, 192}) CHECK((a.a[i] - b.a[i]).norm() < 1e-10 * a.a[i].norm());

    // j - A(l)^* j A(l) positive definite for admissible mu
    for (double zeta : {-3.0, 0.0, 2.0}) {
        const cplx adm(zeta, -m_cut / 4.0 - 1.0);
        const Eigen::Matrix2cd al = disk_matrix_endpoint(pot, poles, 0, adm, 1.0, OdeOptions{});
        Eigen::Matrix2cd gap = kJ - al.adjoint() * kJ * al;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(0.5 * (gap + gap.adjoint()));
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("weyl disks: unit disk limit, lower bound, nesting") {
    const PoleSet poles = presets::two_pole();
    const double m_cut = 6.0;
    auto disk_at = [&](double l, cplx mu) {
        GridSpec g(l, 128);
        auto pot = PotentialField::sample(
            g, 2, [](int k, double x) { return presets::smooth_beta_row(k, x); });
        const cplx lambda = map_mu_to_lambda(0, mu, poles);
        GaugeSolution w = gauge_transform_W(integrate_fundamental(pot, poles, lambda, OdeOptions{}),
                                            0, mu, pot, poles);
        return weyl_disk(w, pot);
    };

    const cplx mu(0.4, -m_cut / 4.0 - 1.2);
    WeylDisk tiny = disk_at(1e-4, mu);
    CHECK(std::abs(tiny.rho0) < 1e-3);
    CHECK(tiny.rho1 == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(tiny.rho2 == doctest::Approx(1.0).epsilon(1e-2));

    WeylDisk d25 = disk_at(0.25, mu);
    WeylDisk d50 = disk_at(0.5, mu);
    WeylDisk d100 = disk_at(1.0, mu);
    for (const WeylDisk* d : {&d25, &d50, &d100})
        CHECK(d->rho1 >= 1.0 - 2.0 * d->l * (m_cut / 4.0 + mu.imag()) - 1e-9);
    // nesting: disk(l1) inside disk(l2) for l1 > l2
    CHECK(std::abs(d50.rho0 - d25.rho0) + d50.radius() <= d25.radius() + 1e-10);
    CHECK(std::abs(d100.rho0 - d50.rho0) + d100.radius() <= d50.radius() + 1e-10);
}

TEST_CASE("weyl point approximant and WT values") {
    const PoleSet poles = presets::two_pole();
    GridSpec grid(1.0, 192);
    auto pot = presets::smooth_beta(grid);
    const double m_cut = bound_M(pot, poles, 0.1);
    const double eta = -m_cut / 4.0 - 2.0;

    for (double zeta : {-5.0, 0.7, 9.0}) {
        const cplx mu(zeta, eta);
        const Eigen::Matrix2cd al = disk_matrix_endpoint(pot, poles, 1, mu, 1.0, OdeOptions{});
        const cplx psi0 = approx_weyl_point(al, cplx(0, 0));
        CHECK(std::abs(psi0) < 1.0);
        const double bound = 2.0 * std::exp((2.0 * eta + m_cut / 2.0) * 1.0);
        for (cplx theta : {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)}) {
            const cplx psi_t = approx_weyl_point(al, theta);
            CHECK(std::abs(psi_t) < 1.0);
            CHECK(std::abs(psi_t - psi0) <= bound);
        }
    }

    // |psi| decreases below any threshold as Im mu -> -infinity
    double prev = 1.0;
    for (double e : {4.0, 16.0, 64.0}) {
        const Eigen::Matrix2cd al =
            disk_matrix_endpoint(pot, poles, 0, cplx(0.3, -e), 1.0, OdeOptions{});
        const double mag = std::abs(approx_weyl_point(al, cplx(0, 0)));
        CHECK(mag < prev);
        prev = mag;
    }
    CHECK(prev < 1e-2);

    // Moebius examples
    Eigen::RowVector2cd e1, e2;
    e1 << 1, 0;
    e2 << 0, 1;
    CHECK(wt_from_psi(cplx(0.3, -0.2), e1) == cplx(0.3, -0.2));
    CHECK_THROWS_AS(wt_from_psi(cplx(0, 0), e2), numeric_error);
}

TEST_CASE("weyl function sampler") {
    const PoleSet poles = presets::two_pole();
    GridSpec grid(1.0, 512);
    auto pot = presets::smooth_beta(grid);

    WeylSampleOptions opts;
    opts.workers = 4;
    const std::vector<double> zg = make_zeta_grid(40.0, 64);
    WeylData wd = sample_weyl_function(pot, poles, 1.0, -8.0, zg, opts);
    CHECK(std::isfinite(wd.sup_norm()));
    CHECK(wd.sup_norm() < 10.0);
    CHECK(wd.truncation_bound == doctest::Approx(2.0 * std::exp(-16.0 + wd.cutoff_M / 2.0)));
    for (int k = 0; k < 2; ++k) {
        const Eigen::RowVector2cd b0 = pot.row(k, 0);
        CHECK(std::abs(wd.c[k] - (-b0(1) / b0(0))) < 1e-12);
        // tail approaches c_k
        CHECK(std::abs(wd.samples[k].front() - wd.c[k]) < 0.1);
        CHECK(std::abs(wd.samples[k].back() - wd.c[k]) < 0.1);
    }

    // m = 1 with beta = [1, 0]: A12 = 0 identically, so phi = 0
    PoleSet one{{0.4}, {1}};
    auto pot1 = constant_e1(GridSpec(1.0, 64));
    WeylData trivial = sample_weyl_function(pot1, one, 1.0, -2.0, make_zeta_grid(8.0, 16),
                                            WeylSampleOptions{});
    CHECK(trivial.sup_norm() < 1e-12);

    // doubling l moves every sample by less than the truncation bound
    GridSpec half(0.5, 256);
    auto pot_half = PotentialField::sample(
        half, 2, [](int k, double x) { return presets::smooth_beta_row(k, x); });
    WeylSampleOptions o2;
    o2.cutoff_M = wd.cutoff_M;
    WeylData wd_half = sample_weyl_function(pot_half, poles, 0.5, -8.0, zg, o2);
    const double bound_half = 2.0 * std::exp((2.0 * -8.0 + wd.cutoff_M / 2.0) * 0.5);
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 64; ++j)
            CHECK(std::abs(wd.samples[k][j] - wd_half.samples[k][j]) <= bound_half);
}

TEST_CASE("L2 Weyl property: gauged column decays") {
    const PoleSet poles = presets::two_pole();
    GridSpec grid(1.0, 256);
    auto pot = presets::smooth_beta(grid);
    const double m_cut = bound_M(pot, poles, 0.1);
    const cplx mu(1.1, -m_cut / 4.0 - 3.0);
    const int k = 0;

    const cplx phi = wt_sample(pot, poles, k, mu, 1.0, OdeOptions{});
    const cplx lambda = map_mu_to_lambda(k, mu, poles);
    GaugeSolution w = gauge_transform_W(integrate_fundamental(pot, poles, lambda, OdeOptions{}), k,
                                        mu, pot, poles);
    Eigen::Vector2cd col;
    col << phi, 1.0;
    // cumulative trapezoid of ||W [phi;1]||^2; the tail half must be smaller
    double head = 0, tail = 0;
    for (int i = 0; i <= grid.n; ++i) {
        const double wq = (i == 0 || i == grid.n) ? 0.5 : 1.0;
        const double val = wq * (w.w[i] * col).squaredNorm() * grid.step();
        (i <= grid.n / 2 ? head : tail) += val;
    }
    CHECK(std::isfinite(head + tail));
    CHECK(tail < head);
}
