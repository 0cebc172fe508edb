#include "ratweyl/propagator.hpp"

#include <cmath>

namespace ratweyl {

// exp(M) = e^{tr/2} (cosh(q) I + sinhc(q) (M - (tr/2) I)),  q^2 = det of the
// traceless part negated: q = sqrt(p^2 + bc) for [[p,b],[c,-p]].
Eigen::Matrix2cd expm2(const Eigen::Matrix2cd& a) {
    const cplx s = 0.5 * (a(0, 0) + a(1, 1));
    Eigen::Matrix2cd n = a;
    n(0, 0) -= s;
    n(1, 1) -= s;
    const cplx q2 = n(0, 0) * n(0, 0) + n(0, 1) * n(1, 0);
    const cplx q = std::sqrt(q2);
    cplx ch, shc;
    if (std::abs(q) < 0.25) {
        // series for cosh and sinh(q)/q, accurate past double precision at |q| < 1/4
        ch = 1.0;
        shc = 1.0;
        cplx term_c = 1.0, term_s = 1.0;
        for (int k = 1; k <= 6; ++k) {
            term_c *= q2 / ((2.0 * k - 1.0) * (2.0 * k));
            term_s *= q2 / ((2.0 * k) * (2.0 * k + 1.0));
            ch += term_c;
            shc += term_s;
        }
    } else {
        ch = std::cosh(q);
        shc = std::sinh(q) / q;
    }
    const cplx es = std::exp(s);
    Eigen::Matrix2cd r = shc * n;
    r(0, 0) += ch;
    r(1, 1) += ch;
    return es * r;
}

namespace {

const double kGaussOffset = std::sqrt(3.0) / 6.0;  // Gauss-Legendre 2-point nodes at 1/2 +- this

Eigen::Matrix2cd magnus4_step(const Coeff2x2& a, double x, double h) {
    const Eigen::Matrix2cd a1 = a(x + (0.5 - kGaussOffset) * h);
    const Eigen::Matrix2cd a2 = a(x + (0.5 + kGaussOffset) * h);
    Eigen::Matrix2cd omega = (0.5 * h) * (a1 + a2);
    omega += (std::sqrt(3.0) * h * h / 12.0) * (a2 * a1 - a1 * a2);
    return expm2(omega);
}

Eigen::Matrix2cd rk4_step(const Coeff2x2& a, double x, double h, const Eigen::Matrix2cd& y) {
    const Eigen::Matrix2cd a0 = a(x);
    const Eigen::Matrix2cd am = a(x + 0.5 * h);
    const Eigen::Matrix2cd a1 = a(x + h);
    const Eigen::Matrix2cd k1 = a0 * y;
    const Eigen::Matrix2cd k2 = am * (y + 0.5 * h * k1);
    const Eigen::Matrix2cd k3 = am * (y + 0.5 * h * k2);
    const Eigen::Matrix2cd k4 = a1 * (y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Eigen::Matrix2cd propagate(const Coeff2x2& a, double x0, double x1, int steps, OdeScheme scheme) {
    if (steps < 1) throw validation_error("propagate: steps must be positive");
    const double h = (x1 - x0) / steps;
    Eigen::Matrix2cd y = Eigen::Matrix2cd::Identity();
    for (int s = 0; s < steps; ++s) {
        const double x = x0 + s * h;
        if (scheme == OdeScheme::magnus4)
            y = magnus4_step(a, x, h) * y;
        else
            y = rk4_step(a, x, h, y);
    }
    return y;
}

std::vector<Eigen::Matrix2cd> propagate_samples(const Coeff2x2& a, double x0, double x1,
                                                int samples, int substeps,
                                                const Eigen::Matrix2cd& y0, OdeScheme scheme) {
    if (samples < 1 || substeps < 1) throw validation_error("propagate_samples: counts must be positive");
    std::vector<Eigen::Matrix2cd> out;
    out.reserve(samples + 1);
    out.push_back(y0);
    const double hs = (x1 - x0) / samples;
    Eigen::Matrix2cd y = y0;
    for (int j = 0; j < samples; ++j) {
        const double xa = x0 + j * hs;
        const double h = hs / substeps;
        for (int s = 0; s < substeps; ++s) {
            const double x = xa + s * h;
            if (scheme == OdeScheme::magnus4)
                y = magnus4_step(a, x, h) * y;
            else
                y = rk4_step(a, x, h, y);
        }
        out.push_back(y);
    }
    return out;
}

}  // namespace ratweyl
