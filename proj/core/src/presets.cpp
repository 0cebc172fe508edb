#include "ratweyl/presets.hpp"

#include <cmath>

namespace ratweyl::presets {

PoleSet two_pole() { return PoleSet{{1.0, -1.0}, {1, 1}}; }

SourceColumns smooth_columns(const GridSpec& grid) {
    auto f = [](int k, double x) -> cplx {
        if (k == 0) return 0.4 * std::exp(iu * (1.3 * x)) - 0.15;
        return 0.3 * std::cos(2.0 * x) + 0.25 * iu * std::sin(1.4 * x) + 0.1;
    };
    auto fd1 = [](int k, double x) -> cplx {
        if (k == 0) return 0.4 * iu * 1.3 * std::exp(iu * (1.3 * x));
        return -0.6 * std::sin(2.0 * x) + 0.35 * iu * std::cos(1.4 * x);
    };
    auto fd2 = [](int k, double x) -> cplx {
        if (k == 0) return -0.4 * 1.69 * std::exp(iu * (1.3 * x));
        return -1.2 * std::cos(2.0 * x) - 0.49 * iu * std::sin(1.4 * x);
    };
    return SourceColumns::from_functions(grid, 2, {1, 1}, f, fd1, fd2);
}

namespace {

Eigen::RowVector2cd angle_row(double theta, double phase1, double phase2) {
    Eigen::RowVector2cd r;
    r << std::cos(theta) * std::exp(iu * phase1), std::sin(theta) * std::exp(iu * phase2);
    return r;
}

}  // namespace

Eigen::RowVector2cd smooth_beta_row(int k, double x) {
    if (k == 0)
        return angle_row(0.45 + 0.28 * std::sin(1.3 * x), 0.22 * std::cos(1.1 * x),
                         0.30 * std::sin(0.9 * x));
    return angle_row(0.95 - 0.24 * std::cos(1.6 * x), -0.25 * std::sin(1.2 * x),
                     0.18 * std::cos(1.5 * x));
}

PotentialField smooth_beta(const GridSpec& grid) {
    return PotentialField::sample(grid, 2, [](int k, double x) { return smooth_beta_row(k, x); });
}

Eigen::RowVector2cd boundary_null_beta_row(int k, double x) {
    if (k == 0) return smooth_beta_row(0, x);
    const double half_pi = 1.5707963267948966;
    return angle_row(half_pi - 0.33 * std::sin(1.2 * x), 0.2 * std::sin(1.0 * x),
                     0.15 * std::cos(1.3 * x));
}

PotentialField boundary_null_beta(const GridSpec& grid) {
    return PotentialField::sample(grid, 2,
                                  [](int k, double x) { return boundary_null_beta_row(k, x); });
}

Eigen::RowVector2cd split_beta_row(int k, double x, double l0) {
    if (k == 1) return smooth_beta_row(1, x);
    const double d = x > l0 ? 0.35 * (x - l0) : 0.0;
    return angle_row(0.45 + 0.28 * std::sin(1.3 * x) + d, 0.22 * std::cos(1.1 * x),
                     0.30 * std::sin(0.9 * x));
}

PotentialField split_beta(const GridSpec& grid, double l0) {
    return PotentialField::sample(
        grid, 2, [l0](int k, double x) { return split_beta_row(k, x, l0); });
}

}  // namespace ratweyl::presets
