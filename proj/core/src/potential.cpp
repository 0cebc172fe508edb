#include "ratweyl/potential.hpp"

#include <array>
#include <cmath>

namespace ratweyl {

CubicSpline::CubicSpline(const GridSpec& grid, const Eigen::VectorXcd& values)
    : grid_(grid), y_(values) {
    const int n = grid.n;
    if (values.size() != grid.nodes())
        throw validation_error("CubicSpline: sample count does not match grid");
    const double h = grid.step();
    m_ = Eigen::VectorXcd::Zero(n + 1);

    auto rhs = [&](int i) { return (y_(i + 1) - 2.0 * y_(i) + y_(i - 1)) / h; };

    if (n == 2) {
        cplx m = rhs(1) / h;
        m_.setConstant(m);
        return;
    }
    // Not-a-knot: eliminating m_0 = 2m_1 - m_2 and m_n = 2m_{n-1} - m_{n-2}
    // decouples m_1 and m_{n-1}; the rest is tridiagonal.
    m_(1) = rhs(1) / h;
    m_(n - 1) = rhs(n - 1) / h;
    if (n >= 4) {
        const int cnt = n - 3;  // unknowns m_2 .. m_{n-2}
        Eigen::VectorXd diag = Eigen::VectorXd::Constant(cnt, 2.0 * h / 3.0);
        Eigen::VectorXd off = Eigen::VectorXd::Constant(cnt - 1 > 0 ? cnt - 1 : 0, h / 6.0);
        Eigen::VectorXcd b(cnt);
        for (int i = 2; i <= n - 2; ++i) b(i - 2) = rhs(i);
        b(0) -= (h / 6.0) * m_(1);
        b(cnt - 1) -= (h / 6.0) * m_(n - 1);
        // Thomas solve
        for (int i = 1; i < cnt; ++i) {
            double w = off(i - 1) / diag(i - 1);
            diag(i) -= w * off(i - 1);
            b(i) -= w * b(i - 1);
        }
        m_(n - 2 + 0) = b(cnt - 1) / diag(cnt - 1);
        for (int i = cnt - 2; i >= 0; --i)
            m_(i + 2) = (b(i) - off(i) * m_(i + 3)) / diag(i);
    }
    m_(0) = 2.0 * m_(1) - m_(2);
    m_(n) = 2.0 * m_(n - 1) - m_(n - 2);
}

int CubicSpline::segment(double x, double& t) const {
    const double h = grid_.step();
    int i = static_cast<int>(std::floor(x / h));
    if (i < 0) i = 0;
    if (i > grid_.n - 1) i = grid_.n - 1;
    t = x - i * h;
    return i;
}

cplx CubicSpline::value(double x) const {
    double t;
    int i = segment(x, t);
    const double h = grid_.step();
    cplx c1 = (y_(i + 1) - y_(i)) / h - h * (2.0 * m_(i) + m_(i + 1)) / 6.0;
    return y_(i) + t * (c1 + t * (m_(i) / 2.0 + t * (m_(i + 1) - m_(i)) / (6.0 * h)));
}

cplx CubicSpline::derivative(double x) const {
    double t;
    int i = segment(x, t);
    const double h = grid_.step();
    cplx c1 = (y_(i + 1) - y_(i)) / h - h * (2.0 * m_(i) + m_(i + 1)) / 6.0;
    return c1 + t * (m_(i) + t * (m_(i + 1) - m_(i)) / (2.0 * h));
}

cplx CubicSpline::second_derivative(double x) const {
    double t;
    int i = segment(x, t);
    return m_(i) + t * (m_(i + 1) - m_(i)) / grid_.step();
}

PotentialField::PotentialField(GridSpec grid, std::vector<Eigen::Matrix<cplx, Eigen::Dynamic, 2>> rows,
                               const PotentialOptions& opts)
    : grid_(grid), rows_(std::move(rows)) {
    if (rows_.empty()) throw validation_error("PotentialField: at least one pole row family required");
    for (auto& rk : rows_) {
        if (rk.rows() != grid_.nodes())
            throw validation_error("PotentialField: sample count does not match grid");
        for (int i = 0; i < rk.rows(); ++i) {
            double nrm = rk.row(i).norm();
            double dev = std::abs(nrm - 1.0);
            if (dev <= opts.accept_tol) continue;
            if (dev <= opts.renorm_tol)
                rk.row(i) /= nrm;
            else
                throw validation_error("PotentialField: row norm deviates from 1 beyond renormalization tolerance");
        }
    }
    build_splines();
}

PotentialField PotentialField::sample(GridSpec grid, int m,
                                      const std::function<Eigen::RowVector2cd(int, double)>& beta,
                                      const PotentialOptions& opts) {
    std::vector<Eigen::Matrix<cplx, Eigen::Dynamic, 2>> rows(m);
    for (int k = 0; k < m; ++k) {
        rows[k].resize(grid.nodes(), 2);
        for (int i = 0; i < grid.nodes(); ++i) rows[k].row(i) = beta(k, grid.x(i));
    }
    return PotentialField(grid, std::move(rows), opts);
}

void PotentialField::build_splines() {
    splines_.clear();
    splines_.resize(rows_.size());
    for (size_t k = 0; k < rows_.size(); ++k)
        for (int c = 0; c < 2; ++c)
            splines_[k][c] = CubicSpline(grid_, rows_[k].col(c));
}

Eigen::RowVector2cd PotentialField::row_at(int k, double x) const {
    Eigen::RowVector2cd r;
    r << splines_[k][0].value(x), splines_[k][1].value(x);
    return r;
}

Eigen::RowVector2cd PotentialField::row_derivative_at(int k, double x) const {
    Eigen::RowVector2cd r;
    r << splines_[k][0].derivative(x), splines_[k][1].derivative(x);
    return r;
}

double PotentialField::row_norm_drift() const {
    double drift = 0.0;
    for (const auto& rk : rows_)
        for (int i = 0; i < rk.rows(); ++i)
            drift = std::max(drift, std::abs(rk.row(i).norm() - 1.0));
    return drift;
}

void PotentialField::check_strict_boundary(double floor) const {
    for (size_t k = 0; k < rows_.size(); ++k)
        if (std::abs(rows_[k](0, 0)) <= floor)
            throw validation_error("potential violates the strict boundary condition beta_k1(0) != 0");
}

}  // namespace ratweyl
