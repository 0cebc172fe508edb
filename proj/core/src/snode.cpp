#include "ratweyl/snode.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace ratweyl {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

SourceColumns SourceColumns::standard(const Phi2Field& phi2) {
    SourceColumns cols;
    cols.grid = phi2.grid;
    cols.m = phi2.m;
    cols.varying.assign(phi2.m, 1);
    cols.value.resize(phi2.m);
    cols.d1.resize(phi2.m);
    cols.d2.resize(phi2.m);
    const int nodes = phi2.grid.nodes();
    for (int k = 0; k < phi2.m; ++k) {
        cols.value[k][0] = Eigen::VectorXcd::Ones(nodes);
        cols.d1[k][0] = Eigen::VectorXcd::Zero(nodes);
        cols.d2[k][0] = Eigen::VectorXcd::Zero(nodes);
        cols.value[k][1] = phi2.value[k];
        cols.d1[k][1] = phi2.d1[k];
        cols.d2[k][1] = phi2.d2[k];
    }
    return cols;
}

SourceColumns SourceColumns::from_functions(const GridSpec& grid, int m, std::vector<int> varying,
                                            const std::function<cplx(int, double)>& f,
                                            const std::function<cplx(int, double)>& fd1,
                                            const std::function<cplx(int, double)>& fd2) {
    SourceColumns cols;
    cols.grid = grid;
    cols.m = m;
    cols.varying = std::move(varying);
    if (static_cast<int>(cols.varying.size()) != m)
        throw validation_error("SourceColumns: varying-column index per pole required");
    cols.value.resize(m);
    cols.d1.resize(m);
    cols.d2.resize(m);
    const int nodes = grid.nodes();
    for (int k = 0; k < m; ++k) {
        const int vc = cols.varying[k];
        if (vc != 0 && vc != 1) throw validation_error("SourceColumns: varying index must be 0 or 1");
        const int cc = 1 - vc;
        cols.value[k][cc] = Eigen::VectorXcd::Ones(nodes);
        cols.d1[k][cc] = Eigen::VectorXcd::Zero(nodes);
        cols.d2[k][cc] = Eigen::VectorXcd::Zero(nodes);
        cols.value[k][vc].resize(nodes);
        cols.d1[k][vc].resize(nodes);
        cols.d2[k][vc].resize(nodes);
        for (int i = 0; i < nodes; ++i) {
            const double x = grid.x(i);
            cols.value[k][vc](i) = f(k, x);
            cols.d1[k][vc](i) = fd1(k, x);
            cols.d2[k][vc](i) = fd2(k, x);
        }
    }
    return cols;
}

Eigen::VectorXd trapezoid_weights(const GridSpec& grid, int r) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(r + 1);
    if (r == 0) return w;
    const double h = grid.step();
    w.setConstant(h);
    w(0) = 0.5 * h;
    w(r) = 0.5 * h;
    return w;
}

Eigen::VectorXcd resolvent_apply(const PoleSet& poles, int k, cplx lambda, const GridSpec& grid,
                                 const Eigen::VectorXcd& f) {
    if (lambda == cplx(poles.d[k], 0.0))
        throw std::domain_error("resolvent_apply: lambda equals the pole d_k");
    const cplx shift = lambda - poles.d[k];
    const cplx nu1 = 1.0 / shift;
    const cplx nu2 = static_cast<double>(poles.b[k]) / (shift * shift);
    const cplx kappa = iu * static_cast<double>(poles.b[k]) / shift;
    const double h = grid.step();
    const cplx eh = std::exp(kappa * h);
    const int nodes = static_cast<int>(f.size());
    Eigen::VectorXcd out(nodes);
    cplx j = 0.0;  // int_0^{x_i} exp(kappa (x_i - u)) f(u) du, trapezoid
    out(0) = nu1 * f(0);
    for (int i = 1; i < nodes; ++i) {
        j = eh * j + 0.5 * h * (eh * f(i - 1) + f(i));
        out(i) = nu1 * f(i) + iu * nu2 * j;
    }
    return out;
}

Eigen::VectorXcd resolvent_apply_derivative(const PoleSet& poles, int k, cplx lambda,
                                            const GridSpec& grid, const Eigen::VectorXcd& f,
                                            const Eigen::VectorXcd& fd1) {
    if (lambda == cplx(poles.d[k], 0.0))
        throw std::domain_error("resolvent_apply_derivative: lambda equals the pole d_k");
    const cplx shift = lambda - poles.d[k];
    const cplx nu1 = 1.0 / shift;
    const cplx nu2 = static_cast<double>(poles.b[k]) / (shift * shift);
    const cplx kappa = iu * static_cast<double>(poles.b[k]) / shift;
    const double h = grid.step();
    const cplx eh = std::exp(kappa * h);
    const int nodes = static_cast<int>(f.size());
    Eigen::VectorXcd out(nodes);
    cplx j = 0.0;
    out(0) = nu1 * fd1(0) + iu * nu2 * f(0);
    for (int i = 1; i < nodes; ++i) {
        j = eh * j + 0.5 * h * (eh * f(i - 1) + f(i));
        out(i) = nu1 * fd1(i) + iu * nu2 * (f(i) + kappa * j);
    }
    return out;
}

// s_kk(x, u) = b [ g(x-u) conj(G(0)) + int_0^u g(x-u+t) conj(g(t)) dt ]  (x >= u),
// g = (varying column)', G = varying column; hermitian mirror for x < u, and the
// mean of the two one-sided values on the diagonal (the kernel jumps there
// whenever g(0) conj(G(0)) is not real). The t-grid matches the x-grid, so the
// trapezoid runs on nodes.
cplx kernel_diag(const PoleSet& poles, const SourceColumns& cols, int k, int i, int j) {
    const Eigen::VectorXcd& g = cols.d1[k][cols.varying[k]];
    const cplx g0_bar = std::conj(cols.value[k][cols.varying[k]](0));
    const double bk = static_cast<double>(poles.b[k]);
    const int lo = std::min(i, j);
    const int delta = std::abs(i - j);
    cplx integ = 0.0;
    if (lo > 0) {
        cplx sum = 0.0;
        for (int s = 0; s <= lo; ++s) {
            const double wq = (s == 0 || s == lo) ? 0.5 : 1.0;
            sum += wq * g(delta + s) * std::conj(g(s));
        }
        integ = bk * cols.grid.step() * sum;
    }
    if (i == j) return bk * std::real(g(0) * g0_bar) + integ;
    const cplx val = bk * g(delta) * g0_bar + integ;
    return (i > j) ? val : std::conj(val);
}

cplx kernel_offdiag(const PoleSet& poles, const SourceColumns& cols, int k, int p, int i, int j,
                    const ContourOptions& contour) {
    if (k == p) throw validation_error("kernel_offdiag: pole indices must differ");
    const double gap = std::abs(poles.d[k] - poles.d[p]);
    const double eps = contour.radius_factor * gap;
    if (!(eps > 0.0) || eps >= gap)
        throw validation_error("kernel_offdiag: contour radius must lie in (0, |d_k - d_p|)");
    const int nt = contour.points;
    cplx acc = 0.0;
    for (int t = 0; t < nt; ++t) {
        const double theta = 2.0 * kPi * t / nt;
        const cplx lam = poles.d[k] + eps * std::exp(iu * theta);
        Eigen::RowVector2cd fk, gp;
        for (int c = 0; c < 2; ++c) {
            fk(c) = resolvent_apply(poles, k, lam, cols.grid, cols.value[k][c])(i);
            gp(c) = resolvent_apply(poles, p, std::conj(lam), cols.grid, cols.value[p][c])(j);
        }
        acc += std::exp(iu * theta) * (fk * gp.adjoint())(0, 0);
    }
    return acc * iu * eps / static_cast<double>(nt);
}

SNode assemble_S(const SourceColumns& cols, const PoleSet& poles, const GridSpec& grid,
                 const ContourOptions& contour) {
    const int m = poles.size();
    if (cols.m != m) throw validation_error("assemble_S: column family does not match the pole set");
    const int nodes = grid.nodes();
    const int dim = m * nodes;
    const double h = grid.step();

    SNode node;
    node.poles = poles;
    node.grid = grid;
    node.cols = cols;
    node.dtilde.resize(m);
    for (int k = 0; k < m; ++k)
        node.dtilde(k) = std::norm(cols.value[k][0](0)) + std::norm(cols.value[k][1](0));

    node.kernel = Eigen::MatrixXcd::Zero(dim, dim);

    // diagonal blocks: boundary term plus cumulative sums along i-j diagonals
    for (int k = 0; k < m; ++k) {
        const Eigen::VectorXcd& g = cols.d1[k][cols.varying[k]];
        const cplx g0_bar = std::conj(cols.value[k][cols.varying[k]](0));
        const double bk = static_cast<double>(poles.b[k]);
        for (int delta = 0; delta <= grid.n; ++delta) {
            cplx full = 0.0;
            for (int j = 0; delta + j <= grid.n; ++j) {
                const cplx term = g(delta + j) * std::conj(g(j));
                full += term;
                const int i = delta + j;
                cplx integ = 0.0;
                if (j > 0) {
                    const cplx first = g(delta) * std::conj(g(0));
                    integ = bk * h * (full - 0.5 * (first + term));
                }
                if (delta == 0) {
                    node.kernel(i * m + k, i * m + k) = bk * std::real(g(0) * g0_bar) + integ;
                } else {
                    const cplx val = bk * g(delta) * g0_bar + integ;
                    node.kernel(i * m + k, j * m + k) = val;
                    node.kernel(j * m + k, i * m + k) = std::conj(val);
                }
            }
        }
    }

    // off-diagonal blocks: trapezoid over the circle around d_k, mirrored to (p,k)
    for (int k = 0; k < m; ++k) {
        for (int p = k + 1; p < m; ++p) {
            const double gap = std::abs(poles.d[k] - poles.d[p]);
            const double eps = contour.radius_factor * gap;
            if (!(eps > 0.0) || eps >= gap)
                throw validation_error("assemble_S: contour radius must lie in (0, |d_k - d_p|)");
            Eigen::MatrixXcd skp = Eigen::MatrixXcd::Zero(nodes, nodes);
            for (int t = 0; t < contour.points; ++t) {
                const double theta = 2.0 * kPi * t / contour.points;
                const cplx lam = poles.d[k] + eps * std::exp(iu * theta);
                Eigen::MatrixXcd fk(nodes, 2), gp(nodes, 2);
                for (int c = 0; c < 2; ++c) {
                    fk.col(c) = resolvent_apply(poles, k, lam, grid, cols.value[k][c]);
                    gp.col(c) = resolvent_apply(poles, p, std::conj(lam), grid, cols.value[p][c]);
                }
                skp.noalias() +=
                    (iu * eps * std::exp(iu * theta) / static_cast<double>(contour.points)) *
                    (fk * gp.adjoint());
            }
            for (int i = 0; i < nodes; ++i)
                for (int j = 0; j < nodes; ++j) {
                    node.kernel(i * m + k, j * m + p) = skp(i, j);
                    node.kernel(j * m + p, i * m + k) = std::conj(skp(i, j));
                }
        }
    }

    // weight-symmetrized Nystrom matrix
    const Eigen::VectorXd w = trapezoid_weights(grid, grid.n);
    Eigen::VectorXd sqw(dim);
    for (int i = 0; i < nodes; ++i)
        for (int k = 0; k < m; ++k) sqw(i * m + k) = std::sqrt(w(i));
    node.smat = sqw.asDiagonal() * node.kernel * sqw.asDiagonal();
    for (int i = 0; i < nodes; ++i)
        for (int k = 0; k < m; ++k)
            node.smat(i * m + k, i * m + k) += poles.b[k] * node.dtilde(k);
    return node;
}

double operator_norm(const Eigen::MatrixXcd& a) {
    if (a.rows() == 0) return 0.0;
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(a.cols()).normalized();
    double nrm = 0.0;
    for (int it = 0; it < 40; ++it) {
        Eigen::VectorXcd u = a * v;
        v = a.adjoint() * u;
        const double nv = v.norm();
        if (nv == 0.0) return 0.0;
        v /= nv;
        nrm = std::sqrt(nv);
    }
    return nrm;
}

double identity_residual(const SNode& node) {
    const int m = node.poles.size();
    const int nodes = node.grid.nodes();
    const int dim = node.dim();
    const double h = node.grid.step();

    // cumulative-trapezoid integration matrix with corner entries h/4 so that
    // the discrete weighted algebra reproduces A0 + A0* = [1-kernel] exactly
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(nodes, nodes);
    for (int i = 1; i < nodes; ++i) {
        t(i, 0) = 0.5 * h;
        for (int j = 1; j < i; ++j) t(i, j) = h;
        t(i, i) = 0.5 * h;
    }
    t(0, 0) = 0.25 * h;
    t(nodes - 1, nodes - 1) = 0.25 * h;

    const Eigen::VectorXd w = trapezoid_weights(node.grid, node.grid.n);
    Eigen::MatrixXcd ahat = Eigen::MatrixXcd::Zero(dim, dim);
    for (int i = 0; i < nodes; ++i)
        for (int j = 0; j < nodes; ++j) {
            if (t(i, j) == 0.0 && i != j) continue;
            const double scale = std::sqrt(w(i) / w(j));
            for (int k = 0; k < m; ++k) {
                cplx val = iu * static_cast<double>(node.poles.b[k]) * t(i, j) * scale;
                if (i == j) val += node.poles.d[k];
                ahat(i * m + k, j * m + k) = val;
            }
        }

    Eigen::MatrixXcd pihat(dim, 2);
    for (int i = 0; i < nodes; ++i)
        for (int k = 0; k < m; ++k)
            pihat.row(i * m + k) = std::sqrt(w(i)) * node.cols.phi(k, i);

    Eigen::MatrixXcd resid = ahat * node.smat - node.smat * ahat.adjoint();
    resid.noalias() -= iu * (pihat * pihat.adjoint());
    // The end-weight convention leaves O(h^{3/2}) rank-four artifacts in the
    // first/last node rows and columns; the quadrature residual proper is the
    // interior-restricted operator norm.
    resid.topRows(m).setZero();
    resid.bottomRows(m).setZero();
    resid.leftCols(m).setZero();
    resid.rightCols(m).setZero();
    return operator_norm(resid) / operator_norm(node.smat);
}

// ---------------------------------------------------------------------------
// bordering sweep
// ---------------------------------------------------------------------------

namespace {

// Kernel column block [sqrt(w_i) s(x_i, x_c) sqrt(w_c)] for i = 0..rows-1.
Eigen::MatrixXcd scaled_kernel_column(const SNode& node, int c, int rows,
                                      const Eigen::VectorXd& sqw, double sqw_c) {
    const int m = node.poles.size();
    Eigen::MatrixXcd col(rows * m, m);
    for (int i = 0; i < rows; ++i)
        col.middleRows(i * m, m) =
            sqw(i) * node.kernel.block(i * m, c * m, m, m) * sqw_c;
    return col;
}

struct SweepEngine {
    const SNode& node;
    int m;
    double h;
    Eigen::MatrixXcd g;      // current restricted inverse (symmetrized space)
    Eigen::MatrixXd bd;      // B * Dtilde (diagonal m x m)
    Eigen::MatrixXd bd_inv;  // its inverse
    double smat_norm;
    double condition_limit;

    explicit SweepEngine(const SNode& n, double cond_limit)
        : node(n), m(n.poles.size()), h(n.grid.step()), condition_limit(cond_limit) {
        bd = Eigen::MatrixXd::Zero(m, m);
        for (int k = 0; k < m; ++k) bd(k, k) = n.poles.b[k] * n.dtilde(k);
        bd_inv = bd.inverse();
        g = bd_inv.cast<cplx>();  // S(0) = B Dtilde
        smat_norm = node.smat.norm();
    }

    // r: index of the node being appended (>= 1). Afterwards g = S(r)^{-1}.
    void advance(int r) {
        const double sq_h = std::sqrt(h);
        const double sq_h2 = std::sqrt(0.5 * h);
        const int prev_dim = r * m;

        if (r == 1) {
            // node 0 gains its first quadrature weight h/2
            const Eigen::MatrixXcd s00 = node.kernel.block(0, 0, m, m);
            if (s00.norm() > 0)
                woodbury_rect(Eigen::MatrixXcd::Identity(m, m), (0.5 * h) * s00);
        } else {
            // node r-1 turns interior: its weight grows h/2 -> h
            const double gamma = std::sqrt(2.0) - 1.0;
            Eigen::VectorXd sqw(r);
            sqw.setConstant(sq_h);
            sqw(0) = sq_h2;
            sqw(r - 1) = sq_h2;
            Eigen::MatrixXcd u = scaled_kernel_column(node, r - 1, r, sqw, sq_h2);
            Eigen::MatrixXcd uu(prev_dim, 2 * m);
            uu.leftCols(m) = u;
            uu.rightCols(m).setZero();
            uu.block((r - 1) * m, m, m, m) = Eigen::MatrixXcd::Identity(m, m);
            Eigen::MatrixXcd c(2 * m, 2 * m);
            c.setZero();
            c.block(0, m, m, m) = gamma * Eigen::MatrixXcd::Identity(m, m);
            c.block(m, 0, m, m) = gamma * Eigen::MatrixXcd::Identity(m, m);
            c.block(m, m, m, m) =
                gamma * gamma * (0.5 * h) * node.kernel.block((r - 1) * m, (r - 1) * m, m, m);
            woodbury_rect(uu, c);
        }

        // border node r with weight h/2
        Eigen::VectorXd sqw(r);
        sqw.setConstant(sq_h);
        sqw(0) = sq_h2;
        Eigen::MatrixXcd b = scaled_kernel_column(node, r, r, sqw, sq_h2);
        Eigen::MatrixXcd corner =
            bd.cast<cplx>() + (0.5 * h) * node.kernel.block(r * m, r * m, m, m);
        const Eigen::MatrixXcd gb = g * b;
        Eigen::MatrixXcd sigma = corner - b.adjoint() * gb;
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(sigma);
        if (!lu.isInvertible() || lu.rcond() < 1.0 / condition_limit)
            throw conditioning_error("inverse_sweep: ill-conditioned principal block at r = " +
                                     std::to_string(r));
        const Eigen::MatrixXcd sigma_inv = lu.inverse();
        Eigen::MatrixXcd gnew(prev_dim + m, prev_dim + m);
        gnew.topLeftCorner(prev_dim, prev_dim) = g + gb * sigma_inv * gb.adjoint();
        gnew.topRightCorner(prev_dim, m) = -gb * sigma_inv;
        gnew.bottomLeftCorner(m, prev_dim) = gnew.topRightCorner(prev_dim, m).adjoint();
        gnew.bottomRightCorner(m, m) = sigma_inv;
        g = std::move(gnew);
        if (g.norm() * smat_norm > condition_limit * g.rows())
            throw conditioning_error("inverse_sweep: restricted inverse too large at r = " +
                                     std::to_string(r));
    }

    // symmetric update Delta = U C U^H in the form that does not require C to
    // be invertible: (G^-1 + UCU^H)^-1 = G - G U C (I + U^H G U C)^-1 U^H G
    void woodbury_rect(const Eigen::MatrixXcd& u, const Eigen::MatrixXcd& c) {
        const Eigen::MatrixXcd gu = g * u;
        const Eigen::MatrixXcd mid =
            Eigen::MatrixXcd::Identity(c.rows(), c.cols()) + u.adjoint() * gu * c;
        g.noalias() -= gu * c * mid.inverse() * gu.adjoint();
    }

    // kernel row T_r(x_r, x_j) from the current inverse
    Eigen::MatrixXcd kernel_row(int r) const {
        const Eigen::VectorXd w = trapezoid_weights(node.grid, r);
        Eigen::MatrixXcd row(m, (r + 1) * m);
        const double w_last = w(r);
        for (int j = 0; j <= r; ++j) {
            Eigen::MatrixXcd blk =
                g.block(r * m, j * m, m, m) / std::sqrt(w_last * w(j));
            if (j == r) blk -= bd_inv.cast<cplx>() / w_last;
            row.middleCols(j * m, m) = blk;
        }
        return row;
    }
};

}  // namespace

Eigen::MatrixXcd restricted_inverse(const SNode& node, int r) {
    const int m = node.poles.size();
    const int dim = (r + 1) * m;
    Eigen::MatrixXcd s(dim, dim);
    const Eigen::VectorXd w = trapezoid_weights(node.grid, r);
    for (int i = 0; i <= r; ++i)
        for (int j = 0; j <= r; ++j)
            s.block(i * m, j * m, m, m) =
                std::sqrt(w(i) * w(j)) * node.kernel.block(i * m, j * m, m, m);
    for (int k = 0; k < m; ++k)
        for (int i = 0; i <= r; ++i)
            s(i * m + k, i * m + k) += node.poles.b[k] * node.dtilde(k);
    return s.inverse();
}

InverseSweep inverse_sweep(const SNode& node, const SweepOptions& opts) {
    const int m = node.poles.size();
    InverseSweep sweep;
    sweep.grid = node.grid;
    sweep.m = m;
    sweep.rows.resize(node.grid.nodes());
    sweep.dtilde_inv_b = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) sweep.dtilde_inv_b(k, k) = 1.0 / (node.poles.b[k] * node.dtilde(k));

    // r = 0: pointwise identity s B Dt^{-1} + B Dt T + 0 = 0
    Eigen::MatrixXcd s00 = node.kernel.block(0, 0, m, m);
    sweep.rows[0] = -sweep.dtilde_inv_b.cast<cplx>() * s00 * sweep.dtilde_inv_b.cast<cplx>();

    SweepEngine engine(node, opts.condition_limit);
    for (int r = 1; r <= node.grid.n; ++r) {
        engine.advance(r);
        sweep.rows[r] = engine.kernel_row(r);
        if (opts.cross_check && (r == node.grid.n / 2 || r == node.grid.n)) {
            const Eigen::MatrixXcd direct = restricted_inverse(node, r);
            const double diff = (direct - engine.g).norm() / direct.norm();
            if (diff > opts.cross_check_tol)
                throw numeric_error("inverse_sweep: bordering update deviates from direct inversion");
        }
    }
    return sweep;
}

RecoveredField recover_beta(const SNode& node, const InverseSweep& sweep) {
    const int m = node.poles.size();
    const int nodes = node.grid.nodes();
    Eigen::VectorXd dt_sqrt(m), dt_isqrt(m);
    for (int k = 0; k < m; ++k) {
        dt_sqrt(k) = std::sqrt(node.dtilde(k));
        dt_isqrt(k) = 1.0 / dt_sqrt(k);
    }

    std::vector<Eigen::Matrix<cplx, Eigen::Dynamic, 2>> rows(
        m, Eigen::Matrix<cplx, Eigen::Dynamic, 2>(nodes, 2));
    double drift = 0.0;
    for (int r = 0; r < nodes; ++r) {
        Eigen::MatrixXcd beta_r(m, 2);
        for (int k = 0; k < m; ++k) beta_r.row(k) = dt_isqrt(k) * node.cols.phi(k, r);
        if (r > 0) {
            const Eigen::VectorXd w = trapezoid_weights(node.grid, r);
            Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(m, 2);
            for (int j = 0; j <= r; ++j) {
                Eigen::MatrixXcd phi_j(m, 2);
                for (int k = 0; k < m; ++k) phi_j.row(k) = node.cols.phi(k, j);
                acc.noalias() += w(j) * sweep.rows[r].middleCols(j * m, m) * phi_j;
            }
            for (int k = 0; k < m; ++k)
                beta_r.row(k) += static_cast<double>(node.poles.b[k]) * dt_sqrt(k) * acc.row(k);
        }
        for (int k = 0; k < m; ++k) {
            const double nrm = beta_r.row(k).norm();
            drift = std::max(drift, std::abs(nrm - 1.0));
            rows[k].row(r) = beta_r.row(k);
        }
    }
    if (drift > 1e-2)
        throw numeric_error("recover_beta: row norms deviate from 1 by more than 1e-2");

    PotentialOptions opts;
    opts.renorm_tol = 2e-2;
    RecoveredField out{PotentialField(node.grid, std::move(rows), opts), drift};
    return out;
}

Eigen::Matrix<cplx, Eigen::Dynamic, 2> beta_derivative(const SNode& node,
                                                       const InverseSweep& sweep, int r) {
    const int m = node.poles.size();
    const double h = node.grid.step();
    Eigen::VectorXd dt_sqrt(m), dt_isqrt(m);
    for (int k = 0; k < m; ++k) {
        dt_sqrt(k) = std::sqrt(node.dtilde(k));
        dt_isqrt(k) = 1.0 / dt_sqrt(k);
    }

    Eigen::Matrix<cplx, Eigen::Dynamic, 2> out(m, 2);
    for (int k = 0; k < m; ++k) {
        out(k, 0) = dt_isqrt(k) * node.cols.d1[k][0](r);
        out(k, 1) = dt_isqrt(k) * node.cols.d1[k][1](r);
    }

    Eigen::MatrixXcd phi_r(m, 2);
    for (int k = 0; k < m; ++k) phi_r.row(k) = node.cols.phi(k, r);
    Eigen::MatrixXcd y = sweep.rows[r].rightCols(m) * phi_r;  // Y1

    if (r > 0) {
        // kernel columns s(x_i, x_r) and their u-derivative at u = x_r
        const int dim = (r + 1) * m;
        Eigen::MatrixXcd s_col(dim, m), ds_col(dim, m);
        for (int i = 0; i <= r; ++i)
            s_col.middleRows(i * m, m) = node.kernel.block(i * m, r * m, m, m);

        for (int i = 0; i <= r; ++i) {
            Eigen::MatrixXcd blk = Eigen::MatrixXcd::Zero(m, m);
            // diagonal entries: d/du of the x <= u branch
            //   s(x,u) = b [ G(0) conj(g(u-x)) + int_0^x g(t) conj(g(u-x+t)) dt ]
            for (int k = 0; k < m; ++k) {
                const Eigen::VectorXcd& g = node.cols.d1[k][node.cols.varying[k]];
                const Eigen::VectorXcd& gg = node.cols.d2[k][node.cols.varying[k]];
                const cplx g0 = node.cols.value[k][node.cols.varying[k]](0);
                cplx val = g0 * std::conj(gg(r - i));
                if (i > 0) {
                    cplx acc = 0.0;
                    for (int s = 0; s <= i; ++s) {
                        const double wq = (s == 0 || s == i) ? 0.5 : 1.0;
                        acc += wq * g(s) * std::conj(gg(r - i + s));
                    }
                    val += h * acc;
                }
                blk(k, k) = static_cast<double>(node.poles.b[k]) * val;
            }
            ds_col.middleRows(i * m, m) = blk;
        }
        // off-diagonal entries of the derivative column via the contour
        if (m > 1) {
            ContourOptions contour;
            for (int k = 0; k < m; ++k)
                for (int p = 0; p < m; ++p) {
                    if (p == k) continue;
                    const double gap = std::abs(node.poles.d[k] - node.poles.d[p]);
                    const double eps = contour.radius_factor * gap;
                    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(r + 1, 1);
                    for (int t = 0; t < contour.points; ++t) {
                        const double theta = 2.0 * kPi * t / contour.points;
                        const cplx lam = node.poles.d[k] + eps * std::exp(iu * theta);
                        Eigen::RowVector2cd gp_d;
                        for (int c = 0; c < 2; ++c) {
                            gp_d(c) = resolvent_apply_derivative(
                                node.poles, p, std::conj(lam), node.grid,
                                node.cols.value[p][c], node.cols.d1[p][c])(r);
                        }
                        Eigen::MatrixXcd fk(r + 1, 2);
                        for (int c = 0; c < 2; ++c)
                            fk.col(c) = resolvent_apply(node.poles, k, lam, node.grid,
                                                        node.cols.value[k][c])
                                            .head(r + 1);
                        acc.noalias() += (iu * eps * std::exp(iu * theta) /
                                          static_cast<double>(contour.points)) *
                                         (fk * gp_d.adjoint());
                    }
                    for (int i = 0; i <= r; ++i) ds_col(i * m + k, p) = acc(i, 0);
                }
        }

        // solves with the restricted inverse
        const Eigen::VectorXd w = trapezoid_weights(node.grid, r);
        Eigen::VectorXd sqw(dim);
        for (int i = 0; i <= r; ++i)
            for (int k = 0; k < m; ++k) sqw(i * m + k) = std::sqrt(w(i));
        const Eigen::MatrixXcd ginv = restricted_inverse(node, r);
        auto apply_inverse = [&](const Eigen::MatrixXcd& col) {
            // operator solve S(r) X = col columnwise: X = W^{-1/2} G W^{1/2} col
            Eigen::MatrixXcd scaled = sqw.asDiagonal() * col;
            Eigen::MatrixXcd sol = ginv * scaled;
            return Eigen::MatrixXcd(sqw.cwiseInverse().asDiagonal() * sol);
        };
        const Eigen::MatrixXcd x2 = apply_inverse(s_col);
        const Eigen::MatrixXcd x3 = apply_inverse(ds_col);

        Eigen::MatrixXcd int2 = Eigen::MatrixXcd::Zero(m, 2);
        Eigen::MatrixXcd int3 = Eigen::MatrixXcd::Zero(m, 2);
        for (int i = 0; i <= r; ++i) {
            Eigen::MatrixXcd phi_i(m, 2);
            for (int k = 0; k < m; ++k) phi_i.row(k) = node.cols.phi(k, i);
            int2.noalias() += w(i) * x2.middleRows(i * m, m).adjoint() * phi_i;
            int3.noalias() += w(i) * x3.middleRows(i * m, m).adjoint() * phi_i;
        }
        y.noalias() -= sweep.rows[r].rightCols(m) * int2;                          // Y2
        y.noalias() -= sweep.dtilde_inv_b.cast<cplx>() * int3;                     // Y3
    }

    for (int k = 0; k < m; ++k)
        out.row(k) += static_cast<double>(node.poles.b[k]) * dt_sqrt(k) * y.row(k);
    return out;
}

// ---------------------------------------------------------------------------
// transfer matrices
// ---------------------------------------------------------------------------

namespace {

// (A(r) - lambda I)^{-1} Pi(r), blockwise through the scalar resolvents.
Eigen::MatrixXcd resolvent_columns(const SNode& node, int r, cplx lambda) {
    const int m = node.poles.size();
    Eigen::MatrixXcd y((r + 1) * m, 2);
    for (int k = 0; k < m; ++k)
        for (int c = 0; c < 2; ++c) {
            Eigen::VectorXcd g =
                resolvent_apply(node.poles, k, lambda, node.grid, node.cols.value[k][c]);
            for (int i = 0; i <= r; ++i) y(i * m + k, c) = -g(i);
        }
    return y;
}

Eigen::Matrix2cd transfer_from_inverse(const SNode& node, int r, cplx lambda,
                                       const Eigen::MatrixXcd& ginv) {
    const int m = node.poles.size();
    if (r == 0) return Eigen::Matrix2cd::Identity();
    const Eigen::MatrixXcd y = resolvent_columns(node, r, lambda);
    const Eigen::VectorXd w = trapezoid_weights(node.grid, r);
    Eigen::VectorXd sqw((r + 1) * m);
    for (int i = 0; i <= r; ++i)
        for (int k = 0; k < m; ++k) sqw(i * m + k) = std::sqrt(w(i));
    const Eigen::MatrixXcd z =
        sqw.cwiseInverse().asDiagonal() * (ginv * (sqw.asDiagonal() * y));
    Eigen::Matrix2cd acc = Eigen::Matrix2cd::Zero();
    for (int i = 0; i <= r; ++i) {
        Eigen::MatrixXcd phi_i(m, 2);
        for (int k = 0; k < m; ++k) phi_i.row(k) = node.cols.phi(k, i);
        acc.noalias() += w(i) * phi_i.adjoint() * z.middleRows(i * m, m);
    }
    return Eigen::Matrix2cd::Identity() - iu * acc;
}

}  // namespace

TransferSample transfer_matrix(const SNode& node, int r, cplx lambda) {
    for (double dk : node.poles.d)
        if (lambda == cplx(dk, 0.0)) throw std::domain_error("transfer_matrix: lambda is a pole");
    TransferSample out;
    out.r = r;
    out.lambda = lambda;
    if (r == 0) {
        out.w = Eigen::Matrix2cd::Identity();
        return out;
    }
    out.w = transfer_from_inverse(node, r, lambda, restricted_inverse(node, r));
    return out;
}

std::vector<Eigen::Matrix2cd> transfer_profile(const SNode& node, cplx lambda) {
    for (double dk : node.poles.d)
        if (lambda == cplx(dk, 0.0)) throw std::domain_error("transfer_profile: lambda is a pole");
    std::vector<Eigen::Matrix2cd> out(node.grid.nodes());
    out[0] = Eigen::Matrix2cd::Identity();
    SweepEngine engine(node, 1e12);
    for (int r = 1; r <= node.grid.n; ++r) {
        engine.advance(r);
        out[r] = transfer_from_inverse(node, r, lambda, engine.g);
    }
    return out;
}

double transfer_ode_residual(const SNode& node, const PotentialField& beta, cplx lambda) {
    const std::vector<Eigen::Matrix2cd> w = transfer_profile(node, lambda);
    const int m = node.poles.size();
    const double h = node.grid.step();
    Eigen::VectorXcd coef(m);
    for (int k = 0; k < m; ++k)
        coef(k) = static_cast<double>(node.poles.b[k]) / (lambda - node.poles.d[k]);
    double worst = 0.0;
    for (int r = 1; r < node.grid.n; ++r) {
        Eigen::MatrixXcd b(m, 2);
        for (int k = 0; k < m; ++k) b.row(k) = beta.row(k, r);
        const Eigen::Matrix2cd rhs = iu * (b.adjoint() * coef.asDiagonal() * b) * w[r];
        const Eigen::Matrix2cd lhs = (w[r + 1] - w[r - 1]) / (2.0 * h);
        worst = std::max(worst, (lhs - rhs).norm() / w[r].norm());
    }
    return worst;
}

// ---------------------------------------------------------------------------
// triangular factorization
// ---------------------------------------------------------------------------

Factorization factorize(const SNode& node) {
    const int m = node.poles.size();
    const int nodes = node.grid.nodes();
    const int dim = node.dim();

    // block LDL^H of smat by right-looking elimination on the lower triangle
    // (no pivoting; the restricted operators are invertible by theory,
    // conditioning guarded below)
    Eigen::MatrixXcd l = Eigen::MatrixXcd::Identity(dim, dim);
    std::vector<Eigen::MatrixXcd> sigma(nodes);
    Eigen::MatrixXcd work = node.smat;
    for (int r = 0; r < nodes; ++r) {
        sigma[r] = work.block(r * m, r * m, m, m);
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(sigma[r]);
        if (!lu.isInvertible())
            throw conditioning_error("factorize: singular pivot block at r = " + std::to_string(r));
        const Eigen::MatrixXcd inv = lu.inverse();
        std::vector<Eigen::MatrixXcd> col(nodes);  // pivot column below the diagonal
        for (int i = r + 1; i < nodes; ++i) col[i] = work.block(i * m, r * m, m, m);
        for (int i = r + 1; i < nodes; ++i) {
            const Eigen::MatrixXcd lir = col[i] * inv;
            l.block(i * m, r * m, m, m) = lir;
            for (int j = r + 1; j <= i; ++j)
                work.block(i * m, j * m, m, m).noalias() -= lir * col[j].adjoint();
        }
    }

    // per-block hyperbolic square roots X_r with X_r^H B X_r = sigma_r^{-1}
    Eigen::VectorXd bsign(m);
    for (int k = 0; k < m; ++k) bsign(k) = node.poles.b[k];
    Eigen::MatrixXcd xblocks = Eigen::MatrixXcd::Zero(dim, dim);
    bool b_uniform = true;
    for (int k = 1; k < m; ++k)
        if (bsign(k) != bsign(0)) b_uniform = false;
    for (int r = 0; r < nodes; ++r) {
        const Eigen::MatrixXcd sig_inv = sigma[r].inverse();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (sig_inv + sig_inv.adjoint()));
        const Eigen::VectorXd lam = es.eigenvalues();
        Eigen::MatrixXcd x;
        if (b_uniform) {
            // X = (s sig^{-1})^{1/2}, the Hermitian root; keeps X close to the
            // diagonal Dtilde^{-1/2} scaling of the continuum factor
            const double s = bsign(0);
            if ((s * lam.array()).minCoeff() <= 0.0)
                throw conditioning_error("factorize: inertia of a pivot block does not match B");
            x = es.eigenvectors() * (s * lam.array()).sqrt().matrix().asDiagonal() *
                es.eigenvectors().adjoint();
        } else {
            // align each eigenvector with a matching-sign row of B by its
            // dominant component
            std::vector<int> perm(m, -1), used(m, 0);
            for (int i = 0; i < m; ++i) {
                double best = -1.0;
                for (int k = 0; k < m; ++k) {
                    if (used[k]) continue;
                    const bool sign_ok =
                        (lam(i) >= 0 && bsign(k) > 0) || (lam(i) < 0 && bsign(k) < 0);
                    if (!sign_ok) continue;
                    const double weight = std::abs(es.eigenvectors()(k, i));
                    if (weight > best) {
                        best = weight;
                        perm[i] = k;
                    }
                }
                if (perm[i] < 0)
                    throw conditioning_error("factorize: inertia of a pivot block does not match B");
                used[perm[i]] = 1;
            }
            x = Eigen::MatrixXcd::Zero(m, m);
            for (int i = 0; i < m; ++i) {
                Eigen::VectorXcd q = es.eigenvectors().col(i);
                // fix the phase so the dominant component is positive real
                const cplx piv = q(perm[i]);
                if (std::abs(piv) > 0) q *= std::abs(piv) / piv;
                x.row(perm[i]) = std::sqrt(std::abs(lam(i))) * q.adjoint();
            }
        }
        xblocks.block(r * m, r * m, m, m) = x;
    }

    Factorization out;
    // V = X L^{-1}
    Eigen::MatrixXcd linv = Eigen::MatrixXcd::Identity(dim, dim);
    l.triangularView<Eigen::Lower>().solveInPlace(linv);
    out.v = xblocks * linv;

    Eigen::MatrixXcd bbig = Eigen::MatrixXcd::Zero(dim, dim);
    for (int i = 0; i < nodes; ++i)
        for (int k = 0; k < m; ++k) bbig(i * m + k, i * m + k) = bsign(k);
    Eigen::MatrixXcd prod = out.v.adjoint() * bbig * out.v * node.smat;
    prod -= Eigen::MatrixXcd::Identity(dim, dim);
    out.residual = operator_norm(prod) / operator_norm(node.smat);
    return out;
}

Eigen::MatrixXcd kernel_factor_v(const SNode& node, const InverseSweep& sweep) {
    const int m = node.poles.size();
    const int nodes = node.grid.nodes();
    const int dim = node.dim();
    Eigen::MatrixXcd bds = Eigen::MatrixXcd::Zero(m, m);  // B Dtilde^{1/2}
    Eigen::VectorXd dt_sqrt(m);
    for (int k = 0; k < m; ++k) {
        dt_sqrt(k) = std::sqrt(node.dtilde(k));
        bds(k, k) = node.poles.b[k] * dt_sqrt(k);
    }
    const Eigen::VectorXd wfull = trapezoid_weights(node.grid, node.grid.n);

    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(dim, dim);
    for (int r = 0; r < nodes; ++r) {
        const Eigen::VectorXd w = trapezoid_weights(node.grid, r);
        for (int j = 0; j <= r; ++j) {
            Eigen::MatrixXcd blk = Eigen::MatrixXcd::Zero(m, m);
            if (r > 0) blk = bds * sweep.rows[r].middleCols(j * m, m) * w(j);
            if (j == r)
                for (int k = 0; k < m; ++k) blk(k, k) += 1.0 / dt_sqrt(k);
            // symmetrize with the full-grid weights
            blk *= std::sqrt(wfull(r) / wfull(j));
            v.block(r * m, j * m, m, m) = blk;
        }
    }
    return v;
}

}  // namespace ratweyl
