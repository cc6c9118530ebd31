#include "mvindex/qp.hpp"

#include "mvindex/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mvindex {

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
    }
    return a;
}

/// Problem after objective scaling and constraint row equilibration.
struct Scaled {
    Eigen::MatrixXd H, A, G;
    Eigen::VectorXd c, b, h;
    Eigen::VectorXd row_a, row_g;  // divisors applied to each constraint row
    double obj_scale = 1.0;
};

Scaled equilibrate(const QuadraticProgram& qp) {
    Scaled s;
    const double hmax = qp.H.size() ? qp.H.cwiseAbs().maxCoeff() : 0.0;
    const double cmax = inf_norm(qp.c);
    s.obj_scale = std::max(hmax, cmax);
    if (!(s.obj_scale > 0.0)) s.obj_scale = 1.0;
    s.H = qp.H / s.obj_scale;
    s.c = qp.c / s.obj_scale;

    auto rows = [](const Eigen::MatrixXd& M, const Eigen::VectorXd& r, Eigen::MatrixXd& Mo,
                   Eigen::VectorXd& ro, Eigen::VectorXd& scale) {
        Mo = M;
        ro = r;
        scale.resize(M.rows());
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            double m = M.row(i).cwiseAbs().maxCoeff();
            if (!(m > 0.0)) m = 1.0;
            scale(i) = m;
            Mo.row(i) /= m;
            ro(i) /= m;
        }
    };
    rows(qp.A, qp.b, s.A, s.b, s.row_a);
    rows(qp.G, qp.h, s.G, s.h, s.row_g);
    return s;
}

struct Iterate {
    Eigen::VectorXd x, y, z, s;
};

struct Residuals {
    Eigen::VectorXd rd, rp, ri;
    double primal = 0.0, dual = 0.0, gap = 0.0;
    double merit() const { return std::max({primal, dual, gap}); }
};

Residuals residuals(const Scaled& p, const Iterate& it) {
    Residuals r;
    const Eigen::VectorXd hx = p.H * it.x;
    r.rd = hx + p.c + p.A.transpose() * it.y + p.G.transpose() * it.z;
    r.rp = p.A * it.x - p.b;
    r.ri = p.G * it.x + it.s - p.h;
    r.primal = std::max(inf_norm(r.rp) / (1.0 + inf_norm(p.b)), inf_norm(r.ri) / (1.0 + inf_norm(p.h)));
    r.dual = inf_norm(r.rd) / (1.0 + std::max(inf_norm(hx), inf_norm(p.c)));
    const auto m = it.s.size();
    r.gap = m > 0 ? it.s.dot(it.z) / static_cast<double>(m) : 0.0;
    return r;
}

/// Equality-only problem: one KKT solve.
QpResult solve_equality_only(const Scaled& p, const QpSettings& settings) {
    const auto n = p.H.rows();
    const auto m_eq = p.A.rows();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m_eq, n + m_eq);
    K.topLeftCorner(n, n) = p.H;
    K.topRightCorner(n, m_eq) = p.A.transpose();
    K.bottomLeftCorner(m_eq, n) = p.A;
    Eigen::VectorXd rhs(n + m_eq);
    rhs << -p.c, p.b;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    Eigen::VectorXd sol;
    if (lu.isInvertible()) {
        sol = lu.solve(rhs);
    } else {
        sol = K.completeOrthogonalDecomposition().solve(rhs);
    }
    QpResult r;
    r.x = sol.head(n);
    r.y = sol.tail(m_eq);
    r.z.resize(0);
    r.iterations = 1;
    Iterate it{r.x, r.y, Eigen::VectorXd(0), Eigen::VectorXd(0)};
    const auto res = residuals(p, it);
    r.primal_residual = res.primal;
    r.dual_residual = res.dual;
    r.converged = res.merit() <= settings.acceptable_tolerance;
    return r;
}

/// Imposes the constraints with s < z as equalities and solves the KKT
/// system directly. Returns false when the polished point is unusable.
bool polish(const Scaled& p, Iterate& it) {
    const auto n = p.H.rows();
    const auto m_eq = p.A.rows();
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < it.s.size(); ++i) {
        if (it.s(i) < it.z(i)) active.push_back(i);
    }
    const auto na = static_cast<Eigen::Index>(active.size());
    const auto dim = n + m_eq + na;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    K.topLeftCorner(n, n) = p.H;
    K.block(0, n, n, m_eq) = p.A.transpose();
    K.block(n, 0, m_eq, n) = p.A;
    rhs.head(n) = -p.c;
    rhs.segment(n, m_eq) = p.b;
    for (Eigen::Index k = 0; k < na; ++k) {
        const auto i = active[static_cast<std::size_t>(k)];
        K.block(0, n + m_eq + k, n, 1) = p.G.row(i).transpose();
        K.block(n + m_eq + k, 0, 1, n) = p.G.row(i);
        rhs(n + m_eq + k) = p.h(i);
    }
    const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite()) return false;
    const double sys_res = inf_norm(K * sol - rhs) / (1.0 + inf_norm(rhs));
    if (sys_res > 1e-9) return false;

    Iterate cand;
    cand.x = sol.head(n);
    cand.y = sol.segment(n, m_eq);
    cand.z = Eigen::VectorXd::Zero(it.z.size());
    for (Eigen::Index k = 0; k < na; ++k) cand.z(active[static_cast<std::size_t>(k)]) = sol(n + m_eq + k);
    const double zscale = 1.0 + inf_norm(it.z);
    if (cand.z.size() > 0 && cand.z.minCoeff() < -1e-9 * zscale) return false;
    cand.z = cand.z.cwiseMax(0.0);
    const Eigen::VectorXd slack = p.h - p.G * cand.x;
    if (slack.size() > 0 && slack.minCoeff() < -1e-10 * (1.0 + inf_norm(p.h))) return false;
    cand.s = slack.cwiseMax(0.0);

    const auto before = residuals(p, it);
    const auto after = residuals(p, cand);
    if (after.primal > std::max(before.primal, 1e-10) || after.dual > std::max(before.dual, 1e-10)) return false;
    it = std::move(cand);
    return true;
}

}  // namespace

QpResult solve_qp(const QuadraticProgram& qp, const QpSettings& settings) {
    const auto n = qp.H.rows();
    if (qp.H.cols() != n || qp.c.size() != n || qp.A.cols() != n || qp.G.cols() != n ||
        qp.A.rows() != qp.b.size() || qp.G.rows() != qp.h.size()) {
        throw ValidationError("quadratic program dimensions are inconsistent");
    }
    const Scaled p = equilibrate(qp);
    const auto m_eq = p.A.rows();
    const auto m = p.G.rows();

    auto finish = [&](QpResult r) {
        // Undo scaling.
        if (r.y.size()) r.y = (r.y.array() * p.obj_scale / p.row_a.array()).matrix();
        if (r.z.size()) r.z = (r.z.array() * p.obj_scale / p.row_g.array()).matrix();
        r.objective = 0.5 * r.x.dot(qp.H * r.x) + qp.c.dot(r.x);
        return r;
    };

    if (m == 0) return finish(solve_equality_only(p, settings));

    constexpr double reg = 1e-14;
    const Eigen::MatrixXd Gt = p.G.transpose();

    // Starting point from the least-squares-like system used by CVXOPT.
    Iterate it;
    {
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m_eq, n + m_eq);
        K.topLeftCorner(n, n) = p.H + Gt * p.G;
        K.topRightCorner(n, m_eq) = p.A.transpose();
        K.bottomLeftCorner(m_eq, n) = p.A;
        Eigen::VectorXd rhs(n + m_eq);
        rhs << -p.c + Gt * p.h, p.b;
        const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
        it.x = sol.head(n);
        it.y = Eigen::VectorXd::Zero(m_eq);
        it.s = (p.h - p.G * it.x).cwiseAbs().cwiseMax(1.0);
        it.z = Eigen::VectorXd::Ones(m);
    }

    Iterate best = it;
    double best_merit = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int tiny_steps = 0;
    int since_improvement = 0;

    Eigen::MatrixXd K(n + m_eq, n + m_eq);
    Eigen::VectorXd rhs(n + m_eq);

    for (; iterations < settings.max_iterations; ++iterations) {
        const auto res = residuals(p, it);
        const double merit = res.merit();
        if (merit < best_merit) {
            best_merit = merit;
            best = it;
            since_improvement = 0;
        } else if (++since_improvement > 50) {
            break;
        }
        if (merit <= settings.tolerance) break;

        const double mu = res.gap;
        const Eigen::VectorXd d = it.z.cwiseQuotient(it.s);
        K.setZero();
        K.topLeftCorner(n, n) = p.H + Gt * d.asDiagonal() * p.G;
        K.topLeftCorner(n, n).diagonal().array() += reg;
        K.topRightCorner(n, m_eq) = p.A.transpose();
        K.bottomLeftCorner(m_eq, n) = p.A;
        K.bottomRightCorner(m_eq, m_eq).diagonal().array() -= reg;
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);

        auto direction = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                             Eigen::VectorXd& dz, Eigen::VectorXd& ds) {
            rhs.head(n) = -res.rd + Gt * (rc - it.z.cwiseProduct(res.ri)).cwiseQuotient(it.s);
            rhs.tail(m_eq) = -res.rp;
            const Eigen::VectorXd sol = lu.solve(rhs);
            dx = sol.head(n);
            dy = sol.tail(m_eq);
            const Eigen::VectorXd gdx = p.G * dx;
            dz = (-rc + it.z.cwiseProduct(res.ri)).cwiseQuotient(it.s) + d.cwiseProduct(gdx);
            ds = -res.ri - gdx;
        };

        Eigen::VectorXd dx, dy, dz, ds;
        Eigen::VectorXd rc = it.s.cwiseProduct(it.z);
        direction(rc, dx, dy, dz, ds);
        const double a_aff = std::min({1.0, max_step(it.s, ds), max_step(it.z, dz)});
        const double mu_aff = (it.s + a_aff * ds).dot(it.z + a_aff * dz) / static_cast<double>(m);
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        rc += ds.cwiseProduct(dz);
        rc.array() -= sigma * mu;
        direction(rc, dx, dy, dz, ds);
        const double a_max = std::min(max_step(it.s, ds), max_step(it.z, dz));
        const double alpha = std::min(1.0, 0.99 * a_max);
        if (!(alpha > 1e-12) || !dx.allFinite()) {
            if (++tiny_steps >= 5 || !dx.allFinite()) break;
        } else {
            tiny_steps = 0;
        }
        it.x += alpha * dx;
        it.y += alpha * dy;
        it.z += alpha * dz;
        it.s += alpha * ds;
    }

    {
        const auto res = residuals(p, it);
        if (res.merit() < best_merit) {
            best_merit = res.merit();
            best = it;
        }
    }

    QpResult r;
    r.iterations = iterations;
    r.converged = best_merit <= settings.acceptable_tolerance;
    if (settings.polish && r.converged) r.polished = polish(p, best);
    const auto res = residuals(p, best);
    r.x = best.x;
    r.y = best.y;
    r.z = best.z;
    r.primal_residual = res.primal;
    r.dual_residual = res.dual;
    r.gap = res.gap;
    return finish(std::move(r));
}

}  // namespace mvindex
