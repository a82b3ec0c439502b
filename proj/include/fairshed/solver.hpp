#ifndef FAIRSHED_SOLVER_HPP
#define FAIRSHED_SOLVER_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "conic.hpp"
#include "detail/cones.hpp"
#include "detail/ldl.hpp"

namespace fairshed {

struct SolveSettings {
    double feas_tol = 1e-8;
    double gap_tol = 1e-8;
    double infeas_cert_tol = 1e-8;
    int max_iterations = 200;
    double static_regularization = 1e-8;
    /// Pure LPs (free and orthant cones only) return a vertex of the optimal face.
    bool vertex_solution = true;
    /// When set, one CSV line per iteration is written here.
    std::ostream* iteration_log = nullptr;

    void validate() const {
        if (!(feas_tol > 0.0 && gap_tol > 0.0 && infeas_cert_tol > 0.0 && static_regularization > 0.0))
            throw std::invalid_argument("solver tolerances must be positive");
        if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    }
};

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, NumericalLimit };

inline const char* status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::PrimalInfeasible: return "primal_infeasible";
        case SolveStatus::DualInfeasible: return "dual_infeasible";
        case SolveStatus::NumericalLimit: return "numerical_limit";
    }
    return "?";
}

struct Residuals {
    double primal = std::numeric_limits<double>::infinity();
    double dual = std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
};

/// Solution or certificate in terms of the program's own form
///   primal: min c'x, Ax = b, x in K;   dual: max b'y, c - A'y = s in K*.
/// Optimal: x, y, s are the primal-dual solution.
/// PrimalInfeasible: y is a Farkas ray with b'y > 0 and s = -A'y in K*; x is empty.
/// DualInfeasible: x is a ray with Ax = 0, x in K, c'x < 0; y and s are empty.
struct SolveResult {
    SolveStatus status = SolveStatus::NumericalLimit;
    Eigen::VectorXd primal_x;
    Eigen::VectorXd dual_y;
    Eigen::VectorXd dual_slack_s;
    double objective_primal = std::numeric_limits<double>::quiet_NaN();
    double objective_dual = std::numeric_limits<double>::quiet_NaN();
    Residuals residuals;
    int iterations = 0;
};

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;

/// min c'x  s.t.  Ax = b,  Gx + s = h,  s in K (orthant x Lorentz cones).
struct ConeForm {
    SpMat A, G, At, Gt;
    Vec b, h, c;
    std::vector<SlackBlock> blocks;
    int n = 0, p = 0, m = 0;
};

/// Builds G = -T where T maps each cone block of columns onto slack rows.
/// Rotated blocks (v, w, u) map to Lorentz (v + w, v - w, 2u).
inline ConeForm to_cone_form(const ConicProgram& prog) {
    ConeForm f;
    f.n = prog.num_cols();
    f.p = prog.num_rows();
    f.A = prog.equality_A;
    f.b = prog.equality_b;
    f.c = prog.objective_c;
    std::vector<Eigen::Triplet<double>> g;
    int col = 0;
    int row = 0;
    for (const auto& cone : prog.cone_spec) {
        switch (cone.kind) {
            case ConeKind::Free: break;
            case ConeKind::NonNeg:
                if (!f.blocks.empty() && f.blocks.back().kind == SlackBlock::NonNeg &&
                    f.blocks.back().offset + f.blocks.back().dim == row) {
                    f.blocks.back().dim += cone.dim;
                } else {
                    f.blocks.push_back({SlackBlock::NonNeg, row, cone.dim});
                }
                for (int i = 0; i < cone.dim; ++i) g.emplace_back(row + i, col + i, -1.0);
                row += cone.dim;
                break;
            case ConeKind::SOC:
                f.blocks.push_back({SlackBlock::Lorentz, row, cone.dim});
                for (int i = 0; i < cone.dim; ++i) g.emplace_back(row + i, col + i, -1.0);
                row += cone.dim;
                break;
            case ConeKind::RotatedSOC:
                f.blocks.push_back({SlackBlock::Lorentz, row, cone.dim});
                g.emplace_back(row, col, -1.0);
                g.emplace_back(row, col + 1, -1.0);
                g.emplace_back(row + 1, col, -1.0);
                g.emplace_back(row + 1, col + 1, 1.0);
                for (int i = 2; i < cone.dim; ++i) g.emplace_back(row + i, col + i, -2.0);
                row += cone.dim;
                break;
        }
        col += cone.dim;
    }
    f.m = row;
    f.G.resize(f.m, f.n);
    f.G.setFromTriplets(g.begin(), g.end());
    f.G.makeCompressed();
    f.h = Vec::Zero(f.m);
    f.At = f.A.transpose();
    f.Gt = f.G.transpose();
    return f;
}

/// Ruiz equilibration: x = D x~, rows of A scaled by ea, rows of G by eg
/// (one scalar per cone block so the cones are preserved).
struct Equilibration {
    Vec d, ea, eg;
};

inline Equilibration equilibrate(ConeForm& f, int passes = 15) {
    Equilibration e{Vec::Ones(f.n), Vec::Ones(f.p), Vec::Ones(f.m)};
    for (int it = 0; it < passes; ++it) {
        Vec cn = Vec::Zero(f.n), an = Vec::Zero(f.p), gn = Vec::Zero(f.m);
        for (int k = 0; k < f.A.outerSize(); ++k)
            for (SpMat::InnerIterator i(f.A, k); i; ++i) {
                const double v = std::abs(i.value());
                cn(k) = std::max(cn(k), v);
                an(i.row()) = std::max(an(i.row()), v);
            }
        for (int k = 0; k < f.G.outerSize(); ++k)
            for (SpMat::InnerIterator i(f.G, k); i; ++i) {
                const double v = std::abs(i.value());
                cn(k) = std::max(cn(k), v);
                gn(i.row()) = std::max(gn(i.row()), v);
            }
        for (const auto& b : f.blocks)
            if (b.kind == SlackBlock::Lorentz) gn.segment(b.offset, b.dim).setConstant(gn.segment(b.offset, b.dim).maxCoeff());
        auto inv_sqrt = [](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0; };
        Vec sc = cn.unaryExpr(inv_sqrt), sa = an.unaryExpr(inv_sqrt), sg = gn.unaryExpr(inv_sqrt);
        f.A = sa.asDiagonal() * f.A * sc.asDiagonal();
        f.G = sg.asDiagonal() * f.G * sc.asDiagonal();
        e.d.array() *= sc.array();
        e.ea.array() *= sa.array();
        e.eg.array() *= sg.array();
    }
    f.c.array() *= e.d.array();
    f.b.array() *= e.ea.array();
    f.h.array() *= e.eg.array();
    f.A.makeCompressed();
    f.G.makeCompressed();
    f.At = f.A.transpose();
    f.Gt = f.G.transpose();
    return e;
}

/// Quasi-definite KKT matrix
///   [ d I   A'    G'       ]
///   [ A    -d I   0        ]
///   [ G     0    -W^2 - dI ]
/// factored by a quasi-definite LDL' with iterative refinement against the unregularized matrix.
class KktSystem {
public:
    void setup(const ConeForm& f, double delta) {
        f_ = &f;
        delta_ = delta;
        const int n = f.n, p = f.p, m = f.m;
        dim_ = n + p + m;
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(f.A.nonZeros() + f.G.nonZeros() + dim_ + 8 * m));
        for (int i = 0; i < n; ++i) t.emplace_back(i, i, delta);
        for (int i = 0; i < p; ++i) t.emplace_back(n + i, n + i, -delta);
        for (int k = 0; k < f.A.outerSize(); ++k)
            for (SpMat::InnerIterator it(f.A, k); it; ++it) t.emplace_back(n + it.row(), it.col(), it.value());
        for (int k = 0; k < f.G.outerSize(); ++k)
            for (SpMat::InnerIterator it(f.G, k); it; ++it) t.emplace_back(n + p + it.row(), it.col(), it.value());
        w2_entries_.clear();
        for (const auto& b : f.blocks) {
            if (b.kind == SlackBlock::NonNeg) {
                for (int i = 0; i < b.dim; ++i) w2_entries_.push_back({b.offset + i, b.offset + i});
            } else {
                for (int j = 0; j < b.dim; ++j)
                    for (int i = j; i < b.dim; ++i) w2_entries_.push_back({b.offset + i, b.offset + j});
            }
        }
        for (const auto& e : w2_entries_) t.emplace_back(n + p + e.row, n + p + e.col, -1.0);
        K_.resize(dim_, dim_);
        K_.setFromTriplets(t.begin(), t.end());
        K_.makeCompressed();
        w2_pos_.clear();
        for (const auto& e : w2_entries_) w2_pos_.push_back(&K_.coeffRef(n + p + e.row, n + p + e.col) - K_.valuePtr());
        std::vector<int> signs(static_cast<std::size_t>(dim_), -1);
        std::fill(signs.begin(), signs.begin() + n, 1);
        ldl_.analyze(K_, std::move(signs));
    }

    bool factor(const NTScaling& W) {
        const auto& f = *f_;
        std::size_t idx = 0;
        for (std::size_t k = 0; k < f.blocks.size(); ++k) {
            const auto& b = f.blocks[k];
            if (b.kind == SlackBlock::NonNeg) {
                const Vec& w = W.block(k).w;
                for (int i = 0; i < b.dim; ++i) K_.valuePtr()[w2_pos_[idx++]] = -w(i) * w(i);
            } else {
                const Eigen::MatrixXd w2 = W.block_w2(k);
                for (int j = 0; j < b.dim; ++j)
                    for (int i = j; i < b.dim; ++i)
                        K_.valuePtr()[w2_pos_[idx++]] = -w2(i, j);
            }
        }
        W_ = &W;
        return ldl_.factor(K_.valuePtr()) >= 0;
    }

    /// Solves the unregularized system, keeping the best refinement iterate.
    /// Returns false only if no finite solution was produced.
    bool solve(const Vec& rhs, Vec& sol) const {
        sol = rhs;
        ldl_.solve(sol);
        if (!sol.allFinite()) return false;
        const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
        Vec r = rhs - multiply(sol);
        double err = r.lpNorm<Eigen::Infinity>();
        for (int it = 0; it < 30 && err > 1e-14 * scale; ++it) {
            ldl_.solve(r);
            Vec cand = sol + r;
            Vec rc = rhs - multiply(cand);
            const double ec = rc.lpNorm<Eigen::Infinity>();
                if (!(ec < 0.9 * err)) {
                if (ec < err) sol = std::move(cand);
                break;
            }
            sol = std::move(cand);
            r = std::move(rc);
            err = ec;
        }
        return true;
    }

private:
    Vec multiply(const Vec& v) const {
        const auto& f = *f_;
        const int n = f.n, p = f.p, m = f.m;
        Vec out(dim_);
        auto vx = v.head(n);
        auto vy = v.segment(n, p);
        Vec vz = v.tail(m);
        out.head(n) = f.At * vy + f.Gt * vz;
        out.segment(n, p) = f.A * vx;
        Vec w2z;
        W_->apply_w2(vz, w2z);
        out.tail(m) = f.G * vx - w2z;
        return out;
    }

    struct Entry {
        int row, col;
    };
    const ConeForm* f_ = nullptr;
    const NTScaling* W_ = nullptr;
    double delta_ = 1e-10;
    int dim_ = 0;
    SpMat K_;
    std::vector<Entry> w2_entries_;
    std::vector<std::ptrdiff_t> w2_pos_;
    QuasiDefiniteLdl ldl_;
};

/// Column scales that map every cone onto itself: per entry for free and
/// orthant columns, one scalar per Lorentz block, (a, b, sqrt(ab)) for rotated
/// blocks. Entries below 1 are left alone.
inline Vec automorphism_scales(const ConicProgram& p, const Vec& x) {
    Vec D = Vec::Ones(p.num_cols());
    int off = 0;
    for (const auto& c : p.cone_spec) {
        switch (c.kind) {
            case ConeKind::Free:
            case ConeKind::NonNeg:
                for (int i = 0; i < c.dim; ++i) D(off + i) = std::max(1.0, std::abs(x(off + i)));
                break;
            case ConeKind::SOC: D.segment(off, c.dim).setConstant(std::max(1.0, std::abs(x(off)))); break;
            case ConeKind::RotatedSOC: {
                const double a = std::max(1.0, std::abs(x(off))), b = std::max(1.0, std::abs(x(off + 1)));
                D(off) = a;
                D(off + 1) = b;
                D.segment(off + 2, c.dim - 2).setConstant(std::sqrt(a * b));
                break;
            }
        }
        off += c.dim;
    }
    return D;
}

/// Walks an optimal LP point to a vertex of the optimal face: while the
/// columns of the free and positive variables (plus the cost row) are
/// dependent, step along a kernel direction until a positive variable hits
/// zero. Leaves x untouched if the cleaned vertex fails the checks.
inline void purify_lp(const ConicProgram& p, Vec& x) {
    const int n = p.num_cols();
    std::vector<char> free(static_cast<std::size_t>(n), 0);
    int off = 0;
    for (const auto& c : p.cone_spec) {
        if (c.kind != ConeKind::Free && c.kind != ConeKind::NonNeg) return;
        if (c.kind == ConeKind::Free) std::fill(free.begin() + off, free.begin() + off + c.dim, 1);
        off += c.dim;
    }
    const Eigen::MatrixXd A = Eigen::MatrixXd(p.equality_A);
    const double zero_tol = 1e-9 * (1.0 + x.lpNorm<Eigen::Infinity>());
    Vec y = x;
    auto support = [&] {
        std::vector<int> B;
        for (int j = 0; j < n; ++j)
            if (free[j] || y(j) > zero_tol) B.push_back(j);
        return B;
    };
    for (int guard = 0; guard < n; ++guard) {
        const std::vector<int> B = support();
        const int nb = static_cast<int>(B.size());
        Eigen::MatrixXd M(A.rows() + 1, nb);
        for (int k = 0; k < nb; ++k) {
            M.col(k).head(A.rows()) = A.col(B[k]);
            M(A.rows(), k) = p.objective_c(B[k]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        lu.setThreshold(1e-10);
        if (lu.rank() == nb) break;
        // push the smallest positive orthant entry to zero along the kernel
        // direction nearest to -e_k, as a crossover push to the closer bound would
        const Eigen::MatrixXd K = lu.kernel();
        const Eigen::MatrixXd Q = K.householderQr().householderQ() * Eigen::MatrixXd::Identity(nb, K.cols());
        int pick = -1;
        for (int k = 0; k < nb; ++k) {
            if (free[B[k]] || Q.row(k).norm() < 1e-8) continue;
            if (pick < 0 || y(B[k]) < y(B[pick])) pick = k;
        }
        if (pick < 0) return;  // dependency among free columns only
        const Vec v = -(Q * Q.row(pick).transpose());
        int hit = -1;
        double a = std::numeric_limits<double>::infinity();
        const double vtol = 1e-12 * v.lpNorm<Eigen::Infinity>();
        for (int k = 0; k < nb; ++k) {
            if (free[B[k]] || v(k) >= -vtol) continue;
            if (y(B[k]) / -v(k) < a) {
                a = y(B[k]) / -v(k);
                hit = k;
            }
        }
        for (int k = 0; k < nb; ++k) y(B[k]) += a * v(k);
        y(B[hit]) = 0.0;
    }
    // clean up on the final support
    const std::vector<int> B = support();
    Eigen::MatrixXd AB(A.rows(), static_cast<Eigen::Index>(B.size()));
    for (std::size_t k = 0; k < B.size(); ++k) AB.col(static_cast<Eigen::Index>(k)) = A.col(B[k]);
    const Vec xb = AB.colPivHouseholderQr().solve(p.equality_b);
    Vec z = Vec::Zero(n);
    for (std::size_t k = 0; k < B.size(); ++k) z(B[k]) = xb(static_cast<Eigen::Index>(k));
    const double bn = 1.0 + p.equality_b.lpNorm<Eigen::Infinity>();
    if (!z.allFinite() || (p.equality_A * z - p.equality_b).lpNorm<Eigen::Infinity>() > 1e-9 * bn) return;
    for (int j = 0; j < n; ++j)
        if (!free[j] && z(j) < -1e-9 * bn) return;
    const double c0 = p.objective_c.dot(x);
    if (std::abs(p.objective_c.dot(z) - c0) > 1e-9 * (1.0 + std::abs(c0))) return;
    for (int j = 0; j < n; ++j)
        if (!free[j]) z(j) = std::max(z(j), 0.0);
    x = std::move(z);
}

/// Moves v into the interior: v + (1 + a) e when a = -min eigenvalue >= 0.
inline void shift_into_cone(const std::vector<SlackBlock>& blocks, Vec& v) {
    if (blocks.empty()) return;
    const double a = -min_cone_eig(blocks, v);
    if (a >= 0.0) v += (1.0 + a) * cone_unit(blocks, static_cast<int>(v.size()));
}

}  // namespace detail

/// Seam for swapping in an external conic solver.
class ConicSolver {
public:
    virtual ~ConicSolver() = default;
    virtual SolveResult solve(const ConicProgram& program, const SolveSettings& settings) const = 0;
    virtual std::string name() const = 0;
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
/// Mehrotra predictor-corrector steps.
class EmbeddedSolver final : public ConicSolver {
public:
    std::string name() const override { return "embedded-hsd"; }

    SolveResult solve(const ConicProgram& program, const SolveSettings& settings) const override {
        settings.validate();
        if (auto errs = check_structure(program); !errs.empty())
            throw std::invalid_argument("malformed conic program: " + errs.front());
        SolveResult res = solve_rescaled(program, settings);
        if (res.status == SolveStatus::Optimal && settings.vertex_solution) {
            detail::purify_lp(program, res.primal_x);
            res.objective_primal = program.objective_c.dot(res.primal_x);
        }
        return res;
    }

private:
    SolveResult solve_rescaled(const ConicProgram& program, const SolveSettings& settings) const {
        detail::Vec est;
        SolveResult res = solve_once(program, settings, est);
        // Rescale columns by a cone automorphism taken from the best primal
        // estimate and solve again. Infeasibility verdicts are only revisited
        // when the estimate is large.
        const double big = 100.0 * std::max(1.0, program.equality_b.lpNorm<Eigen::Infinity>());
        for (int round = 0; round < 3; ++round) {
            if (res.status == SolveStatus::Optimal || res.status == SolveStatus::DualInfeasible) break;
            if (est.size() != program.num_cols() || !est.allFinite()) break;
            if (res.status == SolveStatus::PrimalInfeasible && est.lpNorm<Eigen::Infinity>() <= big) break;
            const detail::Vec D = detail::automorphism_scales(program, est);
            if (D.maxCoeff() <= 2.0) break;
            ConicProgram q = program;
            q.equality_A = program.equality_A * D.asDiagonal();
            q.objective_c = D.cwiseProduct(program.objective_c);
            const double sig = std::max(1.0, q.objective_c.lpNorm<Eigen::Infinity>());
            q.objective_c /= sig;
            detail::Vec est2;
            SolveResult r = solve_once(q, settings, est2);
            est = est2.size() ? detail::Vec(D.cwiseProduct(est2)) : detail::Vec();
            if (r.status != SolveStatus::Optimal) continue;
            r.primal_x = D.cwiseProduct(r.primal_x);
            r.dual_y *= sig;
            r.dual_slack_s = sig * r.dual_slack_s.cwiseQuotient(D);
            r.objective_primal *= sig;
            r.objective_dual *= sig;
            r.iterations += res.iterations;
            return r;
        }
        return res;
    }

    SolveResult solve_once(const ConicProgram& program, const SolveSettings& settings, detail::Vec& estimate) const {
        using detail::Vec;

        detail::ConeForm f = detail::to_cone_form(program);
        const detail::Equilibration eq = detail::equilibrate(f);
        // map scaled iterates back to the caller's program
        auto orig_x = [&](const Vec& xs, double r) -> Vec { return eq.d.cwiseProduct(xs) / r; };
        auto orig_y = [&](const Vec& ys, double r) -> Vec { return -eq.ea.cwiseProduct(ys) / r; };
        auto orig_s = [&](const Vec& zs, double r) -> Vec { return -(f.Gt * zs).cwiseQuotient(eq.d) / r; };
        const int n = f.n, p = f.p, m = f.m;
        const auto& blocks = f.blocks;
        const int degree = detail::cone_degree(blocks);

        detail::NTScaling W;
        detail::KktSystem kkt;
        kkt.setup(f, settings.static_regularization);

        SolveResult res;
        const Vec e = detail::cone_unit(blocks, m);

        // Initial point from two least-squares-like solves with W = I.
        W.compute(blocks, e, e);
        if (!kkt.factor(W)) return res;
        Vec rhs(n + p + m), sol;
        rhs << Vec::Zero(n), f.b, f.h;
        if (!kkt.solve(rhs, sol)) return res;
        Vec x = sol.head(n);
        Vec s = -sol.tail(m);
        detail::shift_into_cone(blocks, s);
        rhs << -f.c, Vec::Zero(p), Vec::Zero(m);
        if (!kkt.solve(rhs, sol)) return res;
        Vec y = sol.segment(n, p);
        Vec z = sol.tail(m);
        detail::shift_into_cone(blocks, z);
        double tau = 1.0, kappa = 1.0;

        const double nb = std::max(1.0, f.b.norm());
        const double nh = std::max(1.0, f.h.norm());
        const double nc = std::max(1.0, f.c.norm());

        if (settings.iteration_log) *settings.iteration_log << "iteration,mu,pres,dres,gap,tau,kappa,step\n";

        double step = 0.0;
        double best_pres = std::numeric_limits<double>::infinity();
        for (int iter = 0;; ++iter) {
            res.iterations = iter;
            // residuals of the embedding
            const Vec aty_gtz = f.At * y + f.Gt * z;
            const Vec rx = aty_gtz + tau * f.c;
            const Vec ry = f.A * x - tau * f.b;
            const Vec gx = f.G * x;
            const Vec rz = s + gx - tau * f.h;
            const double cx = f.c.dot(x), by = f.b.dot(y), hz = f.h.dot(z);
            const double rt = kappa + cx + by + hz;

            const double mu = (s.dot(z) + tau * kappa) / (degree + 1);
            const double pcost = cx / tau;
            const double dcost = -(by + hz) / tau;
            const double pres = std::max(ry.norm() / nb, rz.norm() / nh) / tau;
            const double dres = rx.norm() / nc / tau;
            const double gap = s.dot(z) / (tau * tau);
            const double scale = std::max(std::abs(pcost), std::abs(dcost));
            const double relgap = scale > 0.0 ? gap / scale : std::numeric_limits<double>::infinity();
            res.residuals = {pres, dres, gap};
            if (iter > 0 && pres < best_pres && tau > 0.0) {
                best_pres = pres;
                estimate = orig_x(x, tau);
            }

            if (settings.iteration_log)
                *settings.iteration_log << iter << ',' << mu << ',' << pres << ',' << dres << ',' << gap << ','
                                        << tau << ',' << kappa << ',' << step << '\n';

            if (pres < settings.feas_tol && dres < settings.feas_tol &&
                (gap < settings.gap_tol || relgap < settings.gap_tol)) {
                res.status = SolveStatus::Optimal;
                res.primal_x = orig_x(x, tau);
                res.dual_y = orig_y(y, tau);
                res.dual_slack_s = orig_s(z, tau);
                res.objective_primal = pcost;
                res.objective_dual = dcost;
                return res;
            }
            if (by + hz < 0.0 && kappa > tau) {
                const double ray = -(by + hz);
                const double pinf = aty_gtz.norm() / ray;
                if (pinf < settings.infeas_cert_tol) {
                    res.status = SolveStatus::PrimalInfeasible;
                    res.dual_y = orig_y(y, ray);
                    res.dual_slack_s = orig_s(z, ray);
                    res.residuals = {std::numeric_limits<double>::infinity(), pinf, std::numeric_limits<double>::infinity()};
                    return res;
                }
            }
            if (cx < 0.0 && kappa > tau) {
                const double dinf = std::max((f.A * x).norm(), (gx + s).norm()) / (-cx);
                if (dinf < settings.infeas_cert_tol) {
                    res.status = SolveStatus::DualInfeasible;
                    res.primal_x = orig_x(x, -cx);
                    res.residuals = {dinf, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
                    return res;
                }
            }
            if (iter >= settings.max_iterations || !std::isfinite(mu)) break;

            W.compute(blocks, s, z);
            if (!kkt.factor(W)) break;
            const Vec& lambda = W.lambda();

            // direction for the tau column
            Vec rhs1(n + p + m), u1;
            rhs1 << -f.c, f.b, f.h;
            if (!kkt.solve(rhs1, u1)) break;
            const double denom_base = f.c.dot(u1.head(n)) + f.b.dot(u1.segment(n, p)) + f.h.dot(u1.tail(m));

            struct Dir {
                Vec dx, dy, dz, ds;
                double dtau = 0.0, dkappa = 0.0;
            };
            auto direction = [&](double sigma, const Vec& ds_target, double dk_target, Dir& d) -> bool {
                const Vec lds = detail::jordan_divide(blocks, lambda, ds_target);
                Vec wl;
                W.apply(lds, wl);  // W symmetric, so W' = W
                Vec rhs2(n + p + m), u2;
                rhs2 << -(1.0 - sigma) * rx, -(1.0 - sigma) * ry, -(1.0 - sigma) * rz - wl;
                if (!kkt.solve(rhs2, u2)) return false;
                const double num = -(1.0 - sigma) * rt - dk_target / tau -
                                   (f.c.dot(u2.head(n)) + f.b.dot(u2.segment(n, p)) + f.h.dot(u2.tail(m)));
                const double den = denom_base - kappa / tau;
                d.dtau = num / den;
                Vec u = u2 + d.dtau * u1;
                d.dx = u.head(n);
                d.dy = u.segment(n, p);
                d.dz = u.tail(m);
                // two algebraically equal forms of ds: the slack equation keeps rz
                // contracting exactly, the scaled form keeps centrality; take the one
                // allowing the longer step
                d.ds = -(1.0 - sigma) * rz - f.G * d.dx + d.dtau * f.h;
                Vec wdz, tmp, ds_alt;
                W.apply(d.dz, wdz);
                tmp = lds - wdz;
                W.apply(tmp, ds_alt);
                if (detail::max_step(blocks, s, ds_alt, 1.0) > detail::max_step(blocks, s, d.ds, 1.0) + 0.1)
                    d.ds = std::move(ds_alt);
                d.dkappa = (dk_target - kappa * d.dtau) / tau;
                return d.dx.allFinite() && std::isfinite(d.dtau);
            };
            auto step_length = [&](const Dir& d, double cap) {
                double a = cap;
                a = std::min(a, detail::max_step(blocks, s, d.ds, a));
                a = std::min(a, detail::max_step(blocks, z, d.dz, a));
                if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
                if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
                return a;
            };

            // predictor
            Dir aff;
            const Vec ll = detail::jordan_product(blocks, lambda, lambda);
            if (!direction(0.0, -ll, -tau * kappa, aff)) break;
            const double a_aff = step_length(aff, 1.0);
            const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 0.0, 1.0);

            // corrector
            Vec winv_ds, w_dz;
            W.apply_inverse(aff.ds, winv_ds);
            W.apply(aff.dz, w_dz);
            const Vec target = -ll + sigma * mu * e - detail::jordan_product(blocks, winv_ds, w_dz);
            const double kt = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
            Dir d;
            if (!direction(sigma, target, kt, d)) break;
            double a_max = step_length(d, 1.0 / 0.99);
            if (a_max < 0.1) {
                // stalled: fall back to a pure centering step
                Dir c;
                if (direction(1.0, -ll + mu * e, -tau * kappa + mu, c)) {
                    const double a_c = step_length(c, 1.0 / 0.99);
                    if (a_c > a_max) {
                        d = std::move(c);
                        a_max = a_c;
                    }
                }
            }
            step = std::min(1.0, 0.99 * a_max);
            if (!(step > 1e-10)) break;

            x += step * d.dx;
            y += step * d.dy;
            z += step * d.dz;
            s += step * d.ds;
            tau += step * d.dtau;
            kappa += step * d.dkappa;

            // keep the iterate scale bounded; the embedding is homogeneous
            const double nrm = std::max({tau, kappa, 1.0});
            if (nrm > 1e8 || tau < 1e-8) {
                const double r = 1.0 / (tau + kappa);
                x *= r;
                y *= r;
                z *= r;
                s *= r;
                tau *= r;
                kappa *= r;
            }
        }
        res.status = SolveStatus::NumericalLimit;
        res.primal_x = orig_x(x, tau);
        res.dual_y = orig_y(y, tau);
        res.dual_slack_s = orig_s(z, tau);
        res.objective_primal = f.c.dot(x) / tau;
        res.objective_dual = -(f.b.dot(y) + f.h.dot(z)) / tau;
        return res;
    }
};

inline SolveResult solve(const ConicProgram& program, const SolveSettings& settings = {}) {
    return EmbeddedSolver{}.solve(program, settings);
}

// ---------------------------------------------------------------------------
// Independent certificate audit.

namespace detail {

/// Distance-like violation of v in the cone (0 when inside).
inline double cone_violation(const Cone& cone, const Vec& v, int off, bool dual) {
    switch (cone.kind) {
        case ConeKind::Free: {
            // dual cone of a free block is {0}
            return dual ? v.segment(off, cone.dim).lpNorm<Eigen::Infinity>() : 0.0;
        }
        case ConeKind::NonNeg: return std::max(0.0, -v.segment(off, cone.dim).minCoeff());
        case ConeKind::SOC: {
            const double t = v(off);
            return std::max(0.0, v.segment(off + 1, cone.dim - 1).norm() - t);
        }
        case ConeKind::RotatedSOC: {
            // primal ||u||^2 <= v w  <=>  ||(2u, v - w)|| <= v + w
            // dual   ||u||^2 <= 4 v w <=>  ||(u, v - w)||  <= v + w
            const double a = v(off), b = v(off + 1);
            const double un = v.segment(off + 2, cone.dim - 2).norm();
            const double lhs = std::hypot(dual ? un : 2.0 * un, a - b);
            return std::max(0.0, lhs - (a + b));
        }
    }
    return 0.0;
}

inline double total_cone_violation(const ConicProgram& p, const Vec& v, bool dual) {
    double worst = 0.0;
    int off = 0;
    for (const auto& c : p.cone_spec) {
        worst = std::max(worst, cone_violation(c, v, off, dual));
        off += c.dim;
    }
    return worst;
}

}  // namespace detail

/// Re-verifies an Optimal or PrimalInfeasible result from scratch: primal and
/// dual feasibility plus the duality gap, or the Farkas conditions. Farkas
/// checks are normalized by b'y, so any positive scaling of the ray passes.
inline bool check_certificate(const ConicProgram& p, const SolveResult& r, double tol = 1e-6) {
    using detail::Vec;
    const int n = p.num_cols(), m = p.num_rows();
    if (r.status == SolveStatus::Optimal) {
        if (r.primal_x.size() != n || r.dual_y.size() != m || r.dual_slack_s.size() != n) return false;
        const Vec& x = r.primal_x;
        const Vec& y = r.dual_y;
        const Vec& s = r.dual_slack_s;
        const Eigen::SparseMatrix<double> absA = p.equality_A.cwiseAbs();
        // residuals against the size of the terms that cancel in them
        const double pinf = (p.equality_A * x - p.equality_b).lpNorm<Eigen::Infinity>();
        const double pscale = std::max(p.equality_b.lpNorm<Eigen::Infinity>(), (absA * x.cwiseAbs()).lpNorm<Eigen::Infinity>());
        if (pinf > tol * (1.0 + pscale)) return false;
        if (detail::total_cone_violation(p, x, false) > tol * (1.0 + x.lpNorm<Eigen::Infinity>())) return false;
        const Vec dres = p.objective_c - p.equality_A.transpose() * y - s;
        const double dscale = std::max({p.objective_c.lpNorm<Eigen::Infinity>(),
                                        (absA.transpose() * y.cwiseAbs()).lpNorm<Eigen::Infinity>(),
                                        s.lpNorm<Eigen::Infinity>()});
        if (dres.lpNorm<Eigen::Infinity>() > tol * (1.0 + dscale)) return false;
        if (detail::total_cone_violation(p, s, true) > tol * (1.0 + s.lpNorm<Eigen::Infinity>())) return false;
        const double pobj = p.objective_c.dot(x);
        const double dobj = p.equality_b.dot(y);
        return std::abs(pobj - dobj) <= tol * (1.0 + std::abs(pobj));
    }
    if (r.status == SolveStatus::PrimalInfeasible) {
        if (r.dual_y.size() != m) return false;
        const double by = p.equality_b.dot(r.dual_y);
        if (!(by > 0.0)) return false;
        const Vec s = -(p.equality_A.transpose() * r.dual_y) / by;
        return detail::total_cone_violation(p, s, true) <= tol;
    }
    return false;
}

}  // namespace fairshed

#endif  // FAIRSHED_SOLVER_HPP
