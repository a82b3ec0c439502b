#ifndef FAIRSHED_DETAIL_CONES_HPP
#define FAIRSHED_DETAIL_CONES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fairshed::detail {

// Cone blocks of the slack vector s = h - Gx. Only the nonnegative orthant and
// the Lorentz cone appear here; rotated cones are mapped onto Lorentz cones by
// the caller.
struct SlackBlock {
    enum Kind { NonNeg, Lorentz } kind = NonNeg;
    int offset = 0;
    int dim = 0;
};

using Vec = Eigen::VectorXd;
using Seg = Eigen::Ref<Vec>;
using CSeg = Eigen::Ref<const Vec>;

inline int cone_degree(const std::vector<SlackBlock>& blocks) {
    int d = 0;
    for (const auto& b : blocks) d += b.kind == SlackBlock::NonNeg ? b.dim : 1;
    return d;
}

/// x0^2 - ||x1||^2
inline double jnorm2(CSeg x) { return x(0) * x(0) - x.tail(x.size() - 1).squaredNorm(); }

/// Nesterov-Todd scaling point for one block. For the orthant W = diag(w);
/// for a Lorentz block W = eta * Wbar with Wbar built from the unit-hyperbolic
/// vector wbar, so that W z = W^{-1} s = lambda.
struct BlockScaling {
    Vec w;      // NonNeg: diagonal of W
    double eta = 1.0;
    Vec wbar;   // Lorentz
};

class NTScaling {
public:
    void compute(const std::vector<SlackBlock>& blocks, const Vec& s, const Vec& z) {
        blocks_ = &blocks;
        scal_.resize(blocks.size());
        lambda_.resize(s.size());
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const auto& b = blocks[k];
            auto& sc = scal_[k];
            auto sb = s.segment(b.offset, b.dim);
            auto zb = z.segment(b.offset, b.dim);
            if (b.kind == SlackBlock::NonNeg) {
                sc.w = (sb.array() / zb.array()).sqrt();
                lambda_.segment(b.offset, b.dim) = (sb.array() * zb.array()).sqrt();
            } else {
                const double sres = std::sqrt(std::max(jnorm2(sb), 1e-300));
                const double zres = std::sqrt(std::max(jnorm2(zb), 1e-300));
                Vec sbar = sb / sres;
                Vec zbar = zb / zres;
                const double gamma = std::sqrt(std::max((1.0 + sbar.dot(zbar)) / 2.0, 1e-300));
                sc.wbar = sbar;
                sc.wbar(0) += zbar(0);
                sc.wbar.tail(b.dim - 1) -= zbar.tail(b.dim - 1);
                sc.wbar /= 2.0 * gamma;
                sc.eta = std::sqrt(sres / zres);
                Vec lam(b.dim);
                apply_block(k, zb, lam);
                lambda_.segment(b.offset, b.dim) = lam;
            }
        }
    }

    const Vec& lambda() const { return lambda_; }
    const BlockScaling& block(std::size_t k) const { return scal_[k]; }

    /// out = W v
    void apply(const Vec& v, Vec& out) const {
        out.resize(v.size());
        for (std::size_t k = 0; k < blocks_->size(); ++k) {
            const auto& b = (*blocks_)[k];
            Vec tmp(b.dim);
            apply_block(k, v.segment(b.offset, b.dim), tmp);
            out.segment(b.offset, b.dim) = tmp;
        }
    }

    /// out = W^{-1} v
    void apply_inverse(const Vec& v, Vec& out) const {
        out.resize(v.size());
        for (std::size_t k = 0; k < blocks_->size(); ++k) {
            const auto& b = (*blocks_)[k];
            const auto& sc = scal_[k];
            auto vb = v.segment(b.offset, b.dim);
            if (b.kind == SlackBlock::NonNeg) {
                out.segment(b.offset, b.dim) = vb.array() / sc.w.array();
            } else {
                // Wbar^{-1} = J Wbar J
                Vec jv = vb;
                jv.tail(b.dim - 1) *= -1.0;
                Vec tmp(b.dim);
                apply_bar(sc.wbar, jv, tmp);
                tmp.tail(b.dim - 1) *= -1.0;
                out.segment(b.offset, b.dim) = tmp / sc.eta;
            }
        }
    }

    /// Dense W^2 for block k (diagonal blocks are returned as full matrices).
    Eigen::MatrixXd block_w2(std::size_t k) const {
        const auto& b = (*blocks_)[k];
        const auto& sc = scal_[k];
        if (b.kind == SlackBlock::NonNeg) return sc.w.array().square().matrix().asDiagonal();
        // Wbar^2 = 2 wbar wbar' - J
        Eigen::MatrixXd m = 2.0 * sc.wbar * sc.wbar.transpose();
        m(0, 0) -= 1.0;
        for (int i = 1; i < b.dim; ++i) m(i, i) += 1.0;
        return sc.eta * sc.eta * m;
    }

    /// out = W^2 v
    void apply_w2(const Vec& v, Vec& out) const {
        out.resize(v.size());
        for (std::size_t k = 0; k < blocks_->size(); ++k) {
            const auto& b = (*blocks_)[k];
            const auto& sc = scal_[k];
            auto vb = v.segment(b.offset, b.dim);
            if (b.kind == SlackBlock::NonNeg) {
                out.segment(b.offset, b.dim) = sc.w.array().square() * vb.array();
            } else {
                const double wv = sc.wbar.dot(vb);
                Vec r = 2.0 * wv * sc.wbar;
                r(0) -= vb(0);
                r.tail(b.dim - 1) += vb.tail(b.dim - 1);
                out.segment(b.offset, b.dim) = sc.eta * sc.eta * r;
            }
        }
    }

private:
    static void apply_bar(const Vec& wbar, CSeg v, Vec& out) {
        const int q = static_cast<int>(v.size());
        const double w0 = wbar(0);
        const auto w1 = wbar.tail(q - 1);
        const double w1v1 = w1.dot(v.tail(q - 1));
        out(0) = w0 * v(0) + w1v1;
        out.tail(q - 1) = v.tail(q - 1) + (v(0) + w1v1 / (1.0 + w0)) * w1;
    }

    void apply_block(std::size_t k, CSeg v, Vec& out) const {
        const auto& b = (*blocks_)[k];
        const auto& sc = scal_[k];
        if (b.kind == SlackBlock::NonNeg) {
            out = sc.w.array() * v.array();
        } else {
            apply_bar(sc.wbar, v, out);
            out *= sc.eta;
        }
    }

    const std::vector<SlackBlock>* blocks_ = nullptr;
    std::vector<BlockScaling> scal_;
    Vec lambda_;
};

/// Jordan product u o v.
inline Vec jordan_product(const std::vector<SlackBlock>& blocks, const Vec& u, const Vec& v) {
    Vec out(u.size());
    for (const auto& b : blocks) {
        auto ub = u.segment(b.offset, b.dim);
        auto vb = v.segment(b.offset, b.dim);
        if (b.kind == SlackBlock::NonNeg) {
            out.segment(b.offset, b.dim) = ub.array() * vb.array();
        } else {
            out(b.offset) = ub.dot(vb);
            out.segment(b.offset + 1, b.dim - 1) = ub(0) * vb.tail(b.dim - 1) + vb(0) * ub.tail(b.dim - 1);
        }
    }
    return out;
}

/// Solves lambda o x = d for x.
inline Vec jordan_divide(const std::vector<SlackBlock>& blocks, const Vec& lambda, const Vec& d) {
    Vec out(d.size());
    for (const auto& b : blocks) {
        auto lb = lambda.segment(b.offset, b.dim);
        auto db = d.segment(b.offset, b.dim);
        if (b.kind == SlackBlock::NonNeg) {
            out.segment(b.offset, b.dim) = db.array() / lb.array();
        } else {
            const double l0 = lb(0);
            const auto l1 = lb.tail(b.dim - 1);
            const double det = l0 * l0 - l1.squaredNorm();
            const double x0 = (l0 * db(0) - l1.dot(db.tail(b.dim - 1))) / det;
            out(b.offset) = x0;
            out.segment(b.offset + 1, b.dim - 1) = (db.tail(b.dim - 1) - x0 * l1) / l0;
        }
    }
    return out;
}

/// Identity element of the cone product.
inline Vec cone_unit(const std::vector<SlackBlock>& blocks, int m) {
    Vec e = Vec::Zero(m);
    for (const auto& b : blocks) {
        if (b.kind == SlackBlock::NonNeg)
            e.segment(b.offset, b.dim).setOnes();
        else
            e(b.offset) = 1.0;
    }
    return e;
}

/// Smallest "eigenvalue" of x over all blocks (x is interior iff > 0).
inline double min_cone_eig(const std::vector<SlackBlock>& blocks, const Vec& x) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) {
        auto xb = x.segment(b.offset, b.dim);
        if (b.kind == SlackBlock::NonNeg)
            m = std::min(m, xb.minCoeff());
        else
            m = std::min(m, xb(0) - xb.tail(b.dim - 1).norm());
    }
    return m;
}

/// Largest alpha such that x + alpha dx stays in the cone (x interior), capped at `cap`.
inline double max_step(const std::vector<SlackBlock>& blocks, const Vec& x, const Vec& dx, double cap) {
    double alpha = cap;
    for (const auto& b : blocks) {
        auto xb = x.segment(b.offset, b.dim);
        auto db = dx.segment(b.offset, b.dim);
        if (b.kind == SlackBlock::NonNeg) {
            for (int i = 0; i < b.dim; ++i)
                if (db(i) < 0.0) alpha = std::min(alpha, -xb(i) / db(i));
        } else {
            const int q = b.dim;
            const double xn2 = jnorm2(xb);
            if (!(xn2 > 0.0)) return 0.0;
            const double xn = std::sqrt(xn2);
            Vec xbar = xb / xn;
            const double xbar_d = xbar(0) * db(0) - xbar.tail(q - 1).dot(db.tail(q - 1));
            const double rho0 = xbar_d / xn;
            const double factor = (xbar_d + db(0)) / (xbar(0) + 1.0);
            const double rho1n = ((db.tail(q - 1) - factor * xbar.tail(q - 1)) / xn).norm();
            const double rnorm = rho1n - rho0;
            if (rnorm > 0.0) alpha = std::min(alpha, 1.0 / rnorm);
        }
    }
    return alpha;
}

}  // namespace fairshed::detail

#endif  // FAIRSHED_DETAIL_CONES_HPP
