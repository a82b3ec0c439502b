#ifndef FAIRSHED_DETAIL_LDL_HPP
#define FAIRSHED_DETAIL_LDL_HPP

#include <Eigen/Sparse>
#include <Eigen/OrderingMethods>

#include <cmath>
#include <utility>
#include <vector>

namespace fairshed::detail {

/// Sparse LDL' for quasi-definite matrices with a known sign pattern on D.
/// Pivots with the wrong sign or tiny magnitude are replaced by sign * dyn_delta.
class QuasiDefiniteLdl {
public:
    /// `lower` holds the lower triangle (diagonal included) in CSC form.
    void analyze(const Eigen::SparseMatrix<double>& lower, std::vector<int> signs) {
        const int n = static_cast<int>(lower.rows());
        n_ = n;
        signs_ = std::move(signs);

        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
        Eigen::AMDOrdering<int> amd;
        amd(lower.selfadjointView<Eigen::Lower>(), pinv);
        const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm = pinv.inverse();
        newpos_.assign(static_cast<std::size_t>(n), 0);
        oldpos_.assign(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
            newpos_[i] = perm.indices()[i];
            oldpos_[static_cast<std::size_t>(perm.indices()[i])] = i;
        }

        // permuted upper triangle in CSC, with a map from source value slots
        struct E {
            int row, col, src;
        };
        std::vector<E> es;
        es.reserve(static_cast<std::size_t>(lower.nonZeros()));
        for (int j = 0; j < lower.outerSize(); ++j) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(lower, j); it; ++it) {
                const int a = newpos_[static_cast<std::size_t>(it.row())];
                const int b = newpos_[j];
                es.push_back({std::min(a, b), std::max(a, b), static_cast<int>(&it.value() - lower.valuePtr())});
            }
        }
        Ap_.assign(static_cast<std::size_t>(n + 1), 0);
        for (const auto& e : es) ++Ap_[e.col + 1];
        for (int j = 0; j < n; ++j) Ap_[j + 1] += Ap_[j];
        Ai_.assign(es.size(), 0);
        src_.assign(es.size(), 0);
        std::vector<int> next(Ap_.begin(), Ap_.end() - 1);
        for (const auto& e : es) {
            const int slot = next[e.col]++;
            Ai_[slot] = e.row;
            src_[slot] = e.src;
        }
        Ax_.assign(es.size(), 0.0);

        // elimination tree and column counts
        etree_.assign(static_cast<std::size_t>(n), -1);
        std::vector<int> lnz(static_cast<std::size_t>(n), 0), work(static_cast<std::size_t>(n), -1);
        for (int j = 0; j < n; ++j) {
            work[j] = j;
            for (int q = Ap_[j]; q < Ap_[j + 1]; ++q) {
                int i = Ai_[q];
                while (i != -1 && i < j && work[i] != j) {
                    if (etree_[i] == -1) etree_[i] = j;
                    ++lnz[i];
                    work[i] = j;
                    i = etree_[i];
                }
            }
        }
        Lp_.assign(static_cast<std::size_t>(n + 1), 0);
        for (int i = 0; i < n; ++i) Lp_[i + 1] = Lp_[i] + lnz[i];
        Li_.assign(static_cast<std::size_t>(Lp_.back()), 0);
        Lx_.assign(static_cast<std::size_t>(Lp_.back()), 0.0);
        D_.assign(static_cast<std::size_t>(n), 0.0);
        Dinv_.assign(static_cast<std::size_t>(n), 0.0);
    }

    /// Numeric factorization from the value array of the matrix given to analyze().
    /// Returns the number of regularized pivots, or -1 on a non-finite pivot.
    int factor(const double* values, double dyn_eps = 1e-13, double dyn_delta = 7e-8) {
        const int n = n_;
        for (std::size_t q = 0; q < Ax_.size(); ++q) Ax_[q] = values[src_[q]];
        std::vector<double> y(static_cast<std::size_t>(n), 0.0);
        std::vector<char> mark(static_cast<std::size_t>(n), 0);
        std::vector<int> yidx(static_cast<std::size_t>(n)), buf(static_cast<std::size_t>(n));
        std::vector<int> nextcol(Lp_.begin(), Lp_.end() - 1);
        int bumped = 0;
        for (int k = 0; k < n; ++k) {
            double dk = 0.0;
            int nnzy = 0;
            for (int q = Ap_[k]; q < Ap_[k + 1]; ++q) {
                const int b = Ai_[q];
                if (b == k) {
                    dk += Ax_[q];
                    continue;
                }
                y[b] += Ax_[q];
                if (mark[b]) continue;
                int ne = 0;
                int i = b;
                while (i != -1 && i < k && !mark[i]) {
                    mark[i] = 1;
                    buf[ne++] = i;
                    i = etree_[i];
                }
                while (ne > 0) yidx[nnzy++] = buf[--ne];
            }
            for (int t = nnzy - 1; t >= 0; --t) {
                const int c = yidx[t];
                const int end = nextcol[c];
                const double yc = y[c];
                for (int j = Lp_[c]; j < end; ++j)
                    y[Li_[j]] -= Lx_[j] * yc;
                Li_[end] = k;
                const double l = yc * Dinv_[c];
                Lx_[end] = l;
                dk -= yc * l;
                ++nextcol[c];
                y[c] = 0.0;
                mark[c] = 0;
            }
            const int sg = signs_[oldpos_[k]];
            if (!std::isfinite(dk)) return -1;
            if (sg * dk <= dyn_eps) {
                dk = sg * dyn_delta;
                ++bumped;
            }
            D_[k] = dk;
            Dinv_[k] = 1.0 / dk;
        }
        return bumped;
    }

    /// Solves in place (vector in original ordering).
    void solve(Eigen::VectorXd& x) const {
        const int n = n_;
        std::vector<double> w(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) w[newpos_[i]] = x(i);
        for (int i = 0; i < n; ++i) {
            const double wi = w[i];
            for (int j = Lp_[i]; j < Lp_[i + 1]; ++j)
                w[Li_[j]] -= Lx_[j] * wi;
        }
        for (int i = 0; i < n; ++i) w[i] *= Dinv_[i];
        for (int i = n - 1; i >= 0; --i) {
            double acc = w[i];
            for (int j = Lp_[i]; j < Lp_[i + 1]; ++j)
                acc -= Lx_[j] * w[Li_[j]];
            w[i] = acc;
        }
        for (int i = 0; i < n; ++i) x(i) = w[newpos_[i]];
    }

    std::size_t factor_nonzeros() const { return Lx_.size(); }

private:
    int n_ = 0;
    std::vector<int> signs_, newpos_, oldpos_;
    std::vector<int> Ap_, Ai_, src_;
    std::vector<double> Ax_;
    std::vector<int> etree_, Lp_, Li_;
    std::vector<double> Lx_, D_, Dinv_;
};

}  // namespace fairshed::detail

#endif  // FAIRSHED_DETAIL_LDL_HPP
