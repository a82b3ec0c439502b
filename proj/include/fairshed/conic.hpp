#ifndef FAIRSHED_CONIC_HPP
#define FAIRSHED_CONIC_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace fairshed {

enum class ConeKind { Free, NonNeg, SOC, RotatedSOC };

/// One block of consecutive columns.
///  - SOC(dim):        (t, x) with ||x||_2 <= t
///  - RotatedSOC(dim): (v, w, u) with ||u||_2^2 <= v*w, v, w >= 0
struct Cone {
    ConeKind kind = ConeKind::Free;
    int dim = 0;

    friend bool operator==(const Cone&, const Cone&) = default;
};

inline const char* cone_name(ConeKind k) {
    switch (k) {
        case ConeKind::Free: return "free";
        case ConeKind::NonNeg: return "nonneg";
        case ConeKind::SOC: return "soc";
        case ConeKind::RotatedSOC: return "rsoc";
    }
    return "?";
}

/// minimize c'x subject to A x = b, x in K_1 x K_2 x ... (cones cover the columns in order).
struct ConicProgram {
    Eigen::VectorXd objective_c;
    Eigen::SparseMatrix<double> equality_A;
    Eigen::VectorXd equality_b;
    std::vector<Cone> cone_spec;
    std::map<std::string, int> var_index;

    // Load-shed bookkeeping filled by the MLS builders.
    std::vector<int> shed_columns;
    std::vector<double> shed_upper;

    int num_cols() const { return static_cast<int>(objective_c.size()); }
    int num_rows() const { return static_cast<int>(equality_b.size()); }

    int column(const std::string& name) const {
        auto it = var_index.find(name);
        if (it == var_index.end()) throw std::out_of_range("no variable named '" + name + "'");
        return it->second;
    }
};

/// Structural problems in a program; empty when well formed.
inline std::vector<std::string> check_structure(const ConicProgram& p) {
    std::vector<std::string> out;
    long total = 0;
    for (const auto& c : p.cone_spec) {
        if (c.dim < 1) out.push_back("cone with non-positive dimension");
        if (c.kind == ConeKind::SOC && c.dim < 2) out.push_back("SOC dimension must be >= 2");
        if (c.kind == ConeKind::RotatedSOC && c.dim < 3) out.push_back("RotatedSOC dimension must be >= 3");
        total += c.dim;
    }
    if (total != p.objective_c.size()) out.push_back("cone dimensions do not cover the columns");
    if (p.equality_A.cols() != p.objective_c.size()) out.push_back("A column count differs from length of c");
    if (p.equality_A.rows() != p.equality_b.size()) out.push_back("A row count differs from length of b");
    std::vector<int> cols;
    for (const auto& [name, col] : p.var_index) {
        if (col < 0 || col >= p.objective_c.size()) out.push_back("var_index entry '" + name + "' out of range");
        cols.push_back(col);
    }
    std::sort(cols.begin(), cols.end());
    if (std::adjacent_find(cols.begin(), cols.end()) != cols.end()) out.push_back("var_index is not injective");
    return out;
}

/// Triplet-based assembly; columns are allocated one cone block at a time.
class ProgramBuilder {
public:
    ProgramBuilder() = default;

    explicit ProgramBuilder(const ConicProgram& p)
        : c_(p.objective_c.data(), p.objective_c.data() + p.objective_c.size()),
          b_(p.equality_b.data(), p.equality_b.data() + p.equality_b.size()),
          cones_(p.cone_spec),
          names_(p.var_index),
          shed_cols_(p.shed_columns),
          shed_upper_(p.shed_upper) {
        for (int k = 0; k < p.equality_A.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(p.equality_A, k); it; ++it)
                trips_.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }

    /// Appends a cone block; returns its first column.
    int add_block(ConeKind kind, int dim) {
        const int first = static_cast<int>(c_.size());
        cones_.push_back({kind, dim});
        c_.resize(c_.size() + static_cast<std::size_t>(dim), 0.0);
        return first;
    }

    int add_var(ConeKind kind, const std::string& name = {}) {
        const int col = add_block(kind, 1);
        if (!name.empty()) name_column(name, col);
        return col;
    }

    void name_column(const std::string& name, int col) {
        if (!names_.emplace(name, col).second) throw std::logic_error("duplicate variable name " + name);
    }

    /// Adds the row sum(coef * x[col]) = rhs; returns its index.
    int add_row(std::initializer_list<std::pair<int, double>> terms, double rhs) {
        return add_row(std::vector<std::pair<int, double>>(terms), rhs);
    }

    int add_row(const std::vector<std::pair<int, double>>& terms, double rhs) {
        const int r = static_cast<int>(b_.size());
        b_.push_back(rhs);
        for (const auto& [col, v] : terms)
            if (v != 0.0) trips_.emplace_back(r, col, v);
        return r;
    }

    void set_cost(int col, double v) { c_[static_cast<std::size_t>(col)] = v; }
    void add_cost(int col, double v) { c_[static_cast<std::size_t>(col)] += v; }
    void clear_costs() { std::fill(c_.begin(), c_.end(), 0.0); }

    void set_shed(std::vector<int> cols, std::vector<double> upper) {
        shed_cols_ = std::move(cols);
        shed_upper_ = std::move(upper);
    }

    int num_cols() const { return static_cast<int>(c_.size()); }
    const std::vector<int>& shed_columns() const { return shed_cols_; }

    ConicProgram build() const {
        ConicProgram p;
        const auto n = static_cast<Eigen::Index>(c_.size());
        const auto m = static_cast<Eigen::Index>(b_.size());
        p.objective_c = Eigen::Map<const Eigen::VectorXd>(c_.data(), n);
        p.equality_b = Eigen::Map<const Eigen::VectorXd>(b_.data(), m);
        p.equality_A.resize(m, n);
        p.equality_A.setFromTriplets(trips_.begin(), trips_.end());
        p.equality_A.makeCompressed();
        p.cone_spec = cones_;
        p.var_index = names_;
        p.shed_columns = shed_cols_;
        p.shed_upper = shed_upper_;
        return p;
    }

private:
    std::vector<double> c_;
    std::vector<double> b_;
    std::vector<Eigen::Triplet<double>> trips_;
    std::vector<Cone> cones_;
    std::map<std::string, int> names_;
    std::vector<int> shed_cols_;
    std::vector<double> shed_upper_;
};

// ---------------------------------------------------------------------------
// Power epigraph gadget: t >= d^p for d >= 0 via a tower of rotated cones.

/// A leaf or internal value of the geometric-mean tower.
struct GadgetTerm {
    enum Kind { T, One, D, Node } kind = One;
    int node = -1;  // valid when kind == Node

    friend bool operator==(const GadgetTerm&, const GadgetTerm&) = default;
};

/// out^2 <= left * right, with out a fresh node (or the input d at the root).
struct GadgetCone {
    GadgetTerm left, right;
    GadgetTerm out;
};

struct PowerGadget {
    int p = 0;
    int levels = 0;                // ceil(log2 p)
    std::vector<GadgetTerm> leaves;  // 2^levels terms: t, (p-1) ones, (2^levels - p) copies of d
    std::vector<GadgetCone> cones;   // bottom-up; the last one has out == D
    int aux_count = 0;             // internal node variables
};

/// Builds the tower for d <= geomean(leaves), i.e. d^p <= t. Pairs of identical
/// operands (1,1) or (d,d) are folded since sqrt(x*x) = x.
inline PowerGadget power_epigraph(int p) {
    if (p < 2) throw std::invalid_argument("power_epigraph requires p >= 2");
    PowerGadget g;
    g.p = p;
    while ((1 << g.levels) < p) ++g.levels;
    const int width = 1 << g.levels;
    g.leaves.push_back({GadgetTerm::T});
    for (int i = 0; i < p - 1; ++i) g.leaves.push_back({GadgetTerm::One});
    for (int i = 0; i < width - p; ++i) g.leaves.push_back({GadgetTerm::D});

    std::vector<GadgetTerm> level = g.leaves;
    while (level.size() > 1) {
        std::vector<GadgetTerm> up;
        const bool root = level.size() == 2;
        for (std::size_t i = 0; i < level.size(); i += 2) {
            const auto& a = level[i];
            const auto& b = level[i + 1];
            if (!root && a == b && (a.kind == GadgetTerm::One || a.kind == GadgetTerm::D)) {
                up.push_back(a);
                continue;
            }
            GadgetCone c{a, b, {}};
            if (root) {
                c.out = {GadgetTerm::D};
            } else {
                c.out = {GadgetTerm::Node, g.aux_count++};
            }
            g.cones.push_back(c);
            up.push_back(c.out);
        }
        level = std::move(up);
    }
    return g;
}

/// Instantiates the gadget: every cone gets its own RotatedSOC(3) block
/// (v, w, u) tied to `t_col`, the constant 1, earlier nodes, and the input
/// `scale * d_col` through equality rows. Returns the root cone's first column.
inline int append_power_epigraph(ProgramBuilder& pb, const PowerGadget& g, int t_col, int d_col, double scale,
                                 const std::string& tag = {}) {
    std::vector<int> node_col(static_cast<std::size_t>(g.aux_count), -1);
    int root_first = -1;
    auto bind = [&](int col, const GadgetTerm& term) {
        switch (term.kind) {
            case GadgetTerm::T: pb.add_row({{col, 1.0}, {t_col, -1.0}}, 0.0); break;
            case GadgetTerm::One: pb.add_row({{col, 1.0}}, 1.0); break;
            case GadgetTerm::D: pb.add_row({{col, 1.0}, {d_col, -scale}}, 0.0); break;
            case GadgetTerm::Node: pb.add_row({{col, 1.0}, {node_col[static_cast<std::size_t>(term.node)], -1.0}}, 0.0); break;
        }
    };
    for (std::size_t k = 0; k < g.cones.size(); ++k) {
        const auto& c = g.cones[k];
        const int first = pb.add_block(ConeKind::RotatedSOC, 3);
        if (!tag.empty()) pb.name_column(tag + ".cone" + std::to_string(k), first);
        bind(first, c.left);
        bind(first + 1, c.right);
        if (c.out.kind == GadgetTerm::Node) {
            node_col[static_cast<std::size_t>(c.out.node)] = first + 2;
        } else {
            bind(first + 2, c.out);
            root_first = first;
        }
    }
    return root_first;
}

// ---------------------------------------------------------------------------
// Load-shedding builders.

namespace detail {

inline void check_weights(const Network& net, std::span<const double> weights) {
    if (!weights.empty() && weights.size() != net.loads.size())
        throw std::invalid_argument("dimension mismatch between weights and loads");
    for (double w : weights)
        if (!(w >= 0.0)) throw std::invalid_argument("weights must be nonnegative");
}

/// DC feasibility set; no objective. Shed columns are named shed[i].
inline ProgramBuilder dc_feasible_set(const DamagedNetwork& dn) {
    const Network& net = dn.base();
    ProgramBuilder pb;
    const std::size_t nb = net.buses.size();

    std::vector<int> theta(nb);
    for (std::size_t b = 0; b < nb; ++b)
        theta[b] = pb.add_var(ConeKind::Free, "angle[" + std::to_string(net.buses[b].id) + "]");

    // nodal balance rows collected per bus
    std::vector<std::vector<std::pair<int, double>>> bal(nb);
    std::vector<double> bal_rhs(nb, 0.0);

    for (const auto& g : net.generators) {
        const auto bpos = static_cast<std::size_t>(net.bus_index(g.bus));
        const double lo = std::min(g.p_min, 0.0);
        const double hi = g.p_max;
        const int pg = pb.add_var(ConeKind::Free, "gen[" + std::to_string(g.id) + "]");
        bal[bpos].emplace_back(pg, 1.0);
        if (hi - lo <= 0.0) {
            pb.add_row({{pg, 1.0}}, hi);
        } else {
            const int s_lo = pb.add_var(ConeKind::NonNeg);
            const int s_hi = pb.add_var(ConeKind::NonNeg);
            pb.add_row({{pg, 1.0}, {s_lo, -1.0}}, lo);
            pb.add_row({{pg, 1.0}, {s_hi, 1.0}}, hi);
        }
    }

    std::vector<int> shed_cols;
    std::vector<double> shed_upper;
    for (const auto& l : net.loads) {
        const auto bpos = static_cast<std::size_t>(net.bus_index(l.bus));
        const int d = pb.add_var(ConeKind::NonNeg, "shed[" + std::to_string(l.id) + "]");
        const int u = pb.add_var(ConeKind::NonNeg);
        pb.add_row({{d, 1.0}, {u, 1.0}}, l.d_max);
        // served demand (d_max - d) is withdrawn at the bus
        bal[bpos].emplace_back(d, 1.0);
        bal_rhs[bpos] += l.d_max;
        shed_cols.push_back(d);
        shed_upper.push_back(l.d_max);
    }

    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        if (!dn.line_alive(k)) continue;
        const auto& ln = net.lines[k];
        const auto i = static_cast<std::size_t>(net.bus_index(ln.from_bus));
        const auto j = static_cast<std::size_t>(net.bus_index(ln.to_bus));
        const double b = ln.susceptance_b;
        // flow i->j = b (theta_i - theta_j) leaves i and enters j
        bal[i].emplace_back(theta[i], -b);
        bal[i].emplace_back(theta[j], b);
        bal[j].emplace_back(theta[j], -b);
        bal[j].emplace_back(theta[i], b);
        if (std::isfinite(ln.rating_pmax)) {
            const int sp = pb.add_var(ConeKind::NonNeg);
            const int sn = pb.add_var(ConeKind::NonNeg);
            pb.add_row({{theta[i], b}, {theta[j], -b}, {sp, 1.0}}, ln.rating_pmax);
            pb.add_row({{theta[i], -b}, {theta[j], b}, {sn, 1.0}}, ln.rating_pmax);
        }
    }

    for (std::size_t b = 0; b < nb; ++b) {
        // merge duplicate columns (parallel lines)
        std::map<int, double> merged;
        for (const auto& [col, v] : bal[b]) merged[col] += v;
        std::vector<std::pair<int, double>> terms;
        for (const auto& [col, v] : merged)
            if (v != 0.0) terms.emplace_back(col, v);
        if (terms.empty() && bal_rhs[b] == 0.0) continue;
        pb.add_row(terms, bal_rhs[b]);
    }

    for (int ref : dn.reference_bus_per_component())
        pb.add_row({{theta[static_cast<std::size_t>(net.bus_index(ref))], 1.0}}, 0.0);

    pb.set_shed(std::move(shed_cols), std::move(shed_upper));
    return pb;
}

}  // namespace detail

/// Minimum (weighted) load shed: min sum w_i d_i over the DC feasible set.
inline ConicProgram build_mls(const DamagedNetwork& dn, std::span<const double> weights = {}) {
    detail::check_weights(dn.base(), weights);
    auto pb = detail::dc_feasible_set(dn);
    const auto& shed = pb.shed_columns();
    for (std::size_t i = 0; i < shed.size(); ++i) pb.set_cost(shed[i], weights.empty() ? 1.0 : weights[i]);
    return pb.build();
}

/// min sum (w_i d_i)^p for integer p >= 2.
inline ConicProgram build_mls_pnorm(const DamagedNetwork& dn, int p, std::span<const double> weights = {}) {
    if (p < 2) throw std::invalid_argument("p-norm builder requires p >= 2");
    detail::check_weights(dn.base(), weights);
    auto pb = detail::dc_feasible_set(dn);
    const auto gadget = power_epigraph(p);
    const auto shed = pb.shed_columns();
    for (std::size_t i = 0; i < shed.size(); ++i) {
        const std::string id = std::to_string(dn.base().loads[i].id);
        const int t = pb.add_var(ConeKind::Free, "epigraph_t[" + id + "]");
        pb.set_cost(t, 1.0);
        append_power_epigraph(pb, gadget, t, shed[i], weights.empty() ? 1.0 : weights[i], "power[" + id + "]");
    }
    return pb.build();
}

/// min y with y >= w_i d_i.
inline ConicProgram build_mls_minmax(const DamagedNetwork& dn, std::span<const double> weights = {}) {
    detail::check_weights(dn.base(), weights);
    auto pb = detail::dc_feasible_set(dn);
    const auto shed = pb.shed_columns();
    const int y = pb.add_var(ConeKind::Free, "max_shed");
    pb.set_cost(y, 1.0);
    for (std::size_t i = 0; i < shed.size(); ++i) {
        const int s = pb.add_var(ConeKind::NonNeg);
        pb.add_row({{y, 1.0}, {shed[i], -(weights.empty() ? 1.0 : weights[i])}, {s, -1.0}}, 0.0);
    }
    return pb.build();
}

/// kappa = 1 - eps + eps * sqrt(n).
inline double fairness_kappa(double epsilon, std::size_t n) {
    return 1.0 - epsilon + epsilon * std::sqrt(static_cast<double>(n));
}

/// Appends kappa * ||d||_2 <= sum_i d_i over all shed columns of `program`.
inline ConicProgram add_eps_fairness(const ConicProgram& program, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
    if (program.shed_columns.empty()) throw std::invalid_argument("program has no shed variables");
    const std::size_t n = program.shed_columns.size();
    const double kappa = fairness_kappa(epsilon, n);
    ProgramBuilder pb(program);
    const int total = pb.add_var(ConeKind::Free, "sum_shed");
    std::vector<std::pair<int, double>> row{{total, 1.0}};
    for (int d : program.shed_columns) row.emplace_back(d, -1.0);
    pb.add_row(row, 0.0);

    // (sum/kappa, d) in SOC(n+1)
    const int first = pb.add_block(ConeKind::SOC, static_cast<int>(n) + 1);
    pb.name_column("fairness_cone", first);
    pb.add_row({{first, kappa}, {total, -1.0}}, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        pb.add_row({{first + 1 + static_cast<int>(i), 1.0}, {program.shed_columns[i], -1.0}}, 0.0);
    return pb.build();
}

inline ConicProgram build_fair_mls(const DamagedNetwork& dn, double epsilon, std::span<const double> weights = {}) {
    return add_eps_fairness(build_mls(dn, weights), epsilon);
}

/// Plain-text dump: dimensions, cones, then 1-based sparse triplets.
inline void write_debug(std::ostream& os, const ConicProgram& p) {
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "conic-program v1\n";
    os << "rows " << p.num_rows() << " cols " << p.num_cols() << " nnz " << p.equality_A.nonZeros() << '\n';
    os << "cones " << p.cone_spec.size() << '\n';
    for (const auto& c : p.cone_spec) os << cone_name(c.kind) << ' ' << c.dim << '\n';
    os << "objective\n";
    for (int j = 0; j < p.num_cols(); ++j)
        if (p.objective_c[j] != 0.0) os << j + 1 << ' ' << num(p.objective_c[j]) << '\n';
    os << "rhs\n";
    for (int i = 0; i < p.num_rows(); ++i)
        if (p.equality_b[i] != 0.0) os << i + 1 << ' ' << num(p.equality_b[i]) << '\n';
    os << "A\n";
    for (int k = 0; k < p.equality_A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(p.equality_A, k); it; ++it)
            os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << num(it.value()) << '\n';
    os << "names\n";
    for (const auto& [name, col] : p.var_index) os << col + 1 << ' ' << name << '\n';
}

}  // namespace fairshed

#endif  // FAIRSHED_CONIC_HPP
