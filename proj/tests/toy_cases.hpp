#ifndef FAIRSHED_TESTS_TOY_CASES_HPP
#define FAIRSHED_TESTS_TOY_CASES_HPP

#include <fairshed/fairshed.hpp>

#include <Eigen/Dense>

#include <cstdio>
#include <functional>
#include <limits>
#include <string>

namespace toy {

/// Two buses, generator at bus 1, 50 MW load at bus 2, one line.
inline std::string two_bus(double x = 0.1, double rate_mw = 100.0) {
    char buf[1024];
    std::snprintf(buf, sizeof buf,
                  "function mpc = two_bus\n"
                  "mpc.version = '2';\n"
                  "mpc.baseMVA = 100;\n"
                  "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\n"
                  "mpc.bus = [\n"
                  "\t1\t3\t0\t0\t0\t0\t1\t1.0\t0\t230\t1\t1.1\t0.9;\n"
                  "\t2\t1\t50\t0\t0\t0\t1\t1.0\t0\t230\t1\t1.1\t0.9;\n"
                  "];\n"
                  "mpc.gen = [\n"
                  "\t1\t0\t0\t100\t-100\t1.0\t100\t1\t200\t0;\n"
                  "];\n"
                  "mpc.branch = [\n"
                  "\t1\t2\t0\t%g\t0\t%g\t0\t0\t0\t0\t1\t-360\t360;\n"
                  "];\n",
                  x, rate_mw);
    return buf;
}

inline fairshed::Network two_bus_net(double rate_mw) { return fairshed::parse_case(two_bus(0.1, rate_mw)); }

/// Generator at bus 1 (Pmax given), loads at buses 2 and 3, arbitrary branches
/// given as "from to x rateA" rows.
inline std::string three_bus(double pd2, double pd3, double pmax, const std::string& branches) {
    char buf[2048];
    std::snprintf(buf, sizeof buf,
                  "mpc.baseMVA = 100;\n"
                  "mpc.bus = [\n"
                  "1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n"
                  "2 1 %g 0 0 0 1 1 0 230 1 1.1 0.9;\n"
                  "3 1 %g 0 0 0 1 1 0 230 1 1.1 0.9;\n"
                  "];\n"
                  "mpc.gen = [\n"
                  "1 0 0 0 0 1 100 1 %g 0;\n"
                  "];\n"
                  "mpc.branch = [\n%s];\n",
                  pd2, pd3, pmax, branches.c_str());
    return buf;
}

inline std::string branch(int f, int t, double x, double rate) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d %d 0 %g 0 %g 0 0 0 0 1 -360 360;\n", f, t, x, rate);
    return buf;
}

inline fairshed::DamagedNetwork intact(const fairshed::Network& net) { return fairshed::apply_damage(net, {}); }

/// Independent DC feasibility check for a connected network with a single
/// generator at the first bus: solves the reduced B-theta system directly.
inline bool dc_feasible(const fairshed::Network& net, const std::vector<double>& shed, double tol = 1e-12) {
    const auto nb = static_cast<Eigen::Index>(net.buses.size());
    Eigen::VectorXd inj = Eigen::VectorXd::Zero(nb);
    double served = 0.0;
    for (std::size_t i = 0; i < net.loads.size(); ++i) {
        if (shed[i] < -tol || shed[i] > net.loads[i].d_max + tol) return false;
        const double s = net.loads[i].d_max - shed[i];
        inj(net.bus_index(net.loads[i].bus)) -= s;
        served += s;
    }
    const auto& g = net.generators.at(0);
    if (served > g.p_max + tol) return false;
    inj(net.bus_index(g.bus)) += served;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nb, nb);
    for (const auto& l : net.lines) {
        const int i = net.bus_index(l.from_bus), j = net.bus_index(l.to_bus);
        const double b = 1.0 / l.reactance_x;
        B(i, i) += b;
        B(j, j) += b;
        B(i, j) -= b;
        B(j, i) -= b;
    }
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(nb);
    theta.tail(nb - 1) = B.bottomRightCorner(nb - 1, nb - 1).ldlt().solve(inj.tail(nb - 1));
    for (const auto& l : net.lines) {
        const double f = (theta(net.bus_index(l.from_bus)) - theta(net.bus_index(l.to_bus))) / l.reactance_x;
        if (std::abs(f) > l.rating_pmax + tol) return false;
    }
    return true;
}

/// Minimizes f over the box [0, d_max]^2 subject to `ok` by a dense grid that
/// repeatedly zooms in on the incumbent. Returns +inf when nothing is feasible.
inline double grid_min_2d(const std::function<double(double, double)>& f, const std::function<bool(double, double)>& ok,
                          double hi0, double hi1, int cells = 200, int rounds = 12) {
    double lo[2] = {0.0, 0.0}, hi[2] = {hi0, hi1};
    double best = std::numeric_limits<double>::infinity(), bx = 0.0, by = 0.0;
    for (int r = 0; r < rounds; ++r) {
        const double hx = (hi[0] - lo[0]) / cells, hy = (hi[1] - lo[1]) / cells;
        for (int i = 0; i <= cells; ++i) {
            for (int j = 0; j <= cells; ++j) {
                const double x = lo[0] + i * hx, y = lo[1] + j * hy;
                if (!ok(x, y)) continue;
                const double v = f(x, y);
                if (v < best) {
                    best = v;
                    bx = x;
                    by = y;
                }
            }
        }
        if (!std::isfinite(best)) return best;
        lo[0] = std::max(0.0, bx - 4 * hx);
        hi[0] = std::min(hi0, bx + 4 * hx);
        lo[1] = std::max(0.0, by - 4 * hy);
        hi[1] = std::min(hi1, by + 4 * hy);
    }
    return best;
}

}  // namespace toy

#endif  // FAIRSHED_TESTS_TOY_CASES_HPP
