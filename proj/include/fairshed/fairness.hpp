#ifndef FAIRSHED_FAIRNESS_HPP
#define FAIRSHED_FAIRNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "conic.hpp"
#include "scenario.hpp"
#include "solver.hpp"

namespace fairshed {

/// Per-load shed in per-unit, position i holds load id i + 1.
using ShedVector = std::vector<double>;

/// Reads the shed columns of an Optimal result. Values within 1e-7 of
/// [0, d_max] are clamped; anything further out is an error.
inline ShedVector extract_shed(const ConicProgram& program, const SolveResult& result, double tol = 1e-7) {
    if (result.status != SolveStatus::Optimal)
        throw std::invalid_argument(std::string("cannot extract shed from a ") + status_name(result.status) + " result");
    ShedVector d(program.shed_columns.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        double v = result.primal_x[program.shed_columns[i]];
        const double hi = program.shed_upper[i];
        if (v < -tol || v > hi + tol)
            throw std::runtime_error("shed value " + std::to_string(v) + " out of bounds for load " + std::to_string(i + 1));
        d[i] = std::clamp(v, 0.0, hi);
    }
    return d;
}

inline double sum(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
}

/// sum_{i<j} |x_i - x_j| / ((n - 1) ||x||_1); 0 for the zero vector.
inline double gini(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("gini needs at least two entries");
    const double l1 = sum(x);
    if (l1 <= 0.0) return 0.0;
    // sorted form of the pairwise sum: sum_k (2k - n + 1) x_(k)
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += (2.0 * static_cast<double>(k) - static_cast<double>(n) + 1.0) * s[k];
    return acc / (static_cast<double>(n - 1) * l1);
}

/// ||x||_1^2 / (n ||x||_2^2); 1 for the zero vector.
inline double jain(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("jain needs at least one entry");
    const double l1 = sum(x);
    double sq = 0.0;
    for (double v : x) sq += v * v;
    if (l1 <= 0.0 || sq <= 0.0) return 1.0;
    return l1 * l1 / (static_cast<double>(x.size()) * sq);
}

/// Relative increase of total shed over the baseline; empty when the baseline
/// is at or below `threshold`.
inline std::optional<double> pof(double fair_total, double baseline_total, double threshold = 1e-6) {
    if (fair_total < 0.0 || baseline_total < 0.0) throw std::invalid_argument("pof needs nonnegative totals");
    if (baseline_total <= threshold) return std::nullopt;
    return (fair_total - baseline_total) / baseline_total;
}

struct MeanVariance {
    double mean = 0.0;
    double variance = 0.0;  // population (1/n)
};

inline MeanVariance mean_variance(std::span<const double> x) {
    MeanVariance mv;
    if (x.empty()) return mv;
    const double n = static_cast<double>(x.size());
    mv.mean = sum(x) / n;
    for (double v : x) mv.variance += (v - mv.mean) * (v - mv.mean);
    mv.variance /= n;
    return mv;
}

/// (n / kappa^2 - 1) mu^2 - sigma^2; nonnegative for every eps-fair vector.
inline double variance_bound_gap(std::span<const double> d, double epsilon) {
    const std::size_t n = d.size();
    const double kappa = fairness_kappa(epsilon, n);
    const auto mv = mean_variance(d);
    return (static_cast<double>(n) / (kappa * kappa) - 1.0) * mv.mean * mv.mean - mv.variance;
}

/// kappa ||d||_2 <= ||d||_1 + tol.
inline bool is_eps_fair(std::span<const double> d, double epsilon, double tol = 1e-7) {
    double sq = 0.0;
    for (double v : d) sq += v * v;
    return fairness_kappa(epsilon, d.size()) * std::sqrt(sq) <= sum(d) + tol;
}

/// ||d||_2 <= ||d||_1 <= sqrt(n) ||d||_2 + tol.
inline bool norm_sandwich_holds(std::span<const double> d, double tol = 1e-9) {
    double sq = 0.0;
    for (double v : d) sq += v * v;
    const double l2 = std::sqrt(sq), l1 = sum(d);
    return l2 <= l1 + tol && l1 <= std::sqrt(static_cast<double>(d.size())) * l2 + tol;
}

/// Statuses along an increasing eps grid never go from infeasible back to
/// optimal. NumericalLimit entries are skipped.
inline bool feasibility_monotone(std::span<const SolveStatus> statuses) {
    bool seen_infeasible = false;
    for (auto s : statuses) {
        if (s == SolveStatus::PrimalInfeasible) seen_infeasible = true;
        if (s == SolveStatus::Optimal && seen_infeasible) return false;
    }
    return true;
}

/// Consecutive defined values never drop by more than `guard`.
inline bool nondecreasing(std::span<const std::optional<double>> values, double guard = 1e-6) {
    bool have = false;
    double prev = 0.0;
    for (const auto& v : values) {
        if (!v) {
            have = false;
            continue;
        }
        if (have && *v < prev - guard) return false;
        prev = *v;
        have = true;
    }
    return true;
}

struct FairnessReport {
    std::uint64_t scenario_ordinal = 0;
    std::string variant;
    SolveStatus status = SolveStatus::NumericalLimit;
    double total_shed = 0.0;
    ShedVector shed;
    double gini = 0.0;
    double jain = 1.0;
    std::optional<double> pof;
};

/// Fills indices from an extracted shed vector.
inline FairnessReport make_report(std::uint64_t ordinal, std::string variant, SolveStatus status, ShedVector shed,
                                  std::optional<double> baseline_total = std::nullopt, double threshold = 1e-6) {
    FairnessReport r;
    r.scenario_ordinal = ordinal;
    r.variant = std::move(variant);
    r.status = status;
    r.shed = std::move(shed);
    if (status != SolveStatus::Optimal) return r;
    r.total_shed = sum(r.shed);
    r.gini = r.shed.size() >= 2 ? gini(r.shed) : 0.0;
    r.jain = jain(r.shed);
    if (baseline_total) r.pof = pof(r.total_shed, *baseline_total, threshold);
    return r;
}

/// Largest eps in [0, 1] (to within `tol`) for which the eps-fair MLS is
/// solved to optimality. Anything other than Optimal counts as infeasible.
inline double eps_max(const DamagedNetwork& dn, std::span<const double> weights = {}, double tol = 1e-3,
                      const SolveSettings& settings = {}) {
    if (!(tol > 0.0)) throw std::invalid_argument("eps_max tolerance must be positive");
    const ConicProgram base = build_mls(dn, weights);
    if (solve(base, settings).status != SolveStatus::Optimal)
        throw std::runtime_error("baseline MLS is not feasible");
    auto feasible = [&](double eps) { return solve(add_eps_fairness(base, eps), settings).status == SolveStatus::Optimal; };
    if (feasible(1.0)) return 1.0;
    double lo = 0.0, hi = 1.0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace fairshed

#endif  // FAIRSHED_FAIRNESS_HPP
