#ifndef FAIRSHED_STUDY_HPP
#define FAIRSHED_STUDY_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "caseio.hpp"
#include "conic.hpp"
#include "fairness.hpp"
#include "scenario.hpp"
#include "solver.hpp"

namespace fairshed {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Shortest round-trip-safe text for grid values such as 0.3 or 10.
inline std::string format_param(double v) {
    if (std::isinf(v)) return "inf";
    const double r = std::round(v * 1e9) / 1e9;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", r == 0.0 ? 0.0 : r);
    return buf;
}

inline std::string format_value(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct Variant {
    enum Kind { Baseline, Weighted, PNorm, Eps, WeightedEps } kind = Baseline;
    double param = 0.0;

    std::string tag() const {
        switch (kind) {
            case Baseline: return "baseline";
            case Weighted: return "weighted";
            case PNorm: return "pnorm(" + format_param(param) + ")";
            case Eps: return "eps(" + format_param(param) + ")";
            case WeightedEps: return "weighted_eps(" + format_param(param) + ")";
        }
        return "?";
    }

    bool uses_weights() const { return kind == Weighted || kind == WeightedEps; }

    static Variant parse(const std::string& tag) {
        if (tag == "baseline") return {Baseline, 0.0};
        if (tag == "weighted") return {Weighted, 0.0};
        auto arg = [&](const std::string& head) -> std::optional<double> {
            if (tag.size() <= head.size() + 2 || tag.compare(0, head.size() + 1, head + "(") != 0 || tag.back() != ')')
                return std::nullopt;
            const std::string inner = tag.substr(head.size() + 1, tag.size() - head.size() - 2);
            if (inner == "inf") return kInf;
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(inner, &used);
            } catch (const std::exception&) {
                throw std::invalid_argument("bad variant parameter in '" + tag + "'");
            }
            if (used != inner.size()) throw std::invalid_argument("bad variant parameter in '" + tag + "'");
            return v;
        };
        if (auto v = arg("pnorm")) return {PNorm, *v};
        if (auto v = arg("weighted_eps")) return {WeightedEps, *v};
        if (auto v = arg("eps")) return {Eps, *v};
        throw std::invalid_argument("unknown variant '" + tag + "'");
    }

    friend bool operator==(const Variant& a, const Variant& b) {
        return a.kind == b.kind && (a.kind == Baseline || a.kind == Weighted || a.param == b.param);
    }
};

inline ConicProgram build_variant(const DamagedNetwork& dn, const Variant& v, std::span<const double> weights) {
    switch (v.kind) {
        case Variant::Baseline: return build_mls(dn);
        case Variant::Weighted: return build_mls(dn, weights);
        case Variant::PNorm:
            if (std::isinf(v.param)) return build_mls_minmax(dn);
            if (v.param == 1.0) return build_mls(dn);
            if (v.param >= 2.0 && v.param == std::floor(v.param)) return build_mls_pnorm(dn, static_cast<int>(v.param));
            throw std::invalid_argument("p must be 1, an integer >= 2, or inf");
        case Variant::Eps: return build_fair_mls(dn, v.param);
        case Variant::WeightedEps: return build_fair_mls(dn, v.param, weights);
    }
    throw std::invalid_argument("unknown variant");
}

struct SampleSpec {
    std::uint64_t count = 0;
    std::uint64_t seed = 0;
};

struct StudyConfig {
    std::string case_path;
    std::string weights_path;  // empty: weight 2 on high_priority_ids, 1 elsewhere
    std::string output_dir;
    int k_damaged = 5;
    std::vector<double> p_list{1, 2, 3, 5, 10, kInf};
    std::vector<double> eps_list{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<double> weighted_eps_list{0.0, 0.2, 0.4, 0.6, 0.8};
    std::vector<int> high_priority_ids{1, 2};
    double shed_threshold = 1e-6;
    /// Upper end of the eps range used for the all-feasible cohort.
    double cohort_eps_max = 0.9;
    std::optional<SampleSpec> sample;
    int workers = 1;
    SolveSettings solver;
    /// Called after each finished scenario with (done, total).
    std::function<void(std::size_t, std::size_t)> progress;

    void validate() const {
        if (k_damaged < 1) throw std::invalid_argument("k must be at least 1");
        if (p_list.empty()) throw std::invalid_argument("p list is empty");
        if (eps_list.empty()) throw std::invalid_argument("eps list is empty");
        for (double p : p_list)
            if (!(std::isinf(p) || p == 1.0 || (p >= 2.0 && p == std::floor(p))))
                throw std::invalid_argument("p values must be 1, integers >= 2, or inf");
        for (const auto* list : {&eps_list, &weighted_eps_list})
            for (double e : *list)
                if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("eps values must lie in [0, 1]");
        if (!(shed_threshold >= 0.0)) throw std::invalid_argument("shed threshold must be nonnegative");
        if (workers < 1) throw std::invalid_argument("workers must be positive");
        if (sample && sample->count == 0) throw std::invalid_argument("sample count must be positive");
        solver.validate();
    }
};

/// Parses "lo:hi:step" or a comma list.
inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    auto num = [&](const std::string& s) {
        if (s == "inf") return kInf;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad number '" + s + "'");
        }
        if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
        return v;
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw std::invalid_argument("range must be lo:hi:step");
        const double lo = num(parts[0]), hi = num(parts[1]), step = num(parts[2]);
        if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(hi)) throw std::invalid_argument("bad range '" + text + "'");
        const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
        for (long i = 0; i < count; ++i) out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
        return out;
    }
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(num(p));
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

inline std::vector<double> default_priority_weights(const Network& net, const std::vector<int>& high_priority_ids) {
    std::vector<double> w(net.loads.size(), 1.0);
    for (std::size_t i = 0; i < net.loads.size(); ++i)
        if (std::find(high_priority_ids.begin(), high_priority_ids.end(), net.loads[i].id) != high_priority_ids.end())
            w[i] = 2.0;
    return w;
}

struct StudyRow {
    std::uint64_t ordinal = 0;
    Variant variant;
    SolveStatus status = SolveStatus::NumericalLimit;
    double total_shed = std::numeric_limits<double>::quiet_NaN();
    ShedVector shed;
    double gini = std::numeric_limits<double>::quiet_NaN();
    double jain = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> pof;
    bool certificate_ok = false;
    double objective_primal = std::numeric_limits<double>::quiet_NaN();
    double objective_dual = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;

    bool optimal() const { return status == SolveStatus::Optimal; }
};

struct ScenarioOutcome {
    DamageScenario scenario;
    bool qualifying = false;
    std::vector<StudyRow> rows;  // baseline first

    const StudyRow* find(const Variant& v) const {
        for (const auto& r : rows)
            if (r.variant == v) return &r;
        return nullptr;
    }
    const StudyRow& baseline() const { return rows.front(); }
};

/// Solves one variant and fills a row. `baseline_total` feeds the POF.
inline StudyRow solve_row(const ConicProgram& program, std::uint64_t ordinal, const Variant& v,
                          std::optional<double> baseline_total, const StudyConfig& cfg) {
    StudyRow row;
    row.ordinal = ordinal;
    row.variant = v;
    const SolveResult r = solve(program, cfg.solver);
    row.status = r.status;
    row.iterations = r.iterations;
    if (r.status == SolveStatus::Optimal || r.status == SolveStatus::PrimalInfeasible)
        row.certificate_ok = check_certificate(program, r);
    if (r.status != SolveStatus::Optimal) return row;
    row.objective_primal = r.objective_primal;
    row.objective_dual = r.objective_dual;
    const FairnessReport rep = make_report(ordinal, v.tag(), r.status, extract_shed(program, r), baseline_total, cfg.shed_threshold);
    row.shed = rep.shed;
    row.total_shed = rep.total_shed;
    row.gini = rep.gini;
    row.jain = rep.jain;
    row.pof = rep.pof;
    return row;
}

/// Baseline for every scenario; the remaining variants only for qualifying ones.
inline ScenarioOutcome evaluate_scenario(const Network& net, std::span<const double> weights, const DamageScenario& sc,
                                         const StudyConfig& cfg) {
    ScenarioOutcome out;
    out.scenario = sc;
    const DamagedNetwork dn = apply_damage(net, sc);
    const ConicProgram base = build_mls(dn);
    out.rows.push_back(solve_row(base, sc.ordinal, {Variant::Baseline, 0.0}, std::nullopt, cfg));
    const StudyRow& b = out.rows.front();
    out.qualifying = b.optimal() && b.total_shed > cfg.shed_threshold;
    if (!out.qualifying) return out;
    const double base_total = b.total_shed;

    const ConicProgram weighted = build_mls(dn, weights);
    out.rows.push_back(solve_row(weighted, sc.ordinal, {Variant::Weighted, 0.0}, std::nullopt, cfg));
    const StudyRow& w = out.rows.back();
    std::optional<double> w_total;
    if (w.optimal()) {
        w_total = w.total_shed;
        out.rows.back().pof = pof(w.total_shed, w.total_shed, cfg.shed_threshold);
    }

    for (double p : cfg.p_list) {
        if (p == 1.0) continue;
        const Variant v{Variant::PNorm, p};
        out.rows.push_back(solve_row(build_variant(dn, v, weights), sc.ordinal, v, base_total, cfg));
    }
    for (double e : cfg.eps_list) {
        const Variant v{Variant::Eps, e};
        out.rows.push_back(solve_row(add_eps_fairness(base, e), sc.ordinal, v, base_total, cfg));
    }
    for (double e : cfg.weighted_eps_list) {
        const Variant v{Variant::WeightedEps, e};
        out.rows.push_back(solve_row(add_eps_fairness(weighted, e), sc.ordinal, v, w_total, cfg));
    }
    return out;
}

struct StudyResult {
    StudyConfig config;
    Network network;
    std::vector<double> weights;
    std::string weights_source;
    std::uint64_t enumerated = 0;  // size of the full combination space
    std::vector<ScenarioOutcome> scenarios;  // sorted by ordinal

    std::size_t qualifying_count() const {
        return static_cast<std::size_t>(
            std::count_if(scenarios.begin(), scenarios.end(), [](const ScenarioOutcome& s) { return s.qualifying; }));
    }
};

/// Runs every scenario on `cfg.workers` threads; results are ordered by ordinal.
inline StudyResult run_sweep(const StudyConfig& cfg, const Network& net, std::vector<double> weights,
                             std::string weights_source) {
    cfg.validate();
    StudyResult res;
    res.config = cfg;
    res.network = net;
    res.weights = std::move(weights);
    res.weights_source = std::move(weights_source);
    const int nl = static_cast<int>(net.lines.size());
    if (cfg.k_damaged > nl) throw std::invalid_argument("k exceeds the number of lines");
    res.enumerated = binomial(static_cast<std::uint64_t>(nl), static_cast<std::uint64_t>(cfg.k_damaged));

    std::vector<DamageScenario> todo = cfg.sample ? sample_damage(net, cfg.k_damaged, cfg.sample->count, cfg.sample->seed)
                                                  : enumerate_damage(net, cfg.k_damaged).collect();
    res.scenarios.resize(todo.size());
    std::atomic<std::size_t> next{0}, done{0};
    std::mutex progress_mu;
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            try {
                res.scenarios[i] = evaluate_scenario(res.network, res.weights, todo[i], cfg);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next.store(todo.size());
                return;
            }
            const std::size_t d = done.fetch_add(1) + 1;
            if (cfg.progress) {
                std::lock_guard lock(progress_mu);
                cfg.progress(d, todo.size());
            }
        }
    };
    const int nthreads = std::min<int>(cfg.workers, static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return res;
}

// ---------------------------------------------------------------------------
// Aggregates.

struct IndexStats {
    std::size_t count = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
    double min = std::numeric_limits<double>::quiet_NaN();
};

inline IndexStats describe(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("empty cohort");
    IndexStats s;
    s.count = xs.size();
    s.mean = sum(xs) / static_cast<double>(xs.size());
    s.max = *std::max_element(xs.begin(), xs.end());
    s.min = *std::min_element(xs.begin(), xs.end());
    return s;
}

struct IndexSummary {
    IndexStats gini, jain;
};

/// Mean/max/min of both indices over Optimal rows of `v` in qualifying scenarios accepted by `cohort`.
inline IndexSummary summarize_indices(const StudyResult& res, const Variant& v,
                                      const std::function<bool(const ScenarioOutcome&)>& cohort = {}) {
    std::vector<double> g, j;
    for (const auto& s : res.scenarios) {
        if (!s.qualifying || (cohort && !cohort(s))) continue;
        const StudyRow* r = s.find(v);
        if (!r || !r->optimal()) continue;
        g.push_back(r->gini);
        j.push_back(r->jain);
    }
    return {describe(g), describe(j)};
}

/// Mean over rows of 100 * (shed on `ids`) / (total shed); rows must be Optimal
/// with total above `threshold`.
inline double priority_share(const std::vector<const StudyRow*>& rows, const std::vector<int>& ids, double threshold = 1e-6) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const StudyRow* r : rows) {
        if (!r || !r->optimal() || !(r->total_shed > threshold)) continue;
        double hp = 0.0;
        for (int id : ids)
            if (id >= 1 && static_cast<std::size_t>(id) <= r->shed.size()) hp += r->shed[static_cast<std::size_t>(id - 1)];
        acc += 100.0 * hp / r->total_shed;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("empty cohort");
    return acc / static_cast<double>(n);
}

inline std::vector<const StudyRow*> rows_of(const StudyResult& res, const Variant& v) {
    std::vector<const StudyRow*> out;
    for (const auto& s : res.scenarios)
        if (s.qualifying)
            if (const StudyRow* r = s.find(v)) out.push_back(r);
    return out;
}

/// p values in increasing order with inf last.
inline std::vector<double> sorted_p(std::vector<double> ps) {
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    return ps;
}

inline std::optional<double> pof_for_p(const ScenarioOutcome& s, double p) {
    if (p == 1.0) return 0.0;
    const StudyRow* r = s.find({Variant::PNorm, p});
    if (!r || !r->optimal()) return std::nullopt;
    return r->pof;
}

struct CountInCohort {
    std::size_t count = 0;
    std::size_t cohort = 0;
};

/// Scenarios whose POF over increasing p is not nondecreasing (guard 1e-6).
/// Only scenarios with a defined POF at every p are considered.
inline CountInCohort nonmonotone_pof_count(const StudyResult& res, double guard = 1e-6) {
    CountInCohort c;
    const auto ps = sorted_p(res.config.p_list);
    for (const auto& s : res.scenarios) {
        if (!s.qualifying) continue;
        std::vector<std::optional<double>> seq;
        bool complete = true;
        for (double p : ps) {
            seq.push_back(pof_for_p(s, p));
            if (!seq.back()) complete = false;
        }
        if (!complete) continue;
        ++c.cohort;
        if (!nondecreasing(seq, guard)) ++c.count;
    }
    return c;
}

inline std::vector<double> cohort_eps(const StudyConfig& cfg) {
    std::vector<double> out;
    for (double e : cfg.eps_list)
        if (e <= cfg.cohort_eps_max + 1e-9) out.push_back(e);
    return out;
}

/// Qualifying scenarios solved to optimality at every eps up to cohort_eps_max.
inline bool in_all_eps_cohort(const ScenarioOutcome& s, const StudyConfig& cfg) {
    if (!s.qualifying) return false;
    for (double e : cohort_eps(cfg)) {
        const StudyRow* r = s.find({Variant::Eps, e});
        if (!r || !r->optimal()) return false;
    }
    return true;
}

struct StatusCounts {
    std::size_t optimal = 0, infeasible = 0, dual_infeasible = 0, numerical_limit = 0;
};

inline StatusCounts status_counts(const StudyResult& res, const Variant& v) {
    StatusCounts c;
    for (const StudyRow* r : rows_of(res, v)) {
        switch (r->status) {
            case SolveStatus::Optimal: ++c.optimal; break;
            case SolveStatus::PrimalInfeasible: ++c.infeasible; break;
            case SolveStatus::DualInfeasible: ++c.dual_infeasible; break;
            case SolveStatus::NumericalLimit: ++c.numerical_limit; break;
        }
    }
    return c;
}

struct BoxPlot {
    std::size_t count = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
    double lower_whisker = 0, upper_whisker = 0;
    std::vector<double> outliers;
};

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& s, double q) {
    if (s.empty()) throw std::invalid_argument("quantile of empty data");
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

/// Five-number summary with whiskers at the most extreme points within 1.5 IQR.
inline BoxPlot box_plot(std::vector<double> xs) {
    BoxPlot b;
    if (xs.empty()) return b;
    std::sort(xs.begin(), xs.end());
    b.count = xs.size();
    b.min = xs.front();
    b.max = xs.back();
    b.q1 = quantile_sorted(xs, 0.25);
    b.median = quantile_sorted(xs, 0.5);
    b.q3 = quantile_sorted(xs, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
    b.lower_whisker = b.max;
    b.upper_whisker = b.min;
    for (double v : xs) {
        if (v < lo_fence || v > hi_fence) {
            b.outliers.push_back(v);
        } else {
            b.lower_whisker = std::min(b.lower_whisker, v);
            b.upper_whisker = std::max(b.upper_whisker, v);
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Property audit over a finished sweep.

struct PropertyAudit {
    std::size_t certified_results = 0, certificate_failures = 0;
    std::size_t optimal_results = 0, weak_duality_failures = 0;
    std::size_t eps0_checked = 0, eps0_mismatches = 0;
    std::size_t prop1_checked = 0, prop1_violations = 0;  // variance bound
    std::size_t prop2_checked = 0, prop2_violations = 0;  // monotone feasibility
    std::size_t prop3_checked = 0, prop3_violations = 0;  // monotone total shed
    std::size_t cor1_checked = 0, cor1_violations = 0;    // monotone POF
    std::size_t jain_checked = 0, jain_violations = 0;    // soft: monotone Jain
    std::size_t sandwich_checked = 0, sandwich_violations = 0;
    std::size_t eps_fair_checked = 0, eps_fair_violations = 0;
    std::size_t index_bound_checked = 0, index_bound_violations = 0;
    std::size_t numerical_limit_rows = 0;
};

inline PropertyAudit audit(const StudyResult& res) {
    PropertyAudit a;
    const auto& cfg = res.config;
    for (const auto& s : res.scenarios) {
        for (const auto& r : s.rows) {
            if (r.status == SolveStatus::NumericalLimit) ++a.numerical_limit_rows;
            if (r.status == SolveStatus::Optimal || r.status == SolveStatus::PrimalInfeasible) {
                ++a.certified_results;
                if (!r.certificate_ok) ++a.certificate_failures;
            }
            if (!r.optimal()) continue;
            ++a.optimal_results;
            if (!(r.objective_dual <= r.objective_primal + cfg.solver.gap_tol)) ++a.weak_duality_failures;
            ++a.sandwich_checked;
            if (!norm_sandwich_holds(r.shed)) ++a.sandwich_violations;
            if (r.total_shed > 0.0) {
                ++a.index_bound_checked;
                const double n = static_cast<double>(r.shed.size());
                if (r.gini < -1e-12 || r.gini > 1.0 + 1e-12 || r.jain < 1.0 / n - 1e-12 || r.jain > 1.0 + 1e-12)
                    ++a.index_bound_violations;
            }
            if (r.variant.kind == Variant::Eps || r.variant.kind == Variant::WeightedEps) {
                ++a.prop1_checked;
                if (variance_bound_gap(r.shed, r.variant.param) < -1e-9) ++a.prop1_violations;
                ++a.eps_fair_checked;
                if (!is_eps_fair(r.shed, r.variant.param)) ++a.eps_fair_violations;
            }
        }
        if (!s.qualifying) continue;

        if (const StudyRow* e0 = s.find({Variant::Eps, 0.0}); e0 && e0->optimal()) {
            ++a.eps0_checked;
            if (std::abs(e0->total_shed - s.baseline().total_shed) > 1e-6) ++a.eps0_mismatches;
        }

        for (auto kind : {Variant::Eps, Variant::WeightedEps}) {
            std::vector<double> grid = kind == Variant::Eps ? cfg.eps_list : cfg.weighted_eps_list;
            std::sort(grid.begin(), grid.end());
            std::vector<SolveStatus> st;
            std::vector<std::optional<double>> tot, pf, jn;
            for (double e : grid) {
                const StudyRow* r = s.find({kind, e});
                if (!r) continue;
                st.push_back(r->status);
                tot.push_back(r->optimal() ? std::optional<double>(r->total_shed) : std::nullopt);
                pf.push_back(r->optimal() ? r->pof : std::nullopt);
                jn.push_back(r->optimal() ? std::optional<double>(r->jain) : std::nullopt);
            }
            ++a.prop2_checked;
            if (!feasibility_monotone(st)) ++a.prop2_violations;
            ++a.prop3_checked;
            if (!nondecreasing(tot, 1e-6)) ++a.prop3_violations;
            ++a.cor1_checked;
            if (!nondecreasing(pf, 1e-6)) ++a.cor1_violations;
            ++a.jain_checked;
            if (!nondecreasing(jn, 1e-6)) ++a.jain_violations;
        }
    }
    return a;
}

// ---------------------------------------------------------------------------
// CSV output.

namespace detail {

inline std::ofstream open_csv(const std::filesystem::path& dir, const std::string& name) {
    std::ofstream os(dir / name);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    return os;
}

inline std::string opt_value(const std::optional<double>& v) { return v ? format_value(*v) : std::string(); }

inline void write_box_header(std::ostream& os, const std::string& group, const std::string& series) {
    os << group << ',' << series << ",count,min,q1,median,q3,max,lower_whisker,upper_whisker,outliers\n";
}

inline void write_box_row(std::ostream& os, const std::string& group, const std::string& series, const BoxPlot& b) {
    os << group << ',' << series << ',' << b.count;
    if (b.count == 0) {
        os << ",,,,,,,,\n";
        return;
    }
    os << ',' << format_value(b.min) << ',' << format_value(b.q1) << ',' << format_value(b.median) << ','
       << format_value(b.q3) << ',' << format_value(b.max) << ',' << format_value(b.lower_whisker) << ','
       << format_value(b.upper_whisker) << ',';
    for (std::size_t i = 0; i < b.outliers.size(); ++i) os << (i ? ";" : "") << format_value(b.outliers[i]);
    os << '\n';
}

/// Per-load shed box plots (MW) for each variant over the given rows.
inline void write_shed_boxes(std::ostream& os, const StudyResult& res, const std::vector<Variant>& variants,
                             const std::function<bool(const ScenarioOutcome&)>& cohort = {}) {
    write_box_header(os, "variant", "load_id");
    const double mva = res.network.base_mva;
    for (const auto& v : variants) {
        for (std::size_t i = 0; i < res.network.loads.size(); ++i) {
            std::vector<double> xs;
            for (const auto& s : res.scenarios) {
                if (!s.qualifying || (cohort && !cohort(s))) continue;
                const StudyRow* r = s.find(v);
                if (r && r->optimal()) xs.push_back(r->shed[i] * mva);
            }
            write_box_row(os, v.tag(), std::to_string(res.network.loads[i].id), box_plot(std::move(xs)));
        }
    }
}

inline void write_index_boxes(std::ostream& os, const StudyResult& res, const std::vector<Variant>& variants,
                              const std::function<bool(const ScenarioOutcome&)>& cohort = {}) {
    write_box_header(os, "variant", "index");
    for (const auto& v : variants) {
        std::vector<double> g, j;
        for (const auto& s : res.scenarios) {
            if (!s.qualifying || (cohort && !cohort(s))) continue;
            const StudyRow* r = s.find(v);
            if (r && r->optimal()) {
                g.push_back(r->gini);
                j.push_back(r->jain);
            }
        }
        write_box_row(os, v.tag(), "gini", box_plot(std::move(g)));
        write_box_row(os, v.tag(), "jain", box_plot(std::move(j)));
    }
}

inline void write_pof_boxes(std::ostream& os, const StudyResult& res, const std::vector<Variant>& variants,
                            const std::function<bool(const ScenarioOutcome&)>& cohort = {}) {
    write_box_header(os, "variant", "metric");
    for (const auto& v : variants) {
        std::vector<double> xs;
        for (const auto& s : res.scenarios) {
            if (!s.qualifying || (cohort && !cohort(s))) continue;
            const StudyRow* r = s.find(v);
            if (r && r->optimal() && r->pof) xs.push_back(*r->pof);
        }
        write_box_row(os, v.tag(), "pof", box_plot(std::move(xs)));
    }
}

}  // namespace detail

/// Writes every table, figure summary, and the audit into `dir`.
inline void write_outputs(const StudyResult& res, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
    const auto& cfg = res.config;
    const auto& net = res.network;
    const auto k = cfg.k_damaged;
    using detail::open_csv;
    using detail::opt_value;

    {
        auto os = open_csv(dir, "scenarios.csv");
        os << "ordinal";
        for (int i = 1; i <= k; ++i) os << ",line_id_" << i;
        os << ",baseline_status,baseline_total_shed,qualifying\n";
        for (const auto& s : res.scenarios) {
            os << s.scenario.ordinal;
            for (int id : s.scenario.line_ids) os << ',' << id;
            const auto& b = s.baseline();
            os << ',' << status_name(b.status) << ',' << format_value(b.total_shed) << ',' << (s.qualifying ? 1 : 0) << '\n';
        }
    }
    {
        auto os = open_csv(dir, "rows.csv");
        os << "ordinal,variant,status,total_shed";
        for (const auto& l : net.loads) os << ",d_" << l.id;
        os << ",gini,jain,pof,certificate_ok,objective_primal,objective_dual,iterations\n";
        for (const auto& s : res.scenarios) {
            for (const auto& r : s.rows) {
                os << r.ordinal << ',' << r.variant.tag() << ',' << status_name(r.status) << ',' << format_value(r.total_shed);
                for (std::size_t i = 0; i < net.loads.size(); ++i)
                    os << ',' << (r.optimal() ? format_value(r.shed[i]) : std::string());
                os << ',' << format_value(r.gini) << ',' << format_value(r.jain) << ',' << opt_value(r.pof) << ','
                   << (r.certificate_ok ? 1 : 0) << ',' << format_value(r.objective_primal) << ','
                   << format_value(r.objective_dual) << ',' << r.iterations << '\n';
            }
        }
    }
    {
        auto os = open_csv(dir, "table1.csv");
        os << "variant,index,mean,max,min,count\n";
        for (const Variant v : {Variant{Variant::Baseline, 0.0}, Variant{Variant::Weighted, 0.0}}) {
            const auto sm = summarize_indices(res, v);
            for (const auto& [name, st] : {std::pair{"gini", sm.gini}, std::pair{"jain", sm.jain}})
                os << v.tag() << ',' << name << ',' << format_value(st.mean) << ',' << format_value(st.max) << ','
                   << format_value(st.min) << ',' << st.count << '\n';
        }
    }
    const auto ps = sorted_p(cfg.p_list);
    auto all_p = [&](const ScenarioOutcome& s) {
        for (double p : ps)
            if (!pof_for_p(s, p)) return false;
        return true;
    };
    {
        auto os = open_csv(dir, "table2.csv");
        os << "p,max_pof,cohort\n";
        for (double p : ps) {
            if (p == 1.0) continue;
            double mx = -kInf;
            std::size_t n = 0;
            for (const auto& s : res.scenarios)
                if (s.qualifying && all_p(s)) {
                    mx = std::max(mx, *pof_for_p(s, p));
                    ++n;
                }
            os << format_param(p) << ',' << (n ? format_value(mx) : std::string()) << ',' << n << '\n';
        }
    }
    {
        auto os = open_csv(dir, "table3.csv");
        os << "eps,infeasible,numerical_limit,optimal,dual_infeasible,qualifying\n";
        for (double e : cfg.eps_list) {
            const auto c = status_counts(res, {Variant::Eps, e});
            os << format_param(e) << ',' << c.infeasible << ',' << c.numerical_limit << ',' << c.optimal << ','
               << c.dual_infeasible << ',' << res.qualifying_count() << '\n';
        }
    }
    auto cohort = [&](const ScenarioOutcome& s) { return in_all_eps_cohort(s, cfg); };
    std::size_t cohort_size = 0;
    for (const auto& s : res.scenarios) cohort_size += cohort(s) ? 1 : 0;
    {
        auto os = open_csv(dir, "table4.csv");
        os << "eps,max_pof,cohort\n";
        for (double e : cohort_eps(cfg)) {
            double mx = -kInf;
            for (const auto& s : res.scenarios)
                if (cohort(s))
                    if (const StudyRow* r = s.find({Variant::Eps, e}); r && r->pof) mx = std::max(mx, *r->pof);
            os << format_param(e) << ',' << (cohort_size ? format_value(mx) : std::string()) << ',' << cohort_size << '\n';
        }
    }
    {
        auto os = open_csv(dir, "table5.csv");
        os << "eps,unweighted_share_pct,weighted_share_pct,unweighted_rows,weighted_rows\n";
        auto share = [&](const Variant& v) -> std::pair<std::string, std::size_t> {
            const auto rows = rows_of(res, v);
            std::size_t n = 0;
            for (const StudyRow* r : rows) n += r->optimal() && r->total_shed > cfg.shed_threshold ? 1 : 0;
            if (n == 0) return {"", 0};
            return {format_value(priority_share(rows, cfg.high_priority_ids, cfg.shed_threshold)), n};
        };
        for (double e : cfg.weighted_eps_list) {
            const auto u = share({Variant::Eps, e});
            const auto w = share({Variant::WeightedEps, e});
            os << format_param(e) << ',' << u.first << ',' << w.first << ',' << u.second << ',' << w.second << '\n';
        }
    }

    std::vector<Variant> pvars;
    for (double p : ps) pvars.push_back(p == 1.0 ? Variant{Variant::Baseline, 0.0} : Variant{Variant::PNorm, p});
    std::vector<Variant> evars;
    for (double e : cohort_eps(cfg)) evars.push_back({Variant::Eps, e});
    std::vector<Variant> wvars;
    for (double e : cfg.weighted_eps_list) wvars.push_back({Variant::WeightedEps, e});
    std::vector<Variant> pof_pvars(pvars.begin() + (ps.front() == 1.0 ? 1 : 0), pvars.end());
    {
        auto os = open_csv(dir, "figure1_shed_weighted.csv");
        detail::write_shed_boxes(os, res, {{Variant::Baseline, 0.0}, {Variant::Weighted, 0.0}});
    }
    {
        auto os = open_csv(dir, "figure2_shed_pnorm.csv");
        detail::write_shed_boxes(os, res, pvars);
    }
    {
        auto os = open_csv(dir, "figure3_indices_pnorm.csv");
        detail::write_index_boxes(os, res, pvars);
    }
    {
        auto os = open_csv(dir, "figure4_pof_pnorm.csv");
        detail::write_pof_boxes(os, res, pof_pvars, all_p);
    }
    {
        auto os = open_csv(dir, "figure5_shed_eps.csv");
        detail::write_shed_boxes(os, res, evars, cohort);
    }
    {
        auto os = open_csv(dir, "figure6_indices_eps.csv");
        detail::write_index_boxes(os, res, evars, cohort);
    }
    {
        auto os = open_csv(dir, "figure7_pof_eps.csv");
        detail::write_pof_boxes(os, res, evars, cohort);
    }
    {
        auto os = open_csv(dir, "figure8_indices_weighted_eps.csv");
        detail::write_index_boxes(os, res, wvars);
    }

    const PropertyAudit a = audit(res);
    {
        auto os = open_csv(dir, "audit.csv");
        os << "property,checked,violations\n";
        os << "certificate," << a.certified_results << ',' << a.certificate_failures << '\n';
        os << "weak_duality," << a.optimal_results << ',' << a.weak_duality_failures << '\n';
        os << "eps0_equivalence," << a.eps0_checked << ',' << a.eps0_mismatches << '\n';
        os << "variance_bound," << a.prop1_checked << ',' << a.prop1_violations << '\n';
        os << "monotone_feasibility," << a.prop2_checked << ',' << a.prop2_violations << '\n';
        os << "monotone_total_shed," << a.prop3_checked << ',' << a.prop3_violations << '\n';
        os << "monotone_pof_eps," << a.cor1_checked << ',' << a.cor1_violations << '\n';
        os << "monotone_jain_eps," << a.jain_checked << ',' << a.jain_violations << '\n';
        os << "norm_sandwich," << a.sandwich_checked << ',' << a.sandwich_violations << '\n';
        os << "eps_fair," << a.eps_fair_checked << ',' << a.eps_fair_violations << '\n';
        os << "index_bounds," << a.index_bound_checked << ',' << a.index_bound_violations << '\n';
    }
    {
        auto os = open_csv(dir, "summary.csv");
        os << "key,value\n";
        const auto nm = nonmonotone_pof_count(res);
        std::size_t nl_total = 0;
        for (const auto& s : res.scenarios)
            for (const auto& r : s.rows) nl_total += r.status == SolveStatus::NumericalLimit ? 1 : 0;
        os << "case," << std::filesystem::path(cfg.case_path).filename().string() << '\n';
        os << "buses," << net.buses.size() << '\n';
        os << "lines," << net.lines.size() << '\n';
        os << "loads," << net.loads.size() << '\n';
        os << "k_damaged," << k << '\n';
        os << "mode," << (cfg.sample ? "sample" : "exhaustive") << '\n';
        if (cfg.sample) os << "sample_seed," << cfg.sample->seed << '\n';
        os << "enumerated," << res.enumerated << '\n';
        os << "evaluated," << res.scenarios.size() << '\n';
        os << "qualifying," << res.qualifying_count() << '\n';
        os << "non_qualifying," << res.scenarios.size() - res.qualifying_count() << '\n';
        os << "weights," << res.weights_source << '\n';
        os << "all_eps_cohort_max_eps," << format_param(cfg.cohort_eps_max) << '\n';
        os << "all_eps_cohort," << cohort_size << '\n';
        if (std::find(cfg.eps_list.begin(), cfg.eps_list.end(), 1.0) != cfg.eps_list.end()) {
            const auto c = status_counts(res, {Variant::Eps, 1.0});
            os << "eps1_optimal," << c.optimal << '\n';
            os << "eps1_infeasible," << c.infeasible << '\n';
            os << "eps1_numerical_limit," << c.numerical_limit << '\n';
        }
        os << "nonmonotone_pof_p," << nm.count << '\n';
        os << "nonmonotone_pof_p_cohort," << nm.cohort << '\n';
        os << "numerical_limit_rows," << nl_total << '\n';
        os << "table5_cohort,optimal rows with total shed above threshold\n";
        os << "box_plot_shed_unit,MW\n";
        os << "shed_threshold_pu," << format_value(cfg.shed_threshold) << '\n';
    }
}

/// Loads the case and weights, runs the sweep, and writes outputs when
/// `cfg.output_dir` is set.
inline StudyResult run_study(const StudyConfig& cfg) {
    cfg.validate();
    const Network net = read_case_file(cfg.case_path);
    if (const auto issues = validate(net); !issues.empty()) throw CaseError("invalid case: " + issues.front());
    std::vector<double> w;
    std::string source;
    if (cfg.weights_path.empty()) {
        w = default_priority_weights(net, cfg.high_priority_ids);
        source = "default";
    } else {
        w = read_weights_file(cfg.weights_path, net);
        source = std::filesystem::path(cfg.weights_path).filename().string();
    }
    StudyResult res = run_sweep(cfg, net, std::move(w), std::move(source));
    if (!cfg.output_dir.empty()) write_outputs(res, cfg.output_dir);
    return res;
}

}  // namespace fairshed

#endif  // FAIRSHED_STUDY_HPP
