// Acceptance gate: full 14-bus sweep plus the toy, gadget and index checks.
// One PASS/FAIL line per criterion; exit status 1 if any fails.

#include "../toy_cases.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

using namespace fairshed;

namespace {

struct Gate {
    int failures = 0;

    void report(int id, bool ok, const std::string& what, const std::string& detail) {
        std::printf("%s criterion %2d: %s | %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

bool within_abs(double got, double want, double tol) { return std::abs(got - want) <= tol; }
bool within_rel(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

/// Adds "name got/want" to a detail string and folds the outcome into `ok`.
struct Checks {
    bool ok = true;
    std::ostringstream detail;

    void add(const std::string& name, double got, double want, bool pass) {
        if (detail.tellp() > 0) detail << "; ";
        detail << name << ' ' << fmt("%.4g", got) << '/' << fmt("%.4g", want) << (pass ? "" : "!");
        ok = ok && pass;
    }
};

double max_pof_eps(const StudyResult& res, double e) {
    double mx = -1.0;
    for (const auto& s : res.scenarios)
        if (in_all_eps_cohort(s, res.config))
            if (const StudyRow* r = s.find({Variant::Eps, e}); r && r->pof) mx = std::max(mx, *r->pof);
    return mx;
}

double max_pof_p(const StudyResult& res, double p) {
    const auto ps = sorted_p(res.config.p_list);
    double mx = -1.0;
    for (const auto& s : res.scenarios) {
        if (!s.qualifying) continue;
        bool all = true;
        for (double q : ps) all = all && pof_for_p(s, q).has_value();
        if (all) mx = std::max(mx, *pof_for_p(s, p));
    }
    return mx;
}

double share(const StudyResult& res, const Variant& v) {
    return priority_share(rows_of(res, v), res.config.high_priority_ids, res.config.shed_threshold);
}

// -- toy oracle (criterion 13) ------------------------------------------------

double toy_oracle(const Network& net, const std::function<double(const std::vector<double>&)>& f,
                  const std::function<bool(const std::vector<double>&)>& extra = {}) {
    const double hi0 = net.loads[0].d_max;
    const double hi1 = net.loads.size() > 1 ? net.loads[1].d_max : 0.0;
    auto vec = [&](double a, double b) { return net.loads.size() > 1 ? std::vector<double>{a, b} : std::vector<double>{a}; };
    return toy::grid_min_2d([&](double a, double b) { return f(vec(a, b)); },
                            [&](double a, double b) {
                                const auto d = vec(a, b);
                                return toy::dc_feasible(net, d) && (!extra || extra(d));
                            },
                            hi0, hi1);
}

void criterion13(Gate& gate) {
    const std::vector<std::pair<std::string, Network>> toys{
        {"two_bus", toy::two_bus_net(30)},
        {"radial", parse_case(toy::three_bus(60, 60, 200, toy::branch(1, 2, 0.1, 50) + toy::branch(2, 3, 0.1, 10)))},
        {"triangle", parse_case(toy::three_bus(60, 60, 100,
                                               toy::branch(1, 2, 0.1, 40) + toy::branch(1, 3, 0.2, 100) +
                                                   toy::branch(2, 3, 0.1, 100)))},
    };
    int checked = 0, bad = 0;
    double worst = 0.0;
    auto cmp = [&](const ConicProgram& p, double want) {
        const auto r = solve(p);
        ++checked;
        if (r.status != SolveStatus::Optimal) {
            ++bad;
            return;
        }
        const double rel = std::abs(r.objective_primal - want) / std::max(std::abs(want), 1e-3);
        worst = std::max(worst, rel);
        if (rel > 1e-5) ++bad;
    };
    auto l1 = [](const std::vector<double>& d) { return sum(d); };
    for (const auto& [name, net] : toys) {
        const auto dn = toy::intact(net);
        cmp(build_mls(dn), toy_oracle(net, l1));
        cmp(build_mls_pnorm(dn, 2), toy_oracle(net, [](const std::vector<double>& d) {
                double s = 0;
                for (double v : d) s += v * v;
                return s;
            }));
        cmp(build_mls_minmax(dn),
            toy_oracle(net, [](const std::vector<double>& d) { return *std::max_element(d.begin(), d.end()); }));
        for (double e : {0.3, 0.6, 0.9}) {
            const double k = fairness_kappa(e, net.loads.size());
            const double want = toy_oracle(net, l1, [k](const std::vector<double>& d) {
                double sq = 0;
                for (double v : d) sq += v * v;
                return k * std::sqrt(sq) <= sum(d) + 1e-12;
            });
            cmp(build_fair_mls(dn, e), want);
        }
    }
    gate.report(13, bad == 0, "toy objectives match brute-force grid search (1e-5 rel)",
                std::to_string(checked) + " programs, worst rel " + fmt("%.2e", worst));
}

// -- gadget (criterion 14) ----------------------------------------------------

void criterion14(Gate& gate) {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    int bad = 0;
    double worst = 0.0;
    for (int p : {2, 3, 5, 10}) {
        for (int i = 0; i < 100; ++i) {
            const double d = u(rng);
            ProgramBuilder pb;
            const int t = pb.add_var(ConeKind::Free, "t");
            const int dc = pb.add_var(ConeKind::NonNeg, "d");
            pb.add_row({{dc, 1.0}}, d);
            append_power_epigraph(pb, power_epigraph(p), t, dc, 1.0);
            pb.set_cost(t, 1.0);
            const auto r = solve(pb.build());
            const double want = std::pow(d, p);
            const double rel = r.status == SolveStatus::Optimal ? std::abs(r.primal_x[t] - want) / std::max(want, 1.0) : 1.0;
            worst = std::max(worst, rel);
            if (rel > 1e-6) ++bad;
        }
    }
    gate.report(14, bad == 0, "power gadget min t = d^p, 400 random points", "worst rel " + fmt("%.2e", worst));
}

// -- indices (criterion 15) ---------------------------------------------------

void criterion15(Gate& gate) {
    const std::vector<double> x{1, 2, 3};
    bool ok = std::abs(gini(x) - 1.0 / 3.0) < 1e-12 && std::abs(jain(x) - 6.0 / 7.0) < 1e-12;
    for (std::size_t n : {2u, 10u, 11u}) {
        std::vector<double> hot(n, 0.0), flat(n, 1.5);
        hot[0] = 2.0;
        ok = ok && std::abs(gini(hot) - 1.0) < 1e-12 && std::abs(jain(hot) - 1.0 / n) < 1e-12;
        ok = ok && std::abs(gini(flat)) < 1e-12 && std::abs(jain(flat) - 1.0) < 1e-12;
    }
    gate.report(15, ok, "gini/jain unit values and extremes",
                "gini(1,2,3)=" + fmt("%.6f", gini(x)) + " jain(1,2,3)=" + fmt("%.6f", jain(x)));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance gate"};
    std::string case_path = std::string(FAIRSHED_DATA_DIR) + "/pglib_opf_case14_ieee.m";
    std::string out;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::uint64_t sample = 0;
    app.add_option("--case", case_path);
    app.add_option("--out", out, "where the sweep CSVs go");
    app.add_option("--workers", workers);
    app.add_option("--sample", sample, "quick mode: sample N scenarios (quantitative criteria then only indicative)");
    CLI11_PARSE(app, argc, argv);

    Gate gate;
    criterion15(gate);
    criterion14(gate);
    criterion13(gate);

    StudyConfig cfg;
    cfg.case_path = case_path;
    cfg.output_dir = out;
    cfg.workers = workers;
    if (sample) cfg.sample = SampleSpec{sample, 1};
    const auto t0 = std::chrono::steady_clock::now();
    const StudyResult res = run_study(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::size_t q = res.qualifying_count();
    std::printf("sweep: %zu scenarios, %zu qualifying, %d workers, %.1f s\n", res.scenarios.size(), q, workers, secs);
    // scale paper counts when sampling
    const double scale = sample ? static_cast<double>(res.scenarios.size()) / static_cast<double>(res.enumerated) : 1.0;

    {
        Checks c;
        c.add("enumerated", static_cast<double>(res.enumerated), 15504, res.enumerated == 15504);
        c.add("qualifying", static_cast<double>(q), 9765 * scale, within_rel(static_cast<double>(q), 9765 * scale, 0.01));
        gate.report(1, c.ok, "scenario census", c.detail.str());
    }
    {
        Checks c;
        const auto u = summarize_indices(res, {Variant::Baseline, 0.0});
        const auto w = summarize_indices(res, {Variant::Weighted, 0.0});
        c.add("gini mean", u.gini.mean, 0.86, within_abs(u.gini.mean, 0.86, 0.03));
        c.add("gini mean w", w.gini.mean, 0.85, within_abs(w.gini.mean, 0.85, 0.03));
        c.add("jain mean", u.jain.mean, 0.23, within_abs(u.jain.mean, 0.23, 0.03));
        c.add("jain mean w", w.jain.mean, 0.24, within_abs(w.jain.mean, 0.24, 0.03));
        c.add("gini min", u.gini.min, 0.43, within_abs(u.gini.min, 0.43, 0.03));
        c.add("gini min w", w.gini.min, 0.43, within_abs(w.gini.min, 0.43, 0.03));
        c.add("jain max", u.jain.max, 0.65, within_abs(u.jain.max, 0.65, 0.03));
        c.add("jain max w", w.jain.max, 0.65, within_abs(w.jain.max, 0.65, 0.03));
        gate.report(2, c.ok, "fairness index statistics, MLS vs weighted", c.detail.str());
    }
    {
        Checks c;
        const std::vector<std::pair<double, double>> want{{0.0, 0},   {0.1, 0},   {0.2, 0},    {0.3, 0},
                                                          {0.4, 0},   {0.5, 0},   {0.6, 813},  {0.7, 813},
                                                          {0.8, 1443}, {0.9, 1715}};
        for (const auto& [e, n] : want) {
            const auto sc = status_counts(res, {Variant::Eps, e});
            const double got = static_cast<double>(sc.infeasible);
            const double target = n * scale;
            c.add("eps " + format_param(e), got, target, n == 0 ? got == 0 : within_rel(got, target, 0.03));
        }
        gate.report(3, c.ok, "infeasible counts per eps", c.detail.str());
    }
    {
        Checks c;
        std::size_t cohort = 0;
        for (const auto& s : res.scenarios) cohort += in_all_eps_cohort(s, cfg) ? 1 : 0;
        const auto one = status_counts(res, {Variant::Eps, 1.0});
        c.add("all-eps cohort", static_cast<double>(cohort), 6610 * scale, within_rel(static_cast<double>(cohort), 6610 * scale, 0.03));
        c.add("eps=1 optimal", static_cast<double>(one.optimal), 634 * scale,
              within_rel(static_cast<double>(one.optimal), 634 * scale, 0.05));
        std::ostringstream extra;
        extra << c.detail.str() << "; eps=1 infeasible " << one.infeasible << ", numerical_limit " << one.numerical_limit;
        gate.report(4, c.ok, "feasibility cohorts", extra.str());
    }
    {
        Checks c;
        for (const auto& [e, v] : std::vector<std::pair<double, double>>{{0.1, 0.24}, {0.3, 0.74}, {0.5, 1.42}, {0.7, 2.34}, {0.9, 4.02}}) {
            const double got = max_pof_eps(res, e);
            c.add("eps " + format_param(e), got, v, within_rel(got, v, 0.10));
        }
        gate.report(5, c.ok, "max POF per eps over the all-eps cohort", c.detail.str());
    }
    {
        Checks c;
        const double p2 = max_pof_p(res, 2), pinf = max_pof_p(res, kInf);
        c.add("p=2", p2, 4.38, within_rel(p2, 4.38, 0.25));
        c.add("p=inf", pinf, 10.0, within_rel(pinf, 10.0, 0.25));
        for (const auto& [p, v] : std::vector<std::pair<double, double>>{{3, 101.84}, {5, 1420.98}, {10, 7280.17}}) {
            const double got = max_pof_p(res, p);
            c.add("p=" + format_param(p), got, v, got > 0 && std::abs(std::log10(got / v)) < 1.0);
        }
        gate.report(6, c.ok, "max POF per p", c.detail.str());
    }
    {
        Checks c;
        const auto nm = nonmonotone_pof_count(res);
        c.add("non-monotone", static_cast<double>(nm.count), 5166 * scale,
              within_rel(static_cast<double>(nm.count), 5166 * scale, 0.10));
        gate.report(7, c.ok, "scenarios with POF not monotone in p", c.detail.str() + " of " + std::to_string(nm.cohort));
    }
    {
        Checks c;
        const std::vector<std::tuple<double, double, double>> want{
            {0.0, 15.77, 9.79}, {0.2, 22.60, 7.41}, {0.4, 21.32, 6.00}, {0.6, 17.91, 2.45}, {0.8, 16.96, 4.71}};
        for (const auto& [e, u, w] : want) {
            const double su = share(res, {Variant::Eps, e});
            const double sw = share(res, {Variant::WeightedEps, e});
            c.add("eps " + format_param(e) + " mls", su, u, within_abs(su, u, 3.0));
            c.add("weighted", sw, w, within_abs(sw, w, 3.0) && sw < su);
        }
        gate.report(8, c.ok, "high-priority shed share (%)", c.detail.str());
    }

    const PropertyAudit a = audit(res);
    {
        // non-qualifying scenarios carry no eps rows in the sweep; solve eps=0 for them here
        std::size_t checked = a.eps0_checked, bad = a.eps0_mismatches;
        for (const auto& s : res.scenarios) {
            if (s.qualifying || !s.baseline().optimal()) continue;
            const auto dn = apply_damage(res.network, s.scenario);
            const auto p = build_fair_mls(dn, 0.0);
            const auto r = solve(p);
            ++checked;
            if (r.status != SolveStatus::Optimal || std::abs(sum(extract_shed(p, r)) - s.baseline().total_shed) > 1e-6) ++bad;
        }
        gate.report(9, bad == 0 && checked == res.scenarios.size(), "eps=0 total shed equals baseline",
                    std::to_string(bad) + " mismatches in " + std::to_string(checked));
    }
    {
        const std::size_t v = a.prop1_violations + a.prop2_violations + a.prop3_violations + a.cor1_violations;
        std::ostringstream d;
        d << "variance " << a.prop1_violations << '/' << a.prop1_checked << ", feasibility " << a.prop2_violations << '/'
          << a.prop2_checked << ", total shed " << a.prop3_violations << '/' << a.prop3_checked << ", POF "
          << a.cor1_violations << '/' << a.cor1_checked << " (soft jain: " << a.jain_violations << '/' << a.jain_checked
          << ')';
        gate.report(10, v == 0, "propositions and corollary on every scenario", d.str());
    }
    gate.report(11, a.sandwich_violations == 0, "norm sandwich on every shed vector",
                std::to_string(a.sandwich_violations) + " violations in " + std::to_string(a.sandwich_checked));
    {
        std::ostringstream d;
        d << "certificates " << a.certificate_failures << '/' << a.certified_results << " failed, weak duality "
          << a.weak_duality_failures << '/' << a.optimal_results << " failed, numerical_limit rows " << a.numerical_limit_rows;
        gate.report(12, a.certificate_failures == 0 && a.weak_duality_failures == 0, "certificate audit", d.str());
    }

    std::printf("%d of 15 criteria failed\n", gate.failures);
    return gate.failures == 0 ? 0 : 1;
}
