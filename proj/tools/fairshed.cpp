// fairshed: sweep driver for the fair load-shedding study.

#include <fairshed/fairshed.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kCaseError = 3;

struct CaseOpts {
    std::string case_path;
    std::string weights_path;
    int k = 5;
};

void add_case_opts(CLI::App* sub, CaseOpts& o) {
    sub->add_option("--case", o.case_path, "MATPOWER case file")->required();
    sub->add_option("--weights", o.weights_path, "load_id,weight CSV (default: 2 on loads 1 and 2)");
    sub->add_option("--k", o.k, "damaged lines per scenario");
}

fairshed::Network load_case(const CaseOpts& o) {
    fairshed::Network net = fairshed::read_case_file(o.case_path);
    if (const auto issues = fairshed::validate(net); !issues.empty())
        throw fairshed::CaseError("invalid case: " + issues.front());
    return net;
}

std::vector<double> load_weights(const CaseOpts& o, const fairshed::Network& net) {
    if (o.weights_path.empty()) return fairshed::default_priority_weights(net, {1, 2});
    return fairshed::read_weights_file(o.weights_path, net);
}

fairshed::DamageScenario scenario_at(const fairshed::Network& net, int k, std::uint64_t ordinal) {
    return fairshed::colex_unrank(static_cast<int>(net.lines.size()), k, ordinal);
}

std::string line_list(const fairshed::DamageScenario& s) {
    std::string out;
    for (int id : s.line_ids) out += (out.empty() ? "" : ",") + std::to_string(id);
    return out;
}

int cmd_run(const CaseOpts& co, const std::string& p_text, const std::string& eps_text, const std::string& weps_text,
            std::uint64_t sample_n, std::uint64_t seed, int workers, const std::string& out, bool quiet) {
    fairshed::StudyConfig cfg;
    cfg.case_path = co.case_path;
    cfg.weights_path = co.weights_path;
    cfg.k_damaged = co.k;
    cfg.p_list = fairshed::parse_grid(p_text);
    cfg.eps_list = fairshed::parse_grid(eps_text);
    cfg.weighted_eps_list = fairshed::parse_grid(weps_text);
    if (sample_n > 0) cfg.sample = fairshed::SampleSpec{sample_n, seed};
    cfg.workers = workers;
    cfg.output_dir = out;
    if (!quiet) {
        cfg.progress = [](std::size_t done, std::size_t total) {
            if (done % 500 == 0 || done == total) std::fprintf(stderr, "\r%zu/%zu scenarios", done, total);
            if (done == total) std::fputc('\n', stderr);
        };
    }
    cfg.validate();
    const auto res = fairshed::run_study(cfg);
    std::cout << "enumerated " << res.enumerated << "\nevaluated " << res.scenarios.size() << "\nqualifying "
              << res.qualifying_count() << "\noutput " << out << '\n';
    return kOk;
}

int cmd_census(const CaseOpts& co, const std::string& csv) {
    const auto net = load_case(co);
    fairshed::StudyConfig cfg;
    std::size_t qualifying = 0, total = 0;
    std::ofstream os;
    if (!csv.empty()) {
        os.open(csv);
        if (!os) throw std::runtime_error("cannot write " + csv);
        os << "ordinal";
        for (int i = 1; i <= co.k; ++i) os << ",line_id_" << i;
        os << ",baseline_status,baseline_total_shed,qualifying\n";
    }
    auto en = fairshed::enumerate_damage(net, co.k);
    while (auto s = en.next()) {
        const auto dn = fairshed::apply_damage(net, *s);
        const auto row = fairshed::solve_row(fairshed::build_mls(dn), s->ordinal, {}, std::nullopt, cfg);
        const bool q = row.optimal() && row.total_shed > cfg.shed_threshold;
        qualifying += q ? 1 : 0;
        ++total;
        if (os.is_open()) {
            os << s->ordinal;
            for (int id : s->line_ids) os << ',' << id;
            os << ',' << fairshed::status_name(row.status) << ',' << fairshed::format_value(row.total_shed) << ','
               << (q ? 1 : 0) << '\n';
        }
    }
    std::cout << "enumerated " << total << "\nqualifying " << qualifying << "\nnon_qualifying " << total - qualifying
              << '\n';
    return kOk;
}

int cmd_epsmax(const CaseOpts& co, std::uint64_t ordinal, bool weighted, double tol) {
    const auto net = load_case(co);
    const auto w = load_weights(co, net);
    const auto sc = scenario_at(net, co.k, ordinal);
    const auto dn = fairshed::apply_damage(net, sc);
    const double e = fairshed::eps_max(dn, weighted ? std::span<const double>(w) : std::span<const double>(), tol);
    std::cout << "scenario " << ordinal << " lines " << line_list(sc) << "\neps_max " << fairshed::format_value(e) << '\n';
    return kOk;
}

int cmd_solve_one(const CaseOpts& co, std::uint64_t ordinal, const std::string& tag, const std::string& debug_path) {
    const auto net = load_case(co);
    const auto w = load_weights(co, net);
    const auto v = fairshed::Variant::parse(tag);
    const auto sc = scenario_at(net, co.k, ordinal);
    const auto dn = fairshed::apply_damage(net, sc);
    const auto prog = fairshed::build_variant(dn, v, w);
    if (!debug_path.empty()) {
        std::ofstream os(debug_path);
        if (!os) throw std::runtime_error("cannot write " + debug_path);
        fairshed::write_debug(os, prog);
    }
    fairshed::StudyConfig cfg;
    std::optional<double> base;
    if (v.kind != fairshed::Variant::Baseline) {
        const auto ref = v.uses_weights() ? fairshed::build_mls(dn, w) : fairshed::build_mls(dn);
        const auto r = fairshed::solve(ref, cfg.solver);
        if (r.status == fairshed::SolveStatus::Optimal) base = fairshed::sum(fairshed::extract_shed(ref, r));
    }
    const auto row = fairshed::solve_row(prog, ordinal, v, base, cfg);
    std::cout << "scenario " << ordinal << " lines " << line_list(sc) << "\nvariant " << v.tag() << "\nstatus "
              << fairshed::status_name(row.status) << "\niterations " << row.iterations << "\ncertificate_ok "
              << (row.certificate_ok ? 1 : 0) << '\n';
    if (!row.optimal()) return kOk;
    std::cout << "objective " << fairshed::format_value(row.objective_primal) << "\ntotal_shed_mw "
              << fairshed::format_value(row.total_shed * net.base_mva) << "\ngini " << fairshed::format_value(row.gini)
              << "\njain " << fairshed::format_value(row.jain) << "\npof "
              << (row.pof ? fairshed::format_value(*row.pof) : std::string("undefined")) << "\nload_id,shed_mw\n";
    for (std::size_t i = 0; i < row.shed.size(); ++i)
        std::cout << net.loads[i].id << ',' << fairshed::format_value(row.shed[i] * net.base_mva) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fair load shedding study"};
    app.require_subcommand(1);

    CaseOpts run_case, census_case, eps_case, one_case;

    auto* run = app.add_subcommand("run", "full scenario sweep with tables and box-plot data");
    add_case_opts(run, run_case);
    std::string p_text = "1,2,3,5,10,inf", eps_text = "0:1:0.1", weps_text = "0,0.2,0.4,0.6,0.8", out;
    std::uint64_t sample_n = 0, seed = 0;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    bool quiet = false;
    run->add_option("--p", p_text, "p values, comma list, inf allowed");
    run->add_option("--eps", eps_text, "eps grid, lo:hi:step or comma list");
    run->add_option("--weighted-eps", weps_text, "eps grid for the weighted study");
    auto* sample_opt = run->add_option("--sample", sample_n, "random sample of N scenarios instead of all");
    run->add_option("--seed", seed, "sampling seed")->needs(sample_opt);
    run->add_option("--workers", workers, "worker threads");
    run->add_option("--out", out, "output directory")->required();
    run->add_flag("--quiet", quiet, "no progress output");

    auto* census = app.add_subcommand("census", "enumerate scenarios and count qualifying ones");
    add_case_opts(census, census_case);
    std::string census_csv;
    census->add_option("--csv", census_csv, "write the census here");

    auto* epsmax = app.add_subcommand("epsmax", "largest feasible eps for one scenario");
    add_case_opts(epsmax, eps_case);
    std::uint64_t eps_ord = 0;
    bool eps_weighted = false;
    double eps_tol = 1e-3;
    epsmax->add_option("--scenario", eps_ord, "scenario ordinal")->required();
    epsmax->add_flag("--weighted", eps_weighted, "use the weighted objective");
    epsmax->add_option("--tol", eps_tol, "bisection tolerance");

    auto* one = app.add_subcommand("solve-one", "solve one variant of one scenario");
    add_case_opts(one, one_case);
    std::uint64_t one_ord = 0;
    std::string variant, debug_path;
    one->add_option("--scenario", one_ord, "scenario ordinal")->required();
    one->add_option("--variant", variant, "baseline, weighted, pnorm(p), eps(e), weighted_eps(e)")->required();
    one->add_option("--debug", debug_path, "dump the conic program here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (run->parsed()) return cmd_run(run_case, p_text, eps_text, weps_text, sample_n, seed, workers, out, quiet);
        if (census->parsed()) return cmd_census(census_case, census_csv);
        if (epsmax->parsed()) return cmd_epsmax(eps_case, eps_ord, eps_weighted, eps_tol);
        if (one->parsed()) return cmd_solve_one(one_case, one_ord, variant, debug_path);
    } catch (const fairshed::CaseError& e) {
        std::cerr << "case error: " << e.what() << '\n';
        return kCaseError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
