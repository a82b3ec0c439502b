#include "toy_cases.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

using namespace fairshed;

namespace {

double shed_total(const ConicProgram& p) {
    const auto r = solve(p);
    EXPECT_EQ(r.status, SolveStatus::Optimal);
    return sum(extract_shed(p, r));
}

/// min t subject to the gadget with d fixed.
double min_t(int p, double d) {
    ProgramBuilder pb;
    const int t = pb.add_var(ConeKind::Free, "t");
    const int dc = pb.add_var(ConeKind::NonNeg, "d");
    pb.add_row({{dc, 1.0}}, d);
    append_power_epigraph(pb, power_epigraph(p), t, dc, 1.0, "g");
    pb.set_cost(t, 1.0);
    const auto prog = pb.build();
    const auto r = solve(prog);
    EXPECT_EQ(r.status, SolveStatus::Optimal) << "p=" << p << " d=" << d;
    return r.status == SolveStatus::Optimal ? r.primal_x[t] : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TEST(BuildMls, TwoBusNoShed) {
    const Network net = toy::two_bus_net(100);
    EXPECT_NEAR(shed_total(build_mls(toy::intact(net))), 0.0, 1e-7);
}

TEST(BuildMls, TwoBusRatingCapsFlow) {
    const Network net = toy::two_bus_net(30);
    const auto dn = toy::intact(net);
    const auto prog = build_mls(dn);
    const auto r = solve(prog);
    ASSERT_EQ(r.status, SolveStatus::Optimal);
    const auto d = extract_shed(prog, r);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_NEAR(d[0], 0.2, 1e-7);
    EXPECT_NEAR(shed_total(build_mls_pnorm(dn, 2)), 0.2, 1e-7);
    EXPECT_NEAR(shed_total(build_mls_minmax(dn)), 0.2, 1e-7);
    const auto mm = build_mls_minmax(dn);
    EXPECT_NEAR(solve(mm).objective_primal, 0.2, 1e-7);
}

TEST(BuildMls, UnitWeightsMatchUnweighted) {
    const Network net = read_case_file(std::string(FAIRSHED_DATA_DIR) + "/pglib_opf_case14_ieee.m");
    const auto dn = apply_damage(net, colex_unrank(20, 5, 1234));
    const std::vector<double> ones(net.loads.size(), 1.0);
    const auto a = build_mls(dn), b = build_mls(dn, ones);
    EXPECT_EQ(a.objective_c, b.objective_c);
    EXPECT_THROW(build_mls(dn, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST(BuildMls, StructureAndNames) {
    const Network net = read_case_file(std::string(FAIRSHED_DATA_DIR) + "/pglib_opf_case14_ieee.m");
    const auto dn = apply_damage(net, colex_unrank(20, 5, 777));
    for (const auto& p : {build_mls(dn), build_mls_pnorm(dn, 5), build_mls_minmax(dn), build_fair_mls(dn, 0.4)}) {
        EXPECT_TRUE(check_structure(p).empty());
        int dims = 0;
        for (const auto& c : p.cone_spec) dims += c.dim;
        EXPECT_EQ(dims, p.num_cols());
        EXPECT_EQ(p.equality_A.cols(), p.num_cols());
        EXPECT_EQ(p.shed_columns.size(), net.loads.size());
        EXPECT_EQ(p.column("shed[1]"), p.shed_columns[0]);
        EXPECT_NO_THROW(p.column("angle[14]"));
        EXPECT_NO_THROW(p.column("gen[1]"));
    }
    EXPECT_NO_THROW(build_mls_pnorm(dn, 3).column("epigraph_t[11]"));
    EXPECT_NO_THROW(build_fair_mls(dn, 0.4).column("sum_shed"));
}

TEST(PowerGadget, Shapes) {
    const auto g2 = power_epigraph(2);
    EXPECT_EQ(g2.levels, 1);
    EXPECT_EQ(g2.cones.size(), 1u);
    const auto g3 = power_epigraph(3);
    EXPECT_EQ(g3.levels, 2);
    EXPECT_EQ(g3.leaves.size(), 4u);
    const auto g10 = power_epigraph(10);
    EXPECT_EQ(g10.levels, 4);
    EXPECT_EQ(std::count(g10.leaves.begin(), g10.leaves.end(), GadgetTerm{GadgetTerm::One}), 9);
    EXPECT_EQ(std::count(g10.leaves.begin(), g10.leaves.end(), GadgetTerm{GadgetTerm::D}), 6);
    EXPECT_THROW(power_epigraph(1), std::invalid_argument);
}

TEST(PowerGadget, KnownPoints) {
    EXPECT_NEAR(min_t(3, 2.0), 8.0, 8.0 * 1e-6);
    EXPECT_NEAR(min_t(10, 1.5), std::pow(1.5, 10), std::pow(1.5, 10) * 1e-6);
    EXPECT_NEAR(min_t(2, 0.0), 0.0, 1e-7);
}

TEST(PowerGadget, Soundness) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int p : {2, 3, 5, 10}) {
        for (int i = 0; i < 100; ++i) {
            const double d = u(rng);
            const double want = std::pow(d, p);
            EXPECT_NEAR(min_t(p, d), want, 1e-6 * std::max(want, 1.0)) << "p=" << p << " d=" << d;
        }
    }
}

TEST(EpsFairness, Kappa) {
    EXPECT_DOUBLE_EQ(fairness_kappa(0.0, 10), 1.0);
    EXPECT_NEAR(fairness_kappa(1.0, 10), 3.16227766, 1e-8);
    EXPECT_NEAR(fairness_kappa(0.5, 10), 2.08113883, 1e-8);
}

TEST(EpsFairness, Errors) {
    const Network net = toy::two_bus_net(30);
    const auto p = build_mls(toy::intact(net));
    EXPECT_THROW(add_eps_fairness(p, -0.1), std::invalid_argument);
    EXPECT_THROW(add_eps_fairness(p, 1.1), std::invalid_argument);
    ProgramBuilder pb;
    pb.add_var(ConeKind::NonNeg);
    EXPECT_THROW(add_eps_fairness(pb.build(), 0.5), std::invalid_argument);
}

TEST(EpsFairness, ZeroEpsMatchesBaseline) {
    const Network net = read_case_file(std::string(FAIRSHED_DATA_DIR) + "/pglib_opf_case14_ieee.m");
    for (std::uint64_t ord : {17u, 4000u, 9001u, 15000u}) {
        const auto dn = apply_damage(net, colex_unrank(20, 5, ord));
        EXPECT_NEAR(shed_total(build_fair_mls(dn, 0.0)), shed_total(build_mls(dn)), 1e-6);
    }
}

TEST(EpsFairness, ZeroShedStaysZero) {
    const Network net = toy::two_bus_net(100);
    for (double e : {0.0, 0.5, 1.0}) EXPECT_NEAR(shed_total(build_fair_mls(toy::intact(net), e)), 0.0, 1e-7);
}

TEST(EpsFairness, SymmetricPairEqualAtOne) {
    // both loads behind one 60 MW line; 80 MW demand
    const Network net = parse_case(toy::three_bus(40, 40, 200, toy::branch(1, 2, 0.1, 60) + toy::branch(2, 3, 0.1, 100)));
    const auto prog = build_fair_mls(toy::intact(net), 1.0);
    const auto r = solve(prog);
    ASSERT_EQ(r.status, SolveStatus::Optimal);
    const auto d = extract_shed(prog, r);
    EXPECT_NEAR(d[0], 0.1, 1e-5);
    EXPECT_NEAR(d[1], 0.1, 1e-5);
}

TEST(ExtractShed, ClampsWithinTolerance) {
    const Network net = toy::two_bus_net(30);
    const auto prog = build_mls(toy::intact(net));
    SolveResult r;
    r.status = SolveStatus::Optimal;
    r.primal_x = Eigen::VectorXd::Zero(prog.num_cols());
    r.primal_x[prog.shed_columns[0]] = -1e-9;
    EXPECT_EQ(extract_shed(prog, r)[0], 0.0);
    r.primal_x[prog.shed_columns[0]] = 0.5 + 5e-8;
    EXPECT_EQ(extract_shed(prog, r)[0], 0.5);
    r.primal_x[prog.shed_columns[0]] = -1e-3;
    EXPECT_THROW(extract_shed(prog, r), std::runtime_error);
    r.status = SolveStatus::PrimalInfeasible;
    EXPECT_THROW(extract_shed(prog, r), std::invalid_argument);
}

TEST(DebugFormat, GoldenTwoBus) {
    const Network net = toy::two_bus_net(30);
    std::ostringstream os;
    write_debug(os, build_fair_mls(toy::intact(net), 0.5));
    std::ifstream in(std::string(FAIRSHED_GOLDEN_DIR) + "/two_bus_eps05.txt");
    ASSERT_TRUE(in) << "missing golden file";
    std::stringstream want;
    want << in.rdbuf();
    EXPECT_EQ(os.str(), want.str());
}
