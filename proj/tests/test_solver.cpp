#include "toy_cases.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace fairshed;

namespace {

ConicProgram soc345() {
    ProgramBuilder pb;
    const int t = pb.add_block(ConeKind::SOC, 3);
    pb.set_cost(t, 1.0);
    pb.add_row({{t + 1, 1.0}}, 3.0);
    pb.add_row({{t + 2, 1.0}}, 4.0);
    return pb.build();
}

ConicProgram simplex_lp(double rhs) {
    ProgramBuilder pb;
    const int x = pb.add_block(ConeKind::NonNeg, 2);
    pb.set_cost(x, 1.0);
    pb.set_cost(x + 1, 1.0);
    pb.add_row({{x, 1.0}, {x + 1, 1.0}}, rhs);
    return pb.build();
}

/// sqrt(2) ||d|| <= d1 + d2 with d1 = 0.3 and d2 <= 0.1.
ConicProgram fair_pair_infeasible() {
    ProgramBuilder pb;
    const int d1 = pb.add_var(ConeKind::NonNeg, "shed[1]");
    const int d2 = pb.add_var(ConeKind::NonNeg, "shed[2]");
    const int u2 = pb.add_var(ConeKind::NonNeg);
    pb.set_cost(d1, 1.0);
    pb.set_cost(d2, 1.0);
    pb.add_row({{d1, 1.0}}, 0.3);
    pb.add_row({{d2, 1.0}, {u2, 1.0}}, 0.1);
    pb.set_shed({d1, d2}, {0.3, 0.1});
    return add_eps_fairness(pb.build(), 1.0);
}

}  // namespace

TEST(Solve, SocNorm) {
    const auto p = soc345();
    const auto r = solve(p);
    ASSERT_EQ(r.status, SolveStatus::Optimal);
    EXPECT_NEAR(r.objective_primal, 5.0, 1e-7);
    EXPECT_TRUE(check_certificate(p, r));
}

TEST(Solve, SimplexLp) {
    const auto p = simplex_lp(1.0);
    const auto r = solve(p);
    ASSERT_EQ(r.status, SolveStatus::Optimal);
    EXPECT_NEAR(r.objective_primal, 1.0, 1e-7);
    EXPECT_NEAR(r.primal_x.sum(), 1.0, 1e-7);
    EXPECT_TRUE(check_certificate(p, r));
}

TEST(Solve, DegenerateLpGivesVertex) {
    const auto p = simplex_lp(1.0);
    SolveSettings interior;
    interior.vertex_solution = false;
    const auto c = solve(p, interior);
    ASSERT_EQ(c.status, SolveStatus::Optimal);
    // centre of the optimal face
    EXPECT_NEAR(c.primal_x(0), 0.5, 1e-6);

    const auto v = solve(p);
    ASSERT_EQ(v.status, SolveStatus::Optimal);
    EXPECT_NEAR(std::min(v.primal_x(0), v.primal_x(1)), 0.0, 1e-12);
    EXPECT_NEAR(std::max(v.primal_x(0), v.primal_x(1)), 1.0, 1e-9);
    EXPECT_TRUE(check_certificate(p, v));
}

TEST(Solve, VertexKeepsObjectiveOnMls) {
    const Network net = read_case_file(std::string(FAIRSHED_DATA_DIR) + "/pglib_opf_case14_ieee.m");
    SolveSettings interior;
    interior.vertex_solution = false;
    for (std::uint64_t ord : {0u, 77u, 4000u, 15503u}) {
        const auto p = build_mls(apply_damage(net, colex_unrank(20, 5, ord)));
        const auto a = solve(p, interior);
        const auto b = solve(p);
        ASSERT_EQ(a.status, SolveStatus::Optimal);
        ASSERT_EQ(b.status, SolveStatus::Optimal);
        EXPECT_NEAR(a.objective_primal, b.objective_primal, 1e-7) << ord;
        EXPECT_TRUE(check_certificate(p, b)) << ord;
    }
}

TEST(Solve, WideMagnitudeRange) {
    // min t with t >= 10^10 through the tower; iterates span ten decades
    ProgramBuilder pb;
    const int t = pb.add_var(ConeKind::Free, "t");
    const int d = pb.add_var(ConeKind::NonNeg, "d");
    pb.add_row({{d, 1.0}}, 10.0);
    append_power_epigraph(pb, power_epigraph(10), t, d, 1.0);
    pb.set_cost(t, 1.0);
    const auto p = pb.build();
    const auto r = solve(p);
    ASSERT_EQ(r.status, SolveStatus::Optimal);
    EXPECT_NEAR(r.primal_x(t), 1e10, 1e-6 * 1e10);
    EXPECT_TRUE(check_certificate(p, r));
}

TEST(Solve, SignContradictionInfeasible) {
    const auto p = simplex_lp(-1.0);
    const auto r = solve(p);
    ASSERT_EQ(r.status, SolveStatus::PrimalInfeasible);
    EXPECT_GT(p.equality_b.dot(r.dual_y), 0.0);
    EXPECT_TRUE(check_certificate(p, r));
}

TEST(Solve, FairPairInfeasible) {
    const auto p = fair_pair_infeasible();
    const auto r = solve(p);
    ASSERT_EQ(r.status, SolveStatus::PrimalInfeasible);
    EXPECT_TRUE(check_certificate(p, r));
}

TEST(Solve, UnboundedIsDualInfeasible) {
    ProgramBuilder pb;
    const int x = pb.add_var(ConeKind::Free);
    const int s = pb.add_var(ConeKind::NonNeg);
    pb.set_cost(x, -1.0);
    pb.add_row({{x, 1.0}, {s, -1.0}}, 0.0);
    const auto r = solve(pb.build());
    EXPECT_EQ(r.status, SolveStatus::DualInfeasible);
}

TEST(Solve, RotatedCone) {
    // min v + w subject to u = 2, u^2 <= v w: optimum v = w = 2
    ProgramBuilder pb;
    const int c = pb.add_block(ConeKind::RotatedSOC, 3);
    pb.set_cost(c, 1.0);
    pb.set_cost(c + 1, 1.0);
    pb.add_row({{c + 2, 1.0}}, 2.0);
    const auto p = pb.build();
    const auto r = solve(p);
    ASSERT_EQ(r.status, SolveStatus::Optimal);
    EXPECT_NEAR(r.objective_primal, 4.0, 1e-6);
    EXPECT_TRUE(check_certificate(p, r));
}

TEST(Solve, MalformedRejected) {
    auto p = soc345();
    p.cone_spec.back().dim = 2;
    EXPECT_THROW(solve(p), std::invalid_argument);
    SolveSettings bad;
    bad.feas_tol = 0.0;
    EXPECT_THROW(solve(soc345(), bad), std::invalid_argument);
}

TEST(Certificate, PerturbedOptimumFails) {
    const auto p = soc345();
    auto r = solve(p);
    ASSERT_TRUE(check_certificate(p, r));
    r.primal_x[1] += 1e-3;
    EXPECT_FALSE(check_certificate(p, r));
}

TEST(Certificate, ScaledRayStillPasses) {
    for (const auto& p : {simplex_lp(-1.0), fair_pair_infeasible()}) {
        auto r = solve(p);
        ASSERT_EQ(r.status, SolveStatus::PrimalInfeasible);
        r.dual_y *= 2.0;
        EXPECT_TRUE(check_certificate(p, r));
        r.dual_y *= -1.0;
        EXPECT_FALSE(check_certificate(p, r));
    }
}

TEST(Certificate, OtherStatusesFail) {
    SolveResult r;
    r.status = SolveStatus::NumericalLimit;
    EXPECT_FALSE(check_certificate(soc345(), r));
}

TEST(Solve, ScaleInvarianceOfStatus) {
    const Network net = read_case_file(std::string(FAIRSHED_DATA_DIR) + "/pglib_opf_case14_ieee.m");
    for (std::uint64_t ord : {3u, 2500u, 7777u, 12000u}) {
        const auto dn = apply_damage(net, colex_unrank(20, 5, ord));
        for (auto p : {build_mls(dn), build_mls_pnorm(dn, 3), build_fair_mls(dn, 0.8)}) {
            const auto a = solve(p);
            p.objective_c *= 10.0;
            const auto b = solve(p);
            ASSERT_EQ(a.status, b.status) << ord;
            if (a.status == SolveStatus::Optimal) {
                EXPECT_NEAR(b.objective_primal, 10.0 * a.objective_primal, 1e-6 * (1.0 + std::abs(b.objective_primal)));
            }
        }
    }
}

TEST(Solve, WeakDualityAndDeterminism) {
    const Network net = read_case_file(std::string(FAIRSHED_DATA_DIR) + "/pglib_opf_case14_ieee.m");
    const auto dn = apply_damage(net, colex_unrank(20, 5, 4321));
    const auto p = build_mls_pnorm(dn, 2);
    const auto a = solve(p), b = solve(p);
    ASSERT_EQ(a.status, SolveStatus::Optimal);
    EXPECT_LE(a.objective_dual, a.objective_primal + 1e-8);
    EXPECT_EQ(a.primal_x, b.primal_x);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Solve, IterationLog) {
    std::ostringstream log;
    SolveSettings s;
    s.iteration_log = &log;
    const auto r = solve(soc345(), s);
    std::istringstream in(log.str());
    std::string header, line;
    std::getline(in, header);
    EXPECT_NE(header.find("iter"), std::string::npos);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_GE(rows, r.iterations);
}
