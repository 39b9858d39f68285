#include "helpers.hpp"

#include <doctest.h>

using namespace rsced;
using namespace testutil;

TEST_CASE("shift factors: radial two-bus")
{
    Network n;
    n.numBuses = 2;
    n.lines = {{0, 1, 0.1, 100.0}};
    const Mat g = buildShiftFactors(n);
    CHECK(g(0, 0) == doctest::Approx(0.0));
    CHECK(g(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("shift factors: equal-reactance ring")
{
    Network n;
    n.numBuses = 3;
    n.lines = {{0, 1, 1.0, 100.0}, {1, 2, 1.0, 100.0}, {0, 2, 1.0, 100.0}};
    const Mat g = buildShiftFactors(n);
    // Reduced system [[2,-1],[-1,2]] theta = e_1 gives theta = (2/3, 1/3); flow 0->1 = -2/3.
    CHECK(g(0, 1) == doctest::Approx(-2.0 / 3.0));
    CHECK(g(0, 2) == doctest::Approx(-1.0 / 3.0));
    for (int l = 0; l < 3; ++l) CHECK(g(l, 0) == doctest::Approx(0.0));
}

TEST_CASE("shift factors reproduce a direct DC solve")
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        PortableRng rng(seed);
        Network n;
        n.numBuses = 3 + rng.below(5);
        n.slack = rng.below(n.numBuses);
        for (int m = 1; m < n.numBuses; ++m) n.lines.push_back({rng.below(m), m, 0.05 + rng.uniform(), 100.0});
        for (int k = 0; k < 3; ++k) {
            const int a = rng.below(n.numBuses), b = rng.below(n.numBuses);
            if (a != b) n.lines.push_back({a, b, 0.05 + rng.uniform(), 100.0});
        }
        const Mat g = buildShiftFactors(n);
        Vec inj(n.numBuses);
        for (int m = 0; m < n.numBuses; ++m) inj[m] = rng.uniform() * 10.0 - 5.0;
        inj[n.slack] = 0.0;
        inj[n.slack] = -inj.sum();

        // Oracle: full Laplacian with the slack angle fixed at 0.
        const int nb = n.numBuses;
        Mat B = Mat::Zero(nb, nb);
        for (const Line& l : n.lines) {
            const double y = 1.0 / l.reactance;
            B(l.from, l.from) += y;
            B(l.to, l.to) += y;
            B(l.from, l.to) -= y;
            B(l.to, l.from) -= y;
        }
        B.row(n.slack).setZero();
        B.col(n.slack).setZero();
        B(n.slack, n.slack) = 1.0;
        Vec rhs = inj;
        rhs[n.slack] = 0.0;
        const Vec theta = B.fullPivLu().solve(rhs);
        const Vec flow = g * inj;
        double outOfSlack = 0.0;
        for (size_t l = 0; l < n.lines.size(); ++l) {
            const Line& ln = n.lines[l];
            CHECK(flow[l] == doctest::Approx((theta[ln.from] - theta[ln.to]) / ln.reactance).epsilon(1e-9));
            if (ln.from == n.slack) outOfSlack += flow[l];
            if (ln.to == n.slack) outOfSlack -= flow[l];
        }
        // Net flow leaving the slack equals what everybody else withdraws.
        CHECK(outOfSlack == doctest::Approx(inj[n.slack]).epsilon(1e-9));
    }
}

TEST_CASE("unit blocks: substitution into the limits")
{
    const Unit u{"U", 0, 10.0, 100.0, 20.0, 20.0, 0.0, 0.0, 0.0, 50.0};
    const UnitBlock b = buildUnitBlocks(u, {1}, {0}, {0});
    CHECK(b.R[0] == doctest::Approx(100.0));
    CHECK(b.R[1] == doctest::Approx(-10.0));
    CHECK(b.R[2] == doctest::Approx(70.0));
    CHECK(b.R[3] == doctest::Approx(-30.0));
    CHECK(b.A(0, 0) == 1.0);
    CHECK(b.A(1, 0) == -1.0);
    CHECK(b.A(2, 0) == 1.0);
    CHECK(b.A(3, 0) == -1.0);
}

TEST_CASE("unit blocks: off unit and start-up ramp")
{
    const Unit u{"U", 0, 10.0, 100.0, 20.0, 20.0, 0.0, 0.0, 0.0, 0.0};
    const UnitBlock b = buildUnitBlocks(u, {0, 1}, {0, 1}, {0, 0});
    // Interval 0 off: both capacity rows pin P to 0.
    CHECK(b.R[0] == doctest::Approx(0.0));
    CHECK(b.R[2] == doctest::Approx(0.0));
    // Ramp-up row of interval 1 (starting): P1 - P0 <= Pmin.
    const int rampUp1 = 2 * 2 + 1;
    CHECK(b.R[rampUp1] == doctest::Approx(10.0));
    CHECK(b.A(rampUp1, 1) == 1.0);
    CHECK(b.A(rampUp1, 0) == -1.0);
}

TEST_CASE("deterministic SCED: one bus")
{
    MarketCase c = singleBus(0.05, 10.0, 50.0, 7.0);
    const ClearingRun r = clearMarket(c, true);
    REQUIRE(r.solution.optimal());
    CHECK(r.solution.P[0][0] == doctest::Approx(50.0));
    CHECK(r.solution.objective == doctest::Approx(0.05 * 2500 + 10.0 * 50 + 7.0));
}

TEST_CASE("deterministic SCED: three-bus cost")
{
    const ClearingRun r = clearMarket(threeBusCase(), true);
    REQUIRE(r.solution.optimal());
    CHECK(r.solution.objective == doctest::Approx(1333.5).epsilon(1e-6));
}

TEST_CASE("deterministic SCED: load above capacity is infeasible")
{
    MarketCase c = threeBusCase();
    c.loads.demand(0, 1) += 200.0;
    const ClearingRun r = clearMarket(c, true);
    CHECK(r.solution.status == QpStatus::Infeasible);
}

TEST_CASE("robust counterpart: three-bus cost")
{
    const ClearingRun r = clearMarket(threeBusCase());
    REQUIRE(r.solution.optimal());
    CHECK(r.solution.objective == doctest::Approx(1380.9375).epsilon(1e-6));
}

TEST_CASE("robust counterpart: without the causal mask the policy anticipates")
{
    MarketCase c = threeBusCase();
    c.settings.causal = false;
    const ClearingRun r = clearMarket(c);
    REQUIRE(r.solution.optimal());
    CHECK(r.solution.objective <= 1380.9375 + 1e-6);
    CHECK(r.solution.objective >= 1333.5 - 1e-6);
}

TEST_CASE("robust counterpart: zero levels collapse to the deterministic value")
{
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        MarketCase c = randomSmallCase(seed);
        c.uncertainty.h.setZero();
        c.moments.sigma.setZero();
        c.boxBudget.reset();
        const ClearingRun det = clearMarket(c, true);
        const ClearingRun rob = clearMarket(c);
        if (!det.solution.optimal()) continue;
        REQUIRE(rob.solution.optimal());
        CHECK(relDiff(rob.solution.objective, det.solution.objective) < 1e-7);
        CHECK(checkKkt(rob.program, rob.solution).worst() < 1e-6);
    }
}

TEST_CASE("robust counterpart: same result with and without the shortcuts")
{
    for (std::uint64_t seed = 11; seed <= 16; ++seed) {
        const MarketCase c = randomSmallCase(seed);
        ProgramOptions plain;
        plain.screenLines = false;
        plain.eliminatePinned = false;
        const RobustProgram full = buildRobustCounterpart(c, plain);
        const RobustProgram fast = buildRobustCounterpart(c);
        CHECK(full.qp.n > fast.qp.n);
        const PrimalDualSolution a = solve(full), b = solve(fast);
        REQUIRE(a.status == b.status);
        if (!a.optimal()) continue;
        CHECK(relDiff(a.objective, b.objective) < 1e-7);
        CHECK(checkKkt(full, a).worst() < 1e-6);
        CHECK(checkKkt(fast, b).worst() < 1e-6);
    }
}

TEST_CASE("robust counterpart: pinned coordinates inside a budget row")
{
    for (std::uint64_t seed = 41; seed <= 46; ++seed) {
        MarketCase c = randomSmallCase(seed);
        // One extra row summing every coordinate of each interval, pinned ones included.
        const int nk = c.uncertainty.rows(), nt = c.periods(), nd = c.numBuses();
        c.uncertainty.S.conservativeResize(nk + nt, Eigen::NoChange);
        c.uncertainty.h.conservativeResize(nk + nt);
        c.uncertainty.S.bottomRows(nt).setZero();
        for (int t = 0; t < nt; ++t) {
            for (int m = 0; m < nd; ++m) c.uncertainty.S(nk + t, uncertaintyIndex(nd, nt, m, t)) = 1.0;
            c.uncertainty.h[nk + t] = 3.0;
        }
        c.boxBudget.reset();
        ProgramOptions plain;
        plain.eliminatePinned = false;
        const RobustProgram full = buildRobustCounterpart(c, plain);
        const RobustProgram fast = buildRobustCounterpart(c);
        const PrimalDualSolution a = solve(full), b = solve(fast);
        REQUIRE(a.status == b.status);
        if (!a.optimal()) continue;
        CHECK(relDiff(a.objective, b.objective) < 1e-7);
        CHECK(checkKkt(fast, b).worst() < 1e-6);
    }
}

TEST_CASE("robust counterpart: larger levels never lower the cost")
{
    int compared = 0;
    for (std::uint64_t seed = 21; seed <= 32; ++seed) {
        MarketCase c = randomSmallCase(seed, {true, true, false});
        const ClearingRun base = clearMarket(c);
        c.uncertainty.h *= 1.5;
        const ClearingRun big = clearMarket(c);
        if (!base.solution.optimal()) continue;
        if (!big.solution.optimal()) {
            CHECK(big.solution.status == QpStatus::Infeasible);
            continue;
        }
        CHECK(big.solution.objective >= base.solution.objective - 1e-6 * (1 + std::abs(base.solution.objective)));
        ++compared;
    }
    CHECK(compared >= 4);
}

TEST_CASE("robust counterpart: zero covariance drops the quadratic G term")
{
    MarketCase c = randomSmallCase(5, {true, false, false});
    c.moments.sigma.setZero();
    const RobustProgram p = buildRobustCounterpart(c);
    for (size_t v = 0; v < p.vars.size(); ++v)
        if (p.vars[v].kind == VarKind::G) CHECK(p.qp.H.col(static_cast<int>(v)).norm() == 0.0);
    CHECK(hessianPsd(p.qp));
    // Diagonal, nonnegative with q_i I.
    for (int k = 0; k < p.qp.H.outerSize(); ++k)
        for (SpMat::InnerIterator it(p.qp.H, k); it; ++it) {
            CHECK(it.row() == it.col());
            CHECK(it.value() >= 0.0);
        }
}

TEST_CASE("robust value is at least the deterministic value")
{
    for (std::uint64_t seed = 40; seed <= 47; ++seed) {
        const MarketCase c = randomSmallCase(seed);
        const ClearingRun det = clearMarket(c, true);
        const ClearingRun rob = clearMarket(c);
        if (!rob.solution.optimal()) continue;
        REQUIRE(det.solution.optimal());
        CHECK(rob.solution.objective >= det.solution.objective - 1e-6);
    }
}

TEST_CASE("row tags name every constraint")
{
    const RobustProgram p = buildRobustCounterpart(threeBusCase());
    CHECK(p.eqTags.size() == static_cast<size_t>(p.qp.Aeq.rows()));
    CHECK(p.inTags.size() == static_cast<size_t>(p.qp.Ain.rows()));
    CHECK(p.vars.size() == static_cast<size_t>(p.qp.n));
    int unitLimits = 0;
    for (const RowTag& t : p.inTags) unitLimits += t.kind == RowKind::UnitLimit;
    CHECK(unitLimits == 2 * 4 * 3);
}
