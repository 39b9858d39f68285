#include "helpers.hpp"

#include <doctest.h>

using namespace rsced;
using namespace testutil;

namespace {

MarketCase oneUnitTwoIntervals(double p0)
{
    MarketCase c = singleBus(0.0, 25.0, 23.35);
    c.units[0].pmin = 5.0;
    c.units[0].pmax = 80.0;
    c.units[0].rampUp = c.units[0].rampDown = 10.0;
    c.units[0].p0 = p0;
    c.loads.dt = 0.25;
    c.loads.demand = (Mat(1, 2) << 23.35, 23.4).finished();
    c.commitment = CommitmentSchedule::allOn(1, 2);
    c.uncertainty.S = Mat::Zero(4, 2);
    c.uncertainty.S << 1, 0, -1, 0, 0, 1, 0, -1;
    c.uncertainty.h = Vec::Zero(4);
    c.moments.sigma = Mat::Zero(2, 2);
    return c;
}

double solveWith(RobustProgram p, void (*edit)(QpProblem&, int, double), int row, double delta)
{
    edit(p.qp, row, delta);
    const PrimalDualSolution s = solve(p, 1e-10, 300);
    REQUIRE(s.optimal());
    return s.objective;
}

}  // namespace

TEST_CASE("reserve quantities from the dispatch")
{
    const MarketCase c = oneUnitTwoIntervals(23.35);
    const ReserveReport r = computeReserves(c, {(Vec(2) << 23.35, 23.4).finished()});
    CHECK(r.rampUp(0, 1) == doctest::Approx(9.95));
    CHECK(r.capUp(0, 0) == doctest::Approx(56.65));
    CHECK(r.capDown(0, 0) == doctest::Approx(18.35));
    CHECK(r.rampDown(0, 1) == doctest::Approx(10.05));
    CHECK_THROWS_AS(computeReserves(c, {(Vec(2) << 23.35, 90.0).finished()}), DispatchError);
}

TEST_CASE("start-up ramp reserve at minimum output is zero")
{
    MarketCase c = oneUnitTwoIntervals(0.0);
    c.units[0].pmin = 10.0;
    c.units[0].rampUp = 20.0;
    c.commitment.on[0] = {0, 1};
    c.commitment.startup[0] = {0, 1};
    const ReserveReport r = computeReserves(c, {(Vec(2) << 0.0, 10.0).finished()});
    CHECK(r.rampUp(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("credit arithmetic")
{
    ReserveReport r;
    r.nt = 1;
    r.slack = {(Vec(4) << 0.0, 0.0, 0.15, 9.95).finished()};
    computeCredits(r, {(Vec(4) << 0.0, 0.0, 15.0, 7.5).finished()}, 0.25);
    CHECK(r.creditRows[0][2] == doctest::Approx(0.5625).epsilon(1e-12));
    CHECK(r.creditRows[0][3] == doctest::Approx(18.65625).epsilon(1e-12));
    CHECK(r.valuable[0][2]);
    CHECK_FALSE(r.valuable[0][0]);

    // Available but not valuable: no credit.
    ReserveReport z;
    z.nt = 1;
    z.slack = {(Vec(4) << 30.0, 5.0, 8.0, 1.0).finished()};
    computeCredits(z, {Vec::Zero(4)}, 0.25);
    CHECK(z.credit[0] == 0.0);
}

TEST_CASE("three-bus prices and credits")
{
    const MarketCase c = threeBusCase();
    const Clearing run = runClearing(c, false);
    REQUIRE(run.solution.optimal());
    const PriceSet& p = run.prices;
    for (int m = 0; m < 3; ++m) CHECK(p.busLmp(m, 0) == doctest::Approx(10.0).epsilon(1e-6));
    const double t23[3] = {10.0, 32.5, 23.5};
    for (int t = 1; t < 3; ++t)
        for (int m = 0; m < 3; ++m) CHECK(p.busLmp(m, t) == doctest::Approx(t23[m]).epsilon(1e-6));

    const int nt = 3;
    auto price = [&](int i, UnitRow k, int t) { return p.reserve[i][static_cast<int>(k) * nt + t]; };
    CHECK(price(1, UnitRow::RampUp, 1) == doctest::Approx(15.0).epsilon(1e-6));
    CHECK(price(1, UnitRow::RampUp, 2) == doctest::Approx(7.5).epsilon(1e-6));
    for (int i = 0; i < 2; ++i)
        for (int t = 0; t < nt; ++t) {
            CHECK(std::abs(price(i, UnitRow::CapUpper, t)) < 1e-6);
            CHECK(std::abs(price(i, UnitRow::CapLower, t)) < 1e-6);
        }
    const int r1 = static_cast<int>(UnitRow::RampUp) * nt + 1, r2 = r1 + 1;
    CHECK(run.reserves.creditRows[1][r1] == doctest::Approx(0.5625).epsilon(1e-6));
    CHECK(run.reserves.creditRows[1][r2] == doctest::Approx(18.65625).epsilon(1e-6));
    CHECK(run.reserves.credit[0] == doctest::Approx(0.0).epsilon(1e-6));

    // Integrated-LMP delta for G2: -dt * (15 * (P1 - P0) + 7.5 * (P2 - P1)).
    const Vec& P = run.solution.P[1];
    const double expect = -0.25 * (15.0 * (P[1] - P[0]) + 7.5 * (P[2] - P[1]));
    CHECK(p.integratedDelta[1] == doctest::Approx(expect).epsilon(1e-6));
    CHECK(p.integratedDelta[1] < 0.0);
}

TEST_CASE("no congestion: every bus pays the system price")
{
    const MarketCase c = randomSmallCase(3, {true, false, true});
    const Clearing run = runClearing(c, true);
    REQUIRE(run.solution.optimal());
    REQUIRE(run.solution.eta.lpNorm<Eigen::Infinity>() < 1e-9);
    for (int m = 0; m < c.numBuses(); ++m)
        for (int t = 0; t < c.periods(); ++t) CHECK(run.prices.busLmp(m, t) == doctest::Approx(run.prices.energy[t]));
}

TEST_CASE("integrated LMP equals the LMP when alpha is zero")
{
    const Clearing run = runClearing(singleBus(0.05, 10.0, 50.0), true);
    REQUIRE(run.solution.optimal());
    CHECK(run.solution.alpha[0].lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK((run.prices.integrated[0] - run.prices.unitEnergy[0]).norm() < 1e-9);
}

TEST_CASE("binding capacity makes the integrated delta negative")
{
    MarketCase c = singleBus(0.01, 10.0, 50.0);
    c.units.push_back(Unit{"dear", 0, 0.0, 100.0, 100.0, 100.0, 0.01, 30.0, 0.0, 20.0});
    c.units[0].pmax = 30.0;
    c.units[0].p0 = 30.0;
    c.commitment = CommitmentSchedule::allOn(2, 1);
    const Clearing run = runClearing(c, true);
    REQUIRE(run.solution.optimal());
    CHECK(run.solution.P[0][0] == doctest::Approx(30.0));
    CHECK(run.prices.reserve[0][0] > 1.0);
    CHECK(run.prices.integratedDelta[0] < 0.0);
}

TEST_CASE("credits add up to alpha times slack")
{
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const MarketCase c = randomSmallCase(seed);
        const Clearing run = runClearing(c, false);
        if (!run.solution.optimal()) continue;
        double lhs = 0.0, rhs = 0.0;
        const ConstraintBlocks& b = run.program.blocks;
        for (int i = 0; i < c.numUnits(); ++i) {
            lhs += run.reserves.creditRows[i].sum();
            rhs += run.solution.alpha[i].dot(b.R[i] - b.A * run.solution.P[i]);
            CHECK(run.reserves.credit[i] >= -1e-6);
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("prices and slacks are complementary")
{
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const MarketCase c = randomSmallCase(seed);
        for (bool det : {true, false}) {
            const Clearing run = runClearing(c, det);
            if (!run.solution.optimal()) continue;
            const ConstraintBlocks& b = run.program.blocks;
            for (int i = 0; i < c.numUnits(); ++i) {
                Vec slack = b.R[i] - b.A * run.solution.P[i];
                // The robust row also carries the worst-case term rho'h.
                if (!det)
                    for (int r = 0; r < slack.size(); ++r)
                        slack[r] -= Vec(run.solution.rho[i].col(r)).dot(run.program.h);
                for (int r = 0; r < slack.size(); ++r) {
                    const double price = run.prices.reserve[i][r];
                    if (price > 1e-4) CHECK(slack[r] <= 1e-5);
                    if (slack[r] > 1e-4) CHECK(price <= 1e-5);
                }
            }
        }
    }
}

// Cost sensitivities by central differences on the program itself.
TEST_CASE("reserve prices match finite differences of the cost")
{
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const MarketCase c = randomSmallCase(seed);
        const Clearing run = runClearing(c, false);
        if (!run.solution.optimal()) continue;
        const RobustProgram& p = run.program;
        for (int row = 0; row < static_cast<int>(p.inTags.size()); ++row) {
            const RowTag& tg = p.inTags[row];
            if (tg.kind != RowKind::UnitLimit) continue;
            const double delta = 1e-3;
            auto shift = [](QpProblem& qp, int r, double d) { qp.bin[r] -= d; };
            const double up = solveWith(p, shift, row, delta);
            const double dn = solveWith(p, shift, row, -delta);
            const double fwd = (up - run.solution.objective) / delta, bwd = (run.solution.objective - dn) / delta;
            if (std::abs(fwd - bwd) > 1e-3 * (1.0 + std::abs(fwd))) continue;  // kink: degenerate row
            const double alpha = run.solution.alpha[tg.unit][tg.a];
            CHECK(std::abs(0.5 * (fwd + bwd) - alpha) <= std::max(1e-3, 0.05 * alpha));
            ++checked;
        }
    }
    CHECK(checked > 20);
}

TEST_CASE("bus LMPs match finite differences of the cost")
{
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const MarketCase c = randomSmallCase(seed);
        for (bool det : {true, false}) {
            const Clearing run = runClearing(c, det);
            if (!run.solution.optimal()) continue;
            for (int m = 0; m < c.numBuses(); ++m)
                for (int t = 0; t < c.periods(); ++t) {
                    const double delta = 1e-3;
                    double val[2];
                    for (int s = 0; s < 2; ++s) {
                        MarketCase e = c;
                        e.loads.demand(m, t) += s ? -delta : delta;
                        const Clearing r = runClearing(e, det, 1e-10);
                        REQUIRE(r.solution.optimal());
                        val[s] = r.solution.objective;
                    }
                    const double fwd = (val[0] - run.solution.objective) / delta;
                    const double bwd = (run.solution.objective - val[1]) / delta;
                    if (std::abs(fwd - bwd) > 1e-3 * (1.0 + std::abs(fwd))) continue;
                    // Cost is per interval: dt * LMP.
                    const double lmp = run.prices.busLmp(m, t) * c.loads.dt;
                    CHECK(std::abs(0.5 * (fwd + bwd) - lmp) <= std::max(1e-3, 0.05 * std::abs(lmp)));
                    ++checked;
                }
        }
    }
    CHECK(checked > 20);
}

TEST_CASE("gamma is the sensitivity of the cost to D")
{
    int checked = 0;
    for (std::uint64_t seed = 100; seed <= 115 && checked < 8; ++seed) {
        MarketCase c = randomSmallCase(seed, {true, false, true});
        if (c.numBuses() != 2) continue;
        const Clearing run = runClearing(c, false);
        if (!run.solution.optimal()) continue;
        const RobustProgram& p = run.program;
        for (int row = 0; row < static_cast<int>(p.eqTags.size()); ++row) {
            const RowTag& tg = p.eqTags[row];
            if (tg.kind != RowKind::AdjustBalance) continue;
            // The row reads -sum G = -D.
            auto shift = [](QpProblem& qp, int r, double d) { qp.beq[r] -= d; };
            const double delta = 1e-4;
            const double up = solveWith(p, shift, row, delta), dn = solveWith(p, shift, row, -delta);
            const double fd = (up - dn) / (2 * delta);
            const double g = run.solution.gamma(tg.a, tg.b);
            CHECK(std::abs(fd - g) <= std::max(1e-4, 1e-3 * std::abs(g)));
            ++checked;
        }
    }
    CHECK(checked >= 4);
}

TEST_CASE("adjustment price equals the marginal adjustment cost")
{
    // At the optimum pi^a = 2 dt q G Sigma for every unit (stationarity in G).
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        MarketCase c = randomSmallCase(seed, {true, false, true});
        const Clearing run = runClearing(c, false);
        if (!run.solution.optimal()) continue;
        for (int i = 0; i < c.numUnits(); ++i) {
            const Mat expect = 2.0 * c.loads.dt * c.units[i].q * run.solution.G[i] * c.moments.sigma;
            for (int k : run.program.activeCoords)
                for (int t = 0; t < c.periods(); ++t)
                    CHECK(run.prices.adjustment[i](t, k) == doctest::Approx(expect(t, k)).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("available capacity total depends only on load")
{
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        MarketCase c = randomSmallCase(seed);
        double pmax = 0.0;
        for (const Unit& u : c.units) pmax += u.pmax;
        for (double scale : {0.0, 0.5, 1.0}) {
            MarketCase e = c;
            BoxBudget bb = *c.boxBudget;
            bb.r1 *= scale;
            applyBoxBudget(e, bb);
            const Clearing run = runClearing(e, false);
            if (!run.solution.optimal()) continue;
            for (int t = 0; t < c.periods(); ++t) {
                double total = 0.0;
                for (int i = 0; i < c.numUnits(); ++i) total += run.reserves.capUp(i, t);
                CHECK(total == doctest::Approx(pmax - c.loads.demand.col(t).sum()).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("nodal maximum post-processor")
{
    const Clearing run = runClearing(threeBusCase(), false);
    REQUIRE(run.solution.optimal());
    const auto nodal = nodalMaxReservePrices(threeBusCase(), run.prices);
    CHECK(nodal[1][static_cast<int>(UnitRow::RampUp) * 3 + 1] == doctest::Approx(15.0).epsilon(1e-6));
    CHECK(nodal[2].lpNorm<Eigen::Infinity>() == 0.0);
}
