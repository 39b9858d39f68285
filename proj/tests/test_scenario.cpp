#include "helpers.hpp"

#include <doctest.h>

using namespace rsced;
using namespace testutil;

namespace {

UncertaintySet box(int dim, double r)
{
    UncertaintySet u;
    u.S = Mat::Zero(2 * dim, dim);
    u.h = Vec::Constant(2 * dim, r);
    for (int j = 0; j < dim; ++j) {
        u.S(2 * j, j) = 1.0;
        u.S(2 * j + 1, j) = -1.0;
    }
    return u;
}

bool inside(const UncertaintySet& u, const Vec& e, double tol = 1e-9)
{
    return ((u.S * e - u.h).array() <= tol).all();
}

}  // namespace

TEST_CASE("affine policy arithmetic")
{
    // Interval 1 deviations of +7 MW at bus 0 and +2.5 MW at bus 2.
    const int nd = 3, nt = 3;
    const int k0 = uncertaintyIndex(nd, nt, 0, 1), k2 = uncertaintyIndex(nd, nt, 2, 1);
    Vec e = Vec::Zero(nd * nt);
    e[k0] = 7.0;
    e[k2] = 2.5;
    Mat G1 = Mat::Zero(nt, nd * nt), G2 = Mat::Zero(nt, nd * nt);
    G1(1, k0) = 1.0;
    G1(1, k2) = 0.98;
    G2(1, k2) = 0.02;
    const Vec a = applyAffinePolicy((Vec(3) << 126.5, 131.65, 143.6).finished(), G1, e);
    const Vec b = applyAffinePolicy((Vec(3) << 13.5, 23.35, 23.4).finished(), G2, e);
    // 131.65 + 7 + 0.98 * 2.5 and 23.35 + 0.02 * 2.5.
    CHECK(std::abs(a[1] - 141.1) < 1e-9);
    CHECK(std::abs(b[1] - 23.4) < 1e-9);
    CHECK(a[0] == 126.5);
    CHECK(b[2] == 23.4);
}

TEST_CASE("three-bus policy absorbs every vertex")
{
    const MarketCase c = threeBusCase();
    const Clearing run = runClearing(c, false);
    REQUIRE(run.solution.optimal());
    const std::vector<Vec> v = enumerateVertices(c.uncertainty);
    CHECK(v.size() > 4);
    for (const Vec& e : v) {
        const ScenarioResult s = evaluateScenario(c, run.program.blocks, run.solution, e);
        CHECK(s.worst() < 1e-7);
        // Adjustments sum to the deviation in every interval.
        for (int t = 0; t < c.periods(); ++t) {
            double total = 0.0;
            for (const Vec& p : s.adjusted) total += p[t];
            double load = c.loads.demand.col(t).sum();
            for (int m = 0; m < c.numBuses(); ++m) load += e[uncertaintyIndex(c.numBuses(), c.periods(), m, t)];
            CHECK(total == doctest::Approx(load));
        }
    }
}

TEST_CASE("sampler stays inside the set")
{
    const UncertaintySet u = box(3, 2.0);
    const auto pts = sampleUncertainty(u, 400, 7);
    REQUIRE(pts.size() == 400);
    double spread = 0.0;
    for (const Vec& p : pts) {
        CHECK(inside(u, p));
        spread = std::max(spread, p.lpNorm<Eigen::Infinity>());
    }
    CHECK(spread > 1.9);  // vertices are mixed in

    const auto walk = sampleUncertainty(u, 200, 7, SampleMode::WalkOnly);
    for (const Vec& p : walk) CHECK(inside(u, p));

    const auto again = sampleUncertainty(u, 400, 7);
    for (size_t k = 0; k < pts.size(); ++k) CHECK(pts[k] == again[k]);
}

TEST_CASE("singleton set samples the origin")
{
    const UncertaintySet u = box(2, 0.0);
    for (const Vec& p : sampleUncertainty(u, 20, 3)) CHECK(p.norm() == 0.0);
    const auto v = enumerateVertices(u);
    REQUIRE(v.size() == 1);
    CHECK(v[0].norm() == 0.0);
}

TEST_CASE("vertex mode cycles the box corners")
{
    const UncertaintySet u = box(2, 1.0);
    const auto pts = sampleUncertainty(u, 8, 1, SampleMode::VertexOnly);
    for (const Vec& p : pts) CHECK(p.cwiseAbs().minCoeff() == doctest::Approx(1.0));
}

TEST_CASE("octagon has eight vertices")
{
    UncertaintySet u = box(2, 1.0);
    u.S.conservativeResize(8, 2);
    u.h.conservativeResize(8);
    const double rows[4][2] = {{1, 1}, {-1, -1}, {1, -1}, {-1, 1}};
    for (int k = 0; k < 4; ++k) {
        u.S(4 + k, 0) = rows[k][0];
        u.S(4 + k, 1) = rows[k][1];
        u.h[4 + k] = 1.5;
    }
    const auto v = enumerateVertices(u);
    CHECK(v.size() == 8);
    for (const Vec& p : v) {
        CHECK(inside(u, p));
        CHECK(p.lpNorm<1>() == doctest::Approx(1.5));
    }
}

TEST_CASE("enumeration refuses oversized sets")
{
    CHECK_THROWS_AS(enumerateVertices(box(13, 1.0)), GuardError);
    VertexOptions tight;
    tight.maxVertices = 10;
    CHECK_THROWS_AS(enumerateVertices(box(4, 1.0), tight), GuardError);
    // Sampling still works, walk points only.
    for (const Vec& p : sampleUncertainty(box(13, 1.0), 50, 2)) CHECK(inside(box(13, 1.0), p));
}

TEST_CASE("deterministic dispatch fails the audit that the robust one passes")
{
    const MarketCase c = threeBusCase();
    const Clearing rob = runClearing(c, false);
    const Clearing det = runClearing(c, true);
    REQUIRE(rob.solution.optimal());
    REQUIRE(det.solution.optimal());
    const auto samples = sampleUncertainty(c.uncertainty, 500, 11);

    const AuditReport good = auditFeasibility(c, rob.solution, samples);
    CHECK(good.pass());
    CHECK(good.violating == 0);

    PrimalDualSolution fixed = det.solution;
    fixed.G.assign(c.numUnits(), Mat::Zero(c.periods(), c.dim()));
    const AuditReport bad = auditFeasibility(c, fixed, samples);
    CHECK_FALSE(bad.pass());
    CHECK(bad.violating > 0);
    CHECK(bad.maxBalanceResidual > 1.0);
    CHECK_FALSE(bad.worstConstraint.empty());
}

TEST_CASE("scenario oracle agrees with the counterpart")
{
    const MarketCase three = threeBusCase();
    const ScenarioOracle o3 = buildScenarioOracle(three);
    const PrimalDualSolution s3 = solve(o3.program, 1e-9, 300);
    REQUIRE(s3.optimal());
    CHECK(s3.objective == doctest::Approx(1380.9375).epsilon(1e-7));

    int compared = 0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const MarketCase c = randomSmallCase(seed);
        const Clearing run = runClearing(c, false);
        ScenarioOracle o;
        try {
            o = buildScenarioOracle(c);
        } catch (const GuardError&) {
            continue;
        }
        const PrimalDualSolution s = solve(o.program, 1e-9, 300);
        CHECK(s.status == run.solution.status);
        if (!s.optimal()) continue;
        CHECK(relDiff(s.objective, run.solution.objective) < 1e-6);
        ++compared;
    }
    CHECK(compared >= 4);
}
