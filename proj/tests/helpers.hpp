#pragma once

#include "rsced/commands.hpp"
#include "rsced/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

namespace testutil {

using namespace rsced;

inline double relDiff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Fresh scratch directory under the system temp dir.
inline std::string scratchDir(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / ("rsced_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

inline MarketCase singleBus(double q, double b, double demand, double f = 0.0)
{
    MarketCase c;
    c.name = "single";
    c.network.numBuses = 1;
    c.loads.dt = 1.0;
    c.loads.demand = Mat::Constant(1, 1, demand);
    c.units = {Unit{"U", 0, 0.0, 1000.0, 1000.0, 1000.0, q, b, f, demand}};
    c.commitment = CommitmentSchedule::allOn(1, 1);
    c.uncertainty.S = (Mat(2, 1) << 1.0, -1.0).finished();
    c.uncertainty.h = Vec::Zero(2);
    c.moments.sigma = Mat::Zero(1, 1);
    return c;
}

struct SmallCaseOptions {
    bool strictlyConvex = true;
    bool tightLine = true;
    bool withSigma = true;
};

// Random desk-size case: up to 3 buses, 3 intervals, 3 units, box/budget set
// on up to two buses. Generous ramps keep most draws robust-feasible.
inline MarketCase randomSmallCase(std::uint64_t seed, const SmallCaseOptions& o = {})
{
    PortableRng rng(seed);
    auto U = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    MarketCase c;
    c.name = "random-" + std::to_string(seed);
    const int nb = 2 + rng.below(2);
    const int nt = 1 + rng.below(3);
    const int nu = 1 + rng.below(3);
    c.network.numBuses = nb;
    c.loads.dt = rng.below(2) ? 0.25 : 1.0;
    for (int m = 1; m < nb; ++m) c.network.lines.push_back({m - 1, m, U(0.5, 3.0), 1000.0});
    if (nb == 3 && rng.below(2)) c.network.lines.push_back({0, 2, U(0.5, 3.0), 1000.0});

    double cap = 0.0;
    for (int i = 0; i < nu; ++i) {
        Unit u;
        u.name = "U" + std::to_string(i);
        u.bus = rng.below(nb);
        u.pmax = std::round(U(60.0, 120.0));
        u.pmin = std::round(U(0.0, 15.0));
        u.rampUp = u.rampDown = std::round(U(25.0, 60.0));
        u.q = o.strictlyConvex ? std::round(U(0.01, 0.1) * 1000.0) / 1000.0 : 0.0;
        u.b = std::round(U(10.0, 40.0));
        u.fixedCost = std::round(U(0.0, 50.0));
        cap += u.pmax;
        c.units.push_back(u);
    }
    c.commitment = CommitmentSchedule::allOn(nu, nt);
    c.loads.demand = Mat::Zero(nb, nt);
    for (int t = 0; t < nt; ++t)
        for (int m = 0; m < nb; ++m) c.loads.demand(m, t) = std::round(U(0.1, 0.45) * cap / nb);
    const double d0 = c.loads.demand.col(0).sum();
    double pminSum = 0.0, range = 0.0;
    for (const Unit& u : c.units) {
        pminSum += u.pmin;
        range += u.pmax - u.pmin;
    }
    for (Unit& u : c.units) u.p0 = u.pmin + (d0 - pminSum) / range * (u.pmax - u.pmin);

    if (o.tightLine) {
        // Limit the first line near its flow under proportional dispatch.
        const Mat shift = buildShiftFactors(c.network);
        double worst = 0.0;
        for (int t = 0; t < nt; ++t) {
            Vec inj = -c.loads.demand.col(t);
            const double ft = (c.loads.demand.col(t).sum() - pminSum) / range;
            for (const Unit& u : c.units) inj[u.bus] += u.pmin + ft * (u.pmax - u.pmin);
            worst = std::max(worst, std::abs(shift.row(0).dot(inj)));
        }
        c.network.lines[0].limit = std::round(worst * U(0.9, 1.3) + 25.0);
    }

    BoxBudget bb;
    bb.buses.push_back(rng.below(nb));
    if (nb > 2 && rng.below(2)) {
        const int m = rng.below(nb);
        if (m != bb.buses[0]) bb.buses.push_back(m);
    }
    std::sort(bb.buses.begin(), bb.buses.end());
    for (int t = 0; t < nt; ++t) bb.periods.push_back(t);
    bb.r1 = U(0.5, 1.5);
    bb.r2 = U(0.3, 1.0);
    bb.boxScale = 6.0;
    bb.budgetScale = 8.0;
    if (o.withSigma) bb.stdFraction = 0.3;
    applyBoxBudget(c, bb);
    return c;
}

}  // namespace testutil
