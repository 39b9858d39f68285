#include "rsced/synthetic.hpp"

#include "rsced/assembler.hpp"
#include "rsced/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace rsced {

MarketCase threeBusCase()
{
    MarketCase c;
    c.name = "three-bus";
    c.notes = {
        "RECONSTRUCTION: every number marked back-solved was "
        "chosen so the case clears at the target costs, prices and credits listed in the README.",
        "Buses are 0-based here: bus 0 hosts G1 (slack), bus 1 hosts G2, bus 2 hosts the wind farm.",
        "back-solved: G2 ramp 10 MW per interval and Pmax 80 MW; G2 incremental cost 25 $/MWh, "
        "the value that makes the hold-back check in the README balance.",
        "back-solved: G1 Pmin 50, Pmax 180, ramp 25, initial 120 MW, 10 $/MWh; G2 Pmin 5, initial 10 MW.",
        "back-solved: reactances 5, 3, 2 p.u. give shift factors -0.5 (bus 1) and -0.3 (bus 2) on line 0-1; "
        "line 0-1 limit 10.95 MW, the other two lines are effectively unconstrained.",
        "back-solved: system load 140, 155, 167 MW; wind-bus net load 40, 65, 75.5 MW, the rest at bus 0.",
        "back-solved: deviations at bus 0 and bus 2 in intervals 1 and 2 (0-based); box 20 at bus 0, "
        "32/3 at bus 2 in interval 1, [-2, 49/3] at bus 2 in interval 2; per-interval budgets 9.5 and 2; "
        "interval 0 and bus 1 pinned to zero.",
        "Reproduction needs the causal policy option: an adjustment may only respond to deviations already realized.",
    };
    c.loads.dt = 0.25;
    c.network.numBuses = 3;
    c.network.slack = 0;
    c.network.lines = {{0, 1, 5.0, 10.95}, {0, 2, 3.0, 1000.0}, {1, 2, 2.0, 1000.0}};

    const double total[3] = {140.0, 155.0, 167.0};
    const double wind[3] = {40.0, 65.0, 75.5};
    c.loads.demand = Mat::Zero(3, 3);
    for (int t = 0; t < 3; ++t) {
        c.loads.demand(0, t) = total[t] - wind[t];
        c.loads.demand(2, t) = wind[t];
    }

    Unit g1{"G1", 0, 50.0, 180.0, 25.0, 25.0, 0.0, 10.0, 0.0, 120.0};
    Unit g2{"G2", 1, 5.0, 80.0, 10.0, 10.0, 0.0, 25.0, 0.0, 10.0};
    c.units = {g1, g2};
    c.commitment = CommitmentSchedule::allOn(2, 3);

    const int nd = 3, nt = 3, dim = 9;
    std::vector<std::pair<Vec, double>> rows;
    auto coord = [&](int bus, int t) { return uncertaintyIndex(nd, nt, bus, t); };
    auto bound = [&](int bus, int t, double lo, double hi) {
        Vec up = Vec::Zero(dim), dn = Vec::Zero(dim);
        up[coord(bus, t)] = 1.0;
        dn[coord(bus, t)] = -1.0;
        rows.emplace_back(up, hi);
        rows.emplace_back(dn, -lo);
    };
    for (int t = 0; t < nt; ++t)
        for (int m = 0; m < nd; ++m) {
            if (t == 0 || m == 1) bound(m, t, 0.0, 0.0);
            else if (m == 0) bound(m, t, -20.0, 20.0);
            else if (t == 1) bound(m, t, -32.0 / 3.0, 32.0 / 3.0);
            else bound(m, t, -2.0, 49.0 / 3.0);
        }
    const double budget[3] = {0.0, 9.5, 2.0};
    for (int t = 1; t < nt; ++t) {
        Vec up = Vec::Zero(dim);
        up[coord(0, t)] = 1.0;
        up[coord(2, t)] = 1.0;
        rows.emplace_back(up, budget[t]);
        rows.emplace_back(-up, budget[t]);
    }
    c.uncertainty.S.resize(static_cast<Eigen::Index>(rows.size()), dim);
    c.uncertainty.h.resize(static_cast<Eigen::Index>(rows.size()));
    for (size_t k = 0; k < rows.size(); ++k) {
        c.uncertainty.S.row(static_cast<Eigen::Index>(k)) = rows[k].first.transpose();
        c.uncertainty.h[static_cast<Eigen::Index>(k)] = rows[k].second;
    }
    c.moments.sigma = Mat::Zero(dim, dim);
    c.settings.causal = true;
    return c;
}

MarketCase syntheticCase(const SyntheticOptions& opt)
{
    PortableRng rng(opt.seed);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

    MarketCase c;
    c.name = "synthetic-" + std::to_string(opt.buses);
    c.notes = {"Synthetic network for performance smoke tests; seed " + std::to_string(opt.seed) +
               ". Not a reproduction of any published system."};
    c.loads.dt = opt.dt;
    c.network.numBuses = opt.buses;
    c.network.slack = 0;

    // Random spanning tree, then extra edges between nearby bus numbers.
    std::set<std::pair<int, int>> used;
    auto addLine = [&](int a, int b) {
        if (a == b) return false;
        const auto key = std::minmax(a, b);
        if (!used.insert(key).second) return false;
        c.network.lines.push_back({key.first, key.second, uniform(0.02, 0.2), 5000.0});
        return true;
    };
    for (int m = 1; m < opt.buses; ++m) addLine(m, std::max(0, m - 1 - rng.below(std::min(m, 4))));
    while (static_cast<int>(c.network.lines.size()) < opt.lines) {
        const int a = rng.below(opt.buses);
        const int b = std::clamp(a + rng.below(13) - 6, 0, opt.buses - 1);
        addLine(a, b);
    }

    const int nt = opt.periods;
    // Units: spread over distinct buses.
    std::vector<int> buses(opt.buses);
    std::iota(buses.begin(), buses.end(), 0);
    for (int k = opt.buses - 1; k > 0; --k) std::swap(buses[k], buses[rng.below(k + 1)]);
    double capacity = 0.0;
    for (int i = 0; i < opt.units; ++i) {
        Unit u;
        u.name = "U" + std::to_string(i + 1);
        u.bus = buses[i % opt.buses];
        u.pmax = std::round(uniform(80.0, 400.0));
        u.pmin = std::round(u.pmax * uniform(0.1, 0.3));
        u.rampUp = std::round(u.pmax * uniform(0.08, 0.2));
        u.rampDown = u.rampUp;
        u.q = std::round(uniform(0.002, 0.02) * 1e4) / 1e4;
        u.b = std::round(uniform(12.0, 40.0) * 100.0) / 100.0;
        u.fixedCost = std::round(uniform(50.0, 300.0));
        capacity += u.pmax;
        c.units.push_back(u);
    }

    // Loads on the first 91 buses of a shuffled order, 55% of capacity at peak.
    std::vector<int> loadBuses(buses.begin(), buses.end());
    for (int k = opt.buses - 1; k > 0; --k) std::swap(loadBuses[k], loadBuses[rng.below(k + 1)]);
    const int nLoad = std::max(1, opt.buses * 3 / 4);
    std::vector<double> share(nLoad);
    for (double& s : share) s = uniform(0.5, 1.5);
    const double shareSum = std::accumulate(share.begin(), share.end(), 0.0);
    c.loads.demand = Mat::Zero(opt.buses, nt);
    std::vector<double> total(nt);
    for (int t = 0; t < nt; ++t) {
        total[t] = 0.55 * capacity * (0.96 + 0.04 * std::sin(M_PI * t / std::max(1, nt - 1)));
        for (int k = 0; k < nLoad; ++k) c.loads.demand(loadBuses[k], t) = std::round(total[t] * share[k] / shareSum * 100.0) / 100.0;
        total[t] = c.loads.demand.col(t).sum();
    }

    // Initial output: same fraction of the range for every unit.
    double pminSum = 0.0, rangeSum = 0.0;
    for (const Unit& u : c.units) {
        pminSum += u.pmin;
        rangeSum += u.pmax - u.pmin;
    }
    const double f0 = (total[0] - pminSum) / rangeSum;
    for (Unit& u : c.units) u.p0 = u.pmin + f0 * (u.pmax - u.pmin);
    c.commitment = CommitmentSchedule::allOn(opt.units, nt);

    // Wind buses: load buses without a unit.
    std::vector<int> wind;
    for (int k = 0; k < nLoad && static_cast<int>(wind.size()) < opt.windBuses; ++k) {
        const int m = loadBuses[k];
        if (std::none_of(c.units.begin(), c.units.end(), [&](const Unit& u) { return u.bus == m; })) wind.push_back(m);
    }
    std::sort(wind.begin(), wind.end());

    // Monitored lines: the heaviest flows under a proportional dispatch get a
    // limit a little above that flow; everything else stays at 5000 MW.
    const Mat shift = buildShiftFactors(c.network);
    Mat flow = Mat::Zero(static_cast<Eigen::Index>(c.network.lines.size()), nt);
    for (int t = 0; t < nt; ++t) {
        const double ft = (total[t] - pminSum) / rangeSum;
        Vec inj = -c.loads.demand.col(t);
        for (const Unit& u : c.units) inj[u.bus] += u.pmin + ft * (u.pmax - u.pmin);
        flow.col(t) = shift * inj;
    }
    std::vector<int> order(c.network.lines.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return flow.row(a).cwiseAbs().maxCoeff() > flow.row(b).cwiseAbs().maxCoeff();
    });
    for (int k = 0; k < opt.monitoredLines && k < static_cast<int>(order.size()); ++k) {
        Line& l = c.network.lines[order[k]];
        l.limit = std::round(flow.row(order[k]).cwiseAbs().maxCoeff() * 1.02 + 20.0);
    }

    BoxBudget bb;
    bb.buses = wind;
    bb.periods.resize(nt);
    std::iota(bb.periods.begin(), bb.periods.end(), 0);
    bb.r1 = opt.r1;
    bb.r2 = opt.r2;
    bb.stdFraction = opt.stdFraction;
    applyBoxBudget(c, bb);
    return c;
}

}  // namespace rsced
