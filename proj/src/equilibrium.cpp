#include "rsced/equilibrium.hpp"

#include <algorithm>
#include <cmath>

namespace rsced {

const char* schemeName(PricingScheme s)
{
    return s == PricingScheme::Standard ? "standard" : "integrated";
}

namespace {

ParticipantProblem baseProblem(const MarketCase& c, const RobustProgram& prog, int unit)
{
    const ConstraintBlocks& b = prog.blocks;
    ParticipantProblem pp;
    pp.unit = unit;
    pp.data = c.units.at(unit);
    pp.dt = b.dt;
    pp.nd = b.nd;
    pp.A = b.A;
    pp.R = b.R[unit];
    pp.S = prog.S;
    pp.h = prog.h;
    pp.sigma = prog.sigma.rows() == prog.dim ? prog.sigma : Mat::Zero(prog.dim, prog.dim);
    pp.activeCoords = prog.activeCoords;
    pp.activeSetRows = prog.activeSetRows;
    pp.causal = prog.options.causal;
    return pp;
}

}  // namespace

ParticipantProblem participantProblem(const MarketCase& c, const RobustProgram& prog, const PriceSet& prices,
                                      int unit, PricingScheme scheme)
{
    ParticipantProblem pp = baseProblem(c, prog, unit);
    pp.adjustmentPrice = prices.adjustment.at(unit);
    if (scheme == PricingScheme::Standard) {
        pp.energyPrice = prices.unitEnergy.at(unit);
        pp.reservePrice = prices.reserve.at(unit);
    } else {
        pp.energyPrice = prices.integrated.at(unit);
        pp.reservePrice = Vec::Zero(4 * pp.periods());
    }
    return pp;
}

ParticipantProblem withdrawalProblem(const MarketCase& c, const RobustProgram& prog, const PriceSet& prices, int unit)
{
    ParticipantProblem pp = baseProblem(c, prog, unit);
    pp.adjustable = false;
    pp.energyPrice = prices.unitEnergy.at(unit);
    pp.adjustmentPrice = Mat::Zero(pp.periods(), pp.dim());
    pp.reservePrice = Vec::Zero(4 * pp.periods());
    return pp;
}

double participantProfit(const ParticipantProblem& pp, const Vec& P, const Mat& G)
{
    const Unit& u = pp.data;
    const double dt = pp.dt;
    double profit = dt * pp.energyPrice.dot(P) + dt * pp.reservePrice.dot(pp.R - pp.A * P) - u.fixedCost;
    if (G.size()) profit += G.cwiseProduct(pp.adjustmentPrice).sum();
    for (int t = 0; t < P.size(); ++t) {
        profit -= dt * (u.q * P[t] * P[t] + u.b * P[t]);
        if (G.size() && u.q != 0.0) profit -= dt * u.q * G.row(t).dot(pp.sigma * G.row(t).transpose());
    }
    return profit;
}

ParticipantSolution solveParticipant(const ParticipantProblem& pp, double tol)
{
    const int nt = pp.periods(), dim = pp.dim();
    const int nr = static_cast<int>(pp.activeSetRows.size());
    const Unit& u = pp.data;
    const double dt = pp.dt;
    const bool adj = pp.adjustable;

    // Variables: P, then allowed G entries, then rho (A-row major).
    std::vector<int> gVar(static_cast<size_t>(nt) * dim, -1);
    int n = nt;
    if (adj)
        for (int t = 0; t < nt; ++t)
            for (int k : pp.activeCoords)
                if (!pp.causal || k / pp.nd <= t) gVar[static_cast<size_t>(t) * dim + k] = n++;
    const int rhoBase = n;
    if (adj) n += 4 * nt * nr;
    auto rhoVar = [&](int r, int ri) { return rhoBase + r * nr + ri; };

    QpProblem qp;
    const int rows = 4 * nt;
    const int eqRows = adj ? rows * static_cast<int>(pp.activeCoords.size()) : 0;
    qp.resize(n, eqRows, rows);

    // Minimize the negative profit.
    const Vec lin = dt * (Vec::Constant(nt, u.b) - pp.energyPrice + pp.A.transpose() * pp.reservePrice);
    qp.c.head(nt) = lin;
    qp.constant = u.fixedCost - dt * pp.reservePrice.dot(pp.R);
    std::vector<Triplet> hess;
    if (u.q != 0.0)
        for (int t = 0; t < nt; ++t) hess.emplace_back(t, t, 2.0 * dt * u.q);
    if (adj) {
        for (int t = 0; t < nt; ++t)
            for (int k : pp.activeCoords) {
                const int v = gVar[static_cast<size_t>(t) * dim + k];
                if (v < 0) continue;
                qp.c[v] = -pp.adjustmentPrice(t, k);
                if (u.q == 0.0) continue;
                for (int k2 : pp.activeCoords) {
                    const int v2 = gVar[static_cast<size_t>(t) * dim + k2];
                    if (v2 >= 0 && pp.sigma(k, k2) != 0.0) hess.emplace_back(v, v2, 2.0 * dt * u.q * pp.sigma(k, k2));
                }
            }
        for (int v = rhoBase; v < n; ++v) qp.lower[v] = 0.0;
    }
    qp.H.setFromTriplets(hess.begin(), hess.end());

    std::vector<Triplet> in, eq;
    for (int r = 0; r < rows; ++r) {
        for (int t = 0; t < nt; ++t)
            if (pp.A(r, t) != 0.0) in.emplace_back(r, t, pp.A(r, t));
        if (adj)
            for (int ri = 0; ri < nr; ++ri) {
                const double hv = pp.h[pp.activeSetRows[ri]];
                if (hv != 0.0) in.emplace_back(r, rhoVar(r, ri), hv);
            }
        qp.bin[r] = pp.R[r];
    }
    if (adj) {
        int e = 0;
        for (int r = 0; r < rows; ++r)
            for (int k : pp.activeCoords) {
                for (int t = 0; t < nt; ++t) {
                    const int v = gVar[static_cast<size_t>(t) * dim + k];
                    if (v >= 0 && pp.A(r, t) != 0.0) eq.emplace_back(e, v, pp.A(r, t));
                }
                for (int ri = 0; ri < nr; ++ri) {
                    const double s = pp.S(pp.activeSetRows[ri], k);
                    if (s != 0.0) eq.emplace_back(e, rhoVar(r, ri), -s);
                }
                ++e;
            }
    }
    qp.Ain.setFromTriplets(in.begin(), in.end());
    qp.Aeq.setFromTriplets(eq.begin(), eq.end());

    QpOptions o;
    o.tol = tol;
    o.maxIterations = 300;
    o.polish = true;
    const QpResult r = solveQp(qp, o);
    ParticipantSolution s;
    s.status = r.status;
    s.message = r.message;
    if (r.x.size() != n) return s;
    s.P = r.x.head(nt);
    s.G = Mat::Zero(nt, dim);
    for (int t = 0; t < nt; ++t)
        for (int k = 0; k < dim; ++k) {
            const int v = gVar[static_cast<size_t>(t) * dim + k];
            if (v >= 0) s.G(t, k) = r.x[v];
        }
    s.profit = participantProfit(pp, s.P, s.G);
    return s;
}

double EquilibriumReport::worstGap() const
{
    double w = 0.0;
    for (const UnitEquilibrium& u : units) w = std::max(w, u.gap / (1.0 + std::abs(u.maxProfit)));
    return w;
}

double EquilibriumReport::worstDeviationGain() const
{
    double w = worstGap();
    for (const UnitEquilibrium& u : units) w = std::max(w, u.withdrawGain / (1.0 + std::abs(u.isoProfit)));
    return w;
}

double EquilibriumReport::worstDispatchDiff() const
{
    double w = 0.0;
    for (const UnitEquilibrium& u : units) w = std::max(w, u.dispatchDiff);
    return w;
}

bool EquilibriumReport::pass() const
{
    for (const UnitEquilibrium& u : units)
        if (u.status != QpStatus::Optimal) return false;
    if (worstDeviationGain() > tol) return false;
    if (strictlyConvex && worstDispatchDiff() > dispatchTol) return false;
    return true;
}

EquilibriumReport verifyEquilibrium(const MarketCase& c, const RobustProgram& prog, const PrimalDualSolution& sol,
                                    const PriceSet& prices, double tol, PricingScheme scheme)
{
    EquilibriumReport rep;
    rep.scheme = scheme;
    rep.tol = tol;
    rep.strictlyConvex = !c.units.empty();
    for (const Unit& u : c.units) rep.strictlyConvex = rep.strictlyConvex && u.q > 0.0;

    for (int i = 0; i < c.numUnits(); ++i) {
        UnitEquilibrium ue;
        ue.unit = i;
        ue.name = c.units[i].name;
        const ParticipantProblem pp = participantProblem(c, prog, prices, i, scheme);
        ue.isoProfit = participantProfit(pp, sol.P[i], sol.G[i]);
        const ParticipantSolution best = solveParticipant(pp, std::min(1e-9, tol * 1e-2));
        ue.status = best.status;
        if (best.optimal()) {
            ue.maxProfit = best.profit;
            ue.gap = best.profit - ue.isoProfit;
            ue.dispatchDiff = (best.P - sol.P[i]).lpNorm<Eigen::Infinity>();
        }
        const ParticipantProblem wp = withdrawalProblem(c, prog, prices, i);
        const ParticipantSolution w = solveParticipant(wp, std::min(1e-9, tol * 1e-2));
        if (w.optimal()) {
            ue.withdrawProfit = w.profit;
            ue.withdrawGain = w.profit - ue.isoProfit;
        } else if (ue.status == QpStatus::Optimal) {
            ue.status = w.status;
        }
        rep.units.push_back(ue);
    }
    return rep;
}

}  // namespace rsced
