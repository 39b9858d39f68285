#include "rsced/pricing.hpp"

#include <algorithm>

namespace rsced {

ReserveReport computeReserves(const MarketCase& c, const std::vector<Vec>& dispatch, double tol)
{
    const ConstraintBlocks b = buildConstraintBlocks(c);
    ReserveReport rep;
    rep.nt = b.nt;
    rep.slack.resize(b.nu);
    for (int i = 0; i < b.nu; ++i) {
        if (dispatch[i].size() != b.nt) throw DispatchError("dispatch has wrong length");
        rep.slack[i] = b.R[i] - b.A * dispatch[i];
        const double worst = rep.slack[i].minCoeff();
        if (worst < -tol)
            throw DispatchError("inconsistent dispatch: unit " + std::to_string(i) + " violates a unit limit by " +
                                std::to_string(-worst) + " MW");
    }
    rep.valuable.assign(b.nu, std::vector<bool>(4 * b.nt, false));
    rep.creditRows.assign(b.nu, Vec::Zero(4 * b.nt));
    rep.credit = Vec::Zero(b.nu);
    return rep;
}

std::vector<Vec> computeReservePrices(const PrimalDualSolution& sol, double dt)
{
    std::vector<Vec> out;
    out.reserve(sol.alpha.size());
    for (const Vec& a : sol.alpha) out.push_back(a / dt);
    return out;
}

void computeLmps(const PrimalDualSolution& sol, const ConstraintBlocks& b, PriceSet& out)
{
    out.dt = b.dt;
    out.energy = sol.lambda / b.dt;
    out.unitEnergy.resize(b.nu);
    out.unitCongestion.resize(b.nu);
    for (int i = 0; i < b.nu; ++i) {
        out.unitCongestion[i] = -(b.gammaUnit[i].transpose() * sol.eta) / b.dt;
        out.unitEnergy[i] = out.energy + out.unitCongestion[i];
    }
    out.busLmp.resize(b.nd, b.nt);
    out.busCongestion.resize(b.nd, b.nt);
    for (int t = 0; t < b.nt; ++t)
        for (int m = 0; m < b.nd; ++m) {
            const int k = uncertaintyIndex(b.nd, b.nt, m, t);
            out.busCongestion(m, t) = -b.gammaD.col(k).dot(sol.eta) / b.dt;
            out.busLmp(m, t) = out.energy[t] + out.busCongestion(m, t);
        }
}

void computeAdjustmentPrices(const PrimalDualSolution& sol, const ConstraintBlocks& b, PriceSet& out)
{
    out.adjustment.resize(b.nu);
    out.adjustmentPayment = Vec::Zero(b.nu);
    for (int i = 0; i < b.nu; ++i) {
        out.adjustment[i] = sol.gamma - b.gammaUnit[i].transpose() * sol.tau - b.A.transpose() * sol.beta[i];
        out.adjustmentPayment[i] = sol.G[i].cwiseProduct(out.adjustment[i]).sum();
    }
}

void computeCredits(ReserveReport& rep, const std::vector<Vec>& prices, double dt)
{
    const int nu = static_cast<int>(rep.slack.size());
    rep.valuable.assign(nu, {});
    rep.creditRows.assign(nu, Vec());
    rep.credit = Vec::Zero(nu);
    for (int i = 0; i < nu; ++i) {
        const Eigen::Index rows = rep.slack[i].size();
        rep.valuable[i].assign(rows, false);
        rep.creditRows[i] = dt * prices[i].cwiseProduct(rep.slack[i]);
        for (Eigen::Index r = 0; r < rows; ++r) rep.valuable[i][r] = prices[i][r] > kPriceTol;
        rep.credit[i] = rep.creditRows[i].sum();
    }
}

void computeIntegratedLmp(const PrimalDualSolution& sol, const ConstraintBlocks& b, PriceSet& out)
{
    if (out.unitEnergy.empty()) computeLmps(sol, b, out);
    if (out.reserve.empty()) out.reserve = computeReservePrices(sol, b.dt);
    out.integrated.resize(b.nu);
    out.integratedDelta = Vec::Zero(b.nu);
    for (int i = 0; i < b.nu; ++i) {
        out.integrated[i] = out.unitEnergy[i] - b.A.transpose() * out.reserve[i];
        out.integratedDelta[i] = -b.dt * out.reserve[i].dot(b.A * sol.P[i]);
    }
}

PriceSet computePrices(const RobustProgram& prog, const PrimalDualSolution& sol, double tol)
{
    PriceSet p;
    computeLmps(sol, prog.blocks, p);
    p.reserve = computeReservePrices(sol, prog.blocks.dt);
    computeAdjustmentPrices(sol, prog.blocks, p);
    computeIntegratedLmp(sol, prog.blocks, p);
    const KktReport k = checkKkt(prog, sol);
    p.degenerate = k.complementarity >= tol && k.complementarity <= 10.0 * tol;
    return p;
}

std::vector<Vec> nodalMaxReservePrices(const MarketCase& c, const PriceSet& p)
{
    const int nt = c.periods();
    std::vector<Vec> out(c.numBuses(), Vec::Zero(4 * nt));
    for (int i = 0; i < c.numUnits(); ++i) out[c.units[i].bus] = out[c.units[i].bus].cwiseMax(p.reserve[i]);
    return out;
}

}  // namespace rsced
