#include "rsced/solution.hpp"

#include <algorithm>
#include <cmath>

namespace rsced {

namespace {

SpMat fromTriplets(int rows, int cols, const std::vector<Triplet>& t)
{
    SpMat m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

double infNorm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace

PrimalDualSolution solve(const RobustProgram& prog, double tol, int maxIterations)
{
    QpOptions o;
    o.tol = tol;
    o.maxIterations = maxIterations;
    return solve(prog, o);
}

PrimalDualSolution solve(const RobustProgram& prog, const QpOptions& opt)
{
    const QpResult r = solveQp(prog.qp, opt);
    return extractSolution(prog, r);
}

PrimalDualSolution extractSolution(const RobustProgram& prog, const QpResult& r)
{
    const ConstraintBlocks& b = prog.blocks;
    const int nt = b.nt, nu = b.nu, dim = prog.dim, nk = prog.setRows, lr = b.lineRows();

    PrimalDualSolution s;
    s.status = r.status;
    s.robust = prog.robust;
    s.objective = r.objective;
    s.iterations = r.iterations;
    s.message = r.message;
    s.P.assign(nu, Vec::Zero(nt));
    s.G.assign(nu, Mat::Zero(nt, dim));
    s.lambda = Vec::Zero(nt);
    s.gamma = Mat::Zero(nt, dim);
    s.alpha.assign(nu, Vec::Zero(4 * nt));
    s.beta.assign(nu, Mat::Zero(4 * nt, dim));
    s.eta = Vec::Zero(lr);
    s.tau = Mat::Zero(lr, dim);

    std::vector<std::vector<Triplet>> rho(nu), rhoB(nu);
    std::vector<Triplet> zeta, zetaB;
    for (size_t v = 0; v < prog.vars.size(); ++v) {
        const VarTag& tg = prog.vars[v];
        const double x = r.x[v];
        switch (tg.kind) {
        case VarKind::P: s.P[tg.unit][tg.a] = x; break;
        case VarKind::G: s.G[tg.unit](tg.a, tg.b) = x; break;
        case VarKind::Rho:
            rho[tg.unit].emplace_back(tg.a, tg.b, x);
            rhoB[tg.unit].emplace_back(tg.a, tg.b, r.wl[v]);
            break;
        case VarKind::Zeta:
            zeta.emplace_back(tg.a, tg.b, x);
            zetaB.emplace_back(tg.a, tg.b, r.wl[v]);
            break;
        }
    }
    for (size_t k = 0; k < prog.eqTags.size(); ++k) {
        const RowTag& tg = prog.eqTags[k];
        const double y = r.y[k];
        switch (tg.kind) {
        case RowKind::Balance: s.lambda[tg.a] = y; break;
        case RowKind::AdjustBalance: s.gamma(tg.a, tg.b) = y; break;
        case RowKind::UnitDual: s.beta[tg.unit](tg.a, tg.b) = y; break;
        case RowKind::LineDual: s.tau(tg.a, tg.b) = y; break;
        default: break;
        }
    }
    for (size_t k = 0; k < prog.inTags.size(); ++k) {
        const RowTag& tg = prog.inTags[k];
        const double z = r.z[k];
        if (tg.kind == RowKind::UnitLimit) s.alpha[tg.unit][tg.a] = z;
        else if (tg.kind == RowKind::LineLimit) s.eta[tg.a] = z;
    }

    if (prog.robust) {
        // Eliminated coordinates: whole column of D goes to the first committed unit.
        const std::vector<int>& mon = prog.monitored;
        // Kept set rows may touch eliminated columns (budget rows); the pin rows
        // carry whatever they leave over.
        std::vector<Mat> keptRho(nu);
        for (int i = 0; i < nu; ++i) keptRho[i] = Mat(fromTriplets(nk, 4 * nt, rho[i]).transpose() * prog.S);
        const Mat keptZeta = Mat(fromTriplets(nk, lr, zeta).transpose() * prog.S);
        for (int j = 0; j < dim; ++j) {
            if (!prog.eliminated[j]) continue;
            const int t = j / b.nd;
            int owner = 0;
            for (int i = 0; i < nu; ++i)
                if (b.R[i][t] > 0.0 || i == nu - 1) {
                    owner = i;
                    break;
                }
            if (nu == 0) continue;
            s.G[owner](t, j) = 1.0;
            for (int i = 0; i < nu; ++i) {
                const Vec ag = b.A * s.G[i].col(j) - keptRho[i].col(j);
                for (int r2 = 0; r2 < 4 * nt; ++r2) {
                    if (ag[r2] > 0) rho[i].emplace_back(prog.pinPlus[j], r2, ag[r2]);
                    else if (ag[r2] < 0) rho[i].emplace_back(prog.pinMinus[j], r2, -ag[r2]);
                }
            }
            for (int q : mon) {
                double v = -b.gammaD(q, j) - keptZeta(q, j);
                const int tq = b.timeOfLineRow(q);
                for (int i = 0; i < nu; ++i) v += b.gammaUnit[i](q, tq) * s.G[i](tq, j);
                if (v > 0) zeta.emplace_back(prog.pinPlus[j], q, v);
                else if (v < 0) zeta.emplace_back(prog.pinMinus[j], q, -v);
            }
        }
    }
    s.rho.resize(nu);
    s.rhoBound.resize(nu);
    for (int i = 0; i < nu; ++i) {
        s.rho[i] = fromTriplets(nk, 4 * nt, rho[i]);
        s.rhoBound[i] = fromTriplets(nk, 4 * nt, rhoB[i]);
    }
    s.zeta = fromTriplets(nk, lr, zeta);
    s.zetaBound = fromTriplets(nk, lr, zetaB);
    return s;
}

QpResult flattenSolution(const RobustProgram& prog, const PrimalDualSolution& s)
{
    QpResult r;
    r.status = s.status;
    const int n = prog.qp.n;
    r.x = Vec::Zero(n);
    r.wl = Vec::Zero(n);
    r.wu = Vec::Zero(n);
    for (int v = 0; v < n; ++v) {
        const VarTag& tg = prog.vars[v];
        switch (tg.kind) {
        case VarKind::P: r.x[v] = s.P[tg.unit][tg.a]; break;
        case VarKind::G: r.x[v] = s.G[tg.unit](tg.a, tg.b); break;
        case VarKind::Rho:
            r.x[v] = s.rho[tg.unit].coeff(tg.a, tg.b);
            r.wl[v] = s.rhoBound[tg.unit].coeff(tg.a, tg.b);
            break;
        case VarKind::Zeta:
            r.x[v] = s.zeta.coeff(tg.a, tg.b);
            r.wl[v] = s.zetaBound.coeff(tg.a, tg.b);
            break;
        }
    }
    r.y = Vec::Zero(prog.eqTags.size());
    for (size_t k = 0; k < prog.eqTags.size(); ++k) {
        const RowTag& tg = prog.eqTags[k];
        switch (tg.kind) {
        case RowKind::Balance: r.y[k] = s.lambda[tg.a]; break;
        case RowKind::AdjustBalance: r.y[k] = s.gamma(tg.a, tg.b); break;
        case RowKind::UnitDual: r.y[k] = s.beta[tg.unit](tg.a, tg.b); break;
        case RowKind::LineDual: r.y[k] = s.tau(tg.a, tg.b); break;
        default: break;
        }
    }
    r.z = Vec::Zero(prog.inTags.size());
    for (size_t k = 0; k < prog.inTags.size(); ++k) {
        const RowTag& tg = prog.inTags[k];
        if (tg.kind == RowKind::UnitLimit) r.z[k] = s.alpha[tg.unit][tg.a];
        else if (tg.kind == RowKind::LineLimit) r.z[k] = s.eta[tg.a];
    }
    r.objective = prog.qp.objective(r.x);
    return r;
}

double KktReport::stationarity() const
{
    return std::max({stationarityP, stationarityG, stationarityRho, stationarityZeta});
}

double KktReport::worst() const
{
    return std::max({stationarity(), primal, dual, complementarity});
}

KktReport checkKkt(const RobustProgram& prog, const PrimalDualSolution& sol)
{
    const QpResult r = flattenSolution(prog, sol);
    const QpProblem& qp = prog.qp;
    KktReport k;
    Vec g = qp.H * r.x + qp.c - r.wl;
    if (qp.Aeq.rows()) g += qp.Aeq.transpose() * r.y;
    if (qp.Ain.rows()) g += qp.Ain.transpose() * r.z;
    for (int v = 0; v < qp.n; ++v) {
        const double a = std::abs(g[v]);
        switch (prog.vars[v].kind) {
        case VarKind::P: k.stationarityP = std::max(k.stationarityP, a); break;
        case VarKind::G: k.stationarityG = std::max(k.stationarityG, a); break;
        case VarKind::Rho: k.stationarityRho = std::max(k.stationarityRho, a); break;
        case VarKind::Zeta: k.stationarityZeta = std::max(k.stationarityZeta, a); break;
        }
    }
    double dualObj = -0.5 * r.x.dot(qp.H * r.x) + qp.constant;
    if (qp.Aeq.rows()) {
        k.primal = infNorm(qp.Aeq * r.x - qp.beq);
        dualObj -= qp.beq.dot(r.y);
    }
    if (qp.Ain.rows()) {
        const Vec slack = qp.bin - qp.Ain * r.x;
        k.primal = std::max(k.primal, std::max(0.0, -slack.minCoeff()));
        k.dual = std::max(0.0, -r.z.minCoeff());
        k.complementarity = infNorm(slack.cwiseProduct(r.z));
        dualObj -= qp.bin.dot(r.z);
    }
    for (int v = 0; v < qp.n; ++v) {
        if (!std::isfinite(qp.lower[v])) continue;
        const double sl = r.x[v] - qp.lower[v];
        k.primal = std::max(k.primal, -sl);
        k.dual = std::max(k.dual, -r.wl[v]);
        k.complementarity = std::max(k.complementarity, std::abs(sl * r.wl[v]));
        dualObj += qp.lower[v] * r.wl[v];
    }
    const double primalObj = qp.objective(r.x);
    k.gap = std::abs(primalObj - dualObj);
    k.relativeGap = k.gap / (1.0 + std::abs(primalObj));
    return k;
}

ClearingRun clearMarket(const MarketCase& c, bool deterministic)
{
    ClearingRun run;
    run.program = deterministic ? buildDeterministicSced(c) : buildRobustCounterpart(c);
    QpOptions o;
    o.tol = c.settings.tol;
    o.maxIterations = c.settings.maxIterations;
    run.solution = solve(run.program, o);
    return run;
}

}  // namespace rsced
