#include "rsced/assembler.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rsced {

const char* unitRowName(UnitRow k)
{
    switch (k) {
    case UnitRow::CapUpper: return "cap-up";
    case UnitRow::CapLower: return "cap-down";
    case UnitRow::RampUp: return "ramp-up";
    case UnitRow::RampDown: return "ramp-down";
    }
    return "?";
}

const char* rowKindName(RowKind k)
{
    switch (k) {
    case RowKind::Balance: return "balance";
    case RowKind::AdjustBalance: return "adjust-balance";
    case RowKind::UnitLimit: return "unit-limit";
    case RowKind::UnitDual: return "unit-dual";
    case RowKind::LineLimit: return "line-limit";
    case RowKind::LineDual: return "line-dual";
    case RowKind::ScenarioUnit: return "scenario-unit";
    case RowKind::ScenarioLine: return "scenario-line";
    }
    return "?";
}

ProgramOptions programOptions(const SolverSettings& s)
{
    ProgramOptions o;
    o.causal = s.causal;
    o.screenLines = s.screenLines;
    o.eliminatePinned = s.eliminatePinned;
    return o;
}

Mat buildShiftFactors(const Network& net)
{
    const int nb = net.numBuses;
    const int nl = static_cast<int>(net.lines.size());
    if (net.slack < 0 || net.slack >= nb) throw CaseError("slack bus out of range");
    Mat B = Mat::Zero(nb, nb);
    for (const Line& l : net.lines) {
        if (!(l.reactance > 0)) throw CaseError("non-positive reactance");
        const double y = 1.0 / l.reactance;
        B(l.from, l.from) += y;
        B(l.to, l.to) += y;
        B(l.from, l.to) -= y;
        B(l.to, l.from) -= y;
    }
    std::vector<int> keep;
    for (int m = 0; m < nb; ++m)
        if (m != net.slack) keep.push_back(m);
    const int nr = static_cast<int>(keep.size());
    Mat X = Mat::Zero(nb, nb);
    if (nr > 0) {
        Mat Br(nr, nr);
        for (int a = 0; a < nr; ++a)
            for (int b = 0; b < nr; ++b) Br(a, b) = B(keep[a], keep[b]);
        Eigen::FullPivLU<Mat> lu(Br);
        if (!lu.isInvertible()) throw CaseError("reduced susceptance matrix is singular (network disconnected)");
        const Mat inv = lu.inverse();
        for (int a = 0; a < nr; ++a)
            for (int b = 0; b < nr; ++b) X(keep[a], keep[b]) = inv(a, b);
    }
    Mat G(nl, nb);
    for (int l = 0; l < nl; ++l) {
        const Line& ln = net.lines[l];
        G.row(l) = (X.row(ln.from) - X.row(ln.to)) / ln.reactance;
    }
    return G;
}

UnitBlock buildUnitBlocks(const Unit& u, const std::vector<int>& on, const std::vector<int>& startup,
                          const std::vector<int>& shutdown)
{
    const int nt = static_cast<int>(on.size());
    UnitBlock b;
    b.A = Mat::Zero(4 * nt, nt);
    b.R = Vec::Zero(4 * nt);
    for (int t = 0; t < nt; ++t) {
        const int cu = t, cl = nt + t, ru = 2 * nt + t, rd = 3 * nt + t;
        b.A(cu, t) = 1.0;
        b.R[cu] = on[t] * u.pmax;
        b.A(cl, t) = -1.0;
        b.R[cl] = -on[t] * u.pmin;
        const double up = u.rampUp * (1 - startup[t]) + u.pmin * startup[t];
        const double down = u.rampDown * (1 - shutdown[t]) + u.pmin * shutdown[t];
        b.A(ru, t) = 1.0;
        b.A(rd, t) = -1.0;
        if (t > 0) {
            b.A(ru, t - 1) = -1.0;
            b.A(rd, t - 1) = 1.0;
            b.R[ru] = up;
            b.R[rd] = down;
        } else {
            b.R[ru] = up + u.p0;
            b.R[rd] = down - u.p0;
        }
    }
    return b;
}

ConstraintBlocks buildConstraintBlocks(const MarketCase& c)
{
    ConstraintBlocks b;
    b.nt = c.periods();
    b.nd = c.numBuses();
    b.nl = c.numLines();
    b.nu = c.numUnits();
    b.dt = c.loads.dt;
    const int dim = b.nd * b.nt;
    b.shift = buildShiftFactors(c.network);

    b.R.resize(b.nu);
    for (int i = 0; i < b.nu; ++i) {
        UnitBlock ub = buildUnitBlocks(c.units[i], c.commitment.on[i], c.commitment.startup[i], c.commitment.shutdown[i]);
        if (i == 0) b.A = ub.A;
        b.R[i] = ub.R;
    }
    if (b.nu == 0) b.A = buildUnitBlocks(Unit{}, std::vector<int>(b.nt, 0), std::vector<int>(b.nt, 0), std::vector<int>(b.nt, 0)).A;

    b.D = Mat::Zero(b.nt, dim);
    for (int t = 0; t < b.nt; ++t)
        for (int m = 0; m < b.nd; ++m) b.D(t, uncertaintyIndex(b.nd, b.nt, m, t)) = 1.0;

    const int lr = b.lineRows();
    b.gammaUnit.assign(b.nu, Mat::Zero(lr, b.nt));
    b.gammaD = Mat::Zero(lr, dim);
    b.F = Vec::Zero(lr);
    for (int dir = 0; dir < 2; ++dir) {
        const double sg = dir == 0 ? 1.0 : -1.0;
        for (int l = 0; l < b.nl; ++l)
            for (int t = 0; t < b.nt; ++t) {
                const int q = b.lineRow(dir, l, t);
                b.F[q] = c.network.lines[l].limit;
                for (int i = 0; i < b.nu; ++i) b.gammaUnit[i](q, t) = sg * b.shift(l, c.units[i].bus);
                for (int m = 0; m < b.nd; ++m) b.gammaD(q, uncertaintyIndex(b.nd, b.nt, m, t)) = sg * b.shift(l, m);
            }
    }
    b.d.resize(dim);
    for (int t = 0; t < b.nt; ++t)
        for (int m = 0; m < b.nd; ++m) b.d[uncertaintyIndex(b.nd, b.nt, m, t)] = c.loads.demand(m, t);
    return b;
}

std::vector<bool> redundantLineRows(const MarketCase& c, const ConstraintBlocks& b, const CoordinateBounds& cb)
{
    std::vector<bool> red(b.lineRows(), false);
    for (int q = 0; q < b.lineRows(); ++q) {
        const int l = b.lineOf(q), t = b.timeOfLineRow(q);
        const double sg = b.dirOf(q) == 0 ? 1.0 : -1.0;
        double worst = 0.0;
        for (int i = 0; i < b.nu; ++i) {
            const double g = sg * b.shift(l, c.units[i].bus);
            const double on = c.commitment.on[i][t];
            worst += std::max(g * on * c.units[i].pmin, g * on * c.units[i].pmax);
        }
        for (int m = 0; m < b.nd; ++m) {
            const int k = uncertaintyIndex(b.nd, b.nt, m, t);
            const double g = -sg * b.shift(l, m);
            worst += g * b.d[k];
            if (g != 0.0) worst += std::max(g * cb.lo[k], g * cb.hi[k]);
        }
        red[q] = std::isfinite(worst) && worst <= b.F[q] - 1e-9 * (1.0 + b.F[q]);
    }
    return red;
}

namespace {

struct Builder {
    std::vector<Triplet> eq, in;
    std::vector<double> beq, bin;
    std::vector<RowTag> eqTags, inTags;

    int addEq(RowTag tag, double rhs)
    {
        eqTags.push_back(tag);
        beq.push_back(rhs);
        return static_cast<int>(beq.size()) - 1;
    }
    int addIn(RowTag tag, double rhs)
    {
        inTags.push_back(tag);
        bin.push_back(rhs);
        return static_cast<int>(bin.size()) - 1;
    }
};

void finish(RobustProgram& p, Builder& bl, std::vector<Triplet>& hess)
{
    const int n = static_cast<int>(p.vars.size());
    const int me = static_cast<int>(bl.beq.size());
    const int mi = static_cast<int>(bl.bin.size());
    Vec c = p.qp.c;
    double constant = p.qp.constant;
    Vec lower = p.qp.lower;
    p.qp.resize(n, me, mi);
    p.qp.c = c;
    p.qp.constant = constant;
    p.qp.lower = lower;
    p.qp.H.setFromTriplets(hess.begin(), hess.end());
    p.qp.Aeq.setFromTriplets(bl.eq.begin(), bl.eq.end());
    p.qp.Ain.setFromTriplets(bl.in.begin(), bl.in.end());
    p.qp.beq = Eigen::Map<Vec>(bl.beq.data(), me);
    p.qp.bin = Eigen::Map<Vec>(bl.bin.data(), mi);
    p.eqTags = std::move(bl.eqTags);
    p.inTags = std::move(bl.inTags);
}

void commonSetup(RobustProgram& p, const MarketCase& c, const ProgramOptions& opt)
{
    p.options = opt;
    p.blocks = buildConstraintBlocks(c);
    p.dim = c.dim();
    p.S = c.uncertainty.S;
    p.h = c.uncertainty.h;
    p.sigma = c.moments.sigma;
    p.setRows = c.uncertainty.rows();
}

}  // namespace

RobustProgram buildDeterministicSced(const MarketCase& c)
{
    return buildDeterministicSced(c, programOptions(c.settings));
}

RobustProgram buildDeterministicSced(const MarketCase& c, const ProgramOptions& opt)
{
    RobustProgram p;
    p.robust = false;
    commonSetup(p, c, opt);
    const ConstraintBlocks& b = p.blocks;
    const int nt = b.nt, nu = b.nu;

    p.pIndex.assign(nu * nt, -1);
    std::vector<double> cvec;
    std::vector<Triplet> hess;
    for (int i = 0; i < nu; ++i)
        for (int t = 0; t < nt; ++t) {
            const int v = static_cast<int>(p.vars.size());
            p.pIndex[i * nt + t] = v;
            p.vars.push_back({VarKind::P, i, t, 0});
            cvec.push_back(b.dt * c.units[i].b);
            if (c.units[i].q != 0.0) hess.emplace_back(v, v, 2.0 * b.dt * c.units[i].q);
        }
    p.qp.c = Eigen::Map<Vec>(cvec.data(), static_cast<Eigen::Index>(cvec.size()));
    p.qp.lower = Vec::Constant(p.vars.size(), -kInf);
    p.qp.constant = 0.0;
    for (const Unit& u : c.units) p.qp.constant += u.fixedCost;

    Builder bl;
    for (int t = 0; t < nt; ++t) {
        const int r = bl.addEq({RowKind::Balance, -1, t, 0}, -b.D.row(t).dot(b.d));
        for (int i = 0; i < nu; ++i) bl.eq.emplace_back(r, p.varP(i, t), -1.0);
    }
    for (int i = 0; i < nu; ++i)
        for (int r = 0; r < 4 * nt; ++r) {
            const int row = bl.addIn({RowKind::UnitLimit, i, r, 0}, b.R[i][r]);
            for (int t = 0; t < nt; ++t)
                if (b.A(r, t) != 0.0) bl.in.emplace_back(row, p.varP(i, t), b.A(r, t));
        }

    CoordinateBounds zero;
    zero.lo = Vec::Zero(p.dim);
    zero.hi = Vec::Zero(p.dim);
    const std::vector<bool> red = opt.screenLines ? redundantLineRows(c, b, zero) : std::vector<bool>(b.lineRows(), false);
    const Vec rhs = b.lineRhs();
    for (int q = 0; q < b.lineRows(); ++q) {
        if (red[q]) continue;
        p.monitored.push_back(q);
        const int t = b.timeOfLineRow(q);
        const int row = bl.addIn({RowKind::LineLimit, -1, q, 0}, rhs[q]);
        for (int i = 0; i < nu; ++i)
            if (b.gammaUnit[i](q, t) != 0.0) bl.in.emplace_back(row, p.varP(i, t), b.gammaUnit[i](q, t));
    }
    p.eliminated.assign(p.dim, true);
    finish(p, bl, hess);
    return p;
}

RobustProgram buildRobustCounterpart(const MarketCase& c)
{
    return buildRobustCounterpart(c, programOptions(c.settings));
}

RobustProgram buildRobustCounterpart(const MarketCase& c, const ProgramOptions& opt)
{
    if (c.uncertainty.dim() != c.dim() || c.uncertainty.h.size() != c.uncertainty.rows())
        throw CaseError("uncertainty set dimension mismatch");
    if (c.moments.sigma.rows() != c.dim() || c.moments.sigma.cols() != c.dim())
        throw CaseError("covariance dimension mismatch");

    RobustProgram p;
    p.robust = true;
    commonSetup(p, c, opt);
    const ConstraintBlocks& b = p.blocks;
    const int nt = b.nt, nu = b.nu, dim = p.dim, nk = p.setRows;
    const Mat& S = p.S;
    const Vec& h = p.h;
    const double dt = b.dt;

    // Coordinates pinned to zero by a pair of singleton rows with h = 0.
    p.pinPlus.assign(dim, -1);
    p.pinMinus.assign(dim, -1);
    std::vector<int> rowNnz(nk, 0), rowCol(nk, -1);
    for (int r = 0; r < nk; ++r)
        for (int j = 0; j < dim; ++j)
            if (S(r, j) != 0.0) {
                ++rowNnz[r];
                rowCol[r] = j;
            }
    for (int r = 0; r < nk; ++r) {
        if (rowNnz[r] != 1 || h[r] != 0.0) continue;
        const int j = rowCol[r];
        if (S(r, j) > 0 && p.pinPlus[j] < 0) p.pinPlus[j] = r;
        if (S(r, j) < 0 && p.pinMinus[j] < 0) p.pinMinus[j] = r;
    }
    p.eliminated.assign(dim, false);
    if (opt.eliminatePinned) {
        for (int j = 0; j < dim; ++j) {
            if (p.pinPlus[j] < 0 || p.pinMinus[j] < 0) continue;
            // eps_j = 0 on U, so column j can be dropped from every other row too.
            if (p.sigma.row(j).cwiseAbs().maxCoeff() == 0.0 && p.sigma.col(j).cwiseAbs().maxCoeff() == 0.0)
                p.eliminated[j] = true;
        }
    }
    for (int j = 0; j < dim; ++j)
        if (!p.eliminated[j]) p.activeCoords.push_back(j);
    for (int r = 0; r < nk; ++r) {
        bool keep = false;
        for (int j : p.activeCoords)
            if (S(r, j) != 0.0) {
                keep = true;
                break;
            }
        if (keep) p.activeSetRows.push_back(r);
    }
    const int nr = static_cast<int>(p.activeSetRows.size());

    // Monitored line rows.
    std::vector<bool> red(b.lineRows(), false);
    if (opt.screenLines) red = redundantLineRows(c, b, coordinateBounds(c.uncertainty));
    for (int q = 0; q < b.lineRows(); ++q)
        if (!red[q]) p.monitored.push_back(q);
    const int nm = static_cast<int>(p.monitored.size());

    auto timeOf = [&](int k) { return k / b.nd; };
    auto allowed = [&](int t, int k) { return !opt.causal || timeOf(k) <= t; };

    // Variables: per unit P, G, rho; then zeta.
    std::vector<double> cvec, lower;
    std::vector<Triplet> hess;
    p.pIndex.assign(nu * nt, -1);
    p.gIndex.assign(static_cast<size_t>(nu) * nt * dim, -1);
    std::vector<int> rhoBase(nu);
    auto addVar = [&](VarTag tag, double cost, double lo) {
        p.vars.push_back(tag);
        cvec.push_back(cost);
        lower.push_back(lo);
        return static_cast<int>(p.vars.size()) - 1;
    };
    for (int i = 0; i < nu; ++i) {
        const Unit& u = c.units[i];
        for (int t = 0; t < nt; ++t) {
            const int v = addVar({VarKind::P, i, t, 0}, dt * u.b, -kInf);
            p.pIndex[i * nt + t] = v;
            if (u.q != 0.0) hess.emplace_back(v, v, 2.0 * dt * u.q);
        }
        for (int t = 0; t < nt; ++t)
            for (int k : p.activeCoords)
                if (allowed(t, k)) p.gIndex[(static_cast<size_t>(i) * nt + t) * dim + k] = addVar({VarKind::G, i, t, k}, 0.0, -kInf);
        if (u.q != 0.0)
            for (int t = 0; t < nt; ++t)
                for (int k1 : p.activeCoords) {
                    const int v1 = p.varG(i, t, k1);
                    if (v1 < 0) continue;
                    for (int k2 : p.activeCoords) {
                        const int v2 = p.varG(i, t, k2);
                        if (v2 < 0 || p.sigma(k1, k2) == 0.0) continue;
                        hess.emplace_back(v1, v2, 2.0 * dt * u.q * p.sigma(k1, k2));
                    }
                }
        rhoBase[i] = static_cast<int>(p.vars.size());
        for (int r = 0; r < 4 * nt; ++r)
            for (int kr : p.activeSetRows) addVar({VarKind::Rho, i, kr, r}, 0.0, 0.0);
    }
    const int zetaBase = static_cast<int>(p.vars.size());
    for (int qi = 0; qi < nm; ++qi)
        for (int kr : p.activeSetRows) addVar({VarKind::Zeta, -1, kr, p.monitored[qi]}, 0.0, 0.0);
    auto rhoVar = [&](int i, int r, int ri) { return rhoBase[i] + r * nr + ri; };
    auto zetaVar = [&](int qi, int ri) { return zetaBase + qi * nr + ri; };

    p.qp.c = Eigen::Map<Vec>(cvec.data(), static_cast<Eigen::Index>(cvec.size()));
    p.qp.lower = Eigen::Map<Vec>(lower.data(), static_cast<Eigen::Index>(lower.size()));
    p.qp.constant = 0.0;
    for (const Unit& u : c.units) p.qp.constant += u.fixedCost;

    // Sparse column view of active S rows: for each active coordinate, (row position, value).
    std::vector<std::vector<std::pair<int, double>>> sCol(dim);
    for (int ri = 0; ri < nr; ++ri) {
        const int kr = p.activeSetRows[ri];
        for (int k : p.activeCoords)
            if (S(kr, k) != 0.0) sCol[k].emplace_back(ri, S(kr, k));
    }

    Builder bl;
    // (15) written as -sum_i P_i = -D d.
    for (int t = 0; t < nt; ++t) {
        const int r = bl.addEq({RowKind::Balance, -1, t, 0}, -b.D.row(t).dot(b.d));
        for (int i = 0; i < nu; ++i) bl.eq.emplace_back(r, p.varP(i, t), -1.0);
    }
    // (16) written as -sum_i G_i = -D.
    for (int t = 0; t < nt; ++t)
        for (int k : p.activeCoords) {
            if (!allowed(t, k)) continue;
            const int r = bl.addEq({RowKind::AdjustBalance, -1, t, k}, -b.D(t, k));
            for (int i = 0; i < nu; ++i) bl.eq.emplace_back(r, p.varG(i, t, k), -1.0);
        }
    // (17) and (18) per unit.
    for (int i = 0; i < nu; ++i)
        for (int r = 0; r < 4 * nt; ++r) {
            const int row = bl.addIn({RowKind::UnitLimit, i, r, 0}, b.R[i][r]);
            for (int t = 0; t < nt; ++t)
                if (b.A(r, t) != 0.0) bl.in.emplace_back(row, p.varP(i, t), b.A(r, t));
            for (int ri = 0; ri < nr; ++ri)
                if (h[p.activeSetRows[ri]] != 0.0) bl.in.emplace_back(row, rhoVar(i, r, ri), h[p.activeSetRows[ri]]);
            for (int k : p.activeCoords) {
                const int er = bl.addEq({RowKind::UnitDual, i, r, k}, 0.0);
                for (int t = 0; t < nt; ++t) {
                    const int v = p.varG(i, t, k);
                    if (v >= 0 && b.A(r, t) != 0.0) bl.eq.emplace_back(er, v, b.A(r, t));
                }
                for (const auto& [ri, s] : sCol[k]) bl.eq.emplace_back(er, rhoVar(i, r, ri), -s);
            }
        }
    // (19) and (20) per monitored line row.
    const Vec rhs = b.lineRhs();
    for (int qi = 0; qi < nm; ++qi) {
        const int q = p.monitored[qi];
        const int t = b.timeOfLineRow(q);
        const int row = bl.addIn({RowKind::LineLimit, -1, q, 0}, rhs[q]);
        for (int i = 0; i < nu; ++i)
            if (b.gammaUnit[i](q, t) != 0.0) bl.in.emplace_back(row, p.varP(i, t), b.gammaUnit[i](q, t));
        for (int ri = 0; ri < nr; ++ri)
            if (h[p.activeSetRows[ri]] != 0.0) bl.in.emplace_back(row, zetaVar(qi, ri), h[p.activeSetRows[ri]]);
        for (int k : p.activeCoords) {
            const int er = bl.addEq({RowKind::LineDual, -1, q, k}, b.gammaD(q, k));
            for (int i = 0; i < nu; ++i) {
                const int v = p.varG(i, t, k);
                if (v >= 0 && b.gammaUnit[i](q, t) != 0.0) bl.eq.emplace_back(er, v, b.gammaUnit[i](q, t));
            }
            for (const auto& [ri, s] : sCol[k]) bl.eq.emplace_back(er, zetaVar(qi, ri), -s);
        }
    }
    finish(p, bl, hess);
    return p;
}

bool hessianPsd(const QpProblem& qp)
{
    const int n = qp.n;
    // Connected components of the sparsity graph, each checked densely.
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int k = 0; k < qp.H.outerSize(); ++k)
        for (SpMat::InnerIterator it(qp.H, k); it; ++it) {
            if (std::abs(it.value() - qp.H.coeff(it.col(), it.row())) > 1e-12 * (1.0 + std::abs(it.value()))) return false;
            parent[find(static_cast<int>(it.row()))] = find(static_cast<int>(it.col()));
        }
    std::vector<std::vector<int>> comps(n);
    for (int k = 0; k < qp.H.outerSize(); ++k)
        for (SpMat::InnerIterator it(qp.H, k); it; ++it) {
            (void)it;
            comps[find(k)].push_back(k);
            break;
        }
    for (const auto& comp : comps) {
        if (comp.empty()) continue;
        const int m = static_cast<int>(comp.size());
        Mat blk(m, m);
        for (int a = 0; a < m; ++a)
            for (int bb = 0; bb < m; ++bb) blk(a, bb) = qp.H.coeff(comp[a], comp[bb]);
        Eigen::SelfAdjointEigenSolver<Mat> es(blk, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-9 * (1.0 + blk.cwiseAbs().maxCoeff())) return false;
    }
    return true;
}

}  // namespace rsced
