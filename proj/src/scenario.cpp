#include "rsced/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace rsced {

namespace {

// Set restricted to the coordinates that are not pinned to zero.
struct ReducedSet {
    std::vector<int> coords;  // full index of each reduced coordinate
    Mat S;
    Vec h;
    int fullDim = 0;

    Vec embed(const Vec& x) const
    {
        Vec e = Vec::Zero(fullDim);
        for (size_t j = 0; j < coords.size(); ++j) e[coords[j]] = x[j];
        return e;
    }
    bool contains(const Vec& x) const { return rows() == 0 || ((S * x) - h).maxCoeff() <= 0.0; }
    int rows() const { return static_cast<int>(S.rows()); }
    int dim() const { return static_cast<int>(coords.size()); }
};

ReducedSet reduce(const UncertaintySet& set)
{
    const CoordinateBounds cb = coordinateBounds(set, false);
    ReducedSet r;
    r.fullDim = set.dim();
    for (int j = 0; j < set.dim(); ++j)
        if (!cb.pinned[j]) r.coords.push_back(j);
    std::vector<int> keep;
    for (int k = 0; k < set.rows(); ++k) {
        bool any = false;
        for (int j : r.coords) any = any || set.S(k, j) != 0.0;
        if (any) keep.push_back(k);
        else if (set.h[k] < 0.0) throw CaseError("uncertainty set is empty");
    }
    r.S.resize(static_cast<Eigen::Index>(keep.size()), r.dim());
    r.h.resize(static_cast<Eigen::Index>(keep.size()));
    for (size_t a = 0; a < keep.size(); ++a) {
        for (int j = 0; j < r.dim(); ++j) r.S(a, j) = set.S(keep[a], r.coords[j]);
        r.h[a] = set.h[keep[a]];
    }
    return r;
}

std::vector<Vec> reducedVertices(const ReducedSet& rs, const VertexOptions& opt)
{
    const int n = rs.dim();
    const int m = rs.rows();
    if (n == 0) return {Vec::Zero(0)};
    if (n > opt.maxDim) throw GuardError("vertex enumeration refused: dimension " + std::to_string(n) + " exceeds " +
                                         std::to_string(opt.maxDim));

    std::vector<Vec> out;
    std::vector<int> chosen;
    std::vector<Vec> basis;  // orthonormal basis of chosen rows
    double visited = 0.0;

    std::function<void(int)> dfs = [&](int start) {
        if (static_cast<int>(chosen.size()) == n) {
            visited += 1.0;
            if (visited > opt.maxCombinations) throw GuardError("vertex enumeration refused: too many row subsets");
            Mat A(n, n);
            Vec b(n);
            for (int a = 0; a < n; ++a) {
                A.row(a) = rs.S.row(chosen[a]);
                b[a] = rs.h[chosen[a]];
            }
            const Vec x = A.fullPivLu().solve(b);
            const Vec viol = rs.S * x - rs.h;
            for (int k = 0; k < m; ++k)
                if (viol[k] > 1e-9 * (1.0 + std::abs(rs.h[k]))) return;
            for (const Vec& v : out)
                if ((v - x).lpNorm<Eigen::Infinity>() <= opt.dedupTol * (1.0 + x.lpNorm<Eigen::Infinity>())) return;
            out.push_back(x);
            if (out.size() > opt.maxVertices) throw GuardError("vertex enumeration refused: more than " +
                                                               std::to_string(opt.maxVertices) + " vertices");
            return;
        }
        for (int r = start; r + (n - static_cast<int>(chosen.size())) <= m; ++r) {
            Vec v = rs.S.row(r).transpose();
            const double norm0 = v.norm();
            if (norm0 == 0.0) continue;
            for (const Vec& q : basis) v -= q.dot(v) * q;
            if (v.norm() <= 1e-9 * norm0) continue;
            chosen.push_back(r);
            basis.push_back(v / v.norm());
            dfs(r + 1);
            basis.pop_back();
            chosen.pop_back();
        }
    };
    dfs(0);
    return out;
}

// Chebyshev center with the radius capped at 1.
Vec chebyshevCenter(const ReducedSet& rs)
{
    const int n = rs.dim(), m = rs.rows();
    QpProblem lp;
    lp.resize(n + 1, 0, m);
    lp.c[n] = -1.0;
    std::vector<Triplet> t;
    for (int k = 0; k < m; ++k) {
        for (int j = 0; j < n; ++j)
            if (rs.S(k, j) != 0.0) t.emplace_back(k, j, rs.S(k, j));
        t.emplace_back(k, n, rs.S.row(k).norm());
    }
    lp.Ain.setFromTriplets(t.begin(), t.end());
    lp.bin = rs.h;
    lp.lower[n] = 0.0;
    lp.upper[n] = 1.0;
    const QpResult r = solveQp(lp);
    Vec x = Vec::Zero(n);
    if (r.optimal()) x = r.x.head(n);
    if (rs.contains(x)) return x;
    const Vec zero = Vec::Zero(n);
    if (rs.contains(zero)) return zero;
    // Pull towards the origin until the rounding error is gone; the last resort is a vertex.
    for (double s = 1.0 - 1e-12; s > 0.5; s -= (1.0 - s)) {
        if (rs.contains(s * x)) return s * x;
    }
    const std::vector<Vec> vs = reducedVertices(rs, VertexOptions{});
    for (const Vec& v : vs)
        if (rs.contains(v)) return v;
    throw CaseError("could not find a feasible starting point in the uncertainty set");
}

Vec hitAndRunStep(const ReducedSet& rs, const Vec& x, PortableRng& rng)
{
    const int n = rs.dim();
    Vec d(n);
    for (int j = 0; j < n; ++j) d[j] = rng.normal();
    const double dn = d.norm();
    if (dn == 0.0) return x;
    d /= dn;
    double lo = -kInf, hi = kInf;
    const Vec sd = rs.S * d;
    const Vec slack = rs.h - rs.S * x;
    for (int k = 0; k < rs.rows(); ++k) {
        if (sd[k] > 1e-14) hi = std::min(hi, std::max(0.0, slack[k]) / sd[k]);
        else if (sd[k] < -1e-14) lo = std::max(lo, -std::max(0.0, slack[k]) / -sd[k]);
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) return x;
    double step = lo + rng.uniform() * (hi - lo);
    for (int tries = 0; tries < 60; ++tries) {
        const Vec y = x + step * d;
        if (rs.contains(y)) return y;
        step *= 0.5;
    }
    return x;
}

}  // namespace

double PortableRng::normal()
{
    if (hasSpare_) {
        hasSpare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    hasSpare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
}

Vec applyAffinePolicy(const Vec& P, const Mat& G, const Vec& eps)
{
    if (G.rows() != P.size() || G.cols() != eps.size())
        throw std::invalid_argument("applyAffinePolicy: G is " + std::to_string(G.rows()) + "x" +
                                    std::to_string(G.cols()) + ", P has " + std::to_string(P.size()) +
                                    ", eps has " + std::to_string(eps.size()));
    return P + G * eps;
}

std::vector<Vec> applyAffinePolicy(const PrimalDualSolution& sol, const Vec& eps)
{
    std::vector<Vec> out;
    out.reserve(sol.P.size());
    for (size_t i = 0; i < sol.P.size(); ++i) out.push_back(applyAffinePolicy(sol.P[i], sol.G[i], eps));
    return out;
}

std::vector<Vec> enumerateVertices(const UncertaintySet& set, const VertexOptions& opt)
{
    if (!uncertaintySetBounded(set)) throw CaseError("vertex enumeration needs a bounded uncertainty set");
    const ReducedSet rs = reduce(set);
    std::vector<Vec> out;
    for (const Vec& v : reducedVertices(rs, opt)) out.push_back(rs.embed(v));
    return out;
}

std::vector<Vec> sampleUncertainty(const UncertaintySet& set, int n, std::uint64_t seed, SampleMode mode,
                                   const VertexOptions& vopt)
{
    std::vector<Vec> out;
    if (n <= 0) return out;
    const ReducedSet rs = reduce(set);
    if (rs.dim() == 0) {
        out.assign(n, Vec::Zero(set.dim()));
        return out;
    }

    std::vector<Vec> vertices;
    if (mode != SampleMode::WalkOnly) {
        try {
            vertices = reducedVertices(rs, vopt);
        } catch (const GuardError&) {
            if (mode == SampleMode::VertexOnly) throw;
        }
        // Snap rounding error so that every emitted vertex is exactly inside.
        const Vec center = chebyshevCenter(rs);
        for (Vec& v : vertices) {
            double s = 1e-15;
            while (!rs.contains(v) && s < 1e-6) {
                v = center + (1.0 - s) * (v - center);
                s *= 10.0;
            }
        }
    }
    if (mode == SampleMode::VertexOnly) {
        for (int i = 0; i < n; ++i) out.push_back(rs.embed(vertices[i % vertices.size()]));
        return out;
    }

    PortableRng rng(seed);
    Vec x = chebyshevCenter(rs);
    const int thin = std::max(1, rs.dim());
    for (int k = 0; k < 10 * thin; ++k) x = hitAndRunStep(rs, x, rng);
    size_t nextVertex = 0;
    for (int i = 0; i < n; ++i) {
        if (mode == SampleMode::Mixed && !vertices.empty() && i % 2 == 0) {
            out.push_back(rs.embed(vertices[nextVertex++ % vertices.size()]));
            continue;
        }
        for (int k = 0; k < thin; ++k) x = hitAndRunStep(rs, x, rng);
        out.push_back(rs.embed(x));
    }
    return out;
}

ScenarioResult evaluateScenario(const MarketCase& c, const ConstraintBlocks& b, const PrimalDualSolution& sol,
                                const Vec& eps)
{
    ScenarioResult r;
    r.eps = eps;
    r.adjusted = applyAffinePolicy(sol, eps);
    const Vec load = b.d + eps;
    const int nt = b.nt;

    for (int t = 0; t < nt; ++t) {
        double s = -b.D.row(t).dot(load);
        for (const Vec& p : r.adjusted) s += p[t];
        if (std::abs(s) > r.balanceResidual) r.balanceResidual = std::abs(s);
    }
    double worst = 0.0;
    auto note = [&](double v, const std::string& what) {
        if (v > worst) {
            worst = v;
            r.worstConstraint = what;
        }
    };
    for (int i = 0; i < b.nu; ++i) {
        const Vec v = b.A * r.adjusted[i] - b.R[i];
        for (int k = 0; k < v.size(); ++k) {
            if (v[k] <= r.unitViolation) continue;
            r.unitViolation = v[k];
            note(v[k], c.units[i].name + " " + unitRowName(static_cast<UnitRow>(k / nt)) + " t" + std::to_string(k % nt));
        }
    }
    for (int q = 0; q < b.lineRows(); ++q) {
        const int t = b.timeOfLineRow(q);
        double flow = -b.gammaD.row(q).dot(load);
        for (int i = 0; i < b.nu; ++i) flow += b.gammaUnit[i](q, t) * r.adjusted[i][t];
        const double v = flow - b.F[q];
        if (v <= r.lineViolation) continue;
        r.lineViolation = v;
        note(v, "line " + std::to_string(b.lineOf(q)) + (b.dirOf(q) == 0 ? " +" : " -") + " t" + std::to_string(t));
    }
    if (r.balanceResidual > worst) r.worstConstraint = "balance";

    for (int i = 0; i < b.nu; ++i) {
        const Unit& u = c.units[i];
        r.realizedCost += u.fixedCost;
        for (int t = 0; t < nt; ++t) {
            const double p = r.adjusted[i][t];
            r.realizedCost += b.dt * (u.q * p * p + u.b * p);
        }
    }
    return r;
}

AuditReport auditFeasibility(const MarketCase& c, const PrimalDualSolution& sol, const std::vector<Vec>& samples,
                             double feasTol, std::uint64_t seed)
{
    const ConstraintBlocks b = buildConstraintBlocks(c);
    AuditReport rep;
    rep.seed = seed;
    rep.feasTol = feasTol;
    rep.samples = static_cast<int>(samples.size());
    double costSum = 0.0;
    for (size_t s = 0; s < samples.size(); ++s) {
        const ScenarioResult r = evaluateScenario(c, b, sol, samples[s]);
        costSum += r.realizedCost;
        rep.maxBalanceResidual = std::max(rep.maxBalanceResidual, r.balanceResidual);
        if (r.worst() > feasTol) ++rep.violating;
        if (rep.worstSample < 0 || r.worst() > rep.maxViolation) {
            rep.maxViolation = r.worst();
            rep.worstSample = static_cast<int>(s);
            rep.worstConstraint = r.worstConstraint;
            rep.worstEps = r.eps;
        }
    }
    if (!samples.empty()) rep.meanRealizedCost = costSum / static_cast<double>(samples.size());
    return rep;
}

ScenarioOracle buildScenarioOracle(const MarketCase& c)
{
    return buildScenarioOracle(c, programOptions(c.settings));
}

ScenarioOracle buildScenarioOracle(const MarketCase& c, const ProgramOptions& opt, const VertexOptions& vopt)
{
    if (c.uncertainty.dim() != c.dim()) throw CaseError("uncertainty set dimension mismatch");
    ScenarioOracle o;
    o.vertices = enumerateVertices(c.uncertainty, vopt);

    RobustProgram& p = o.program;
    p.robust = false;  // no dual reconstruction; only P and G are meaningful
    p.options = opt;
    p.blocks = buildConstraintBlocks(c);
    p.dim = c.dim();
    p.S = c.uncertainty.S;
    p.h = c.uncertainty.h;
    p.sigma = c.moments.sigma.rows() == p.dim ? c.moments.sigma : Mat::Zero(p.dim, p.dim);
    p.setRows = c.uncertainty.rows();
    const ConstraintBlocks& b = p.blocks;
    const int nt = b.nt, nu = b.nu, dim = p.dim;
    const double dt = b.dt;

    const CoordinateBounds cb = coordinateBounds(c.uncertainty, false);
    p.eliminated.assign(dim, false);
    for (int j = 0; j < dim; ++j) {
        p.eliminated[j] = cb.pinned[j];
        if (!cb.pinned[j]) p.activeCoords.push_back(j);
    }
    auto allowed = [&](int t, int k) { return !opt.causal || k / b.nd <= t; };

    std::vector<double> cvec;
    std::vector<Triplet> hess;
    p.pIndex.assign(nu * nt, -1);
    p.gIndex.assign(static_cast<size_t>(nu) * nt * dim, -1);
    auto addVar = [&](VarTag tag, double cost) {
        p.vars.push_back(tag);
        cvec.push_back(cost);
        return static_cast<int>(p.vars.size()) - 1;
    };
    for (int i = 0; i < nu; ++i) {
        const Unit& u = c.units[i];
        for (int t = 0; t < nt; ++t) {
            const int v = addVar({VarKind::P, i, t, 0}, dt * u.b);
            p.pIndex[i * nt + t] = v;
            if (u.q != 0.0) hess.emplace_back(v, v, 2.0 * dt * u.q);
        }
        for (int t = 0; t < nt; ++t)
            for (int k : p.activeCoords)
                if (allowed(t, k)) p.gIndex[(static_cast<size_t>(i) * nt + t) * dim + k] = addVar({VarKind::G, i, t, k}, 0.0);
        if (u.q != 0.0)
            for (int t = 0; t < nt; ++t)
                for (int k1 : p.activeCoords)
                    for (int k2 : p.activeCoords) {
                        const int v1 = p.varG(i, t, k1), v2 = p.varG(i, t, k2);
                        if (v1 >= 0 && v2 >= 0 && p.sigma(k1, k2) != 0.0)
                            hess.emplace_back(v1, v2, 2.0 * dt * u.q * p.sigma(k1, k2));
                    }
    }

    std::vector<Triplet> eq, in;
    std::vector<double> beq, bin;
    for (int t = 0; t < nt; ++t) {
        const int r = static_cast<int>(beq.size());
        p.eqTags.push_back({RowKind::Balance, -1, t, 0});
        beq.push_back(-b.D.row(t).dot(b.d));
        for (int i = 0; i < nu; ++i) eq.emplace_back(r, p.varP(i, t), -1.0);
    }
    for (int t = 0; t < nt; ++t)
        for (int k : p.activeCoords) {
            if (!allowed(t, k)) continue;
            const int r = static_cast<int>(beq.size());
            p.eqTags.push_back({RowKind::AdjustBalance, -1, t, k});
            beq.push_back(-b.D(t, k));
            for (int i = 0; i < nu; ++i) eq.emplace_back(r, p.varG(i, t, k), -1.0);
        }

    const Vec rhs = b.lineRhs();
    for (size_t vi = 0; vi < o.vertices.size(); ++vi) {
        const Vec& e = o.vertices[vi];
        for (int i = 0; i < nu; ++i)
            for (int r = 0; r < 4 * nt; ++r) {
                const int row = static_cast<int>(bin.size());
                p.inTags.push_back({RowKind::ScenarioUnit, i, r, static_cast<int>(vi)});
                bin.push_back(b.R[i][r]);
                for (int t = 0; t < nt; ++t) {
                    const double a = b.A(r, t);
                    if (a == 0.0) continue;
                    in.emplace_back(row, p.varP(i, t), a);
                    for (int k : p.activeCoords) {
                        const int v = p.varG(i, t, k);
                        if (v >= 0 && e[k] != 0.0) in.emplace_back(row, v, a * e[k]);
                    }
                }
            }
        for (int q = 0; q < b.lineRows(); ++q) {
            const int t = b.timeOfLineRow(q);
            const int row = static_cast<int>(bin.size());
            p.inTags.push_back({RowKind::ScenarioLine, -1, q, static_cast<int>(vi)});
            bin.push_back(rhs[q] + b.gammaD.row(q).dot(e));
            for (int i = 0; i < nu; ++i) {
                const double g = b.gammaUnit[i](q, t);
                if (g == 0.0) continue;
                in.emplace_back(row, p.varP(i, t), g);
                for (int k : p.activeCoords) {
                    const int v = p.varG(i, t, k);
                    if (v >= 0 && e[k] != 0.0) in.emplace_back(row, v, g * e[k]);
                }
            }
        }
    }

    const int n = static_cast<int>(p.vars.size());
    p.qp.resize(n, static_cast<int>(beq.size()), static_cast<int>(bin.size()));
    p.qp.c = Eigen::Map<Vec>(cvec.data(), n);
    p.qp.constant = 0.0;
    for (const Unit& u : c.units) p.qp.constant += u.fixedCost;
    p.qp.H.setFromTriplets(hess.begin(), hess.end());
    p.qp.Aeq.setFromTriplets(eq.begin(), eq.end());
    p.qp.Ain.setFromTriplets(in.begin(), in.end());
    p.qp.beq = Eigen::Map<Vec>(beq.data(), static_cast<Eigen::Index>(beq.size()));
    p.qp.bin = Eigen::Map<Vec>(bin.data(), static_cast<Eigen::Index>(bin.size()));
    return o;
}

}  // namespace rsced
