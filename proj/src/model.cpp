#include "rsced/model.hpp"

#include "rsced/qp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace rsced {

CommitmentSchedule CommitmentSchedule::allOn(int units, int periods)
{
    CommitmentSchedule s;
    s.on.assign(units, std::vector<int>(periods, 1));
    s.startup.assign(units, std::vector<int>(periods, 0));
    s.shutdown.assign(units, std::vector<int>(periods, 0));
    return s;
}

int uncertaintyIndex(int numBuses, int periods, int bus, int t)
{
    if (bus < 0 || bus >= numBuses || t < 0 || t >= periods)
        throw std::out_of_range("uncertainty coordinate out of range");
    return t * numBuses + bus;
}

std::pair<int, int> uncertaintyCoordinate(int numBuses, int periods, int index)
{
    if (numBuses <= 0 || index < 0 || index >= numBuses * periods)
        throw std::out_of_range("uncertainty index out of range");
    return {index % numBuses, index / numBuses};
}

UncertaintySet boxBudgetSet(int numBuses, int periods, const BoxBudget& spec)
{
    const int dim = numBuses * periods;
    auto inList = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };
    const int budgets = static_cast<int>(spec.periods.size());
    UncertaintySet u;
    u.S = Mat::Zero(2 * dim + 2 * budgets, dim);
    u.h = Vec::Zero(u.S.rows());
    for (int t = 0; t < periods; ++t) {
        const double growth = 1.0 + spec.growth * t;
        for (int m = 0; m < numBuses; ++m) {
            const int j = uncertaintyIndex(numBuses, periods, m, t);
            const bool active = inList(spec.buses, m) && inList(spec.periods, t);
            const double bound = active ? spec.boxScale * spec.r1 * growth : 0.0;
            u.S(2 * j, j) = 1.0;
            u.S(2 * j + 1, j) = -1.0;
            u.h[2 * j] = bound;
            u.h[2 * j + 1] = bound;
        }
    }
    for (int k = 0; k < budgets; ++k) {
        const int t = spec.periods[k];
        const double bound = spec.budgetScale * spec.r1 * spec.r2 * (1.0 + spec.growth * t);
        const int row = 2 * dim + 2 * k;
        for (int m : spec.buses) {
            const int j = uncertaintyIndex(numBuses, periods, m, t);
            u.S(row, j) = 1.0;
            u.S(row + 1, j) = -1.0;
        }
        u.h[row] = bound;
        u.h[row + 1] = bound;
    }
    return u;
}

void applyBoxBudget(MarketCase& c, const BoxBudget& spec)
{
    for (int m : spec.buses)
        if (m < 0 || m >= c.numBuses()) throw CaseError("box/budget bus out of range");
    for (int t : spec.periods)
        if (t < 0 || t >= c.periods()) throw CaseError("box/budget period out of range");
    c.uncertainty = boxBudgetSet(c.numBuses(), c.periods(), spec);
    c.boxBudget = spec;
    const int dim = c.dim();
    if (spec.stdFraction) {
        c.moments.sigma = Mat::Zero(dim, dim);
        for (int j = 0; j < dim; ++j) {
            const double sd = *spec.stdFraction * c.uncertainty.h[2 * j];
            c.moments.sigma(j, j) = sd * sd;
        }
    } else if (c.moments.sigma.rows() != dim || c.moments.sigma.cols() != dim) {
        c.moments.sigma = Mat::Zero(dim, dim);
    }
}

const char* violationCode(Violation v)
{
    switch (v) {
    case Violation::BadDimension: return "bad-dimension";
    case Violation::BadBusIndex: return "bad-bus-index";
    case Violation::BadSlack: return "bad-slack";
    case Violation::Disconnected: return "disconnected-network";
    case Violation::NonPositiveReactance: return "non-positive-reactance";
    case Violation::NonPositiveLimit: return "non-positive-flow-limit";
    case Violation::BadCapacity: return "bad-capacity-bounds";
    case Violation::NonPositiveRamp: return "non-positive-ramp";
    case Violation::NegativeCost: return "negative-quadratic-cost";
    case Violation::CommitmentShape: return "commitment-shape";
    case Violation::CommitmentValue: return "commitment-not-binary";
    case Violation::CommitmentInconsistent: return "commitment-inconsistent";
    case Violation::StartupWhileOff: return "startup-while-off";
    case Violation::StartupAndShutdown: return "startup-and-shutdown";
    case Violation::NonPositiveInterval: return "non-positive-interval";
    case Violation::NegativeLevel: return "uncertainty-level-negative";
    case Violation::UnboundedSet: return "uncertainty-set-unbounded";
    case Violation::SigmaShape: return "covariance-shape";
    case Violation::SigmaAsymmetric: return "covariance-asymmetric";
    case Violation::SigmaIndefinite: return "covariance-indefinite";
    case Violation::SigmaOnPinned: return "covariance-on-pinned-coordinate";
    }
    return "unknown";
}

bool ValidationReport::has(Violation v) const
{
    return std::any_of(items.begin(), items.end(), [v](const ViolationItem& i) { return i.code == v; });
}

std::string ValidationReport::summary() const
{
    std::ostringstream os;
    for (const auto& i : items) os << violationCode(i.code) << ": " << i.message << "\n";
    return os.str();
}

namespace {

bool connected(const Network& net)
{
    if (net.numBuses <= 1) return true;
    std::vector<std::vector<int>> adj(net.numBuses);
    for (const auto& l : net.lines) {
        if (l.from < 0 || l.to < 0 || l.from >= net.numBuses || l.to >= net.numBuses) continue;
        adj[l.from].push_back(l.to);
        adj[l.to].push_back(l.from);
    }
    std::vector<bool> seen(net.numBuses, false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    int count = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = true;
                ++count;
                q.push(v);
            }
    }
    return count == net.numBuses;
}

// max (sign * d_j) over {S d <= 0, -1 <= d <= 1}; > 0 means a recession direction.
double recession(const Mat& S, int j, double sign)
{
    const int n = static_cast<int>(S.cols());
    QpProblem lp;
    lp.resize(n, 0, static_cast<int>(S.rows()));
    lp.Ain = S.sparseView();
    lp.lower.setConstant(-1.0);
    lp.upper.setConstant(1.0);
    lp.c[j] = -sign;
    QpOptions o;
    o.tol = 1e-10;
    const QpResult r = solveQp(lp, o);
    return r.optimal() ? -r.objective : kInf;
}

double extreme(const UncertaintySet& u, int j, double sign)
{
    const int n = u.dim();
    QpProblem lp;
    lp.resize(n, 0, u.rows());
    lp.Ain = u.S.sparseView();
    lp.bin = u.h;
    lp.c[j] = -sign;
    QpOptions o;
    o.tol = 1e-10;
    const QpResult r = solveQp(lp, o);
    return r.optimal() ? sign * -r.objective : sign * kInf;
}

}  // namespace

CoordinateBounds coordinateBounds(const UncertaintySet& set, bool solveLps)
{
    const int n = set.dim();
    CoordinateBounds b;
    b.lo = Vec::Constant(n, -kInf);
    b.hi = Vec::Constant(n, kInf);
    b.pinned.assign(n, false);
    for (int r = 0; r < set.rows(); ++r) {
        int col = -1, nnz = 0;
        for (int j = 0; j < n; ++j)
            if (set.S(r, j) != 0.0) {
                col = j;
                ++nnz;
            }
        if (nnz != 1) continue;
        const double a = set.S(r, col);
        if (a > 0) b.hi[col] = std::min(b.hi[col], set.h[r] / a);
        else b.lo[col] = std::max(b.lo[col], set.h[r] / a);
    }
    for (int j = 0; j < n; ++j) b.pinned[j] = b.hi[j] == 0.0 && b.lo[j] == 0.0;
    if (!solveLps) return b;

    for (int j = 0; j < n; ++j) {
        if (std::isfinite(b.hi[j]) && std::isfinite(b.lo[j])) continue;
        for (double sign : {1.0, -1.0}) {
            double& slot = sign > 0 ? b.hi[j] : b.lo[j];
            if (std::isfinite(slot)) continue;
            if (recession(set.S, j, sign) > 1e-7) continue;
            slot = extreme(set, j, sign);
        }
    }
    return b;
}

bool uncertaintySetBounded(const UncertaintySet& set)
{
    const CoordinateBounds b = coordinateBounds(set);
    return b.lo.allFinite() && b.hi.allFinite();
}

ValidationReport validateCase(const MarketCase& c)
{
    ValidationReport rep;
    auto add = [&rep](Violation v, std::string msg) { rep.items.push_back({v, std::move(msg)}); };
    const int nb = c.numBuses();
    const int nt = c.periods();
    const int nu = c.numUnits();

    if (nb <= 0) add(Violation::BadDimension, "network has no buses");
    if (nt <= 0) add(Violation::BadDimension, "no intervals in load forecast");
    if (c.loads.demand.rows() != nb)
        add(Violation::BadDimension, "load rows " + std::to_string(c.loads.demand.rows()) + " != bus count");
    if (c.network.slack < 0 || c.network.slack >= nb) add(Violation::BadSlack, "slack bus out of range");

    for (int l = 0; l < c.numLines(); ++l) {
        const Line& ln = c.network.lines[l];
        const std::string tag = "line " + std::to_string(l);
        if (ln.from < 0 || ln.from >= nb || ln.to < 0 || ln.to >= nb || ln.from == ln.to)
            add(Violation::BadBusIndex, tag + " has invalid endpoints");
        if (!(ln.reactance > 0)) add(Violation::NonPositiveReactance, tag + " reactance must be positive");
        if (!(ln.limit > 0)) add(Violation::NonPositiveLimit, tag + " flow limit must be positive");
    }
    if (nb > 0 && !connected(c.network)) add(Violation::Disconnected, "network graph is not connected");

    for (int i = 0; i < nu; ++i) {
        const Unit& u = c.units[i];
        const std::string tag = "unit " + (u.name.empty() ? std::to_string(i) : u.name);
        if (u.bus < 0 || u.bus >= nb) add(Violation::BadBusIndex, tag + " bus out of range");
        if (!(u.pmin >= 0 && u.pmin <= u.pmax)) add(Violation::BadCapacity, tag + " needs 0 <= Pmin <= Pmax");
        if (!(u.rampUp > 0) || !(u.rampDown > 0)) add(Violation::NonPositiveRamp, tag + " ramp limits must be positive");
        if (u.q < 0) add(Violation::NegativeCost, tag + " quadratic cost must be nonnegative");
    }

    const auto& cm = c.commitment;
    auto shapeOk = [&](const std::vector<std::vector<int>>& m) {
        if (static_cast<int>(m.size()) != nu) return false;
        return std::all_of(m.begin(), m.end(), [nt](const auto& r) { return static_cast<int>(r.size()) == nt; });
    };
    if (!shapeOk(cm.on) || !shapeOk(cm.startup) || !shapeOk(cm.shutdown)) {
        add(Violation::CommitmentShape, "commitment tables must be units x intervals");
    } else {
        for (int i = 0; i < nu; ++i) {
            const std::string tag = "unit " + std::to_string(i);
            for (int t = 0; t < nt; ++t) {
                const int on = cm.on[i][t], y = cm.startup[i][t], z = cm.shutdown[i][t];
                const std::string at = tag + " t=" + std::to_string(t);
                if ((on != 0 && on != 1) || (y != 0 && y != 1) || (z != 0 && z != 1)) {
                    add(Violation::CommitmentValue, at + " indicators must be 0/1");
                    continue;
                }
                if (y > on) add(Violation::StartupWhileOff, at + " start-up while off");
                if (y == 1 && z == 1) add(Violation::StartupAndShutdown, at + " start-up and shutdown together");
                if (t >= 1) {
                    const int prev = cm.on[i][t - 1];
                    if (prev != 0 && prev != 1) continue;  // already reported
                    if (on - prev != y - z) add(Violation::CommitmentInconsistent, at + " on/off change disagrees with start-up/shutdown");
                }
            }
        }
    }

    if (!(c.loads.dt > 0)) add(Violation::NonPositiveInterval, "interval length must be positive");

    const int dim = nb * nt;
    const auto& U = c.uncertainty;
    bool setShape = true;
    if (U.S.cols() != dim || U.h.size() != U.S.rows()) {
        add(Violation::BadDimension, "uncertainty set must have N_D*N_T columns and matching h");
        setShape = false;
    }
    if (setShape) {
        for (int r = 0; r < U.rows(); ++r)
            if (U.h[r] < 0) add(Violation::NegativeLevel, "uncertainty level negative in row " + std::to_string(r));
    }

    const Mat& sig = c.moments.sigma;
    bool sigOk = sig.rows() == dim && sig.cols() == dim;
    if (!sigOk) add(Violation::SigmaShape, "covariance must be (N_D*N_T) square");
    if (sigOk && (sig - sig.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + sig.cwiseAbs().maxCoeff())) {
        add(Violation::SigmaAsymmetric, "covariance is not symmetric");
        sigOk = false;
    }
    if (sigOk && dim > 0) {
        Eigen::SelfAdjointEigenSolver<Mat> es(sig, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-9 * (1.0 + sig.cwiseAbs().maxCoeff()))
            add(Violation::SigmaIndefinite, "covariance is not positive semidefinite");
    }

    if (setShape && !rep.has(Violation::NegativeLevel) && dim > 0) {
        const CoordinateBounds b = coordinateBounds(U);
        for (int j = 0; j < dim; ++j) {
            if (!std::isfinite(b.lo[j]) || !std::isfinite(b.hi[j])) {
                add(Violation::UnboundedSet, "uncertainty set unbounded along coordinate " + std::to_string(j));
                break;
            }
        }
        if (sigOk)
            for (int j = 0; j < dim; ++j)
                if (b.pinned[j] && sig.row(j).cwiseAbs().maxCoeff() > 0.0) {
                    add(Violation::SigmaOnPinned, "covariance is nonzero on pinned coordinate " + std::to_string(j));
                    break;
                }
    }
    return rep;
}

}  // namespace rsced
