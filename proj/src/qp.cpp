#include "rsced/qp.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cholmod.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace rsced {

void QpProblem::resize(int vars, int eqRows, int inRows)
{
    n = vars;
    H.resize(vars, vars);
    c = Eigen::VectorXd::Zero(vars);
    Aeq.resize(eqRows, vars);
    beq = Eigen::VectorXd::Zero(eqRows);
    Ain.resize(inRows, vars);
    bin = Eigen::VectorXd::Zero(inRows);
    lower = Eigen::VectorXd::Constant(vars, -kInf);
    upper = Eigen::VectorXd::Constant(vars, kInf);
}

double QpProblem::objective(const Eigen::VectorXd& x) const
{
    return 0.5 * x.dot(H * x) + c.dot(x) + constant;
}

const char* statusName(QpStatus s)
{
    switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::Unbounded: return "unbounded";
    case QpStatus::NumericalFailure: return "numerical-failure";
    case QpStatus::IterationLimit: return "iteration-limit";
    }
    return "unknown";
}

double QpKkt::worst() const
{
    return std::max({stationarity, primal, dual, complementarity});
}

namespace {

// Nested-dissection ordering from METIS (through CHOLMOD) of the lower-stored
// pattern. The robust programs tie every unit to dense shift-factor rows and
// AMD fills in an order of magnitude more there. Falls back to AMD.
std::vector<int> fillReducingOrder(const SpMat& lower)
{
    const int N = static_cast<int>(lower.rows());
    std::vector<int> perm(N);
    bool ok = false;
    if (N > 200) {
        cholmod_common cm;
        cholmod_start(&cm);
        cm.print = 0;
        cholmod_sparse A{};
        A.nrow = A.ncol = static_cast<size_t>(N);
        A.nzmax = static_cast<size_t>(lower.nonZeros());
        A.p = const_cast<int*>(lower.outerIndexPtr());
        A.i = const_cast<int*>(lower.innerIndexPtr());
        A.x = const_cast<double*>(lower.valuePtr());
        A.stype = -1;
        A.itype = CHOLMOD_INT;
        A.xtype = CHOLMOD_PATTERN;
        A.dtype = CHOLMOD_DOUBLE;
        A.sorted = 1;
        A.packed = 1;
        cm.nmethods = 1;
        cm.method[0].ordering = CHOLMOD_METIS;
        cm.postorder = 1;
        cm.supernodal = CHOLMOD_SIMPLICIAL;
        cholmod_factor* L = cholmod_analyze(&A, &cm);
        if (L && cm.status == CHOLMOD_OK) {
            const int* p = static_cast<const int*>(L->Perm);
            for (int k = 0; k < N; ++k) perm[p[k]] = k;
            ok = true;
        }
        cholmod_free_factor(&L, &cm);
        cholmod_finish(&cm);
    }
    if (!ok) {
        Eigen::AMDOrdering<int> amd;
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> P;
        amd(lower.selfadjointView<Eigen::Lower>(), P);
        // AMDOrdering returns the inverse permutation (new -> old).
        for (int k = 0; k < N; ++k) perm[P.indices()[k]] = k;
    }
    return perm;
}

double infNorm(const Eigen::VectorXd& v)
{
    return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

// Largest step in (0, 1] keeping v + a*dv >= (1 - frac) * v.
double stepTo(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double frac)
{
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) a = std::min(a, -frac * v[i] / dv[i]);
    return a;
}

struct Bounds {
    std::vector<int> lo, up;
};

class Ipm {
public:
    Ipm(const QpProblem& qp, const QpOptions& opt) : qp_(qp), opt_(opt) {}
    QpResult run();

private:
    struct Dir {
        Eigen::VectorXd x, y, z, s, vl, wl, vu, wu;
    };

    void assemble();
    bool factor();
    bool factorWith(double regP, double regD);
    void solve(const Eigen::VectorXd& rcs, const Eigen::VectorXd& rcl, const Eigen::VectorXd& rcu, Dir& d);
    void residuals();
    double mu() const;

    const QpProblem& qp_;
    QpOptions opt_;
    int n_ = 0, me_ = 0, mi_ = 0;
    Bounds b_;
    Eigen::VectorXd lval_, uval_;

    SpMat K_;
    std::vector<int> diagIdx_;
    std::vector<double> base_;
    Eigen::VectorXd diagPlain_;  // diagonal without regularization
    // K_ is stored already permuted (lower triangle), perm_[old] = new.
    std::vector<int> perm_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt_;
    bool analyzed_ = false;
    double regP_ = 0.0, regD_ = 0.0;

    Eigen::VectorXd x_, y_, z_, s_, vl_, wl_, vu_, wu_;
    Eigen::VectorXd rd_, re_, ri_, rl_, ru_;
};

void Ipm::assemble()
{
    n_ = qp_.n;
    me_ = static_cast<int>(qp_.Aeq.rows());
    mi_ = static_cast<int>(qp_.Ain.rows());
    for (int j = 0; j < n_; ++j) {
        if (std::isfinite(qp_.lower[j])) b_.lo.push_back(j);
        if (std::isfinite(qp_.upper[j])) b_.up.push_back(j);
    }
    lval_.resize(b_.lo.size());
    uval_.resize(b_.up.size());
    for (size_t k = 0; k < b_.lo.size(); ++k) lval_[k] = qp_.lower[b_.lo[k]];
    for (size_t k = 0; k < b_.up.size(); ++k) uval_[k] = qp_.upper[b_.up[k]];

    const int N = n_ + me_ + mi_;
    std::vector<Triplet> t;
    t.reserve(qp_.H.nonZeros() + qp_.Aeq.nonZeros() + qp_.Ain.nonZeros() + N);
    for (int k = 0; k < qp_.H.outerSize(); ++k)
        for (SpMat::InnerIterator it(qp_.H, k); it; ++it)
            if (it.row() >= it.col()) t.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < qp_.Aeq.outerSize(); ++k)
        for (SpMat::InnerIterator it(qp_.Aeq, k); it; ++it)
            t.emplace_back(n_ + it.row(), it.col(), it.value());
    for (int k = 0; k < qp_.Ain.outerSize(); ++k)
        for (SpMat::InnerIterator it(qp_.Ain, k); it; ++it)
            t.emplace_back(n_ + me_ + it.row(), it.col(), it.value());
    for (int i = 0; i < N; ++i) t.emplace_back(i, i, 0.0);
    K_.resize(N, N);
    K_.setFromTriplets(t.begin(), t.end());
    K_.makeCompressed();

    perm_ = fillReducingOrder(K_);
    for (Triplet& e : t) {
        int r = perm_[e.row()], c = perm_[e.col()];
        if (r < c) std::swap(r, c);
        e = Triplet(r, c, e.value());
    }
    K_.setZero();
    K_.setFromTriplets(t.begin(), t.end());
    K_.makeCompressed();

    // Indexed by the original (unpermuted) position.
    diagIdx_.assign(N, -1);
    for (int i = 0; i < N; ++i) {
        const int col = perm_[i];
        for (int p = K_.outerIndexPtr()[col]; p < K_.outerIndexPtr()[col + 1]; ++p)
            if (K_.innerIndexPtr()[p] == col) diagIdx_[i] = p;
    }
    base_.assign(K_.valuePtr(), K_.valuePtr() + K_.nonZeros());
    diagPlain_.resize(N);
}

bool Ipm::factor()
{
    // Pivots can vanish once slacks reach the rounding floor; refinement in
    // solve() absorbs the extra regularization.
    for (double scale = 1.0; scale <= 1e6; scale *= 100.0)
        if (factorWith(opt_.regPrimal * scale, opt_.regDual * scale)) return true;
    return false;
}

bool Ipm::factorWith(double regP, double regD)
{
    regP_ = regP;
    regD_ = regD;
    std::copy(base_.begin(), base_.end(), K_.valuePtr());
    double* v = K_.valuePtr();
    for (int j = 0; j < n_; ++j) diagPlain_[j] = base_[diagIdx_[j]];
    for (size_t k = 0; k < b_.lo.size(); ++k) diagPlain_[b_.lo[k]] += wl_[k] / vl_[k];
    for (size_t k = 0; k < b_.up.size(); ++k) diagPlain_[b_.up[k]] += wu_[k] / vu_[k];
    for (int r = 0; r < me_; ++r) diagPlain_[n_ + r] = 0.0;
    for (int r = 0; r < mi_; ++r) diagPlain_[n_ + me_ + r] = -s_[r] / z_[r];
    for (int j = 0; j < n_; ++j) v[diagIdx_[j]] = diagPlain_[j] + regP;
    for (int r = 0; r < me_ + mi_; ++r) v[diagIdx_[n_ + r]] = diagPlain_[n_ + r] - regD;
    if (!analyzed_) {
        ldlt_.analyzePattern(K_);
        analyzed_ = true;
    }
    ldlt_.factorize(K_);
    if (ldlt_.info() != Eigen::Success) return false;
    const auto& dv = ldlt_.vectorD();
    for (Eigen::Index i = 0; i < dv.size(); ++i)
        if (!std::isfinite(dv[i])) return false;
    return true;
}

void Ipm::solve(const Eigen::VectorXd& rcs, const Eigen::VectorXd& rcl, const Eigen::VectorXd& rcu, Dir& d)
{
    const int N = n_ + me_ + mi_;
    Eigen::VectorXd rhs(N);
    Eigen::VectorXd r1 = -rd_;
    for (size_t k = 0; k < b_.lo.size(); ++k) r1[b_.lo[k]] += (rcl[k] - wl_[k] * rl_[k]) / vl_[k];
    for (size_t k = 0; k < b_.up.size(); ++k) r1[b_.up[k]] -= (rcu[k] + wu_[k] * ru_[k]) / vu_[k];
    rhs.head(n_) = r1;
    rhs.segment(n_, me_) = -re_;
    rhs.tail(mi_) = -ri_ - rcs.cwiseQuotient(z_);

    // Refine against the unregularized matrix.
    Eigen::VectorXd b(N), reg(N);
    for (int i = 0; i < N; ++i) {
        b[perm_[i]] = rhs[i];
        reg[perm_[i]] = i < n_ ? regP_ : -regD_;
    }
    Eigen::VectorXd y = ldlt_.solve(b);
    for (int it = 0; it < opt_.refinementSteps; ++it) {
        Eigen::VectorXd res = b - (K_.selfadjointView<Eigen::Lower>() * y - reg.cwiseProduct(y));
        if (infNorm(res) <= 1e-14 * (1.0 + infNorm(b))) break;
        y += ldlt_.solve(res);
    }
    Eigen::VectorXd sol(N);
    for (int i = 0; i < N; ++i) sol[i] = y[perm_[i]];

    d.x = sol.head(n_);
    d.y = sol.segment(n_, me_);
    d.z = sol.tail(mi_);
    d.s = (rcs - s_.cwiseProduct(d.z)).cwiseQuotient(z_);
    d.vl.resize(b_.lo.size());
    d.wl.resize(b_.lo.size());
    for (size_t k = 0; k < b_.lo.size(); ++k) {
        d.vl[k] = d.x[b_.lo[k]] + rl_[k];
        d.wl[k] = (rcl[k] - wl_[k] * d.vl[k]) / vl_[k];
    }
    d.vu.resize(b_.up.size());
    d.wu.resize(b_.up.size());
    for (size_t k = 0; k < b_.up.size(); ++k) {
        d.vu[k] = -ru_[k] - d.x[b_.up[k]];
        d.wu[k] = (rcu[k] - wu_[k] * d.vu[k]) / vu_[k];
    }
}

void Ipm::residuals()
{
    rd_ = qp_.H * x_ + qp_.c;
    if (me_) rd_ += qp_.Aeq.transpose() * y_;
    if (mi_) rd_ += qp_.Ain.transpose() * z_;
    for (size_t k = 0; k < b_.lo.size(); ++k) rd_[b_.lo[k]] -= wl_[k];
    for (size_t k = 0; k < b_.up.size(); ++k) rd_[b_.up[k]] += wu_[k];
    re_ = me_ ? Eigen::VectorXd(qp_.Aeq * x_ - qp_.beq) : Eigen::VectorXd();
    ri_ = mi_ ? Eigen::VectorXd(qp_.Ain * x_ + s_ - qp_.bin) : Eigen::VectorXd();
    rl_.resize(b_.lo.size());
    for (size_t k = 0; k < b_.lo.size(); ++k) rl_[k] = x_[b_.lo[k]] - vl_[k] - lval_[k];
    ru_.resize(b_.up.size());
    for (size_t k = 0; k < b_.up.size(); ++k) ru_[k] = x_[b_.up[k]] + vu_[k] - uval_[k];
}

double Ipm::mu() const
{
    const double cnt = static_cast<double>(mi_ + b_.lo.size() + b_.up.size());
    if (cnt == 0) return 0.0;
    return (s_.dot(z_) + vl_.dot(wl_) + vu_.dot(wu_)) / cnt;
}

QpResult Ipm::run()
{
    QpResult res;
    assemble();
    const size_t nl = b_.lo.size(), nu = b_.up.size();

    x_ = Eigen::VectorXd::Zero(n_);
    for (int j = 0; j < n_; ++j) {
        const double l = qp_.lower[j], u = qp_.upper[j];
        if (std::isfinite(l) && std::isfinite(u)) x_[j] = 0.5 * (l + u);
        else if (std::isfinite(l)) x_[j] = std::max(0.0, l) + 1.0;
        else if (std::isfinite(u)) x_[j] = std::min(0.0, u) - 1.0;
    }
    y_ = Eigen::VectorXd::Zero(me_);
    s_ = Eigen::VectorXd::Ones(mi_);
    if (mi_) s_ = (qp_.bin - qp_.Ain * x_).cwiseMax(1.0);
    z_ = Eigen::VectorXd::Ones(mi_);
    vl_.resize(nl);
    wl_ = Eigen::VectorXd::Ones(nl);
    for (size_t k = 0; k < nl; ++k) vl_[k] = std::max(x_[b_.lo[k]] - lval_[k], 1.0);
    vu_.resize(nu);
    wu_ = Eigen::VectorXd::Ones(nu);
    for (size_t k = 0; k < nu; ++k) vu_[k] = std::max(uval_[k] - x_[b_.up[k]], 1.0);

    const bool linear = qp_.H.nonZeros() == 0;
    const double tol = opt_.tol;
    double best = kInf;
    int stall = 0;

    for (int iter = 0; iter <= opt_.maxIterations; ++iter) {
        residuals();
        const double m = mu();
        const double pres = std::max({infNorm(re_), infNorm(ri_), infNorm(rl_), infNorm(ru_)});
        const double dres = infNorm(rd_);
        const double worst = std::max({pres, dres, m});
        res.iterations = iter;
        res.worstResidual = worst;
        if (pres <= tol && dres <= tol && m <= tol) {
            res.status = QpStatus::Optimal;
            break;
        }
        if (worst < 0.5 * best) {
            best = worst;
            stall = 0;
        } else if (++stall > 30) {
            res.status = worst <= 1e-6 ? QpStatus::Optimal : QpStatus::NumericalFailure;
            res.message = "stalled";
            break;
        }

        // Certificates of infeasibility / unboundedness on normalized iterates.
        const double dualNorm = std::max({infNorm(y_), infNorm(z_), infNorm(wl_), infNorm(wu_)});
        if (dualNorm > 1e6) {
            Eigen::VectorXd ray = Eigen::VectorXd::Zero(n_);
            if (me_) ray += qp_.Aeq.transpose() * y_;
            if (mi_) ray += qp_.Ain.transpose() * z_;
            double bt = (me_ ? qp_.beq.dot(y_) : 0.0) + (mi_ ? qp_.bin.dot(z_) : 0.0);
            for (size_t k = 0; k < nl; ++k) { ray[b_.lo[k]] -= wl_[k]; bt -= lval_[k] * wl_[k]; }
            for (size_t k = 0; k < nu; ++k) { ray[b_.up[k]] += wu_[k]; bt += uval_[k] * wu_[k]; }
            if (infNorm(ray) <= 1e-6 * dualNorm && bt < -1e-8 * dualNorm) {
                res.status = QpStatus::Infeasible;
                break;
            }
        }
        const double xn = infNorm(x_);
        if (xn > 1e9) {
            const Eigen::VectorXd d = x_ / xn;
            double viol = infNorm(qp_.H * d);
            if (me_) viol = std::max(viol, infNorm(qp_.Aeq * d));
            if (mi_) viol = std::max(viol, (qp_.Ain * d).maxCoeff());
            for (size_t k = 0; k < nl; ++k) viol = std::max(viol, -d[b_.lo[k]]);
            for (size_t k = 0; k < nu; ++k) viol = std::max(viol, d[b_.up[k]]);
            if (viol <= 1e-6 && qp_.c.dot(d) < -1e-8) {
                res.status = QpStatus::Unbounded;
                break;
            }
        }
        if (iter == opt_.maxIterations) {
            res.status = worst <= 1e-6 ? QpStatus::Optimal : QpStatus::IterationLimit;
            break;
        }

        if (!factor()) {
            res.status = dualNorm > 1e4 ? QpStatus::Infeasible : QpStatus::NumericalFailure;
            res.message = "factorization failed";
            break;
        }

        Dir aff, cor;
        solve(-s_.cwiseProduct(z_), -vl_.cwiseProduct(wl_), -vu_.cwiseProduct(wu_), aff);
        double ap = std::min({stepTo(s_, aff.s, 1.0), stepTo(vl_, aff.vl, 1.0), stepTo(vu_, aff.vu, 1.0)});
        double ad = std::min({stepTo(z_, aff.z, 1.0), stepTo(wl_, aff.wl, 1.0), stepTo(wu_, aff.wu, 1.0)});
        if (!linear) ap = ad = std::min(ap, ad);
        double muAff = 0.0;
        const double cnt = static_cast<double>(mi_ + nl + nu);
        if (cnt > 0) {
            muAff = ((s_ + ap * aff.s).dot(z_ + ad * aff.z) + (vl_ + ap * aff.vl).dot(wl_ + ad * aff.wl)
                     + (vu_ + ap * aff.vu).dot(wu_ + ad * aff.wu)) / cnt;
        }
        const double sigma = m > 0 ? std::pow(std::clamp(muAff / m, 0.0, 1.0), 3) : 0.0;
        const double target = sigma * m;

        Eigen::VectorXd rcs = (-s_.cwiseProduct(z_) - aff.s.cwiseProduct(aff.z)).array() + target;
        Eigen::VectorXd rcl = (-vl_.cwiseProduct(wl_) - aff.vl.cwiseProduct(aff.wl)).array() + target;
        Eigen::VectorXd rcu = (-vu_.cwiseProduct(wu_) - aff.vu.cwiseProduct(aff.wu)).array() + target;
        solve(rcs, rcl, rcu, cor);

        const double frac = std::max(0.99, 1.0 - 10.0 * m);
        ap = std::min({stepTo(s_, cor.s, frac), stepTo(vl_, cor.vl, frac), stepTo(vu_, cor.vu, frac)});
        ad = std::min({stepTo(z_, cor.z, frac), stepTo(wl_, cor.wl, frac), stepTo(wu_, cor.wu, frac)});
        if (!linear) ap = ad = std::min(ap, ad);

        x_ += ap * cor.x;
        s_ += ap * cor.s;
        vl_ += ap * cor.vl;
        vu_ += ap * cor.vu;
        y_ += ad * cor.y;
        z_ += ad * cor.z;
        wl_ += ad * cor.wl;
        wu_ += ad * cor.wu;
    }

    res.x = x_;
    res.y = y_;
    res.z = z_;
    res.wl = Eigen::VectorXd::Zero(n_);
    res.wu = Eigen::VectorXd::Zero(n_);
    for (size_t k = 0; k < nl; ++k) res.wl[b_.lo[k]] = wl_[k];
    for (size_t k = 0; k < nu; ++k) res.wu[b_.up[k]] = wu_[k];
    res.objective = qp_.objective(x_);
    return res;
}

}  // namespace

namespace {

// One equality-constrained solve on a guessed active set. Rows with
// slack <= thresh are active; for thresh < 0 the test is multiplier > slack.
bool polishWith(const QpProblem& qp, QpResult& r, double thresh)
{
    const int n = qp.n, me = static_cast<int>(qp.Aeq.rows()), mi = static_cast<int>(qp.Ain.rows());
    const Eigen::VectorXd slack = mi ? Eigen::VectorXd(qp.bin - qp.Ain * r.x) : Eigen::VectorXd();
    auto active = [&](double sl, double mult) { return thresh < 0 ? mult > sl : sl <= thresh; };

    std::vector<int> fixedAt(n, 0);  // -1 lower, +1 upper
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(qp.lower[j]) && active(r.x[j] - qp.lower[j], r.wl[j])) fixedAt[j] = -1;
        else if (std::isfinite(qp.upper[j]) && active(qp.upper[j] - r.x[j], r.wu[j])) fixedAt[j] = 1;
    }
    std::vector<int> act;
    for (int i = 0; i < mi; ++i)
        if (active(slack[i], r.z[i])) act.push_back(i);

    std::vector<int> freeIdx(n, -1);
    int nf = 0;
    Eigen::VectorXd xb = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        if (fixedAt[j]) xb[j] = fixedAt[j] < 0 ? qp.lower[j] : qp.upper[j];
        else freeIdx[j] = nf++;
    }
    const int na = static_cast<int>(act.size());
    const int N = nf + me + na;
    std::vector<int> actRow(mi, -1);
    for (int k = 0; k < na; ++k) actRow[act[k]] = k;

    std::vector<Triplet> t;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
    const Eigen::VectorXd hx = qp.H * xb;
    for (int j = 0; j < n; ++j)
        if (freeIdx[j] >= 0) rhs[freeIdx[j]] = -qp.c[j] - hx[j];
    for (int k = 0; k < qp.H.outerSize(); ++k)
        for (SpMat::InnerIterator it(qp.H, k); it; ++it)
            if (freeIdx[it.row()] >= 0 && freeIdx[it.col()] >= 0)
                t.emplace_back(freeIdx[it.row()], freeIdx[it.col()], it.value());
    auto addRows = [&](const SpMat& A, const Eigen::VectorXd& b, int base, const std::vector<int>* pick) {
        Eigen::VectorXd ax = A * xb;
        for (int k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it) {
                const int row = pick ? (*pick)[it.row()] : static_cast<int>(it.row());
                if (row < 0 || freeIdx[it.col()] < 0) continue;
                t.emplace_back(base + row, freeIdx[it.col()], it.value());
                t.emplace_back(freeIdx[it.col()], base + row, it.value());
            }
        for (int i = 0; i < A.rows(); ++i) {
            const int row = pick ? (*pick)[i] : i;
            if (row >= 0) rhs[base + row] = b[i] - ax[i];
        }
    };
    if (me) addRows(qp.Aeq, qp.beq, nf, nullptr);
    if (mi) addRows(qp.Ain, qp.bin, nf + me, &actRow);
    // A small proximal term keeps degenerate directions at the interior
    // point; refinement runs against the system without the dual shift.
    constexpr double prox = 1e-8, dualShift = 1e-12;
    for (int j = 0; j < n; ++j)
        if (freeIdx[j] >= 0) {
            t.emplace_back(freeIdx[j], freeIdx[j], prox);
            rhs[freeIdx[j]] += prox * r.x[j];
        }
    SpMat K(N, N);
    K.setFromTriplets(t.begin(), t.end());
    for (int i = nf; i < N; ++i) t.emplace_back(i, i, -dualShift);
    SpMat Kreg(N, N);
    Kreg.setFromTriplets(t.begin(), t.end());
    Kreg.makeCompressed();

    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(Kreg);
    if (lu.info() != Eigen::Success) return false;
    Eigen::VectorXd sol = lu.solve(rhs);
    for (int it = 0; it < 3 && sol.allFinite(); ++it) sol += lu.solve(rhs - K * sol);
    const double scale = 1.0 + infNorm(rhs);
    if (!sol.allFinite() || infNorm(K * sol - rhs) > 1e-10 * scale) return false;

    QpResult p = r;
    p.x = xb;
    for (int j = 0; j < n; ++j)
        if (freeIdx[j] >= 0) p.x[j] = sol[freeIdx[j]];
    p.y = me ? Eigen::VectorXd(sol.segment(nf, me)) : Eigen::VectorXd(0);
    p.z = Eigen::VectorXd::Zero(mi);
    for (int k = 0; k < na; ++k) p.z[act[k]] = sol[nf + me + k];
    Eigen::VectorXd g = qp.H * p.x + qp.c;
    if (me) g += qp.Aeq.transpose() * p.y;
    if (mi) g += qp.Ain.transpose() * p.z;
    p.wl.setZero(n);
    p.wu.setZero(n);
    for (int j = 0; j < n; ++j) {
        if (fixedAt[j] < 0) p.wl[j] = g[j];
        if (fixedAt[j] > 0) p.wu[j] = -g[j];
    }
    const QpKkt k = qpKkt(qp, p);
    // Multipliers that are zero in exact arithmetic come out at the noise
    // level of the cost data.
    if (k.primal > 1e-9 * scale || k.dual > 1e-7 * (1.0 + infNorm(qp.c)) || k.stationarity > 1e-9 * scale)
        return false;
    p.objective = qp.objective(p.x);
    if (p.objective > r.objective + 1e-9 * (1.0 + std::abs(r.objective))) return false;
    p.worstResidual = k.worst();
    p.message = "polished";
    r = std::move(p);
    return true;
}

void polish(const QpProblem& qp, QpResult& r)
{
    if (!r.optimal()) return;
    if (polishWith(qp, r, -1.0)) return;
    // Degenerate pairs: both slack and multiplier near zero. Call them active.
    for (double th : {1e-7, 1e-5, 1e-3})
        if (polishWith(qp, r, th)) return;
}

QpResult solveUnpolished(const QpProblem& qp, const QpOptions& opt);

}  // namespace

QpResult solveQp(const QpProblem& qp, const QpOptions& opt)
{
    QpResult r = solveUnpolished(qp, opt);
    if (opt.polish) polish(qp, r);
    return r;
}

namespace {

QpResult solveUnpolished(const QpProblem& qp, const QpOptions& opt)
{
    // Fixed variables become equality rows so the interior is nonempty.
    std::vector<int> fixedVars;
    for (int j = 0; j < qp.n; ++j)
        if (std::isfinite(qp.lower[j]) && qp.lower[j] == qp.upper[j]) fixedVars.push_back(j);
    if (fixedVars.empty()) return Ipm(qp, opt).run();

    QpProblem q = qp;
    const int me = static_cast<int>(qp.Aeq.rows());
    std::vector<Triplet> t;
    for (int k = 0; k < qp.Aeq.outerSize(); ++k)
        for (SpMat::InnerIterator it(qp.Aeq, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    q.beq.conservativeResize(me + static_cast<int>(fixedVars.size()));
    for (size_t k = 0; k < fixedVars.size(); ++k) {
        const int j = fixedVars[k];
        t.emplace_back(me + static_cast<int>(k), j, 1.0);
        q.beq[me + static_cast<int>(k)] = qp.lower[j];
        q.lower[j] = -kInf;
        q.upper[j] = kInf;
    }
    q.Aeq.resize(q.beq.size(), qp.n);
    q.Aeq.setFromTriplets(t.begin(), t.end());
    QpResult r = Ipm(q, opt).run();
    // Fold the extra equality multipliers back into bound multipliers.
    for (size_t k = 0; k < fixedVars.size(); ++k) {
        const double v = r.y[me + static_cast<Eigen::Index>(k)];
        const int j = fixedVars[k];
        if (v >= 0) r.wu[j] = v; else r.wl[j] = -v;
    }
    r.y.conservativeResize(me);
    return r;
}

}  // namespace

QpKkt qpKkt(const QpProblem& qp, const QpResult& r)
{
    QpKkt k;
    Eigen::VectorXd g = qp.H * r.x + qp.c - r.wl + r.wu;
    if (qp.Aeq.rows()) g += qp.Aeq.transpose() * r.y;
    if (qp.Ain.rows()) g += qp.Ain.transpose() * r.z;
    k.stationarity = infNorm(g);

    double dualObj = -0.5 * r.x.dot(qp.H * r.x) + qp.constant;
    if (qp.Aeq.rows()) {
        k.primal = std::max(k.primal, infNorm(qp.Aeq * r.x - qp.beq));
        dualObj -= qp.beq.dot(r.y);
    }
    if (qp.Ain.rows()) {
        const Eigen::VectorXd slack = qp.bin - qp.Ain * r.x;
        k.primal = std::max(k.primal, std::max(0.0, -slack.minCoeff()));
        k.dual = std::max(k.dual, std::max(0.0, -r.z.minCoeff()));
        k.complementarity = std::max(k.complementarity, infNorm(slack.cwiseProduct(r.z)));
        dualObj -= qp.bin.dot(r.z);
    }
    for (int j = 0; j < qp.n; ++j) {
        if (std::isfinite(qp.lower[j])) {
            const double sl = r.x[j] - qp.lower[j];
            k.primal = std::max(k.primal, -sl);
            k.complementarity = std::max(k.complementarity, std::abs(sl * r.wl[j]));
            dualObj += qp.lower[j] * r.wl[j];
        } else {
            k.stationarity = std::max(k.stationarity, std::abs(r.wl[j]));
        }
        if (std::isfinite(qp.upper[j])) {
            const double sl = qp.upper[j] - r.x[j];
            k.primal = std::max(k.primal, -sl);
            k.complementarity = std::max(k.complementarity, std::abs(sl * r.wu[j]));
            dualObj -= qp.upper[j] * r.wu[j];
        } else {
            k.stationarity = std::max(k.stationarity, std::abs(r.wu[j]));
        }
        k.dual = std::max({k.dual, -r.wl[j], -r.wu[j]});
    }
    k.gap = std::abs(qp.objective(r.x) - dualObj);
    return k;
}

}  // namespace rsced
