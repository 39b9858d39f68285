#include "rsced/commands.hpp"

#include "rsced/casefile.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace rsced {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kResultFormat = "rsced-result";
constexpr int kResultVersion = 1;

// %.17g round-trips a double exactly; tables that are only read by people use fewer digits.
std::string exact(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
    return buf;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

double roundSmall(double v) { return std::abs(v) < 1e-300 ? 0.0 : v; }

std::vector<std::string> splitCsv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parseNumber(const std::string& s, const std::string& where)
{
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw CaseFileError(where, "not a number: '" + s + "'");
    return v;
}

int parseIndex(const std::string& s, const std::string& where, int limit)
{
    const double v = parseNumber(s, where);
    if (v != std::floor(v) || v < 0 || v >= limit) throw CaseFileError(where, "index out of range: " + s);
    return static_cast<int>(v);
}

std::string csvLines(const std::string& header, const std::vector<std::string>& rows)
{
    std::string s = header + "\n";
    for (const std::string& r : rows) s += r + "\n";
    return s;
}

}  // namespace

int exitCodeFor(QpStatus s)
{
    switch (s) {
    case QpStatus::Optimal: return kExitOk;
    case QpStatus::Infeasible: return kExitInfeasible;
    case QpStatus::Unbounded: return kExitUnbounded;
    case QpStatus::NumericalFailure:
    case QpStatus::IterationLimit: return kExitNumerical;
    }
    return kExitNumerical;
}

Clearing runClearing(const MarketCase& c, bool deterministic, std::optional<double> tol)
{
    const auto t0 = std::chrono::steady_clock::now();
    Clearing run;
    run.deterministic = deterministic;
    run.program = deterministic ? buildDeterministicSced(c) : buildRobustCounterpart(c);
    QpOptions o;
    o.tol = tol.value_or(c.settings.tol);
    o.maxIterations = c.settings.maxIterations;
    run.solution = solve(run.program, o);
    if (run.solution.optimal()) {
        run.kkt = checkKkt(run.program, run.solution);
        run.prices = computePrices(run.program, run.solution, o.tol);
        run.reserves = computeReserves(c, run.solution.P);
        computeCredits(run.reserves, run.prices.reserve, c.loads.dt);
    }
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

std::vector<SweepRow> runSweep(const MarketCase& base, const SweepOptions& opt)
{
    if (!base.boxBudget) throw CaseError("sweep needs the box-budget uncertainty form");
    if (opt.parameter != "r1" && opt.parameter != "r2") throw CaseError("sweep parameter must be r1 or r2");
    std::vector<SweepRow> rows;
    for (double v : opt.values) {
        MarketCase c = base;
        BoxBudget bb = *base.boxBudget;
        (opt.parameter == "r1" ? bb.r1 : bb.r2) = v;
        applyBoxBudget(c, bb);
        const Clearing run = runClearing(c, false, opt.tol);
        SweepRow r;
        r.value = v;
        r.status = run.solution.status;
        if (run.solution.optimal()) {
            r.cost = run.solution.objective;
            r.credit = run.reserves.credit.sum();
            r.kkt = run.kkt.worst();
            const int nt = c.periods();
            for (int i = 0; i < c.numUnits(); ++i)
                for (int t = 0; t < nt; ++t) {
                    const double vals[4] = {run.reserves.capUp(i, t), run.reserves.capDown(i, t),
                                            run.reserves.rampUp(i, t), run.reserves.rampDown(i, t)};
                    double* avail[4] = {&r.availCapUp, &r.availCapDown, &r.availRampUp, &r.availRampDown};
                    double* val[4] = {&r.valCapUp, &r.valCapDown, &r.valRampUp, &r.valRampDown};
                    for (int k = 0; k < 4; ++k) {
                        *avail[k] += vals[k];
                        if (run.reserves.valuable[i][k * nt + t]) *val[k] += vals[k];
                    }
                }
        }
        rows.push_back(r);
    }
    return rows;
}

std::string sweepCsv(const std::string& parameter, const std::vector<SweepRow>& rows)
{
    std::vector<std::string> lines;
    for (const SweepRow& r : rows)
        lines.push_back(fmt(r.value) + "," + statusName(r.status) + "," + fmt(r.cost) + "," + fmt(r.credit) + "," +
                        fmt(r.availRampUp) + "," + fmt(r.availRampDown) + "," + fmt(r.availCapUp) + "," +
                        fmt(r.availCapDown) + "," + fmt(r.valRampUp) + "," + fmt(r.valRampDown) + "," +
                        fmt(r.valCapUp) + "," + fmt(r.valCapDown) + "," + fmt(r.kkt));
    return csvLines(parameter +
                        ",status,expected_cost_usd,total_credit_usd,avail_ramp_up_mw,avail_ramp_down_mw,"
                        "avail_cap_up_mw,avail_cap_down_mw,valuable_ramp_up_mw,valuable_ramp_down_mw,"
                        "valuable_cap_up_mw,valuable_cap_down_mw,kkt_worst",
                    lines);
}

std::vector<std::pair<std::string, std::string>> resultFiles(const MarketCase& c, const Clearing& run)
{
    const PrimalDualSolution& s = run.solution;
    const PriceSet& p = run.prices;
    const ReserveReport& rr = run.reserves;
    const int nt = c.periods(), nu = c.numUnits(), nd = c.numBuses();
    std::vector<std::pair<std::string, std::string>> files;

    std::vector<std::string> rows;
    for (int i = 0; i < nu; ++i)
        for (int t = 0; t < nt; ++t)
            rows.push_back(std::to_string(i) + "," + std::to_string(c.units[i].bus) + "," + std::to_string(t) + "," +
                           exact(s.P[i][t]));
    files.emplace_back("dispatch.csv", csvLines("unit,bus,interval,p_mw", rows));

    // Nonzero G entries only; eps coordinate given as (bus, interval).
    rows.clear();
    for (int i = 0; i < nu; ++i) {
        if (i >= static_cast<int>(s.G.size()) || s.G[i].size() == 0) continue;
        for (int t = 0; t < nt; ++t)
            for (int k = 0; k < s.G[i].cols(); ++k) {
                const double g = roundSmall(s.G[i](t, k));
                if (g == 0.0) continue;
                const auto [m, tk] = uncertaintyCoordinate(nd, nt, k);
                rows.push_back(std::to_string(i) + "," + std::to_string(t) + "," + std::to_string(m) + "," +
                               std::to_string(tk) + "," + exact(g));
            }
    }
    files.emplace_back("adjustment.csv", csvLines("unit,interval,eps_bus,eps_interval,g_mw_per_mw", rows));

    rows.clear();
    for (int m = 0; m < nd; ++m)
        for (int t = 0; t < nt; ++t)
            rows.push_back(std::to_string(m) + "," + std::to_string(t) + "," + fmt(p.busLmp(m, t)) + "," +
                           fmt(p.energy[t]) + "," + fmt(p.busCongestion(m, t)));
    files.emplace_back("lmp.csv", csvLines("bus,interval,lmp_usd_per_mwh,energy_usd_per_mwh,congestion_usd_per_mwh", rows));

    rows.clear();
    for (int i = 0; i < nu; ++i)
        for (int t = 0; t < nt; ++t)
            rows.push_back(std::to_string(i) + "," + std::to_string(t) + "," + fmt(p.unitEnergy[i][t]) + "," +
                           fmt(p.unitCongestion[i][t]) + "," + fmt(p.integrated[i][t]));
    files.emplace_back("unit_prices.csv",
                       csvLines("unit,interval,lmp_usd_per_mwh,congestion_usd_per_mwh,integrated_lmp_usd_per_mwh", rows));

    rows.clear();
    for (int i = 0; i < nu; ++i)
        for (int k = 0; k < 4; ++k)
            for (int t = 0; t < nt; ++t) {
                const int r = k * nt + t;
                rows.push_back(std::to_string(i) + "," + unitRowName(static_cast<UnitRow>(k)) + "," + std::to_string(t) +
                               "," + fmt(rr.slack[i][r]) + "," + fmt(p.reserve[i][r]) + "," +
                               (rr.valuable[i][r] ? "1" : "0") + "," + fmt(rr.creditRows[i][r]));
            }
    files.emplace_back("reserve.csv",
                       csvLines("unit,row,interval,available_mw,price_usd_per_mwh,valuable,credit_usd", rows));

    rows.clear();
    for (int i = 0; i < nu; ++i)
        rows.push_back(std::to_string(i) + "," + fmt(rr.credit[i]) + "," + fmt(p.adjustmentPayment[i]) + "," +
                       fmt(p.integratedDelta[i]) + "," + c.units[i].name);
    files.emplace_back("credits.csv",
                       csvLines("unit,credit_usd,adjustment_payment_usd,integrated_delta_usd,name", rows));

    const KktReport& k = run.kkt;
    Json cert;
    cert["stationarity_p"] = k.stationarityP;
    cert["stationarity_g"] = k.stationarityG;
    cert["stationarity_rho"] = k.stationarityRho;
    cert["stationarity_zeta"] = k.stationarityZeta;
    cert["primal"] = k.primal;
    cert["dual"] = k.dual;
    cert["complementarity"] = k.complementarity;
    cert["duality_gap"] = k.gap;
    cert["relative_gap"] = k.relativeGap;
    cert["worst"] = k.worst();
    cert["pass_1e-6"] = k.pass(1e-6);
    files.emplace_back("certificate.json", cert.dump(2) + "\n");

    Json sum;
    sum["format"] = kResultFormat;
    sum["version"] = kResultVersion;
    sum["case"] = c.name;
    sum["mode"] = run.deterministic ? "deterministic" : "robust";
    sum["status"] = statusName(s.status);
    sum["objective_usd"] = s.objective;
    sum["iterations"] = s.iterations;
    sum["interval_hours"] = c.loads.dt;
    sum["total_credit_usd"] = rr.credit.sum();
    sum["total_adjustment_payment_usd"] = p.adjustmentPayment.sum();
    sum["degenerate_duals"] = p.degenerate;
    Json set;
    set["tol"] = c.settings.tol;
    set["max_iterations"] = c.settings.maxIterations;
    set["causal"] = c.settings.causal;
    set["screen_lines"] = c.settings.screenLines;
    set["eliminate_pinned"] = c.settings.eliminatePinned;
    sum["settings"] = set;
    sum["variables"] = run.program.qp.n;
    sum["equality_rows"] = run.program.qp.Aeq.rows();
    sum["inequality_rows"] = run.program.qp.Ain.rows();
    sum["price_tol"] = kPriceTol;
    Json names = Json::array();
    for (const auto& f : files) names.push_back(f.first);
    sum["files"] = names;
    files.insert(files.begin(), {"summary.json", sum.dump(2) + "\n"});
    return files;
}

StoredResult readResult(const MarketCase& c, const std::string& dir)
{
    const std::filesystem::path base(dir);
    StoredResult r;
    const int nt = c.periods(), nu = c.numUnits(), nd = c.numBuses(), dim = c.dim();

    Json sum;
    try {
        sum = Json::parse(readFile((base / "summary.json").string()));
    } catch (const Json::exception& e) {
        throw CaseFileError("summary.json", e.what());
    }
    if (!sum.is_object() || sum.value("format", "") != kResultFormat)
        throw CaseFileError("summary.json", "not a result summary");
    if (sum.value("case", "") != c.name) throw CaseFileError("summary.json", "results belong to another case");
    r.deterministic = sum.value("mode", "") == "deterministic";
    r.objective = sum.value("objective_usd", 0.0);

    r.P.assign(nu, Vec::Zero(nt));
    std::vector<std::vector<bool>> seen(nu, std::vector<bool>(nt, false));
    {
        std::istringstream in(readFile((base / "dispatch.csv").string()));
        std::string line;
        std::getline(in, line);
        int ln = 1;
        while (std::getline(in, line)) {
            ++ln;
            if (line.empty()) continue;
            const std::string where = "dispatch.csv:" + std::to_string(ln);
            const auto f = splitCsv(line);
            if (f.size() != 4) throw CaseFileError(where, "expected 4 fields");
            const int i = parseIndex(f[0], where, nu), t = parseIndex(f[2], where, nt);
            r.P[i][t] = parseNumber(f[3], where);
            seen[i][t] = true;
        }
    }
    for (int i = 0; i < nu; ++i)
        for (int t = 0; t < nt; ++t)
            if (!seen[i][t])
                throw CaseFileError("dispatch.csv", "missing unit " + std::to_string(i) + " interval " + std::to_string(t));

    r.G.assign(nu, r.deterministic ? Mat() : Mat::Zero(nt, dim));
    if (!r.deterministic) {
        std::istringstream in(readFile((base / "adjustment.csv").string()));
        std::string line;
        std::getline(in, line);
        int ln = 1;
        while (std::getline(in, line)) {
            ++ln;
            if (line.empty()) continue;
            const std::string where = "adjustment.csv:" + std::to_string(ln);
            const auto f = splitCsv(line);
            if (f.size() != 5) throw CaseFileError(where, "expected 5 fields");
            const int i = parseIndex(f[0], where, nu), t = parseIndex(f[1], where, nt);
            const int m = parseIndex(f[2], where, nd), tk = parseIndex(f[3], where, nt);
            r.G[i](t, uncertaintyIndex(nd, nt, m, tk)) = parseNumber(f[4], where);
        }
    }
    return r;
}

VerifyReport verifyResult(const MarketCase& c, const StoredResult& stored, const VerifyOptions& opt)
{
    VerifyReport rep;
    // The dual certificate is recomputed; the primal blocks under test are the stored ones.
    const Clearing fresh = runClearing(c, stored.deterministic);
    if (!fresh.solution.optimal()) {
        rep.failures.push_back(std::string("re-solve did not reach optimality: ") + statusName(fresh.solution.status));
        return rep;
    }
    PrimalDualSolution sol = fresh.solution;
    sol.P = stored.P;
    if (!stored.deterministic) sol.G = stored.G;

    rep.kkt = checkKkt(fresh.program, sol);
    rep.objectiveDiff = std::abs(stored.objective - fresh.solution.objective);
    rep.kktPass = rep.kkt.worst() <= opt.tol;
    if (!rep.kktPass) {
        std::ostringstream m;
        m << "KKT residual " << rep.kkt.worst() << " (stationarity " << rep.kkt.stationarity() << ", primal "
          << rep.kkt.primal << ", complementarity " << rep.kkt.complementarity << ")";
        rep.failures.push_back(m.str());
    }
    if (rep.objectiveDiff > opt.tol * (1.0 + std::abs(fresh.solution.objective))) {
        std::ostringstream m;
        m << "stored objective differs from the re-solve by " << rep.objectiveDiff;
        rep.failures.push_back(m.str());
    }

    // The deterministic dispatch has no policy, so it is audited at eps = 0 only.
    PrimalDualSolution audited = sol;
    std::vector<Vec> samples;
    if (stored.deterministic) {
        audited.G.assign(c.numUnits(), Mat::Zero(c.periods(), c.dim()));
        samples.push_back(Vec::Zero(c.dim()));
    } else {
        samples = sampleUncertainty(c.uncertainty, opt.samples, opt.seed);
    }
    rep.audit = auditFeasibility(c, audited, samples, opt.tol, opt.seed);
    rep.auditPass = rep.audit.pass() && rep.audit.maxBalanceResidual <= opt.tol;
    if (!rep.auditPass) {
        std::ostringstream m;
        m << "feasibility audit: max violation " << rep.audit.maxViolation << " MW at " << rep.audit.worstConstraint
          << " (sample " << rep.audit.worstSample << ", seed " << rep.audit.seed << ")";
        rep.failures.push_back(m.str());
    }

    const PricingScheme scheme = opt.integratedLmp ? PricingScheme::Integrated : PricingScheme::Standard;
    rep.equilibrium = verifyEquilibrium(c, fresh.program, sol, fresh.prices, opt.tol, scheme);
    rep.equilibriumPass = rep.equilibrium.pass();
    if (!rep.equilibriumPass) {
        for (const UnitEquilibrium& u : rep.equilibrium.units) {
            std::ostringstream m;
            if (u.status != QpStatus::Optimal) {
                m << "unit " << u.name << ": participant problem " << statusName(u.status);
            } else if (u.gap / (1.0 + std::abs(u.maxProfit)) > opt.tol) {
                m << "unit " << u.name << ": profit gap " << u.gap << " $ under " << schemeName(scheme) << " prices";
            } else if (u.withdrawGain / (1.0 + std::abs(u.isoProfit)) > opt.tol) {
                m << "unit " << u.name << ": withholding flexibility gains " << u.withdrawGain << " $ under "
                  << schemeName(scheme) << " prices";
            } else if (rep.equilibrium.strictlyConvex && u.dispatchDiff > rep.equilibrium.dispatchTol) {
                m << "unit " << u.name << ": profit-maximizing dispatch differs by " << u.dispatchDiff << " MW";
            } else {
                continue;
            }
            rep.failures.push_back(m.str());
        }
    }
    return rep;
}

namespace {

// Everything that can go wrong before a solve maps to one exit code.
template <class F>
int guarded(std::ostream& err, F&& body)
{
    try {
        return body();
    } catch (const CaseFileError& e) {
        err << "error: invalid case: " << e.what() << "\n";
        return kExitInvalidCase;
    } catch (const CaseError& e) {
        err << "error: invalid case: " << e.what() << "\n";
        return kExitInvalidCase;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const GuardError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DispatchError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

MarketCase loadValid(const std::string& path)
{
    MarketCase c = loadCase(path);
    const ValidationReport v = validateCase(c);
    if (!v.ok()) throw CaseError(v.summary());
    return c;
}

void writeAll(const std::string& dir, const std::vector<std::pair<std::string, std::string>>& files)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    for (const auto& [name, text] : files) writeFile((std::filesystem::path(dir) / name).string(), text);
}

}  // namespace

int cmdValidate(const std::string& casePath, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const MarketCase c = loadCase(casePath);
        const ValidationReport v = validateCase(c);
        if (!v.ok()) {
            for (const ViolationItem& it : v.items) err << violationCode(it.code) << ": " << it.message << "\n";
            return static_cast<int>(kExitInvalidCase);
        }
        out << "valid: " << c.name << " (" << c.numBuses() << " buses, " << c.numLines() << " lines, "
            << c.numUnits() << " units, " << c.periods() << " intervals, " << c.uncertainty.rows()
            << " uncertainty rows)\n";
        return static_cast<int>(kExitOk);
    });
}

int cmdSolve(const std::string& casePath, const SolveOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const MarketCase c = loadValid(casePath);
        const Clearing run = runClearing(c, opt.deterministic, opt.tol);
        if (!run.solution.optimal()) {
            err << "error: solve ended " << statusName(run.solution.status);
            if (!run.solution.message.empty()) err << " (" << run.solution.message << ")";
            err << "\n";
            return exitCodeFor(run.solution.status);
        }
        writeAll(opt.outDir, resultFiles(c, run));
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %s: objective %.6f $, %d iterations, KKT %.2e, credit %.4f $\n",
                      c.name.c_str(), run.deterministic ? "deterministic" : "robust", run.solution.objective,
                      run.solution.iterations, run.kkt.worst(), run.reserves.credit.sum());
        out << buf;
        return static_cast<int>(kExitOk);
    });
}

int cmdSweep(const std::string& casePath, const SweepOptions& opt, std::ostream& out, std::ostream& err)
{
    if (opt.values.empty()) {
        err << "error: no sweep values\n";
        return kExitUsage;
    }
    return guarded(err, [&] {
        const MarketCase c = loadValid(casePath);
        const std::vector<SweepRow> rows = runSweep(c, opt);
        const std::string csv = sweepCsv(opt.parameter, rows);
        writeAll(opt.outDir, {{"sweep.csv", csv}});
        out << csv;
        for (const SweepRow& r : rows)
            if (r.status != QpStatus::Optimal) return exitCodeFor(r.status);
        return static_cast<int>(kExitOk);
    });
}

int cmdVerify(const std::string& casePath, const std::string& resultDir, const VerifyOptions& opt, std::ostream& out,
              std::ostream& err)
{
    return guarded(err, [&] {
        const MarketCase c = loadValid(casePath);
        const StoredResult stored = readResult(c, resultDir);
        const VerifyReport rep = verifyResult(c, stored, opt);
        char buf[200];
        std::snprintf(buf, sizeof buf, "kkt         %s  worst residual %.3e\n", rep.kktPass ? "pass" : "FAIL",
                      rep.kkt.worst());
        out << buf;
        std::snprintf(buf, sizeof buf, "audit       %s  %d samples, seed %llu, max violation %.3e MW\n",
                      rep.auditPass ? "pass" : "FAIL", rep.audit.samples,
                      static_cast<unsigned long long>(rep.audit.seed), rep.audit.maxViolation);
        out << buf;
        std::snprintf(buf, sizeof buf, "equilibrium %s  %s prices, worst relative gain %.3e\n",
                      rep.equilibriumPass ? "pass" : "FAIL",
                      schemeName(opt.integratedLmp ? PricingScheme::Integrated : PricingScheme::Standard),
                      rep.equilibrium.worstDeviationGain());
        out << buf;
        for (const std::string& f : rep.failures) err << "  " << f << "\n";
        return static_cast<int>(rep.pass() ? kExitOk : kExitVerifyFailed);
    });
}

}  // namespace rsced
