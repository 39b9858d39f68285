#include "rsced/casefile.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rsced {

using Json = nlohmann::ordered_json;

namespace {

// Object reader that remembers which keys were consumed so leftovers can be
// reported as unknown fields.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw CaseFileError(path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    std::string at(const std::string& key) const { return path_ + "." + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& req(const std::string& key)
    {
        if (!j_.contains(key)) throw CaseFileError(at(key), "missing field");
        seen_.insert(key);
        return j_.at(key);
    }

    const Json* opt(const std::string& key)
    {
        if (!j_.contains(key)) return nullptr;
        seen_.insert(key);
        return &j_.at(key);
    }

    double num(const std::string& key) { return asNumber(req(key), at(key)); }
    double num(const std::string& key, double fallback)
    {
        const Json* v = opt(key);
        return v ? asNumber(*v, at(key)) : fallback;
    }
    int integer(const std::string& key) { return asInt(req(key), at(key)); }
    bool flag(const std::string& key, bool fallback)
    {
        const Json* v = opt(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw CaseFileError(at(key), "expected true or false");
        return v->get<bool>();
    }
    std::string str(const std::string& key)
    {
        const Json& v = req(key);
        if (!v.is_string()) throw CaseFileError(at(key), "expected a string");
        return v.get<std::string>();
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw CaseFileError(at(it.key()), "unknown field");
    }

    static double asNumber(const Json& v, const std::string& where)
    {
        if (!v.is_number()) throw CaseFileError(where, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw CaseFileError(where, "expected a finite number");
        return x;
    }
    static int asInt(const Json& v, const std::string& where)
    {
        if (!v.is_number_integer()) throw CaseFileError(where, "expected an integer");
        return v.get<int>();
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

const Json& array(const Json& v, const std::string& where)
{
    if (!v.is_array()) throw CaseFileError(where, "expected an array");
    return v;
}

std::string idx(const std::string& where, size_t i) { return where + "[" + std::to_string(i) + "]"; }

std::vector<double> numbers(const Json& v, const std::string& where)
{
    std::vector<double> out;
    const Json& a = array(v, where);
    for (size_t i = 0; i < a.size(); ++i) out.push_back(Reader::asNumber(a[i], idx(where, i)));
    return out;
}

std::vector<int> integers(const Json& v, const std::string& where)
{
    std::vector<int> out;
    const Json& a = array(v, where);
    for (size_t i = 0; i < a.size(); ++i) out.push_back(Reader::asInt(a[i], idx(where, i)));
    return out;
}

Mat matrix(const Json& v, const std::string& where, int rows, int cols)
{
    const Json& a = array(v, where);
    if (static_cast<int>(a.size()) != rows)
        throw CaseFileError(where, "expected " + std::to_string(rows) + " rows, got " + std::to_string(a.size()));
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const std::vector<double> row = numbers(a[r], idx(where, r));
        if (static_cast<int>(row.size()) != cols)
            throw CaseFileError(idx(where, r), "expected " + std::to_string(cols) + " entries, got " +
                                                   std::to_string(row.size()));
        for (int c = 0; c < cols; ++c) m(r, c) = row[c];
    }
    return m;
}

Json toJson(const std::vector<int>& v)
{
    Json a = Json::array();
    for (int x : v) a.push_back(x);
    return a;
}

Json rowJson(const Mat& m, Eigen::Index r)
{
    Json a = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
    return a;
}

void parseUnit(Reader& r, Unit& u, MarketCase& c, int index, int nt)
{
    u.name = r.str("name");
    u.bus = r.integer("bus");
    u.pmin = r.num("pmin_mw");
    u.pmax = r.num("pmax_mw");
    u.rampUp = r.num("ramp_up_mw");
    u.rampDown = r.num("ramp_down_mw");
    u.q = r.num("cost_quadratic", 0.0);
    u.b = r.num("cost_linear");
    u.fixedCost = r.num("cost_fixed", 0.0);
    u.p0 = r.num("initial_mw");
    if (const Json* cm = r.opt("commitment")) {
        Reader k(*cm, r.at("commitment"));
        c.commitment.on[index] = integers(k.req("on"), k.at("on"));
        if (const Json* s = k.opt("startup")) c.commitment.startup[index] = integers(*s, k.at("startup"));
        else c.commitment.startup[index].assign(nt, 0);
        if (const Json* s = k.opt("shutdown")) c.commitment.shutdown[index] = integers(*s, k.at("shutdown"));
        else c.commitment.shutdown[index].assign(nt, 0);
        k.finish();
    }
    r.finish();
}

void parseUncertainty(Reader& r, MarketCase& c)
{
    const std::string kind = r.str("kind");
    const int nd = c.numBuses(), nt = c.periods();
    if (kind == "box-budget") {
        BoxBudget bb;
        bb.buses = integers(r.req("buses"), r.at("buses"));
        bb.periods = integers(r.req("periods"), r.at("periods"));
        bb.r1 = r.num("r1");
        bb.r2 = r.num("r2", 1.0);
        bb.boxScale = r.num("box_scale", 100.0);
        bb.budgetScale = r.num("budget_scale", 500.0);
        bb.growth = r.num("growth", 0.01);
        if (const Json* sf = r.opt("std_fraction")) bb.stdFraction = Reader::asNumber(*sf, r.at("std_fraction"));
        r.finish();
        for (size_t k = 0; k < bb.buses.size(); ++k)
            if (bb.buses[k] < 0 || bb.buses[k] >= nd) throw CaseFileError(idx(r.at("buses"), k), "bus out of range");
        for (size_t k = 0; k < bb.periods.size(); ++k)
            if (bb.periods[k] < 0 || bb.periods[k] >= nt)
                throw CaseFileError(idx(r.at("periods"), k), "period out of range");
        applyBoxBudget(c, bb);
        return;
    }
    if (kind != "polytope") throw CaseFileError(r.at("kind"), "expected \"box-budget\" or \"polytope\"");
    const std::string rowsAt = r.at("rows");
    const Json& rows = array(r.req("rows"), rowsAt);
    const int dim = nd * nt;
    c.uncertainty.S = Mat::Zero(static_cast<Eigen::Index>(rows.size()), dim);
    c.uncertainty.h = Vec::Zero(static_cast<Eigen::Index>(rows.size()));
    for (size_t k = 0; k < rows.size(); ++k) {
        Reader row(rows[k], idx(rowsAt, k));
        const std::string termsAt = row.at("terms");
        const Json& terms = array(row.req("terms"), termsAt);
        for (size_t a = 0; a < terms.size(); ++a) {
            const std::string w = idx(termsAt, a);
            const Json& tm = array(terms[a], w);
            if (tm.size() != 3) throw CaseFileError(w, "expected [bus, period, coefficient]");
            const int bus = Reader::asInt(tm[0], idx(w, 0));
            const int t = Reader::asInt(tm[1], idx(w, 1));
            const double v = Reader::asNumber(tm[2], idx(w, 2));
            if (bus < 0 || bus >= nd) throw CaseFileError(idx(w, 0), "bus out of range");
            if (t < 0 || t >= nt) throw CaseFileError(idx(w, 1), "period out of range");
            c.uncertainty.S(static_cast<Eigen::Index>(k), uncertaintyIndex(nd, nt, bus, t)) += v;
        }
        c.uncertainty.h[static_cast<Eigen::Index>(k)] = row.num("rhs_mw");
        row.finish();
    }
    r.finish();
}

void parseCovariance(Reader& r, MarketCase& c)
{
    const int dim = c.dim();
    const std::string kind = r.str("kind");
    if (kind == "diagonal") {
        const std::vector<double> v = numbers(r.req("values_mw2"), r.at("values_mw2"));
        if (static_cast<int>(v.size()) != dim)
            throw CaseFileError(r.at("values_mw2"), "expected " + std::to_string(dim) + " entries");
        c.moments.sigma = Mat::Zero(dim, dim);
        for (int j = 0; j < dim; ++j) c.moments.sigma(j, j) = v[j];
    } else if (kind == "dense") {
        c.moments.sigma = matrix(r.req("matrix_mw2"), r.at("matrix_mw2"), dim, dim);
    } else {
        throw CaseFileError(r.at("kind"), "expected \"diagonal\" or \"dense\"");
    }
    r.finish();
}

}  // namespace

MarketCase parseCase(const std::string& text)
{
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CaseFileError("$", std::string("not valid JSON (byte ") + std::to_string(e.byte) + ")");
    }
    Reader r(doc, "$");
    if (r.str("format") != "rsced-case") throw CaseFileError("$.format", "expected \"rsced-case\"");
    const int version = r.integer("version");
    if (version != kCaseFormatVersion)
        throw CaseFileError("$.version", "unsupported version " + std::to_string(version));

    MarketCase c;
    c.name = r.str("name");
    if (const Json* n = r.opt("notes")) {
        const Json& a = array(*n, "$.notes");
        for (size_t i = 0; i < a.size(); ++i) {
            if (!a[i].is_string()) throw CaseFileError(idx("$.notes", i), "expected a string");
            c.notes.push_back(a[i].get<std::string>());
        }
    }
    c.loads.dt = r.num("interval_hours");

    {
        Reader n(r.req("network"), "$.network");
        c.network.numBuses = n.integer("buses");
        c.network.slack = n.integer("slack");
        if (c.network.numBuses <= 0) throw CaseFileError("$.network.buses", "expected a positive count");
        const Json& lines = array(n.req("lines"), "$.network.lines");
        for (size_t i = 0; i < lines.size(); ++i) {
            Reader l(lines[i], idx("$.network.lines", i));
            Line ln;
            ln.from = l.integer("from");
            ln.to = l.integer("to");
            ln.reactance = l.num("reactance_pu");
            ln.limit = l.num("limit_mw");
            l.finish();
            c.network.lines.push_back(ln);
        }
        n.finish();
    }

    {
        Reader l(r.req("loads"), "$.loads");
        const Json& dm = array(l.req("demand_mw"), "$.loads.demand_mw");
        if (static_cast<int>(dm.size()) != c.numBuses())
            throw CaseFileError("$.loads.demand_mw", "expected one row per bus (" + std::to_string(c.numBuses()) + ")");
        const int nt = dm.empty() ? 0 : static_cast<int>(array(dm[0], "$.loads.demand_mw[0]").size());
        if (nt == 0) throw CaseFileError("$.loads.demand_mw", "expected at least one period");
        c.loads.demand = matrix(dm, "$.loads.demand_mw", c.numBuses(), nt);
        l.finish();
    }
    const int nt = c.periods();

    const Json& units = array(r.req("units"), "$.units");
    c.commitment = CommitmentSchedule::allOn(static_cast<int>(units.size()), nt);
    for (size_t i = 0; i < units.size(); ++i) {
        Reader u(units[i], idx("$.units", i));
        Unit unit;
        parseUnit(u, unit, c, static_cast<int>(i), nt);
        c.units.push_back(unit);
    }

    {
        Reader u(r.req("uncertainty"), "$.uncertainty");
        parseUncertainty(u, c);
    }
    const int dim = c.dim();
    const Json* cov = r.opt("covariance");
    if (cov) {
        if (c.boxBudget && c.boxBudget->stdFraction)
            throw CaseFileError("$.covariance", "conflicts with $.uncertainty.std_fraction");
        Reader cv(*cov, "$.covariance");
        parseCovariance(cv, c);
    } else if (c.moments.sigma.rows() != dim) {
        c.moments.sigma = Mat::Zero(dim, dim);
    }

    if (const Json* s = r.opt("solver")) {
        Reader sv(*s, "$.solver");
        c.settings.tol = sv.num("tol", c.settings.tol);
        if (const Json* m = sv.opt("max_iterations")) c.settings.maxIterations = Reader::asInt(*m, "$.solver.max_iterations");
        c.settings.causal = sv.flag("causal", c.settings.causal);
        c.settings.screenLines = sv.flag("screen_lines", c.settings.screenLines);
        c.settings.eliminatePinned = sv.flag("eliminate_pinned", c.settings.eliminatePinned);
        sv.finish();
    }
    r.finish();
    return c;
}

std::string serializeCase(const MarketCase& c)
{
    Json doc;
    doc["format"] = "rsced-case";
    doc["version"] = kCaseFormatVersion;
    doc["name"] = c.name;
    if (!c.notes.empty()) doc["notes"] = c.notes;
    doc["interval_hours"] = c.loads.dt;

    Json net;
    net["buses"] = c.network.numBuses;
    net["slack"] = c.network.slack;
    net["lines"] = Json::array();
    for (const Line& l : c.network.lines) {
        Json j;
        j["from"] = l.from;
        j["to"] = l.to;
        j["reactance_pu"] = l.reactance;
        j["limit_mw"] = l.limit;
        net["lines"].push_back(j);
    }
    doc["network"] = net;

    Json loads;
    loads["demand_mw"] = Json::array();
    for (Eigen::Index m = 0; m < c.loads.demand.rows(); ++m) loads["demand_mw"].push_back(rowJson(c.loads.demand, m));
    doc["loads"] = loads;

    doc["units"] = Json::array();
    const int nt = c.periods();
    for (int i = 0; i < c.numUnits(); ++i) {
        const Unit& u = c.units[i];
        Json j;
        j["name"] = u.name;
        j["bus"] = u.bus;
        j["pmin_mw"] = u.pmin;
        j["pmax_mw"] = u.pmax;
        j["ramp_up_mw"] = u.rampUp;
        j["ramp_down_mw"] = u.rampDown;
        j["cost_quadratic"] = u.q;
        j["cost_linear"] = u.b;
        j["cost_fixed"] = u.fixedCost;
        j["initial_mw"] = u.p0;
        const bool allOn = c.commitment.on.size() > static_cast<size_t>(i) &&
                           c.commitment.on[i] == std::vector<int>(nt, 1) &&
                           c.commitment.startup[i] == std::vector<int>(nt, 0) &&
                           c.commitment.shutdown[i] == std::vector<int>(nt, 0);
        if (!allOn && c.commitment.on.size() > static_cast<size_t>(i)) {
            Json k;
            k["on"] = toJson(c.commitment.on[i]);
            k["startup"] = toJson(c.commitment.startup[i]);
            k["shutdown"] = toJson(c.commitment.shutdown[i]);
            j["commitment"] = k;
        }
        doc["units"].push_back(j);
    }

    Json unc;
    const int nd = c.numBuses();
    if (c.boxBudget) {
        const BoxBudget& bb = *c.boxBudget;
        unc["kind"] = "box-budget";
        unc["buses"] = toJson(bb.buses);
        unc["periods"] = toJson(bb.periods);
        unc["r1"] = bb.r1;
        unc["r2"] = bb.r2;
        unc["box_scale"] = bb.boxScale;
        unc["budget_scale"] = bb.budgetScale;
        unc["growth"] = bb.growth;
        if (bb.stdFraction) unc["std_fraction"] = *bb.stdFraction;
    } else {
        unc["kind"] = "polytope";
        unc["rows"] = Json::array();
        for (int k = 0; k < c.uncertainty.rows(); ++k) {
            Json row;
            row["terms"] = Json::array();
            for (int j = 0; j < c.uncertainty.dim(); ++j) {
                const double v = c.uncertainty.S(k, j);
                if (v == 0.0) continue;
                const auto [bus, t] = uncertaintyCoordinate(nd, nt, j);
                row["terms"].push_back(Json::array({bus, t, v}));
            }
            row["rhs_mw"] = c.uncertainty.h[k];
            unc["rows"].push_back(row);
        }
    }
    doc["uncertainty"] = unc;

    const bool derived = c.boxBudget && c.boxBudget->stdFraction;
    const Mat& sg = c.moments.sigma;
    if (!derived && sg.size() && sg.cwiseAbs().maxCoeff() != 0.0) {
        Json cov;
        const Mat off = sg - Mat(sg.diagonal().asDiagonal());
        if (off.cwiseAbs().maxCoeff() == 0.0) {
            cov["kind"] = "diagonal";
            cov["values_mw2"] = Json::array();
            for (Eigen::Index j = 0; j < sg.rows(); ++j) cov["values_mw2"].push_back(sg(j, j));
        } else {
            cov["kind"] = "dense";
            cov["matrix_mw2"] = Json::array();
            for (Eigen::Index r = 0; r < sg.rows(); ++r) cov["matrix_mw2"].push_back(rowJson(sg, r));
        }
        doc["covariance"] = cov;
    }

    Json sv;
    sv["tol"] = c.settings.tol;
    sv["max_iterations"] = c.settings.maxIterations;
    sv["causal"] = c.settings.causal;
    sv["screen_lines"] = c.settings.screenLines;
    sv["eliminate_pinned"] = c.settings.eliminatePinned;
    doc["solver"] = sv;
    return doc.dump(2) + "\n";
}

std::string readFile(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void writeFile(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

MarketCase loadCase(const std::string& path) { return parseCase(readFile(path)); }

void saveCase(const MarketCase& c, const std::string& path) { writeFile(path, serializeCase(c)); }

}  // namespace rsced
