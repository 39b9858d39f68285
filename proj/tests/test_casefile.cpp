#include "helpers.hpp"
#include "rsced/casefile.hpp"

#include <doctest.h>
#include <json.hpp>

using namespace rsced;
using namespace testutil;
using Json = nlohmann::ordered_json;

namespace {

std::string fixture(const std::string& name) { return std::string(RSCED_DATA_DIR) + "/" + name; }

std::string errorPath(const Json& doc)
{
    try {
        parseCase(doc.dump());
    } catch (const CaseFileError& e) {
        return e.where();
    }
    return "<accepted>";
}

}  // namespace

TEST_CASE("shipped fixtures are canonical")
{
    for (const char* f : {"three_bus.json", "synthetic118.json"}) {
        const std::string text = readFile(fixture(f));
        CHECK(serializeCase(parseCase(text)) == text);
    }
}

TEST_CASE("fixtures match the generators")
{
    CHECK(serializeCase(loadCase(fixture("three_bus.json"))) == serializeCase(threeBusCase()));
    const MarketCase s = loadCase(fixture("synthetic118.json"));
    CHECK(s.numBuses() == 118);
    CHECK(s.numUnits() == 54);
    CHECK(s.numLines() == 186);
    REQUIRE(s.boxBudget);
    CHECK(s.boxBudget->buses.size() == 3);
}

TEST_CASE("round trip keeps every field")
{
    const MarketCase a = threeBusCase();
    const MarketCase b = parseCase(serializeCase(a));
    CHECK(b.name == a.name);
    CHECK(b.loads.dt == a.loads.dt);
    CHECK(b.loads.demand == a.loads.demand);
    CHECK(b.uncertainty.S == a.uncertainty.S);
    CHECK(b.uncertainty.h == a.uncertainty.h);
    CHECK(b.settings.causal == a.settings.causal);
    REQUIRE(b.units.size() == a.units.size());
    for (size_t i = 0; i < a.units.size(); ++i) {
        CHECK(b.units[i].pmax == a.units[i].pmax);
        CHECK(b.units[i].b == a.units[i].b);
        CHECK(b.units[i].p0 == a.units[i].p0);
    }
    const MarketCase r = randomSmallCase(4);
    const MarketCase r2 = parseCase(serializeCase(r));
    CHECK(r2.uncertainty.S == r.uncertainty.S);
    CHECK((r2.moments.sigma - r.moments.sigma).norm() == 0.0);
}

TEST_CASE("errors name the offending field")
{
    const Json base = Json::parse(readFile(fixture("three_bus.json")));

    Json doc = base;
    doc["units"][1]["colour"] = "red";
    CHECK(errorPath(doc) == "$.units[1].colour");

    doc = base;
    doc["units"][0].erase("pmax_mw");
    CHECK(errorPath(doc) == "$.units[0].pmax_mw");

    doc = base;
    doc["network"]["lines"][2]["limit_mw"] = "lots";
    CHECK(errorPath(doc) == "$.network.lines[2].limit_mw");

    doc = base;
    doc["uncertainty"]["rows"][3]["terms"][0] = Json::array({0, 9, 1.0});
    CHECK(errorPath(doc) == "$.uncertainty.rows[3].terms[0][1]");

    doc = base;
    doc["version"] = 2;
    CHECK(errorPath(doc) == "$.version");

    CHECK_THROWS_AS(parseCase("{\"format\": "), CaseFileError);
    CHECK_THROWS_AS(loadCase("/nonexistent/case.json"), IoError);
}

TEST_CASE("box-budget and covariance forms")
{
    Json doc = Json::parse(readFile(fixture("three_bus.json")));
    doc["uncertainty"] = Json{{"kind", "box-budget"}, {"buses", {2}}, {"periods", {1, 2}}, {"r1", 0.5}};
    const int dim = 9;
    Json m = Json::array();
    for (int r = 0; r < dim; ++r) {
        Json row = Json::array();
        for (int k = 0; k < dim; ++k) row.push_back(r == k ? 4.0 : (std::abs(r - k) == 3 ? 1.0 : 0.0));
        m.push_back(row);
    }
    doc["covariance"] = Json{{"kind", "dense"}, {"matrix_mw2", m}};
    const MarketCase c = parseCase(doc.dump());
    REQUIRE(c.boxBudget);
    CHECK(c.boxBudget->r2 == 1.0);
    CHECK(c.moments.sigma(0, 3) == 1.0);
    CHECK(c.uncertainty.rows() > 0);
    CHECK(parseCase(serializeCase(c)).moments.sigma == c.moments.sigma);

    doc["uncertainty"]["std_fraction"] = 0.3;
    CHECK(errorPath(doc) == "$.covariance");

    doc["uncertainty"].erase("std_fraction");
    doc["covariance"] = Json{{"kind", "diagonal"}, {"values_mw2", {1.0, 2.0}}};
    CHECK(errorPath(doc) == "$.covariance.values_mw2");
}
