#include "helpers.hpp"
#include "rsced/casefile.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace rsced;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(RSCED_DATA_DIR) + "/" + name; }

struct Out {
    std::ostringstream out, err;
};

std::string replaceLine(const std::string& text, const std::string& prefix, const std::string& with)
{
    std::istringstream in(text);
    std::string line, res;
    bool done = false;
    while (std::getline(in, line)) {
        if (!done && line.rfind(prefix, 0) == 0) {
            line = with;
            done = true;
        }
        res += line + "\n";
    }
    REQUIRE(done);
    return res;
}

int runCli(const std::string& args)
{
    const std::string cmd = std::string(RSCED_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("solve writes identical files on a rerun")
{
    const std::string a = scratchDir("solve_a"), b = scratchDir("solve_b");
    Out o;
    SolveOptions opt;
    opt.outDir = a;
    REQUIRE(cmdSolve(fixture("three_bus.json"), opt, o.out, o.err) == kExitOk);
    opt.outDir = b;
    REQUIRE(cmdSolve(fixture("three_bus.json"), opt, o.out, o.err) == kExitOk);
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const std::string name = e.path().filename().string();
        CHECK(readFile(e.path().string()) == readFile((fs::path(b) / name).string()));
        ++files;
    }
    CHECK(files == 8);
    CHECK(o.out.str().find("1380.937500") != std::string::npos);
}

TEST_CASE("verify accepts a clean result and rejects a tampered one")
{
    const std::string dir = scratchDir("verify");
    Out o;
    SolveOptions sopt;
    sopt.outDir = dir;
    REQUIRE(cmdSolve(fixture("three_bus.json"), sopt, o.out, o.err) == kExitOk);

    VerifyOptions v;
    v.samples = 300;
    CHECK(cmdVerify(fixture("three_bus.json"), dir, v, o.out, o.err) == kExitOk);

    v.integratedLmp = true;
    Out oi;
    CHECK(cmdVerify(fixture("three_bus.json"), dir, v, oi.out, oi.err) == kExitVerifyFailed);
    CHECK(oi.out.str().find("equilibrium FAIL") != std::string::npos);

    const std::string path = (fs::path(dir) / "dispatch.csv").string();
    const std::string text = readFile(path);
    writeFile(path, replaceLine(text, "1,1,0,", "1,1,0,14.5"));
    v.integratedLmp = false;
    Out ot;
    CHECK(cmdVerify(fixture("three_bus.json"), dir, v, ot.out, ot.err) == kExitVerifyFailed);
    CHECK(ot.out.str().find("kkt         FAIL") != std::string::npos);
    CHECK(ot.out.str().find("audit       FAIL") != std::string::npos);
}

TEST_CASE("deterministic results verify at zero deviation")
{
    const std::string dir = scratchDir("det");
    Out o;
    SolveOptions sopt;
    sopt.deterministic = true;
    sopt.outDir = dir;
    REQUIRE(cmdSolve(fixture("three_bus.json"), sopt, o.out, o.err) == kExitOk);
    CHECK(o.out.str().find("1333.500000") != std::string::npos);
    CHECK(cmdVerify(fixture("three_bus.json"), dir, {}, o.out, o.err) == kExitOk);
}

TEST_CASE("bad input maps to exit codes and leaves no output")
{
    const std::string dir = scratchDir("bad");
    const std::string badCase = (fs::path(dir) / "bad.json").string();
    writeFile(badCase, replaceLine(readFile(fixture("three_bus.json")), "      \"pmax_mw\": 180.0",
                                   "      \"pmax_mw\": \"big\","));
    Out o;
    SolveOptions sopt;
    sopt.outDir = (fs::path(dir) / "out").string();
    CHECK(cmdSolve(badCase, sopt, o.out, o.err) == kExitInvalidCase);
    CHECK(o.err.str().find("$.units[0].pmax_mw") != std::string::npos);
    CHECK_FALSE(fs::exists(sopt.outDir));

    // Valid JSON, invalid model: Pmin above Pmax.
    MarketCase c = threeBusCase();
    c.units[1].pmin = 90.0;
    saveCase(c, badCase);
    CHECK(cmdValidate(badCase, o.out, o.err) == kExitInvalidCase);
    CHECK(cmdSolve(badCase, sopt, o.out, o.err) == kExitInvalidCase);

    // Too much load.
    c = threeBusCase();
    c.loads.demand(2, 2) += 200.0;
    saveCase(c, badCase);
    CHECK(cmdSolve(badCase, sopt, o.out, o.err) == kExitInfeasible);
    CHECK_FALSE(fs::exists(sopt.outDir));

    CHECK(cmdSolve("/nonexistent/case.json", sopt, o.out, o.err) == kExitIo);
    CHECK(cmdVerify(fixture("three_bus.json"), "/nonexistent/results", {}, o.out, o.err) == kExitIo);
}

TEST_CASE("sweep needs the box-budget form")
{
    Out o;
    SweepOptions sw;
    sw.values = {0.5};
    sw.outDir = scratchDir("sweep_poly");
    CHECK(cmdSweep(fixture("three_bus.json"), sw, o.out, o.err) == kExitInvalidCase);
    sw.values.clear();
    CHECK(cmdSweep(fixture("three_bus.json"), sw, o.out, o.err) == kExitUsage);
}

TEST_CASE("sweep over r1 on a small case")
{
    const std::string dir = scratchDir("sweep_small");
    const std::string path = (fs::path(dir) / "small.json").string();
    saveCase(randomSmallCase(2), path);
    Out o;
    SweepOptions sw;
    sw.values = {0.0, 0.5, 1.0};
    sw.outDir = (fs::path(dir) / "out").string();
    CHECK(cmdSweep(path, sw, o.out, o.err) == kExitOk);
    const std::string csv = readFile((fs::path(sw.outDir) / "sweep.csv").string());
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.rfind("r1,", 0) == 0);
}

TEST_CASE("command-line front end")
{
    const std::string dir = scratchDir("cli");
    CHECK(runCli("") == kExitUsage);
    CHECK(runCli("--help") == kExitOk);
    CHECK(runCli("solve") == kExitUsage);
    CHECK(runCli("sweep " + fixture("three_bus.json") + " --param r3 --values 1") == kExitUsage);
    CHECK(runCli("validate " + fixture("synthetic118.json")) == kExitOk);
    CHECK(runCli("solve " + fixture("three_bus.json") + " --out " + dir + "/r") == kExitOk);
    CHECK(runCli("verify " + fixture("three_bus.json") + " " + dir + "/r --samples 200") == kExitOk);
    CHECK(runCli("verify " + fixture("three_bus.json") + " " + dir + "/r --integrated-lmp") == kExitVerifyFailed);
    CHECK(runCli("solve /nonexistent.json") == kExitIo);
}
