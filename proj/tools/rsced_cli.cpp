#include "rsced/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    using namespace rsced;

    CLI::App app{"Robust SCED clearing with reserve pricing"};
    app.require_subcommand(1);

    std::string casePath, outDir, resultDir;
    bool deterministic = false, integrated = false;
    double tol = 0.0;
    int samples = 1000;
    std::uint64_t seed = 1;
    std::string param = "r1";
    std::vector<double> values;

    CLI::App* validate = app.add_subcommand("validate", "check a case file");
    validate->add_option("case", casePath, "case file")->required();

    CLI::App* solve = app.add_subcommand("solve", "clear the market and write the result tables");
    solve->add_option("case", casePath, "case file")->required();
    solve->add_flag("--deterministic", deterministic, "plain SCED without the affine policy");
    solve->add_option("--tol", tol, "interior-point tolerance (default from the case)");
    solve->add_option("--out", outDir, "result directory")->default_val("results");

    CLI::App* sweep = app.add_subcommand("sweep", "re-solve over a range of r1 or r2");
    sweep->add_option("case", casePath, "case file with box-budget uncertainty")->required();
    sweep->add_option("--param", param, "r1 or r2")->check(CLI::IsMember({"r1", "r2"}))->default_val("r1");
    sweep->add_option("--values", values, "comma-separated values")->delimiter(',')->required();
    sweep->add_option("--tol", tol, "interior-point tolerance");
    sweep->add_option("--out", outDir, "output directory")->default_val("sweep");

    CLI::App* verify = app.add_subcommand("verify", "re-check a result directory");
    verify->add_option("case", casePath, "case file")->required();
    verify->add_option("results", resultDir, "result directory written by solve")->required();
    verify->add_option("--samples", samples, "uncertainty samples for the audit")->check(CLI::PositiveNumber)
        ->default_val(1000);
    verify->add_option("--seed", seed, "sampler seed")->default_val(1);
    verify->add_option("--tol", tol, "acceptance tolerance")->default_val(1e-6);
    verify->add_flag("--integrated-lmp", integrated, "price energy with the integrated LMP and no credit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (*validate) return cmdValidate(casePath, std::cout, std::cerr);
    if (*solve) {
        SolveOptions o;
        o.deterministic = deterministic;
        if (solve->count("--tol")) o.tol = tol;
        o.outDir = outDir;
        return cmdSolve(casePath, o, std::cout, std::cerr);
    }
    if (*sweep) {
        SweepOptions o;
        o.parameter = param;
        o.values = values;
        if (sweep->count("--tol")) o.tol = tol;
        o.outDir = outDir;
        return cmdSweep(casePath, o, std::cout, std::cerr);
    }
    VerifyOptions o;
    o.samples = samples;
    o.seed = seed;
    o.tol = tol;
    o.integratedLmp = integrated;
    return cmdVerify(casePath, resultDir, o, std::cout, std::cerr);
}
