#pragma once

#include "rsced/equilibrium.hpp"
#include "rsced/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rsced {

// Process exit codes shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitInvalidCase = 3,
    kExitInfeasible = 4,
    kExitUnbounded = 5,
    kExitNumerical = 6,
    kExitVerifyFailed = 7,
    kExitIo = 8,
};

int exitCodeFor(QpStatus s);

// One full clearing: assemble, solve, prices, reserves and credits.
struct Clearing {
    bool deterministic = false;
    RobustProgram program;
    PrimalDualSolution solution;
    KktReport kkt;
    PriceSet prices;
    ReserveReport reserves;
    double seconds = 0.0;
};

Clearing runClearing(const MarketCase& c, bool deterministic, std::optional<double> tol = std::nullopt);

struct SolveOptions {
    bool deterministic = false;
    std::optional<double> tol;
    std::string outDir = "results";
};

struct SweepOptions {
    std::string parameter = "r1";  // r1 or r2
    std::vector<double> values;
    std::optional<double> tol;
    std::string outDir = "sweep";
};

struct VerifyOptions {
    int samples = 1000;
    std::uint64_t seed = 1;
    double tol = 1e-6;
    bool integratedLmp = false;
};

// Reserve totals of one sweep point, MW (ramp rows in MW per interval).
struct SweepRow {
    double value = 0.0;
    QpStatus status = QpStatus::NumericalFailure;
    double cost = 0.0;
    double credit = 0.0;
    double availRampUp = 0.0, availRampDown = 0.0, availCapUp = 0.0, availCapDown = 0.0;
    double valRampUp = 0.0, valRampDown = 0.0, valCapUp = 0.0, valCapDown = 0.0;
    double kkt = 0.0;
};

// Throws CaseError when the case has no box/budget description.
std::vector<SweepRow> runSweep(const MarketCase& c, const SweepOptions& opt);
std::string sweepCsv(const std::string& parameter, const std::vector<SweepRow>& rows);

// Result files of a solve, keyed by file name. No wall-clock content, so a
// rerun with the same inputs is byte-identical.
std::vector<std::pair<std::string, std::string>> resultFiles(const MarketCase& c, const Clearing& run);

// Dispatch and adjustment read back from a result directory.
struct StoredResult {
    bool deterministic = false;
    double objective = 0.0;
    std::vector<Vec> P;
    std::vector<Mat> G;
};

StoredResult readResult(const MarketCase& c, const std::string& dir);

struct VerifyReport {
    KktReport kkt;
    double objectiveDiff = 0.0;
    AuditReport audit;
    EquilibriumReport equilibrium;
    bool kktPass = false;
    bool auditPass = false;
    bool equilibriumPass = false;
    std::vector<std::string> failures;
    bool pass() const { return failures.empty(); }
};

VerifyReport verifyResult(const MarketCase& c, const StoredResult& stored, const VerifyOptions& opt);

int cmdValidate(const std::string& casePath, std::ostream& out, std::ostream& err);
int cmdSolve(const std::string& casePath, const SolveOptions& opt, std::ostream& out, std::ostream& err);
int cmdSweep(const std::string& casePath, const SweepOptions& opt, std::ostream& out, std::ostream& err);
int cmdVerify(const std::string& casePath, const std::string& resultDir, const VerifyOptions& opt,
              std::ostream& out, std::ostream& err);

}  // namespace rsced
