#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsced {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Line {
    int from = 0;
    int to = 0;
    double reactance = 1.0;  // p.u.
    double limit = 0.0;      // MW
};

struct Network {
    int numBuses = 0;
    int slack = 0;
    std::vector<Line> lines;
};

struct Unit {
    std::string name;
    int bus = 0;
    double pmin = 0.0;
    double pmax = 0.0;
    double rampUp = 0.0;    // MW per interval
    double rampDown = 0.0;  // MW per interval
    double q = 0.0;         // $/MW^2h
    double b = 0.0;         // $/MWh
    double fixedCost = 0.0; // $
    double p0 = 0.0;        // output before the first interval
};

// Indexed [unit][t].
struct CommitmentSchedule {
    std::vector<std::vector<int>> on;
    std::vector<std::vector<int>> startup;
    std::vector<std::vector<int>> shutdown;

    static CommitmentSchedule allOn(int units, int periods);
};

struct LoadForecast {
    Mat demand;  // N_D x N_T, net of renewables
    double dt = 1.0;
    int periods() const { return static_cast<int>(demand.cols()); }
};

// Box/budget construction: |eps_{m,t}| <= boxScale*r1*g(t) for listed buses
// and periods, |sum_m eps_{m,t}| <= budgetScale*r1*r2*g(t), g(t) = 1 + growth*(t-1).
// Every other coordinate is pinned to zero.
struct BoxBudget {
    std::vector<int> buses;
    std::vector<int> periods;
    double r1 = 0.0;
    double r2 = 1.0;
    double boxScale = 100.0;
    double budgetScale = 500.0;
    double growth = 0.01;
    // When set, Sigma_jj = (stdFraction * box bound)^2 on uncertain coordinates.
    std::optional<double> stdFraction;
};

struct UncertaintySet {
    Mat S;  // N_K x N_D*N_T
    Vec h;  // N_K
    int rows() const { return static_cast<int>(S.rows()); }
    int dim() const { return static_cast<int>(S.cols()); }
};

struct UncertaintyMoments {
    Mat sigma;  // E[eps eps^T]
};

struct SolverSettings {
    double tol = 1e-8;
    int maxIterations = 200;
    bool causal = false;
    bool screenLines = true;
    bool eliminatePinned = true;
};

struct MarketCase {
    std::string name;
    std::vector<std::string> notes;
    Network network;
    std::vector<Unit> units;
    CommitmentSchedule commitment;
    LoadForecast loads;
    UncertaintySet uncertainty;
    UncertaintyMoments moments;
    std::optional<BoxBudget> boxBudget;
    SolverSettings settings;

    int numBuses() const { return network.numBuses; }
    int numUnits() const { return static_cast<int>(units.size()); }
    int numLines() const { return static_cast<int>(network.lines.size()); }
    int periods() const { return loads.periods(); }
    int dim() const { return numBuses() * periods(); }
};

// Flat position of eps_{bus,t}: time-major, bus ascending inside a time block.
// Both indices are zero-based.
int uncertaintyIndex(int numBuses, int periods, int bus, int t);
std::pair<int, int> uncertaintyCoordinate(int numBuses, int periods, int index);

// Materializes S, h (and Sigma if requested) from a box/budget description.
void applyBoxBudget(MarketCase& c, const BoxBudget& spec);
UncertaintySet boxBudgetSet(int numBuses, int periods, const BoxBudget& spec);

enum class Violation {
    BadDimension,
    BadBusIndex,
    BadSlack,
    Disconnected,
    NonPositiveReactance,
    NonPositiveLimit,
    BadCapacity,
    NonPositiveRamp,
    NegativeCost,
    CommitmentShape,
    CommitmentValue,
    CommitmentInconsistent,
    StartupWhileOff,
    StartupAndShutdown,
    NonPositiveInterval,
    NegativeLevel,
    UnboundedSet,
    SigmaShape,
    SigmaAsymmetric,
    SigmaIndefinite,
    SigmaOnPinned,
};

const char* violationCode(Violation v);

struct ViolationItem {
    Violation code;
    std::string message;
};

struct ValidationReport {
    std::vector<ViolationItem> items;
    bool ok() const { return items.empty(); }
    bool has(Violation v) const;
    std::string summary() const;
};

ValidationReport validateCase(const MarketCase& c);

// Per-coordinate bounds of {eps : S eps <= h}. Coordinates bounded only through
// several rows are resolved with small LPs; infinite entries mean unbounded.
struct CoordinateBounds {
    Vec lo;
    Vec hi;
    std::vector<bool> pinned;  // singleton rows +e_j <= 0 and -e_j <= 0
};

CoordinateBounds coordinateBounds(const UncertaintySet& set, bool solveLps = true);
bool uncertaintySetBounded(const UncertaintySet& set);

class CaseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rsced
