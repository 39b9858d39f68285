#pragma once

#include "rsced/solution.hpp"

#include <vector>

namespace rsced {

constexpr double kPriceTol = 1e-6;

// Slack of every unit row at the base dispatch, in MW (ramp rows in MW per interval).
struct ReserveReport {
    int nt = 0;
    std::vector<Vec> slack;              // per unit, 4N_T in A-row order
    std::vector<std::vector<bool>> valuable;  // filled once prices are known
    std::vector<Vec> creditRows;         // $ per row
    Vec credit;                          // $ per unit

    double at(int unit, UnitRow kind, int t) const { return slack[unit][static_cast<int>(kind) * nt + t]; }
    double rampUp(int unit, int t) const { return at(unit, UnitRow::RampUp, t); }
    double rampDown(int unit, int t) const { return at(unit, UnitRow::RampDown, t); }
    double capUp(int unit, int t) const { return at(unit, UnitRow::CapUpper, t); }
    double capDown(int unit, int t) const { return at(unit, UnitRow::CapLower, t); }
};

class DispatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ReserveReport computeReserves(const MarketCase& c, const std::vector<Vec>& dispatch, double tol = 1e-6);

struct PriceSet {
    double dt = 1.0;
    Vec energy;                      // lambda / dt per interval, $/MWh
    std::vector<Vec> unitEnergy;     // pi^e per unit, $/MWh
    std::vector<Vec> unitCongestion; // -Gamma_i' eta / dt per unit
    Mat busLmp;                      // N_D x N_T, $/MWh
    Mat busCongestion;               // N_D x N_T
    std::vector<Vec> reserve;        // pi^r per unit (4N_T), $/MWh of slack
    std::vector<Mat> adjustment;     // pi^a per unit (N_T x N_D*N_T), $
    Vec adjustmentPayment;           // tr(G' pi^a) per unit, $
    std::vector<Vec> integrated;     // integrated LMP per unit, $/MWh
    Vec integratedDelta;             // dt * (pihat - pi)'P per unit, $
    bool degenerate = false;
};

std::vector<Vec> computeReservePrices(const PrimalDualSolution& sol, double dt);
// Fills energy, unit and bus LMPs.
void computeLmps(const PrimalDualSolution& sol, const ConstraintBlocks& b, PriceSet& out);
void computeAdjustmentPrices(const PrimalDualSolution& sol, const ConstraintBlocks& b, PriceSet& out);
void computeCredits(ReserveReport& rep, const std::vector<Vec>& reservePrices, double dt);
void computeIntegratedLmp(const PrimalDualSolution& sol, const ConstraintBlocks& b, PriceSet& out);

// All of the above, plus the degeneracy flag from the KKT report.
PriceSet computePrices(const RobustProgram& prog, const PrimalDualSolution& sol, double tol = 1e-8);

// Nodal maximum of unit reserve prices per bus, row kind and interval (off by default).
std::vector<Vec> nodalMaxReservePrices(const MarketCase& c, const PriceSet& p);

}  // namespace rsced
