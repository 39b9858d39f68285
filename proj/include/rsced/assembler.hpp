#pragma once

#include "rsced/model.hpp"
#include "rsced/qp.hpp"

#include <vector>

namespace rsced {

// Line-row layout shared by Gamma_i, Gamma_d, F and eta/tau:
//   row = dir * (N_L*N_T) + l * N_T + t,  dir 0 = +limit, dir 1 = -limit.
// Unit row layout of A / R_i / alpha_i:
//   row = kind * N_T + t,  kind 0 cap-upper, 1 cap-lower, 2 ramp-up, 3 ramp-down.
enum class UnitRow { CapUpper = 0, CapLower = 1, RampUp = 2, RampDown = 3 };

const char* unitRowName(UnitRow k);

struct ConstraintBlocks {
    int nt = 0, nd = 0, nl = 0, nu = 0;
    double dt = 1.0;
    Mat shift;              // N_L x N_D
    Mat A;                  // 4N_T x N_T, common to all units
    std::vector<Vec> R;     // per unit, 4N_T
    Mat D;                  // N_T x N_D*N_T
    std::vector<Mat> gammaUnit;  // per unit, 2N_L*N_T x N_T
    Mat gammaD;             // 2N_L*N_T x N_D*N_T
    Vec F;                  // 2N_L*N_T
    Vec d;                  // flat demand, N_D*N_T

    int lineRows() const { return 2 * nl * nt; }
    int lineRow(int dir, int l, int t) const { return dir * nl * nt + l * nt + t; }
    int lineOf(int row) const { return (row % (nl * nt)) / nt; }
    int timeOfLineRow(int row) const { return row % nt; }
    int dirOf(int row) const { return row / (nl * nt); }
    Vec lineRhs() const { return F + gammaD * d; }
};

Mat buildShiftFactors(const Network& net);

struct UnitBlock {
    Mat A;
    Vec R;
};

UnitBlock buildUnitBlocks(const Unit& unit, const std::vector<int>& on, const std::vector<int>& startup,
                          const std::vector<int>& shutdown);

ConstraintBlocks buildConstraintBlocks(const MarketCase& c);

enum class VarKind { P, G, Rho, Zeta };
// P: (unit, t); G: (unit, t, coordinate); Rho: (unit, S-row, A-row); Zeta: (-, S-row, line-row)
struct VarTag {
    VarKind kind;
    int unit;
    int a;
    int b;
};

enum class RowKind { Balance, AdjustBalance, UnitLimit, UnitDual, LineLimit, LineDual, ScenarioUnit, ScenarioLine };
// Balance: t; AdjustBalance: (t, k); UnitLimit: (unit, A-row); UnitDual: (unit, A-row, k);
// LineLimit: line-row; LineDual: (line-row, k); ScenarioUnit: (unit, A-row, vertex);
// ScenarioLine: (line-row, vertex)
struct RowTag {
    RowKind kind;
    int unit;
    int a;
    int b;
};

const char* rowKindName(RowKind k);

struct ProgramOptions {
    bool causal = false;
    bool screenLines = true;
    bool eliminatePinned = true;
};

ProgramOptions programOptions(const SolverSettings& s);

struct RobustProgram {
    bool robust = true;
    QpProblem qp;
    std::vector<VarTag> vars;
    std::vector<RowTag> eqTags;
    std::vector<RowTag> inTags;
    ConstraintBlocks blocks;
    ProgramOptions options;

    int dim = 0;                        // N_D*N_T
    int setRows = 0;                    // N_K
    std::vector<int> activeCoords;      // coordinates kept as G columns
    std::vector<int> activeSetRows;     // rows of S kept for rho/zeta
    std::vector<bool> eliminated;       // per coordinate
    std::vector<int> pinPlus, pinMinus; // per coordinate: S rows +e_j <= 0 / -e_j <= 0, or -1
    std::vector<int> monitored;         // line rows kept in the program
    std::vector<int> pIndex;            // unit*N_T + t
    std::vector<int> gIndex;            // (unit*N_T + t)*dim + k, -1 if absent
    Mat S;                              // full uncertainty matrix, kept for reconstruction
    Vec h;
    Mat sigma;

    int varP(int unit, int t) const { return pIndex[unit * blocks.nt + t]; }
    int varG(int unit, int t, int k) const { return gIndex[(static_cast<size_t>(unit) * blocks.nt + t) * dim + k]; }
};

RobustProgram buildDeterministicSced(const MarketCase& c);
RobustProgram buildDeterministicSced(const MarketCase& c, const ProgramOptions& opt);
RobustProgram buildRobustCounterpart(const MarketCase& c);
RobustProgram buildRobustCounterpart(const MarketCase& c, const ProgramOptions& opt);

// Line rows that can never bind for any dispatch within unit capacity and any eps in the
// coordinate bounding box of U.
std::vector<bool> redundantLineRows(const MarketCase& c, const ConstraintBlocks& b, const CoordinateBounds& cb);

// Objective Hessian check: eigen-decomposition on small programs, diagonal test otherwise.
bool hessianPsd(const QpProblem& qp);

}  // namespace rsced
