#pragma once

#include "rsced/pricing.hpp"

#include <string>
#include <vector>

namespace rsced {

enum class PricingScheme { Standard, Integrated };

const char* schemeName(PricingScheme s);

// Price-taking unit facing fixed prices. Profit, with dt the interval length:
//   dt*pe'P + tr(G'pa) + dt*pr'(R - AP) - sum_t dt*(qP^2 + bP) - f - dt*q*sum_t g_t' Sigma g_t
// subject to the robust unit limits AP + rho'h <= R, AG = rho'S, rho >= 0.
// With adjustable = false the unit offers energy only: G = 0 and AP <= R.
struct ParticipantProblem {
    int unit = 0;
    Unit data;
    double dt = 1.0;
    int nd = 0;
    Mat A;
    Vec R;
    Mat S;
    Vec h;
    Mat sigma;
    std::vector<int> activeCoords;
    std::vector<int> activeSetRows;
    bool causal = false;
    bool adjustable = true;

    Vec energyPrice;      // $/MWh per interval
    Mat adjustmentPrice;  // $ per unit of G, N_T x dim
    Vec reservePrice;     // $/MWh per A-row

    int periods() const { return static_cast<int>(A.cols()); }
    int dim() const { return static_cast<int>(S.cols()); }
};

ParticipantProblem participantProblem(const MarketCase& c, const RobustProgram& prog, const PriceSet& prices,
                                      int unit, PricingScheme scheme = PricingScheme::Standard);

// The energy-only deviation: paid the plain unit LMP, no credit, no adjustment.
ParticipantProblem withdrawalProblem(const MarketCase& c, const RobustProgram& prog, const PriceSet& prices, int unit);

double participantProfit(const ParticipantProblem& pp, const Vec& P, const Mat& G);

struct ParticipantSolution {
    QpStatus status = QpStatus::NumericalFailure;
    Vec P;
    Mat G;
    double profit = 0.0;
    std::string message;
    bool optimal() const { return status == QpStatus::Optimal; }
};

ParticipantSolution solveParticipant(const ParticipantProblem& pp, double tol = 1e-9);

struct UnitEquilibrium {
    int unit = 0;
    std::string name;
    QpStatus status = QpStatus::NumericalFailure;
    double isoProfit = 0.0;
    double maxProfit = 0.0;
    double gap = 0.0;             // maxProfit - isoProfit
    double withdrawProfit = 0.0;
    double withdrawGain = 0.0;    // withdrawProfit - isoProfit
    double dispatchDiff = 0.0;    // max |P_argmax - P_iso|, MW
};

struct EquilibriumReport {
    PricingScheme scheme = PricingScheme::Standard;
    bool strictlyConvex = false;
    double tol = 1e-6;
    double dispatchTol = 1e-5;
    std::vector<UnitEquilibrium> units;

    double worstGap() const;
    double worstDeviationGain() const;  // largest of gap and withdrawal gain, relative to 1 + |profit|
    double worstDispatchDiff() const;
    bool pass() const;
};

EquilibriumReport verifyEquilibrium(const MarketCase& c, const RobustProgram& prog, const PrimalDualSolution& sol,
                                    const PriceSet& prices, double tol = 1e-6,
                                    PricingScheme scheme = PricingScheme::Standard);

}  // namespace rsced
