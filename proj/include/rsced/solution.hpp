#pragma once

#include "rsced/assembler.hpp"

#include <string>
#include <vector>

namespace rsced {

// Raw multipliers follow the Lagrangian
//   cost + lambda'(Dd - sum P) + tr gamma'(D - sum G) + sum alpha'(AP + rho'h - R)
//   + sum tr beta'(AG - rho'S) + eta'(sum Gamma P + zeta'h - F - Gamma_d d)
//   + tr tau'(sum Gamma G - Gamma_d - zeta'S)
// where cost carries the interval length (dt * energy cost per hour).
struct PrimalDualSolution {
    QpStatus status = QpStatus::NumericalFailure;
    bool robust = true;
    double objective = 0.0;
    int iterations = 0;
    std::string message;

    std::vector<Vec> P;       // per unit, N_T
    std::vector<Mat> G;       // per unit, N_T x N_D*N_T
    std::vector<SpMat> rho;   // per unit, N_K x 4N_T
    SpMat zeta;               // N_K x 2N_L*N_T

    Vec lambda;               // N_T
    Mat gamma;                // N_T x N_D*N_T
    std::vector<Vec> alpha;   // per unit, 4N_T
    std::vector<Mat> beta;    // per unit, 4N_T x N_D*N_T
    Vec eta;                  // 2N_L*N_T
    Mat tau;                  // 2N_L*N_T x N_D*N_T
    std::vector<SpMat> rhoBound;  // multipliers of rho >= 0
    SpMat zetaBound;              // multipliers of zeta >= 0

    bool optimal() const { return status == QpStatus::Optimal; }
};

PrimalDualSolution solve(const RobustProgram& prog, double tol = 1e-8, int maxIterations = 200);
PrimalDualSolution solve(const RobustProgram& prog, const QpOptions& opt);

// Shapes a raw QP result into named P, G, rho and zeta blocks; eliminated coordinates are
// reconstructed (canonical G split, rho/zeta from the pinning rows, zero multipliers).
PrimalDualSolution extractSolution(const RobustProgram& prog, const QpResult& r);

// Flattens a shaped solution back into program order.
QpResult flattenSolution(const RobustProgram& prog, const PrimalDualSolution& sol);

struct KktReport {
    double stationarityP = 0.0;
    double stationarityG = 0.0;
    double stationarityRho = 0.0;
    double stationarityZeta = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;
    double gap = 0.0;
    double relativeGap = 0.0;

    double stationarity() const;
    double worst() const;
    bool pass(double tol) const { return worst() <= tol && relativeGap <= tol; }
};

KktReport checkKkt(const RobustProgram& prog, const PrimalDualSolution& sol);

// Convenience: validate, assemble and solve with the case's settings.
struct ClearingRun {
    RobustProgram program;
    PrimalDualSolution solution;
};

ClearingRun clearMarket(const MarketCase& c, bool deterministic = false);

}  // namespace rsced
