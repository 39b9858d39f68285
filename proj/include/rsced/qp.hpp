#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <limits>
#include <string>

namespace rsced {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// minimize 0.5 x'Hx + c'x + constant
// s.t.     Aeq x = beq,  Ain x <= bin,  lower <= x <= upper
// H is stored in full (both triangles).
struct QpProblem {
    int n = 0;
    SpMat H;
    Eigen::VectorXd c;
    double constant = 0.0;
    SpMat Aeq;
    Eigen::VectorXd beq;
    SpMat Ain;
    Eigen::VectorXd bin;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    void resize(int vars, int eqRows, int inRows);
    double objective(const Eigen::VectorXd& x) const;
};

enum class QpStatus { Optimal, Infeasible, Unbounded, NumericalFailure, IterationLimit };

const char* statusName(QpStatus s);

// Multipliers follow L = f + y'(Aeq x - beq) + z'(Ain x - bin) - wl'(x - l) + wu'(x - u)
// with z, wl, wu >= 0.
struct QpResult {
    QpStatus status = QpStatus::NumericalFailure;
    Eigen::VectorXd x, y, z, wl, wu;
    double objective = 0.0;
    int iterations = 0;
    double worstResidual = 0.0;
    std::string message;
    bool optimal() const { return status == QpStatus::Optimal; }
};

struct QpOptions {
    double tol = 1e-8;
    int maxIterations = 200;
    double regPrimal = 1e-10;
    double regDual = 1e-10;
    int refinementSteps = 3;
    // Re-solve the KKT system on the active set guessed from the interior
    // point, kept only if it is primal and dual feasible. For degenerate
    // problems where x converges like sqrt(mu).
    bool polish = false;
};

QpResult solveQp(const QpProblem& qp, const QpOptions& opt = {});

struct QpKkt {
    double stationarity = 0.0;
    double primal = 0.0;
    double dual = 0.0;          // most negative multiplier magnitude
    double complementarity = 0.0;
    double gap = 0.0;           // |primal - dual objective|
    double worst() const;
};

QpKkt qpKkt(const QpProblem& qp, const QpResult& r);

}  // namespace rsced
