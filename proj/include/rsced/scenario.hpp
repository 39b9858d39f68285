#pragma once

#include "rsced/solution.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rsced {

class GuardError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct VertexOptions {
    int maxDim = 12;
    size_t maxVertices = 5000;
    double maxCombinations = 2e7;  // candidate row subsets examined before refusing
    double dedupTol = 1e-9;
};

// P_hat = P + G eps.
Vec applyAffinePolicy(const Vec& P, const Mat& G, const Vec& eps);
std::vector<Vec> applyAffinePolicy(const PrimalDualSolution& sol, const Vec& eps);

// Works in the space of coordinates that are not pinned to zero; the result is
// embedded back into full length. Throws GuardError when the reduced dimension,
// the candidate count or the vertex count exceeds the options.
std::vector<Vec> enumerateVertices(const UncertaintySet& set, const VertexOptions& opt = {});

enum class SampleMode { Mixed, WalkOnly, VertexOnly };

// Uniform-direction hit-and-run from the Chebyshev center. Every returned point
// satisfies S eps <= h in floating point. Mixed alternates walk points with
// vertices (cycled) when enumeration is within the guard.
std::vector<Vec> sampleUncertainty(const UncertaintySet& set, int n, std::uint64_t seed,
                                   SampleMode mode = SampleMode::Mixed, const VertexOptions& vopt = {});

// mt19937_64 based draws that do not depend on the standard library's distributions.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed) : gen_(seed) {}
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double normal();
    int below(int n) { return static_cast<int>(uniform() * n) % n; }

private:
    std::mt19937_64 gen_;
    bool hasSpare_ = false;
    double spare_ = 0.0;
};

struct ScenarioResult {
    Vec eps;
    std::vector<Vec> adjusted;
    double balanceResidual = 0.0;  // max |sum P_hat - D(d + eps)|
    double unitViolation = 0.0;    // max positive part of A P_hat - R
    double lineViolation = 0.0;    // max positive part of flow - limit
    std::string worstConstraint;
    double realizedCost = 0.0;     // dt-scaled, same convention as the objective
    double worst() const { return std::max({balanceResidual, unitViolation, lineViolation}); }
};

ScenarioResult evaluateScenario(const MarketCase& c, const ConstraintBlocks& b, const PrimalDualSolution& sol,
                                const Vec& eps);

struct AuditReport {
    std::uint64_t seed = 0;
    int samples = 0;
    double feasTol = 1e-6;
    double maxViolation = 0.0;
    double maxBalanceResidual = 0.0;
    int worstSample = -1;
    std::string worstConstraint;
    Vec worstEps;
    double meanRealizedCost = 0.0;
    int violating = 0;
    bool pass() const { return maxViolation <= feasTol; }
};

AuditReport auditFeasibility(const MarketCase& c, const PrimalDualSolution& sol, const std::vector<Vec>& samples,
                             double feasTol = 1e-6, std::uint64_t seed = 0);

// P and G with the unit and line constraints written out at every vertex of U.
// Same objective and balance rows as the counterpart.
struct ScenarioOracle {
    RobustProgram program;
    std::vector<Vec> vertices;
};

ScenarioOracle buildScenarioOracle(const MarketCase& c, const ProgramOptions& opt, const VertexOptions& vopt = {});
ScenarioOracle buildScenarioOracle(const MarketCase& c);

}  // namespace rsced
