#pragma once

#include "rsced/model.hpp"

#include <cstdint>

namespace rsced {

// Two units, three buses, three 15-minute intervals, one wind farm. The unit
// and line data are back-solved; see the notes embedded in the case.
MarketCase threeBusCase();

struct SyntheticOptions {
    int buses = 118;
    int lines = 186;
    int units = 54;
    int periods = 8;
    int windBuses = 3;
    int monitoredLines = 2;
    double dt = 0.25;
    double r1 = 0.1;
    double r2 = 1.0;
    double stdFraction = 0.3;
    std::uint64_t seed = 118;
};

// Random meshed network of the requested size with box/budget uncertainty at
// the wind buses. Deterministic for a given seed.
MarketCase syntheticCase(const SyntheticOptions& opt = {});

}  // namespace rsced
