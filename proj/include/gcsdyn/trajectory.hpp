#pragma once

#include <cstdint>
#include <vector>

#include "gcsdyn/types.hpp"

namespace gcsdyn {

// One stored ensemble configuration (variational runs only).
struct EnsembleSnapshot {
    double t = 0.0;
    VectorC A;  // N coefficients
    MatrixC xi; // M x N, column k holds state k
};

// Time series shared by the exact propagator and the variational engine.
// populations[i] holds one entry per mode, already divided by S.
struct Trajectory {
    std::vector<double> times;
    std::vector<double> norms;
    std::vector<double> energies;
    std::vector<VectorR> populations;

    // variational engine only
    std::vector<std::int64_t> discarded; // pseudo-inverse directions dropped at sample time
    std::vector<double> xi_drift;        // running max of | ||xi_k|| - 1 |
    std::vector<EnsembleSnapshot> snapshots;

    // exact propagator only (kept when requested)
    std::vector<VectorC> amplitudes;

    std::size_t size() const { return times.size(); }
};

} // namespace gcsdyn
