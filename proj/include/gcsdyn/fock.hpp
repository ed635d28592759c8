#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "gcsdyn/ode.hpp"
#include "gcsdyn/trajectory.hpp"
#include "gcsdyn/types.hpp"

namespace gcsdyn {

using SparseC = Eigen::SparseMatrix<Complex>;

// Number of Fock states of S bosons in M modes, binom(M+S-1, S).
// Throws std::overflow_error instead of wrapping.
inline std::int64_t fock_dimension(int M, std::int64_t S) {
    if (M < 1) throw std::invalid_argument("fock_dimension: M must be >= 1");
    if (S < 0) throw std::invalid_argument("fock_dimension: S must be >= 0");
    // binom(S+M-1, M-1) multiplicatively; r stays binom(S+i, i) after step i,
    // so the division is always exact
    unsigned __int128 r = 1;
    for (int i = 1; i <= M - 1; ++i) {
        const auto factor = (unsigned __int128)(S + i);
        if (r > ~(unsigned __int128)0 / factor)
            throw std::overflow_error("fock_dimension: binomial overflows");
        r = r * factor / (unsigned __int128)i;
    }
    if (r > (unsigned __int128)(std::numeric_limits<std::int64_t>::max)())
        throw std::overflow_error("fock_dimension: binomial overflows int64");
    return (std::int64_t)r;
}

// All occupation vectors of S bosons in M modes, lexicographically
// descending, so states.front() = (S,0,...,0) and index lookup can binary
// search.
struct FockBasis {
    int M = 0;
    std::int64_t S = 0;
    std::vector<std::vector<int>> states;

    static FockBasis enumerate(int M, std::int64_t S) {
        const std::int64_t dim = fock_dimension(M, S);
        if (S > (std::int64_t)(std::numeric_limits<int>::max)())
            throw std::invalid_argument("FockBasis::enumerate: S too large");
        FockBasis b;
        b.M = M;
        b.S = S;
        b.states.reserve((std::size_t)dim);
        std::vector<int> n((std::size_t)M, 0);
        n[0] = (int)S;
        for (;;) {
            b.states.push_back(n);
            if (n[(std::size_t)M - 1] == (int)S) break;
            // rightmost non-tail entry that can donate one boson
            int i = M - 2;
            while (n[(std::size_t)i] == 0) --i;
            int tail = 0;
            for (int j = i + 1; j < M; ++j) {
                tail += n[(std::size_t)j];
                n[(std::size_t)j] = 0;
            }
            n[(std::size_t)i] -= 1;
            n[(std::size_t)i + 1] = tail + 1;
        }
        return b;
    }

    std::int64_t size() const { return (std::int64_t)states.size(); }

    std::int64_t index_of(const std::vector<int>& occ) const {
        if ((int)occ.size() != M)
            throw std::invalid_argument("FockBasis::index_of: wrong mode count");
        std::int64_t sum = 0;
        for (int v : occ) {
            if (v < 0) throw std::invalid_argument("FockBasis::index_of: negative occupation");
            sum += v;
        }
        if (sum != S) throw std::invalid_argument("FockBasis::index_of: occupations do not sum to S");
        auto it = std::lower_bound(states.begin(), states.end(), occ,
                                   [](const std::vector<int>& a, const std::vector<int>& b) { return a > b; });
        if (it == states.end() || *it != occ)
            throw std::invalid_argument("FockBasis::index_of: state not in basis");
        return (std::int64_t)(it - states.begin());
    }
};

inline FockBasis enumerate_fock_basis(int M, std::int64_t S) { return FockBasis::enumerate(M, S); }

// Open Bose-Hubbard chain of M sites with periodically driven hopping
// J(t) = J0 + J1 cos(omega t), on-site interaction U and a harmonic trap of
// curvature K centered on site j0 (sites count from 1).
struct HamiltonianParams {
    int M = 2;
    std::int64_t S = 1;
    double J0 = 1.0;
    double J1 = 0.0;
    double omega = 0.0;
    double U = 0.0;
    double K = 0.0;
    double j0 = 0.0;

    double hopping(double t) const { return J0 + J1 * std::cos(omega * t); }

    void validate() const {
        std::vector<std::string> issues;
        if (M < 2) issues.push_back("M must be >= 2");
        if (S < 1) issues.push_back("S must be >= 1");
        for (auto [v, name] : {std::pair{J0, "J0"}, {J1, "J1"}, {omega, "omega"},
                               {U, "U"}, {K, "K"}, {j0, "j0"}}) {
            if (!std::isfinite(v)) issues.push_back(std::string(name) + " must be finite");
        }
        if (!issues.empty()) throw ValidationError(issues);
    }
};

inline double default_trap_center(int M) { return (M + 1) / 2.0; }

// H(t) = J(t) * hop + diag(onsite). hop carries the unit-J hopping matrix
// element -sqrt((n_j + 1) n_{j+1}) per single-boson move, so rescaling by
// J(t) is the only time dependence.
struct SplitHamiltonian {
    SparseC hop;
    VectorR onsite;
};

inline SplitHamiltonian build_split_hamiltonian(const HamiltonianParams& p, const FockBasis& basis) {
    p.validate();
    if (basis.M != p.M || basis.S != p.S)
        throw std::invalid_argument("build_split_hamiltonian: basis does not match params");
    const std::int64_t dim = basis.size();

    SplitHamiltonian h;
    h.onsite.resize(dim);
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve((std::size_t)dim * (std::size_t)(2 * (p.M - 1)));

    std::vector<int> moved;
    for (std::int64_t a = 0; a < dim; ++a) {
        const auto& n = basis.states[(std::size_t)a];
        double diag = 0.0;
        for (int i = 0; i < p.M; ++i) {
            const double ni = n[(std::size_t)i];
            const double site = (i + 1) - p.j0;
            diag += 0.5 * p.U * ni * (ni - 1.0) + 0.5 * p.K * site * site * ni;
        }
        h.onsite[a] = diag;

        // one boson hops left across bond i; inserting both directions with
        // the same real amplitude keeps the matrix exactly Hermitian
        for (int i = 0; i + 1 < p.M; ++i) {
            if (n[(std::size_t)i + 1] == 0) continue;
            moved = n;
            moved[(std::size_t)i] += 1;
            moved[(std::size_t)i + 1] -= 1;
            const std::int64_t b = basis.index_of(moved);
            const double amp = -std::sqrt((double(n[(std::size_t)i]) + 1.0) * double(n[(std::size_t)i + 1]));
            trip.emplace_back((int)b, (int)a, Complex(amp, 0.0));
            trip.emplace_back((int)a, (int)b, Complex(amp, 0.0));
        }
    }

    h.hop.resize((Eigen::Index)dim, (Eigen::Index)dim);
    h.hop.setFromTriplets(trip.begin(), trip.end());
    h.hop.makeCompressed();
    return h;
}

inline SparseC build_hamiltonian(const HamiltonianParams& p, const FockBasis& basis, double t) {
    SplitHamiltonian split = build_split_hamiltonian(p, basis);
    SparseC h = split.hop * Complex(p.hopping(t), 0.0);
    SparseC diag(h.rows(), h.cols());
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve((std::size_t)basis.size());
    for (std::int64_t i = 0; i < basis.size(); ++i)
        trip.emplace_back((int)i, (int)i, Complex(split.onsite[i], 0.0));
    diag.setFromTriplets(trip.begin(), trip.end());
    h += diag;
    h.makeCompressed();
    return h;
}

// Per-mode populations <n_i>/S of a Fock-space state, each in [0,1]; they
// sum to 1 when the state is normalized.
inline VectorR fock_populations(const VectorC& amplitudes, const FockBasis& basis) {
    if (amplitudes.size() != basis.size())
        throw std::invalid_argument("fock_populations: amplitude length does not match basis");
    if (basis.S < 1) throw std::invalid_argument("fock_populations: S must be >= 1");
    VectorR pop = VectorR::Zero(basis.M);
    for (std::int64_t a = 0; a < basis.size(); ++a) {
        const double w = std::norm(amplitudes[a]);
        if (w == 0.0) continue;
        const auto& n = basis.states[(std::size_t)a];
        for (int i = 0; i < basis.M; ++i) pop[i] += w * n[(std::size_t)i];
    }
    return pop / double(basis.S);
}

// Exact propagation is for validation, not production: refuse plainly
// infeasible dimensions unless the caller overrides.
inline constexpr std::int64_t kMaxFockDimension = 1000000;

struct FockPropagationOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double max_step = 0.0;
    bool keep_amplitudes = true;
    bool allow_large = false;

    void validate() const {
        std::vector<std::string> issues;
        if (!(rtol > 0.0)) issues.push_back("rtol must be > 0");
        if (!(atol > 0.0)) issues.push_back("atol must be > 0");
        if (max_step < 0.0) issues.push_back("max_step must be >= 0");
        if (!issues.empty()) throw ValidationError(issues);
    }
};

// Schroedinger propagation of Fock amplitudes over t_grid with the adaptive
// RK 4(5) pair. The initial state must be normalized to 1e-12.
inline Trajectory propagate_fock(const VectorC& initial, const HamiltonianParams& p,
                                 const std::vector<double>& t_grid,
                                 const FockPropagationOptions& opt = {}) {
    p.validate();
    opt.validate();
    const std::int64_t dim = fock_dimension(p.M, p.S);
    if (dim > kMaxFockDimension && !opt.allow_large)
        throw std::invalid_argument(
            "propagate_fock: Fock dimension " + std::to_string(dim) + " exceeds the cap of " +
            std::to_string(kMaxFockDimension) + "; set allow_large to override");
    if (initial.size() != dim)
        throw std::invalid_argument("propagate_fock: initial state has wrong dimension");
    if (std::abs(initial.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("propagate_fock: initial state is not normalized");

    const FockBasis basis = FockBasis::enumerate(p.M, p.S);
    const SplitHamiltonian split = build_split_hamiltonian(p, basis);
    const VectorC onsite = split.onsite.cast<Complex>();

    OdeOptions ode;
    ode.rtol = opt.rtol;
    ode.atol = opt.atol;
    ode.max_step = opt.max_step;
    // conservation contracts (norm, energy) are stated against tol over the
    // whole window, so control the error per unit step here
    ode.error_per_unit_step = true;

    const Complex mi(0.0, -1.0);
    auto rhs = [&](double t, const VectorC& psi) -> VectorC {
        return mi * (p.hopping(t) * (split.hop * psi) + onsite.cwiseProduct(psi));
    };

    Trajectory traj;
    const std::size_t n = t_grid.size();
    traj.times.reserve(n);
    traj.norms.reserve(n);
    traj.energies.reserve(n);
    traj.populations.reserve(n);
    if (opt.keep_amplitudes) traj.amplitudes.reserve(n);

    auto observe = [&](std::size_t, double t, const VectorC& psi) {
        traj.times.push_back(t);
        traj.norms.push_back(psi.squaredNorm());
        const VectorC hpsi = p.hopping(t) * (split.hop * psi) + onsite.cwiseProduct(psi);
        traj.energies.push_back(psi.dot(hpsi).real());
        traj.populations.push_back(fock_populations(psi, basis));
        if (opt.keep_amplitudes) traj.amplitudes.push_back(psi);
    };

    integrate_ode(rhs, initial, t_grid, ode, observe);
    return traj;
}

} // namespace gcsdyn
