#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gcsdyn/gcs.hpp"
#include "gcsdyn/types.hpp"

namespace gcsdyn {

enum class GridMode { Random, Diagonal };

// A point of the von Neumann lattice in the M-dimensional Glauber phase
// space: z_j = xi0_j + beta (m_j + i n_j).
struct GlauberPoint {
    VectorC z;
};

struct GridSpec {
    int M = 2;
    std::int64_t S = 1;
    double beta = kSqrtPi;
    GCSParams center;
    GridMode mode = GridMode::Random;
    std::int64_t N = 1;
    std::uint64_t seed = 12345;
    int extent = 0; // lattice half-width P; 0 picks the default below

    // number of distinct index tuples at half-width P, saturated at int64 max
    std::int64_t pool_size(int P) const {
        const std::int64_t side = 2 * (std::int64_t)P + 1;
        const int exponent = mode == GridMode::Random ? 2 * M : 2;
        unsigned __int128 pool = 1;
        for (int e = 0; e < exponent; ++e) {
            pool *= (unsigned __int128)side;
            if (pool > (unsigned __int128)(std::numeric_limits<std::int64_t>::max)())
                return (std::numeric_limits<std::int64_t>::max)();
        }
        return (std::int64_t)pool;
    }

    // Random mode: smallest P with at least 4N candidate tuples, leaving
    // slack for dedup refills. Diagonal mode: smallest P whose (2P+1)^2 pool
    // holds N, matching the square grids it mimics.
    int resolved_extent() const {
        if (extent > 0) return extent;
        const std::int64_t want = mode == GridMode::Random ? 4 * N : N;
        int P = 0;
        while (pool_size(P) < want) ++P;
        return P;
    }

    void validate(std::vector<std::string>* warnings = nullptr) const {
        std::vector<std::string> issues;
        if (M < 1) issues.push_back("M must be >= 1");
        if (S < 1) issues.push_back("S must be >= 1");
        if (!(beta > 0.0)) issues.push_back("beta must be > 0");
        if (N < 1) issues.push_back("N must be >= 1");
        if (extent < 0) issues.push_back("extent must be >= 0");
        if (center.modes() != M) issues.push_back("center has wrong mode count");
        else if (center.S != S) issues.push_back("center has wrong boson count");
        else if (center.norm_error() > 1e-9) issues.push_back("center state is not normalized");
        if (issues.empty()) {
            const std::int64_t pool = pool_size(resolved_extent());
            if (N > pool)
                issues.push_back("N = " + std::to_string(N) + " exceeds the " +
                                 std::to_string(pool) + " distinct tuples at extent " +
                                 std::to_string(resolved_extent()));
        }
        if (!issues.empty()) throw ValidationError(issues);
        if (warnings && beta > kSqrtPi + 1e-12)
            warnings->push_back("beta = " + std::to_string(beta) +
                                " exceeds sqrt(pi); the lattice is no longer complete");
    }
};

namespace detail {

// Streams lattice points: the center tuple first, then either random index
// tuples without replacement (Random) or shared (m,n) pairs by increasing
// ring (Diagonal). Exhaustion returns false.
class LatticeStream {
public:
    explicit LatticeStream(const GridSpec& spec)
        : spec_(spec), P_(spec.resolved_extent()), rng_(spec.seed), pool_(spec.pool_size(P_)) {
        if (spec_.mode == GridMode::Diagonal) {
            const int side = 2 * P_ + 1;
            diag_.reserve((std::size_t)side * (std::size_t)side);
            for (int m = -P_; m <= P_; ++m)
                for (int n = -P_; n <= P_; ++n) diag_.push_back({m, n});
            std::sort(diag_.begin(), diag_.end(), [](const auto& a, const auto& b) {
                const int ra = std::max(std::abs(a.first), std::abs(a.second));
                const int rb = std::max(std::abs(b.first), std::abs(b.second));
                if (ra != rb) return ra < rb;
                return a < b;
            });
        }
    }

    bool next(GlauberPoint& out) {
        if (spec_.mode == GridMode::Diagonal) {
            if (diag_pos_ >= diag_.size()) return false;
            const auto [m, n] = diag_[diag_pos_++];
            out.z = spec_.center.xi.array() + Complex(spec_.beta * m, spec_.beta * n);
            return true;
        }
        if ((std::int64_t)seen_.size() >= pool_) return false;
        std::uniform_int_distribution<int> pick(-P_, P_);
        std::vector<int> tuple((std::size_t)(2 * spec_.M));
        for (;;) {
            if (first_) {
                // the center tuple opens the list
                std::fill(tuple.begin(), tuple.end(), 0);
                first_ = false;
            } else {
                for (auto& v : tuple) v = pick(rng_);
            }
            if (seen_.insert(tuple).second) break;
        }
        out.z.resize(spec_.M);
        for (int j = 0; j < spec_.M; ++j)
            out.z[j] = spec_.center.xi[j] +
                       Complex(spec_.beta * tuple[(std::size_t)(2 * j)],
                               spec_.beta * tuple[(std::size_t)(2 * j + 1)]);
        return true;
    }

private:
    GridSpec spec_;
    int P_;
    std::mt19937_64 rng_;
    std::int64_t pool_;
    bool first_ = true;
    std::set<std::vector<int>> seen_;
    std::vector<std::pair<int, int>> diag_;
    std::size_t diag_pos_ = 0;
};

} // namespace detail

// The first N lattice points (center tuple first).
inline std::vector<GlauberPoint> build_lattice(const GridSpec& spec) {
    spec.validate();
    detail::LatticeStream stream(spec);
    std::vector<GlauberPoint> pts;
    pts.reserve((std::size_t)spec.N);
    GlauberPoint p;
    while ((std::int64_t)pts.size() < spec.N) {
        if (!stream.next(p))
            throw std::runtime_error("build_lattice: lattice pool exhausted at " +
                                     std::to_string(pts.size()) + " of " + std::to_string(spec.N));
        pts.push_back(p);
    }
    return pts;
}

// Projective map onto the unit sphere: xi = z / ||z||.
inline GCSParams to_gcs(const GlauberPoint& point, std::int64_t S) {
    const double nrm = point.z.norm();
    if (!(nrm > 0.0)) throw std::invalid_argument("to_gcs: zero lattice point has no direction");
    GCSParams st;
    st.S = S;
    st.xi = point.z / nrm;
    return st;
}

struct BlochAngles {
    double theta = 0.0; // in [0, pi]
    double phi = 0.0;   // in [0, 2 pi)
};

// Bloch-sphere angles of a two-mode state with the global phase removed:
// xi1 = cos(theta/2), xi2 = sin(theta/2) e^{i phi}.
inline BlochAngles bloch_coordinates(const GCSParams& st) {
    if (st.modes() != 2) throw std::invalid_argument("bloch_coordinates: defined for M = 2 only");
    BlochAngles b;
    b.theta = 2.0 * std::acos(std::clamp(std::abs(st.xi[0]), 0.0, 1.0));
    b.phi = std::arg(st.xi[1]) - std::arg(st.xi[0]);
    b.phi = std::fmod(b.phi, 2.0 * kPi);
    if (b.phi < 0.0) b.phi += 2.0 * kPi;
    return b;
}

// Lattice points mapped to GCS with projective duplicates removed: keeps
// drawing until N distinct states are found or the pool runs dry. The center
// state is always first. Duplicates are detected by overlap magnitude, which
// also catches z and lambda z landing on the same ray.
inline std::vector<GCSParams> sample_ensemble(const GridSpec& spec,
                                              std::vector<std::string>* warnings = nullptr) {
    spec.validate(warnings);
    detail::LatticeStream stream(spec);
    std::vector<GCSParams> kept;
    kept.reserve((std::size_t)spec.N);
    GlauberPoint p;
    while ((std::int64_t)kept.size() < spec.N && stream.next(p)) {
        if (!(p.z.norm() > 0.0)) continue; // projective map undefined; replaced by the next draw
        GCSParams cand = to_gcs(p, spec.S);
        bool dup = false;
        for (const auto& st : kept) {
            const Complex base = st.xi.dot(cand.xi);
            if (std::pow(std::abs(base), double(spec.S)) > 1.0 - 1e-12) {
                dup = true;
                break;
            }
        }
        if (!dup) kept.push_back(std::move(cand));
    }
    if ((std::int64_t)kept.size() < spec.N)
        throw std::runtime_error("sample_ensemble: pool exhausted with " +
                                 std::to_string(kept.size()) + " distinct states of the " +
                                 std::to_string(spec.N) + " requested");
    return kept;
}

} // namespace gcsdyn
