#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gcsdyn/fock.hpp"
#include "gcsdyn/linalg.hpp"
#include "gcsdyn/types.hpp"

namespace gcsdyn {

// z^p for integer p computed as exp(p log z); only integer powers arise so
// branch continuity does not matter. z = 0 maps to 0 for p > 0 and 1 for
// p = 0. Negative p only appears multiplied by an already-zero combinatorial
// prefactor, so it returns 0 rather than dividing.
inline Complex pow_int(Complex z, std::int64_t p) {
    if (p < 0) return {0.0, 0.0};
    if (p == 0) return {1.0, 0.0};
    if (p == 1) return z;
    if (z == Complex(0.0, 0.0)) return {0.0, 0.0};
    return std::exp(double(p) * std::log(z));
}

// One SU(M) generalized coherent state: S bosons distributed over M modes
// with single-particle amplitudes xi. Normalization of xi is monitored by
// callers, never silently enforced.
struct GCSParams {
    std::int64_t S = 0;
    VectorC xi;

    int modes() const { return (int)xi.size(); }
    double norm_error() const { return std::abs(xi.squaredNorm() - 1.0); }
};

namespace detail {

inline void check_pair(const GCSParams& eta, const GCSParams& xi, const char* fn) {
    if (eta.S != xi.S) throw std::invalid_argument(std::string(fn) + ": boson counts differ");
    if (eta.xi.size() != xi.xi.size())
        throw std::invalid_argument(std::string(fn) + ": mode counts differ");
    if (eta.xi.size() == 0) throw std::invalid_argument(std::string(fn) + ": empty state");
}

} // namespace detail

// <eta|xi> for order 0, and the reduced-boson-number overlaps
// <eta'|xi'>, <eta''|xi''>, <eta'''|xi'''> for orders 1..3: all equal
// (sum_i eta_i^* xi_i)^(S - order).
inline Complex gcs_overlap(const GCSParams& eta, const GCSParams& xi, int order = 0) {
    detail::check_pair(eta, xi, "gcs_overlap");
    if (order < 0 || order > 3) throw std::invalid_argument("gcs_overlap: order must be in 0..3");
    if (order > eta.S) throw std::invalid_argument("gcs_overlap: order exceeds S");
    return pow_int(eta.xi.dot(xi.xi), eta.S - order);
}

// Fock expansion of a GCS: amplitude on |n_1...n_M> is
// sqrt(S!/(n_1!...n_M!)) prod_i xi_i^{n_i}, with the multinomial square root
// taken in log space so S in the hundreds cannot overflow.
inline VectorC gcs_to_fock(const GCSParams& state, const FockBasis& basis) {
    if (basis.M != state.modes() || basis.S != state.S)
        throw std::invalid_argument("gcs_to_fock: basis does not match state");
    const std::int64_t dim = basis.size();
    VectorC out(dim);
    const double logSfact = std::lgamma(double(state.S) + 1.0);
    for (std::int64_t a = 0; a < dim; ++a) {
        const auto& n = basis.states[(std::size_t)a];
        double logmult = logSfact;
        Complex logxi(0.0, 0.0);
        bool zero = false;
        for (int i = 0; i < basis.M; ++i) {
            const int ni = n[(std::size_t)i];
            if (ni == 0) continue;
            const Complex c = state.xi[i];
            if (c == Complex(0.0, 0.0)) {
                zero = true;
                break;
            }
            logmult -= std::lgamma(double(ni) + 1.0);
            logxi += double(ni) * std::log(c);
        }
        out[a] = zero ? Complex(0.0, 0.0) : std::exp(0.5 * logmult + logxi);
    }
    return out;
}

// <eta| a_j^dag a_k |xi> = S eta_j^* xi_k <eta'|xi'>. Modes are 0-based.
inline Complex transition_element(const GCSParams& eta, const GCSParams& xi, int j, int k) {
    detail::check_pair(eta, xi, "transition_element");
    if (j < 0 || j >= eta.modes() || k < 0 || k >= eta.modes())
        throw std::invalid_argument("transition_element: mode index out of range");
    if (eta.S < 1) throw std::invalid_argument("transition_element: S must be >= 1");
    return double(eta.S) * std::conj(eta.xi[j]) * xi.xi[k] * gcs_overlap(eta, xi, 1);
}

// Variational state sum_k A_k |S, xi_k>.
struct GCSEnsemble {
    std::vector<GCSParams> basis;
    VectorC A;

    std::int64_t size() const { return (std::int64_t)basis.size(); }
    std::int64_t S() const { return basis.empty() ? 0 : basis.front().S; }
    int modes() const { return basis.empty() ? 0 : basis.front().modes(); }

    void validate() const {
        if (basis.empty()) throw std::invalid_argument("GCSEnsemble: empty basis");
        if ((std::int64_t)basis.size() != A.size())
            throw std::invalid_argument("GCSEnsemble: coefficient count differs from basis size");
        for (const auto& st : basis) {
            if (st.S != S() || st.modes() != modes())
                throw std::invalid_argument("GCSEnsemble: basis members disagree in S or M");
        }
    }

    // M x N matrix whose column k holds xi of basis state k
    MatrixC xi_matrix() const {
        MatrixC m(modes(), size());
        for (std::int64_t k = 0; k < size(); ++k) m.col(k) = basis[(std::size_t)k].xi;
        return m;
    }
};

// Gram matrices of the ensemble at boson numbers S, S-1, S-2, S-3:
// entry (k,j) of Xp is (sum_i xi_{ki}^* xi_{ji})^(S-p). Upper triangles are
// computed and mirrored so the results are exactly Hermitian.
struct GramFamily {
    MatrixC X, X1, X2, X3;
};

inline GramFamily gram_family(const MatrixC& xi, std::int64_t S) {
    const auto N = xi.cols();
    GramFamily g;
    for (auto* m : {&g.X, &g.X1, &g.X2, &g.X3}) m->resize(N, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        for (Eigen::Index j = k; j < N; ++j) {
            const Complex base = xi.col(k).dot(xi.col(j));
            const Complex x3 = pow_int(base, S - 3);
            const Complex x2 = pow_int(base, S - 2);
            const Complex x1 = pow_int(base, S - 1);
            const Complex x0 = pow_int(base, S);
            g.X3(k, j) = x3;
            g.X2(k, j) = x2;
            g.X1(k, j) = x1;
            g.X(k, j) = x0;
            if (j != k) {
                g.X3(j, k) = std::conj(x3);
                g.X2(j, k) = std::conj(x2);
                g.X1(j, k) = std::conj(x1);
                g.X(j, k) = std::conj(x0);
            }
        }
    }
    return g;
}

inline MatrixC gram_power(const MatrixC& xi, std::int64_t S, int order) {
    if (order < 0 || order > 3) throw std::invalid_argument("gram_power: order must be in 0..3");
    const GramFamily g = gram_family(xi, S);
    switch (order) {
        case 0: return g.X;
        case 1: return g.X1;
        case 2: return g.X2;
        default: return g.X3;
    }
}

// Mode-summed pair quantities entering the energy and its gradients:
// hop(k,j)   = sum_{i<M-1} xi_{ki}^* xi_{j,i+1} + xi_{k,i+1}^* xi_{ji}
// inter(k,j) = sum_i (xi_{ki}^*)^2 (xi_{ji})^2
// trap(k,j)  = sum_i (i - j0)^2 xi_{ki}^* xi_{ji}   (site index i is 1-based)
struct PairSums {
    MatrixC hop, inter, trap;
};

inline PairSums pair_sums(const MatrixC& xi, double j0) {
    const auto M = xi.rows();
    PairSums s;
    const auto lo = xi.topRows(M - 1);
    const auto hi = xi.bottomRows(M - 1);
    s.hop = lo.adjoint() * hi + hi.adjoint() * lo;
    const MatrixC sq = xi.array().square().matrix();
    s.inter = sq.adjoint() * sq;
    VectorR w(M);
    for (Eigen::Index i = 0; i < M; ++i) w[i] = (double(i) + 1.0 - j0) * (double(i) + 1.0 - j0);
    s.trap = xi.adjoint() * w.asDiagonal() * xi;
    return s;
}

// Pairwise energy kernel h with <Psi|H|Psi> = A^dag h A, from the
// hopping, interaction and trap terms of the model evaluated between
// ensemble members.
inline MatrixC energy_kernel(const GramFamily& g, const PairSums& s, const HamiltonianParams& p,
                             double t) {
    const double S = double(p.S);
    const double J = p.hopping(t);
    MatrixC h = (-J * S) * s.hop.cwiseProduct(g.X1);
    if (p.U != 0.0) h += (0.5 * p.U * S * (S - 1.0)) * s.inter.cwiseProduct(g.X2);
    if (p.K != 0.0) h += (0.5 * p.K * S) * s.trap.cwiseProduct(g.X1);
    return h;
}

// <Psi|Psi> = A^dag X A. The imaginary part must vanish; it is checked
// against 1e-10 relative as a guard on the Gram construction.
inline double ensemble_norm(const GCSEnsemble& ens) {
    ens.validate();
    const MatrixC x = gram_power(ens.xi_matrix(), ens.S(), 0);
    const Complex v = ens.A.dot(x * ens.A);
    // |A^dag X A| is bounded by ||A||^2 for near-unit overlaps, so that sets
    // the scale even when cancellation drives the norm itself to zero
    const double scale = std::max(std::abs(v.real()), ens.A.squaredNorm());
    if (std::abs(v.imag()) > 1e-10 * std::max(scale, 1e-300))
        throw std::runtime_error("ensemble_norm: norm came out non-real");
    return v.real();
}

// Per-mode populations <n_i>/S of the ensemble state, normalized by the
// ensemble norm; entries sum to 1.
inline VectorR gcs_populations(const GCSEnsemble& ens) {
    ens.validate();
    const MatrixC xi = ens.xi_matrix();
    const GramFamily g = gram_family(xi, ens.S());
    const Complex nrm = ens.A.dot(g.X * ens.A);
    if (std::abs(nrm) < 1e-14)
        throw std::runtime_error("gcs_populations: ensemble norm below 1e-14, state is degenerate");
    const int M = ens.modes();
    VectorR pop(M);
    for (int i = 0; i < M; ++i) {
        // S cancels against the 1/S population normalization
        const MatrixC outer = xi.row(i).adjoint() * xi.row(i);
        pop[i] = (ens.A.dot(outer.cwiseProduct(g.X1) * ens.A)).real() / nrm.real();
    }
    return pop;
}

// <Psi|H(t)|Psi> / <Psi|Psi>.
inline double energy_expectation(const GCSEnsemble& ens, const HamiltonianParams& p, double t) {
    ens.validate();
    p.validate();
    if (ens.modes() != p.M || ens.S() != p.S)
        throw std::invalid_argument("energy_expectation: ensemble does not match params");
    const MatrixC xi = ens.xi_matrix();
    const GramFamily g = gram_family(xi, p.S);
    const Complex nrm = ens.A.dot(g.X * ens.A);
    if (std::abs(nrm) < 1e-14)
        throw std::runtime_error("energy_expectation: ensemble norm below 1e-14");
    const MatrixC h = energy_kernel(g, pair_sums(xi, p.j0), p, t);
    return (ens.A.dot(h * ens.A)).real() / nrm.real();
}

struct ProjectionResult {
    VectorC A;
    double residual = 0.0; // || target - sum_k A_k |xi_k> ||
    bool poor_fit = false; // residual above the warning threshold
    std::int64_t discarded = 0;
    double sigma_max = 0.0;
};

// Least-squares expansion of a Fock-space target over a GCS set: solves
// X A = b, b_k = <xi_k|target>, through the spectrally regularized
// pseudo-inverse. A poor fit is reported, not thrown: the caller decides
// whether an incomplete basis is acceptable.
inline ProjectionResult project_state(const VectorC& target, const std::vector<GCSParams>& basis_set,
                                      const FockBasis& basis, double reg = 1e-8,
                                      double warn_threshold = 1e-3) {
    if (basis_set.empty()) throw std::invalid_argument("project_state: empty basis set");
    for (const auto& st : basis_set) {
        if (st.S != basis.S || st.modes() != basis.M)
            throw std::invalid_argument("project_state: basis set does not match Fock basis");
    }
    if (target.size() != basis.size())
        throw std::invalid_argument("project_state: target has wrong dimension");
    if (std::abs(target.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("project_state: target must be normalized");

    const std::int64_t N = (std::int64_t)basis_set.size();
    MatrixC phi(basis.size(), N); // column k: Fock expansion of basis state k
    for (std::int64_t k = 0; k < N; ++k) phi.col(k) = gcs_to_fock(basis_set[(std::size_t)k], basis);

    MatrixC xi(basis.M, N);
    for (std::int64_t k = 0; k < N; ++k) xi.col(k) = basis_set[(std::size_t)k].xi;
    const MatrixC x = gram_power(xi, basis.S, 0);
    const VectorC b = phi.adjoint() * target;

    const PinvSolve solve = hermitian_pinv_solve(x, b, reg);
    ProjectionResult out;
    out.A = solve.x;
    out.discarded = solve.discarded;
    out.sigma_max = solve.sigma_max;
    out.residual = (target - phi * out.A).norm();
    out.poor_fit = out.residual > warn_threshold;
    return out;
}

} // namespace gcsdyn
