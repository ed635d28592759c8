#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gcsdyn/fock.hpp"
#include "gcsdyn/gcs.hpp"
#include "gcsdyn/linalg.hpp"
#include "gcsdyn/ode.hpp"
#include "gcsdyn/trajectory.hpp"
#include "gcsdyn/types.hpp"

namespace gcsdyn {

struct EngineConfig {
    double reg_epsilon = 1e-8; // spectral cutoff ratio of the tangent solve
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_step = 0.0;          // 0 disables the cap
    std::int64_t record_stride = 1; // keep every record_stride-th snapshot

    void validate() const {
        std::vector<std::string> issues;
        if (!(reg_epsilon > 0.0 && reg_epsilon < 1.0))
            issues.push_back("reg_epsilon must be in (0, 1)");
        if (!(rtol > 0.0)) issues.push_back("rtol must be > 0");
        if (!(atol > 0.0)) issues.push_back("atol must be > 0");
        if (max_step < 0.0) issues.push_back("max_step must be >= 0");
        if (record_stride < 1) issues.push_back("record_stride must be >= 1");
        if (!issues.empty()) throw ValidationError(issues);
    }
};

// Implicit equations of motion in block form, lhs * (dA/dt; dxi/dt) = rhs.
// The unknown vector stacks the N coefficients first, then the xi components
// grouped by mode: (A_1..A_N, xi_11..xi_N1, ..., xi_1M..xi_NM). The -i
// factor is already folded into rhs, so the solve yields time derivatives.
struct TangentSystem {
    MatrixC lhs; // N(M+1) square, Hermitian, blocks [[X, Y], [Y^dag, Z]]
    VectorC rhs;
};

// Propagation abort that carries the ensemble configuration at the failure,
// so a dead run can be inspected or restarted near where it broke.
class EngineFailure : public PropagationError {
public:
    EngineFailure(double t, const std::string& msg, EnsembleSnapshot snap)
        : PropagationError(t, msg), snap_(std::move(snap)) {}

    const EnsembleSnapshot& snapshot() const { return snap_; }

private:
    EnsembleSnapshot snap_;
};

// Optional instrumentation for long runs. keep_going is polled at every
// right-hand-side evaluation; returning false aborts the propagation with an
// EngineFailure, which lets callers enforce wall-clock budgets.
struct EngineHooks {
    std::function<bool(double t, std::int64_t rhs_evals)> keep_going;
};

namespace detail {

// State vector layout shared with TangentSystem: A first, then the xi rows
// grouped by mode.
inline void unpack_state(const VectorC& u, std::int64_t N, int M, VectorC& A, MatrixC& xi) {
    A = u.head(N);
    xi.resize(M, N);
    for (int m = 0; m < M; ++m)
        for (std::int64_t k = 0; k < N; ++k) xi(m, k) = u[N + std::int64_t(m) * N + k];
}

inline EnsembleSnapshot snapshot_from(double t, const VectorC& u, std::int64_t N, int M) {
    EnsembleSnapshot s;
    s.t = t;
    unpack_state(u, N, M, s.A, s.xi);
    return s;
}

} // namespace detail

// Builds the tangent system at time t from coefficients A and the M x N state
// matrix xi. Every block is assembled from its closed form; the lower
// triangle mirrors the upper exactly, so lhs is Hermitian to the last bit.
inline TangentSystem assemble_blocks(const VectorC& A, const MatrixC& xi, std::int64_t S,
                                     const HamiltonianParams& params, double t) {
    const std::int64_t N = A.size();
    const int M = int(xi.rows());
    if (N == 0) throw std::invalid_argument("assemble_blocks: empty ensemble");
    if (xi.cols() != N)
        throw std::invalid_argument("assemble_blocks: coefficient and state counts disagree");
    if (M != params.M || S != params.S)
        throw std::invalid_argument("assemble_blocks: ensemble does not match params");

    const auto require_finite = [](const auto& block, const char* name) {
        if (!block.allFinite())
            throw std::runtime_error(std::string("assemble_blocks: non-finite entries in block ") +
                                     name);
    };

    const GramFamily g = gram_family(xi, S);
    const PairSums ps = pair_sums(xi, params.j0);
    const double Sd = double(S);
    const double S1 = Sd * (Sd - 1.0);
    const double J = params.hopping(t);

    const std::int64_t n = N * (M + 1);
    TangentSystem sys;
    sys.lhs.resize(n, n);
    sys.rhs.resize(n);

    const MatrixC rho = A.conjugate() * A.transpose(); // rho_{kj} = A_k^* A_j

    // top left block: the ensemble Gram matrix
    sys.lhs.topLeftCorner(N, N) = g.X;
    require_finite(g.X, "X");

    // Y^(m)_{kj} = S xi_{km}^* A_j X1_{kj}
    for (int m = 0; m < M; ++m) {
        const MatrixC y = Sd * (xi.row(m).adjoint() * A.transpose()).cwiseProduct(g.X1);
        sys.lhs.block(0, N * (m + 1), N, N) = y;
        sys.lhs.block(N * (m + 1), 0, N, N) = y.adjoint();
    }
    require_finite(sys.lhs.topRightCorner(N, N * M), "Y");

    // Z block (r,c), entry (k,j):
    //   rho_{kj} (S delta_{rc} X1_{kj} + S(S-1) xi_{kc}^* xi_{jr} X2_{kj})
    for (int r = 0; r < M; ++r) {
        for (int c = r; c < M; ++c) {
            MatrixC f = S1 * (xi.row(c).adjoint() * xi.row(r)).cwiseProduct(g.X2);
            if (r == c) f += Sd * g.X1;
            const MatrixC z = rho.cwiseProduct(f);
            sys.lhs.block(N * (r + 1), N * (c + 1), N, N) = z;
            if (c != r) sys.lhs.block(N * (c + 1), N * (r + 1), N, N) = z.adjoint();
        }
    }
    require_finite(sys.lhs.bottomRightCorner(N * M, N * M), "Z");

    // R1_k = dH/dA_k^* = (h A)_k with the same kernel that gives the energy
    const MatrixC h = energy_kernel(g, ps, params, t);
    sys.rhs.head(N) = h * A;
    require_finite(sys.rhs.head(N), "R1");

    // R2 row (m,k) = dH/dxi_km^* = sum_j rho_{kj} [
    //     -J S (xi_{j,m+1} + xi_{j,m-1}) X1 - J S(S-1) hop_{kj} xi_{jm} X2
    //     + U S(S-1) xi_km^* xi_jm^2 X2 + U/2 S(S-1)(S-2) inter_{kj} xi_{jm} X3
    //     + K/2 S (m-j0)^2 xi_{jm} X1 + K/2 S(S-1) trap_{kj} xi_{jm} X2 ]
    // with neighbor terms dropped at the chain ends.
    const MatrixC p1 = rho.cwiseProduct(g.X1);
    const MatrixC rx2 = rho.cwiseProduct(g.X2);
    const MatrixC q = rx2.cwiseProduct(ps.hop);
    MatrixC w3, t2;
    if (params.U != 0.0) w3 = rho.cwiseProduct(g.X3).cwiseProduct(ps.inter);
    if (params.K != 0.0) t2 = rx2.cwiseProduct(ps.trap);
    const double S2 = S1 * (Sd - 2.0);

    for (int m = 0; m < M; ++m) {
        const VectorC xm = xi.row(m).transpose();
        VectorC nb = VectorC::Zero(N);
        if (m + 1 < M) nb += xi.row(m + 1).transpose();
        if (m > 0) nb += xi.row(m - 1).transpose();
        VectorC r2 = (-J * Sd) * (p1 * nb) - (J * S1) * (q * xm);
        if (params.U != 0.0) {
            r2 += (params.U * S1) * (rx2 * xm.cwiseProduct(xm)).cwiseProduct(xi.row(m).adjoint());
            r2 += (0.5 * params.U * S2) * (w3 * xm);
        }
        if (params.K != 0.0) {
            const double wm = (m + 1) - params.j0; // sites count from 1
            r2 += (0.5 * params.K * Sd * wm * wm) * (p1 * xm);
            r2 += (0.5 * params.K * S1) * (t2 * xm);
        }
        sys.rhs.segment(N * (m + 1), N) = r2;
    }
    require_finite(sys.rhs.tail(N * M), "R2");

    sys.rhs *= Complex(0.0, -1.0);
    return sys;
}

inline TangentSystem assemble_blocks(const GCSEnsemble& ens, const HamiltonianParams& params,
                                     double t) {
    ens.validate();
    return assemble_blocks(ens.A, ens.xi_matrix(), ens.S(), params, t);
}

// Minimum-norm time derivatives through the spectrally filtered solve; see
// hermitian_filtered_solve for why the filter must be smooth across the
// cutoff. The discarded-direction count is the convergence diagnostic
// surfaced in trajectory output.
inline PinvSolve regularized_solve(const TangentSystem& sys, const EngineConfig& cfg) {
    try {
        return hermitian_filtered_solve(sys.lhs, sys.rhs, cfg.reg_epsilon);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string("regularized_solve: degenerate ensemble: ") +
                                 e.what());
    }
}

// Integrates the variational equations of motion across t_grid, recording
// norm, energy, populations, the discarded-direction count and the running
// per-state normalization drift at every grid point. Snapshots are kept at
// every record_stride-th grid point plus the final one. Norm drift beyond
// 1e-3 and non-finite states abort with an EngineFailure.
inline Trajectory propagate_gcs(const GCSEnsemble& ens, const HamiltonianParams& params,
                                const std::vector<double>& t_grid, const EngineConfig& cfg,
                                const EngineHooks& hooks = {}) {
    ens.validate();
    params.validate();
    cfg.validate();
    if (ens.modes() != params.M || ens.S() != params.S)
        throw std::invalid_argument("propagate_gcs: ensemble does not match params");
    const double norm0 = ensemble_norm(ens);
    if (norm0 < 1e-6)
        throw std::invalid_argument("propagate_gcs: initial ensemble norm " +
                                    std::to_string(norm0) + " is below 1e-6");

    const std::int64_t N = ens.size();
    const int M = ens.modes();
    const std::int64_t S = ens.S();
    const std::int64_t n = N * std::int64_t(M + 1);

    VectorC u(n);
    u.head(N) = ens.A;
    const MatrixC xi0 = ens.xi_matrix();
    for (int m = 0; m < M; ++m)
        for (std::int64_t k = 0; k < N; ++k) u[N + std::int64_t(m) * N + k] = xi0(m, k);

    OdeOptions ode;
    ode.rtol = cfg.rtol;
    ode.atol = cfg.atol;
    ode.max_step = cfg.max_step;

    std::int64_t rhs_evals = 0;
    std::int64_t last_discarded = 0;
    std::string last_trouble;
    double last_t = t_grid.empty() ? 0.0 : t_grid.front();
    VectorC last_u = u;

    auto f = [&](double t, const VectorC& y) -> VectorC {
        ++rhs_evals;
        last_t = t;
        last_u = y;
        if (hooks.keep_going && !hooks.keep_going(t, rhs_evals))
            throw EngineFailure(t, "aborted by caller hook", detail::snapshot_from(t, y, N, M));
        if (!y.allFinite()) {
            last_trouble = "non-finite state entries";
            return VectorC::Constant(n, Complex(std::numeric_limits<double>::quiet_NaN(), 0.0));
        }
        VectorC A;
        MatrixC xi;
        detail::unpack_state(y, N, M, A, xi);
        try {
            const TangentSystem sys = assemble_blocks(A, xi, S, params, t);
            const PinvSolve sol = regularized_solve(sys, cfg);
            last_discarded = sol.discarded;
            VectorC du = sol.x;
            // Scaling gauge: (A_k, xi_k) -> (A_k c^-S, c xi_k) leaves the
            // state invariant, so (-S A_k, xi_k) is an exact null direction
            // of the tangent map for every k. The solver returns the
            // component orthogonal to it, which ties d|xi_k|^2/dt to the
            // coefficient growth and lets per-state normalization wander.
            // Adding the right real multiple of the null direction pins
            // |xi_k| without changing the physical derivative.
            for (std::int64_t k = 0; k < N; ++k) {
                Complex radial(0.0, 0.0);
                double scale2 = 0.0;
                for (int m = 0; m < M; ++m) {
                    const Complex xkm = xi(m, k);
                    radial += std::conj(xkm) * du[N + std::int64_t(m) * N + k];
                    scale2 += std::norm(xkm);
                }
                if (!(scale2 > 0.0)) continue;
                const double eps_k = -radial.real() / scale2;
                for (int m = 0; m < M; ++m)
                    du[N + std::int64_t(m) * N + k] += eps_k * xi(m, k);
                du[k] -= double(S) * eps_k * A[k];
            }
            return du;
        } catch (const std::runtime_error& e) {
            // overflow inside a trial stage; hand back a poisoned vector so
            // the step controller retries with a smaller step
            last_trouble = e.what();
            return VectorC::Constant(n, Complex(std::numeric_limits<double>::quiet_NaN(), 0.0));
        }
    };

    Trajectory traj;
    traj.times.reserve(t_grid.size());
    traj.norms.reserve(t_grid.size());
    traj.energies.reserve(t_grid.size());
    traj.populations.reserve(t_grid.size());
    traj.discarded.reserve(t_grid.size());
    traj.xi_drift.reserve(t_grid.size());

    double drift_max = 0.0;

    auto observe = [&](std::size_t i, double t, const VectorC& y) {
        if (!y.allFinite())
            throw EngineFailure(t, "non-finite state at sample time",
                                detail::snapshot_from(t, y, N, M));
        VectorC A;
        MatrixC xi;
        detail::unpack_state(y, N, M, A, xi);
        for (std::int64_t k = 0; k < N; ++k)
            drift_max = std::max(drift_max, std::abs(xi.col(k).squaredNorm() - 1.0));

        GCSEnsemble cur;
        cur.A = A;
        cur.basis.resize(std::size_t(N));
        for (std::int64_t k = 0; k < N; ++k) {
            cur.basis[std::size_t(k)].S = S;
            cur.basis[std::size_t(k)].xi = xi.col(k);
        }
        double nrm = 0.0, en = 0.0;
        VectorR pop;
        try {
            nrm = ensemble_norm(cur);
            en = energy_expectation(cur, params, t);
            pop = gcs_populations(cur);
        } catch (const std::runtime_error& e) {
            throw EngineFailure(t, e.what(), detail::snapshot_from(t, y, N, M));
        }
        if (std::abs(nrm - norm0) > 1e-3 * std::max(1.0, std::abs(norm0)))
            throw EngineFailure(t,
                                "ensemble norm drifted by " + std::to_string(std::abs(nrm - norm0)) +
                                    ", the basis set no longer spans the state",
                                detail::snapshot_from(t, y, N, M));

        traj.times.push_back(t);
        traj.norms.push_back(nrm);
        traj.energies.push_back(en);
        traj.populations.push_back(pop);
        traj.discarded.push_back(last_discarded);
        traj.xi_drift.push_back(drift_max);
        if (i % std::size_t(cfg.record_stride) == 0 || i + 1 == t_grid.size())
            traj.snapshots.push_back(detail::snapshot_from(t, y, N, M));
    };

    try {
        integrate_ode(f, u, t_grid, ode, observe);
    } catch (const EngineFailure&) {
        throw;
    } catch (const PropagationError& e) {
        std::string msg = e.reason();
        if (!last_trouble.empty()) msg += " (last assembly failure: " + last_trouble + ")";
        throw EngineFailure(e.failure_time(), msg, detail::snapshot_from(last_t, last_u, N, M));
    }
    return traj;
}

} // namespace gcsdyn
