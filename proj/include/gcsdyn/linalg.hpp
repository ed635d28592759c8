#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#if defined(GCSDYN_USE_LAPACKE)
#include <lapacke.h>
#endif

#include "gcsdyn/types.hpp"

namespace gcsdyn {

struct HermitianEig {
    VectorR values; // ascending
    MatrixC vectors;
};

// Full eigendecomposition of a Hermitian matrix. Uses LAPACKE's divide and
// conquer zheevd when available (several times faster than Eigen at the
// sizes the engine hits), Eigen's solver otherwise. Takes the argument by
// value because zheevd overwrites its input with the eigenvectors.
inline HermitianEig hermitian_eig(MatrixC a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("hermitian_eig: matrix not square");
    const auto n = a.rows();
    HermitianEig out;
    out.values.resize(n);
    if (n == 0) {
        out.vectors.resize(0, 0);
        return out;
    }
#if defined(GCSDYN_USE_LAPACKE)
    const lapack_int info = LAPACKE_zheevd(
        LAPACK_COL_MAJOR, 'V', 'L', (lapack_int)n,
        reinterpret_cast<lapack_complex_double*>(a.data()), (lapack_int)n, out.values.data());
    if (info == 0) {
        out.vectors = std::move(a);
        return out;
    }
    // fall through to Eigen on the rare convergence failure
#endif
    Eigen::SelfAdjointEigenSolver<MatrixC> es(a);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eig: eigendecomposition failed to converge");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    return out;
}

struct PinvSolve {
    VectorC x;
    std::int64_t discarded = 0; // spectral directions dropped by the cutoff
    double sigma_max = 0.0;
};

// Minimum-norm least-squares solution of a x = b for Hermitian a: spectral
// decomposition, drop every direction whose |eigenvalue| falls below
// eps_rel * max|eigenvalue|, invert the rest. Throws when the entire
// spectrum sits below the cutoff (numerically zero matrix).
inline PinvSolve hermitian_pinv_solve(const MatrixC& a, const VectorC& b, double eps_rel) {
    if (a.rows() != a.cols()) throw std::invalid_argument("hermitian_pinv_solve: matrix not square");
    if (a.rows() != b.size()) throw std::invalid_argument("hermitian_pinv_solve: size mismatch");
    if (!(eps_rel > 0.0) || !(eps_rel < 1.0))
        throw std::invalid_argument("hermitian_pinv_solve: eps_rel must lie in (0,1)");

    const HermitianEig eig = hermitian_eig(a);
    const auto n = b.size();
    PinvSolve out;
    out.sigma_max = eig.values.size() ? eig.values.cwiseAbs().maxCoeff() : 0.0;
    if (!(out.sigma_max > 0.0))
        throw std::runtime_error("hermitian_pinv_solve: matrix is numerically zero");

    const double cutoff = eps_rel * out.sigma_max;
    VectorC proj = eig.vectors.adjoint() * b;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(eig.values[i]) < cutoff) {
            proj[i] = Complex(0.0, 0.0);
            ++out.discarded;
        } else {
            proj[i] /= eig.values[i];
        }
    }
    out.x = eig.vectors * proj;
    return out;
}

// Like hermitian_pinv_solve, but with the hard cutoff replaced by the smooth
// filter lambda / (lambda^2 + eps^2), eps = eps_rel * max|eigenvalue|. Away
// from eps this matches 1/lambda to (eps/lambda)^2; below eps it fades to
// zero instead of jumping. The engine needs the smooth version: during
// propagation Gram eigenvalues drift across the threshold (a basis state
// whose coefficient grows from zero brings its tangent directions up from
// exactly null), and a hard cutoff makes the derivative discontinuous right
// where the eigenvalue hovers, which stalls adaptive stepping. Directions
// below eps still count as discarded; they are suppressed by 50% or more.
inline PinvSolve hermitian_filtered_solve(const MatrixC& a, const VectorC& b, double eps_rel) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("hermitian_filtered_solve: matrix not square");
    if (a.rows() != b.size()) throw std::invalid_argument("hermitian_filtered_solve: size mismatch");
    if (!(eps_rel > 0.0) || !(eps_rel < 1.0))
        throw std::invalid_argument("hermitian_filtered_solve: eps_rel must lie in (0,1)");

    const HermitianEig eig = hermitian_eig(a);
    const auto n = b.size();
    PinvSolve out;
    out.sigma_max = eig.values.size() ? eig.values.cwiseAbs().maxCoeff() : 0.0;
    if (!(out.sigma_max > 0.0))
        throw std::runtime_error("hermitian_filtered_solve: matrix is numerically zero");

    const double eps = eps_rel * out.sigma_max;
    VectorC proj = eig.vectors.adjoint() * b;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lam = eig.values[i];
        if (std::abs(lam) < eps) ++out.discarded;
        proj[i] *= lam / (lam * lam + eps * eps);
    }
    out.x = eig.vectors * proj;
    return out;
}

} // namespace gcsdyn
