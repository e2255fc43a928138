// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file exact.hpp
 * @brief Dense-diagonalization oracle: eigen-decomposition, exact time
 *        evolution and exact windowed spectral projection.
 */

#pragma once

#include "cgsp/hamiltonian.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cgsp {

using cplx = std::complex<double>;
using StateVector = Eigen::VectorXcd;

inline constexpr std::size_t kDefaultDenseCap = 4096;
inline constexpr double kEmptyWindowNorm = 1e-13;

class convergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EigenSystem {
    Eigen::VectorXd energies;  ///< ascending
    Eigen::MatrixXd vectors;   ///< columns are orthonormal eigenvectors

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(energies.size()); }

    /// b_i = <psi_i|psi>
    [[nodiscard]] StateVector spectral_weights(const StateVector& psi) const
    {
        if (psi.size() != energies.size()) throw std::invalid_argument("EigenSystem: dimension mismatch");
        return vectors.transpose().cast<cplx>() * psi;
    }
};

inline EigenSystem diagonalize(const SparseHamiltonian& H, std::size_t cap = kDefaultDenseCap)
{
    if (H.dim() > cap) {
        throw capacity_error("diagonalize: dimension " + std::to_string(H.dim()) + " exceeds dense cap " +
                             std::to_string(cap));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(H.dense());
    if (solver.info() != Eigen::Success) throw convergence_error("diagonalize: eigensolver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

namespace detail {

/// Extremal Ritz values from Lanczos with full reorthogonalization.
inline std::pair<double, double> lanczos_bounds(const SparseHamiltonian& H, int max_steps, double tol)
{
    const auto n = static_cast<Eigen::Index>(H.dim());
    const int steps = static_cast<int>(std::min<Eigen::Index>(max_steps, n));
    Eigen::MatrixXd Q(n, steps);
    std::vector<double> alpha;
    std::vector<double> beta;
    // Deterministic, non-symmetric start vector.
    Eigen::VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i) q(i) = 1.0 + 0.37 * std::sin(1.3 * static_cast<double>(i) + 0.1);
    q.normalize();
    double prev_lo = std::numeric_limits<double>::infinity();
    double prev_hi = -prev_lo;
    for (int k = 0; k < steps; ++k) {
        Q.col(k) = q;
        Eigen::VectorXd w = H.apply(q);
        const double a = q.dot(w);
        alpha.push_back(a);
        w -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * w);
        w -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * w);
        const double b = w.norm();

        const auto m = static_cast<Eigen::Index>(alpha.size());
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            T(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues()(0);
        const double hi = es.eigenvalues()(m - 1);
        const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
        if (b < 1e-12 * scale ||
            (std::abs(lo - prev_lo) < tol * scale && std::abs(hi - prev_hi) < tol * scale && k > 4)) {
            return {lo, hi};
        }
        prev_lo = lo;
        prev_hi = hi;
        beta.push_back(b);
        q = w / b;
    }
    if (steps == n) return {prev_lo, prev_hi};
    throw convergence_error("spectrum_bounds: Lanczos did not converge in " + std::to_string(steps) + " steps");
}

}  // namespace detail

/// (E_min, E_max). Dense path below the cap, Lanczos above.
inline std::pair<double, double> spectrum_bounds(const SparseHamiltonian& H, std::size_t dense_cap = kDefaultDenseCap)
{
    if (H.dim() == 0) throw std::invalid_argument("spectrum_bounds: empty Hamiltonian");
    if (H.dim() <= dense_cap) {
        const auto es = diagonalize(H, dense_cap);
        return {es.energies(0), es.energies(es.energies.size() - 1)};
    }
    return detail::lanczos_bounds(H, 400, 1e-12);
}

/// Sum_i b_i exp(-i E_i t) psi_i.
inline StateVector exact_evolve(const EigenSystem& es, const StateVector& psi0, double t)
{
    if (psi0.size() != es.energies.size()) throw std::invalid_argument("exact_evolve: dimension mismatch");
    StateVector b = es.spectral_weights(psi0);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) *= std::exp(cplx(0.0, -es.energies(i) * t));
    return es.vectors.cast<cplx>() * b;
}

/// Arithmetic grid x_0 < ... < x_N with spacing epsilon.
struct SpectralWindows {
    double x0 = 0.0;
    double epsilon = 1.0;
    int count = 1;

    [[nodiscard]] double edge(int i) const noexcept { return x0 + epsilon * i; }
    [[nodiscard]] double center(int i) const noexcept { return x0 + epsilon * (i + 0.5); }

    /// Window of energy E: [x_i, x_{i+1}) with the last window closed; -1 if uncovered.
    [[nodiscard]] int locate(double E) const noexcept
    {
        const double top = edge(count);
        if (E < x0 || E > top) return -1;
        int i = static_cast<int>(std::floor((E - x0) / epsilon));
        if (i >= count) i = count - 1;
        // Guard the floor against rounding across an edge.
        if (i > 0 && E < edge(i)) --i;
        if (i + 1 < count && E >= edge(i + 1)) ++i;
        return i;
    }

    /// N windows covering [lo, hi] strictly, padded by pad_fraction of the range on each side.
    static SpectralWindows covering(double lo, double hi, int n, double pad_fraction = 1e-6)
    {
        if (n < 1) throw std::invalid_argument("SpectralWindows: window count must be >= 1");
        if (!(hi >= lo)) throw std::invalid_argument("SpectralWindows: inverted range");
        const double range = hi - lo;
        const double pad = std::max(range * pad_fraction, 1e-12 * std::max(1.0, std::abs(lo) + std::abs(hi)));
        SpectralWindows w;
        w.x0 = lo - pad;
        w.count = n;
        w.epsilon = (range + 2.0 * pad) / n;
        return w;
    }
};

/// Window count that keeps epsilon t / 2 <= delta for windows padded like SpectralWindows::covering.
inline int windows_for_tolerance(double e_min, double e_max, double t, double delta, double pad_fraction = 1e-6)
{
    if (!(delta > 0.0)) throw std::invalid_argument("windows_for_tolerance: delta must be positive");
    const auto probe = SpectralWindows::covering(e_min, e_max, 1, pad_fraction);
    return std::max(1, static_cast<int>(std::ceil(probe.epsilon * t / (2.0 * delta))));
}

struct ExactProjection {
    std::vector<double> c;                       ///< c_i >= 0
    std::vector<std::optional<StateVector>> theta;  ///< empty for zero-weight windows
    std::vector<double> lambda;                  ///< window centers
    SpectralWindows windows;

    [[nodiscard]] std::size_t size() const noexcept { return c.size(); }

    /// Unnormalized component c_i theta_i (zero vector for empty windows).
    [[nodiscard]] StateVector component(std::size_t i, Eigen::Index dim) const
    {
        if (!theta[i]) return StateVector::Zero(dim);
        return c[i] * *theta[i];
    }

    /// Sum_i c_i exp(-i lambda_i t) theta_i.
    [[nodiscard]] StateVector reconstruct(double t, Eigen::Index dim) const
    {
        StateVector out = StateVector::Zero(dim);
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (!theta[i]) continue;
            out += (c[i] * std::exp(cplx(0.0, -lambda[i] * t))) * *theta[i];
        }
        return out;
    }
};

inline ExactProjection exact_projection(const EigenSystem& es, const StateVector& psi0, const SpectralWindows& windows)
{
    const auto n = static_cast<std::size_t>(windows.count);
    std::vector<StateVector> coeffs(n, StateVector::Zero(es.energies.size()));
    const StateVector b = es.spectral_weights(psi0);
    for (Eigen::Index k = 0; k < es.energies.size(); ++k) {
        const int w = windows.locate(es.energies(k));
        if (w < 0) {
            throw std::domain_error("exact_projection: eigenvalue " + std::to_string(es.energies(k)) +
                                    " not covered by the spectral windows");
        }
        coeffs[static_cast<std::size_t>(w)](k) = b(k);
    }
    ExactProjection out;
    out.windows = windows;
    for (std::size_t i = 0; i < n; ++i) {
        double norm = coeffs[i].norm();
        // Rounding residue from the eigenbasis change is not spectral weight.
        if (norm <= kEmptyWindowNorm) norm = 0.0;
        out.c.push_back(norm);
        out.lambda.push_back(windows.center(static_cast<int>(i)));
        if (norm > 0.0) {
            out.theta.emplace_back(es.vectors.cast<cplx>() * (coeffs[i] / norm));
        } else {
            out.theta.emplace_back(std::nullopt);
        }
    }
    return out;
}

}  // namespace cgsp
