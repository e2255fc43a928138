// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file dynamics.hpp
 * @brief Phase-evolved reconstruction phi(t) = sum_i exp(-i lambda_i t) Phi_i,
 *        local observables, and the short-time error estimates.
 */

#pragma once

#include "cgsp/ensemble.hpp"
#include "cgsp/exact.hpp"
#include "cgsp/hamiltonian.hpp"
#include "cgsp/lattice.hpp"
#include "cgsp/util.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cgsp {

inline constexpr double kDropFraction = 1e-12;

/// Materialized components on the sector basis.
struct SpectralDecomposition {
    std::vector<StateVector> phi;
    std::vector<double> lambda;  ///< NaN for dropped components
    std::vector<double> c2;
    std::vector<double> sigma2;
    std::vector<bool> kept;

    [[nodiscard]] std::size_t size() const noexcept { return phi.size(); }
    [[nodiscard]] Eigen::Index dim() const { return phi.empty() ? 0 : phi.front().size(); }

    [[nodiscard]] double total_c2() const
    {
        double s = 0.0;
        for (double v : c2) s += v;
        return s;
    }

    /// |sigma|^2 = sum c_i^2 sigma_i^2 / sum c_i^2 over kept components.
    [[nodiscard]] double weighted_sigma2() const
    {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (!kept[i]) continue;
            num += c2[i] * sigma2[i];
            den += c2[i];
        }
        return den > 0.0 ? num / den : 0.0;
    }

    /// sum_{i != j} |<Phi_i|Phi_j>|, a bound on the norm drift of phi(t).
    [[nodiscard]] double overlap_bound() const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = 0; j < size(); ++j)
                if (i != j && kept[i] && kept[j]) s += std::abs(phi[i].dot(phi[j]));
        return s;
    }

    /// Rayleigh quotients and variances of each Phi_i under H.
    static SpectralDecomposition from_components(const SparseHamiltonian& H, std::vector<StateVector> components,
                                                 double drop_fraction = kDropFraction)
    {
        SpectralDecomposition d;
        d.phi = std::move(components);
        double total = 0.0;
        for (const auto& v : d.phi) {
            if (static_cast<std::size_t>(v.size()) != H.dim())
                throw std::invalid_argument("SpectralDecomposition: component length differs from H");
            d.c2.push_back(v.squaredNorm());
            total += d.c2.back();
        }
        for (std::size_t i = 0; i < d.phi.size(); ++i) {
            const bool keep = d.c2[i] > 0.0 && d.c2[i] >= drop_fraction * total;
            d.kept.push_back(keep);
            if (!keep) {
                d.lambda.push_back(std::numeric_limits<double>::quiet_NaN());
                d.sigma2.push_back(0.0);
                continue;
            }
            const StateVector hv = H.apply(d.phi[i]);
            const double lam = d.phi[i].dot(hv).real() / d.c2[i];
            d.lambda.push_back(lam);
            d.sigma2.push_back(std::max(0.0, hv.squaredNorm() / d.c2[i] - lam * lam));
        }
        return d;
    }

    static SpectralDecomposition from_projection(const SparseHamiltonian& H, const ExactProjection& proj)
    {
        std::vector<StateVector> comps;
        const auto dim = static_cast<Eigen::Index>(H.dim());
        for (std::size_t i = 0; i < proj.size(); ++i) comps.push_back(proj.component(i, dim));
        return from_components(H, std::move(comps));
    }
};

/// Phi_i as sector vectors from a trained model.
template <Ensemble E>
std::vector<StateVector> materialize(const CgspModel<E>& model, const SectorBasis& basis)
{
    const Eigen::MatrixXcd phi = model.evaluate_components(basis.codes());
    std::vector<StateVector> out;
    for (Eigen::Index i = 0; i < phi.rows(); ++i) out.emplace_back(phi.row(i).transpose());
    return out;
}

inline StateVector reconstruct(const SpectralDecomposition& d, double t)
{
    if (d.size() == 0) throw std::invalid_argument("reconstruct: empty decomposition");
    StateVector out = StateVector::Zero(d.dim());
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d.kept[i]) out += std::exp(cplx(0.0, -d.lambda[i] * t)) * d.phi[i];
    return out;
}

struct Profile {
    std::vector<double> values;
    double norm = 1.0;  ///< norm of the state before renormalization
};

/// <sigma^z_k> for k = 0..l-1 on the renormalized state.
inline Profile magnetization(const StateVector& psi, const SectorBasis& basis)
{
    const double n2 = psi.squaredNorm();
    if (!(n2 > 0.0)) throw std::invalid_argument("magnetization: zero state");
    Profile p;
    p.norm = std::sqrt(n2);
    p.values.assign(static_cast<std::size_t>(basis.sites()), 0.0);
    for (std::size_t r = 0; r < basis.size(); ++r) {
        const double w = std::norm(psi(static_cast<Eigen::Index>(r))) / n2;
        if (w == 0.0) continue;
        const auto s = basis.state(r);
        for (int k = 0; k < basis.sites(); ++k) p.values[static_cast<std::size_t>(k)] += w * s.spin(k);
    }
    return p;
}

/// Partner site kbar = l/2 + 1 - k (1-based, wrapped into 1..l).
inline int partner_site(int k, int sites)
{
    int kb = sites / 2 + 1 - k;
    kb = ((kb - 1) % sites + sites) % sites + 1;
    return kb;
}

/// <sigma^z_a sigma^z_b> - <sigma^z_a><sigma^z_b> for 1-based sites.
inline double connected_zz(const StateVector& psi, const SectorBasis& basis, int a, int b)
{
    const double n2 = psi.squaredNorm();
    if (!(n2 > 0.0)) throw std::invalid_argument("connected_zz: zero state");
    double za = 0.0, zb = 0.0, zab = 0.0;
    for (std::size_t r = 0; r < basis.size(); ++r) {
        const double w = std::norm(psi(static_cast<Eigen::Index>(r))) / n2;
        if (w == 0.0) continue;
        const auto s = basis.state(r);
        const int sa = s.spin(a - 1), sb = s.spin(b - 1);
        za += w * sa;
        zb += w * sb;
        zab += w * sa * sb;
    }
    return zab - za * zb;
}

/// Connected <sigma^z_k sigma^z_kbar>, averaged with the mirrored site l+1-k (k is 1-based).
inline double connected_correlator(const StateVector& psi, const SectorBasis& basis, int k)
{
    const int l = basis.sites();
    if (k < 1 || k > l) throw std::out_of_range("connected_correlator: site out of range");
    const int km = l + 1 - k;
    return 0.5 * (connected_zz(psi, basis, k, partner_site(k, l)) + connected_zz(psi, basis, km, partner_site(km, l)));
}

inline std::vector<double> correlator_profile(const StateVector& psi, const SectorBasis& basis)
{
    std::vector<double> out;
    for (int k = 1; k <= basis.sites(); ++k) out.push_back(connected_correlator(psi, basis, k));
    return out;
}

/// K_ij = <(H - lambda_i) Theta_i | (H - lambda_j) Theta_j> with normalized Theta.
struct KMatrix {
    Eigen::MatrixXcd K;
    Eigen::VectorXd c;
    std::vector<bool> zeroed;

    /// t^2 c^dagger K c.
    [[nodiscard]] double error_estimate(double t) const
    {
        const Eigen::VectorXcd cc = c.cast<cplx>();
        return t * t * std::max(0.0, cc.dot(K * cc).real());
    }
};

inline KMatrix k_matrix(const SpectralDecomposition& d, const SparseHamiltonian& H)
{
    const auto n = static_cast<Eigen::Index>(d.size());
    KMatrix km;
    km.K = Eigen::MatrixXcd::Zero(n, n);
    km.c = Eigen::VectorXd::Zero(n);
    std::vector<StateVector> r(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        km.zeroed.push_back(!d.kept[i]);
        if (!d.kept[i]) continue;
        km.c(static_cast<Eigen::Index>(i)) = std::sqrt(d.c2[i]);
        const StateVector theta = d.phi[i] / std::sqrt(d.c2[i]);
        r[i] = H.apply(theta) - d.lambda[i] * theta;
    }
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < d.size(); ++j)
            if (d.kept[i] && d.kept[j]) km.K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[i].dot(r[j]);
    return km;
}

/// T_c = sqrt(0.5) / |sigma|; +infinity when |sigma| = 0.
inline double coherence_time(double sigma)
{
    sigma = std::abs(sigma);
    if (sigma == 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(0.5) / sigma;
}

inline double coherence_time(const SpectralDecomposition& d) { return coherence_time(std::sqrt(d.weighted_sigma2())); }

/// |<a|b>|^2 / (|a|^2 |b|^2).
inline double fidelity(const StateVector& a, const StateVector& b)
{
    const double na = a.squaredNorm(), nb = b.squaredNorm();
    if (!(na > 0.0) || !(nb > 0.0)) throw std::invalid_argument("fidelity: zero state");
    return std::norm(a.dot(b)) / (na * nb);
}

/// Evaluates fn(k) for k = 0..n-1 concurrently, results in order.
template <typename T, typename F>
std::vector<T> over_grid(std::size_t n, F&& fn)
{
    std::vector<T> out(n);
    parallel_chunks(n, [&](std::size_t k) { out[k] = fn(k); });
    return out;
}

inline std::vector<double> time_grid(double t0, double t1, double dt)
{
    if (!(dt > 0.0) || t1 < t0) throw std::invalid_argument("time_grid: need dt > 0 and t1 >= t0");
    std::vector<double> ts;
    const auto steps = static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-9));
    for (std::size_t k = 0; k <= steps; ++k) ts.push_back(t0 + dt * static_cast<double>(k));
    return ts;
}

}  // namespace cgsp
