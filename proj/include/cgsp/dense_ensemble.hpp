// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file dense_ensemble.hpp
 * @brief Verification ansatz: each trainable Upsilon_j is a free vector over
 *        the sector basis. Upsilon_0 is frozen.
 */

#pragma once

#include "cgsp/exact.hpp"
#include "cgsp/lattice.hpp"
#include "cgsp/util.hpp"

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace cgsp {

class DenseEnsemble {
public:
    DenseEnsemble(std::shared_ptr<const SectorBasis> basis, StateVector upsilon0, int trainable, bool complex_amplitudes,
                  std::uint64_t seed)
        : basis_(std::move(basis)), upsilon0_(std::move(upsilon0)), M_(trainable), complex_(complex_amplitudes)
    {
        if (!basis_) throw std::invalid_argument("DenseEnsemble: null basis");
        if (static_cast<std::size_t>(upsilon0_.size()) != basis_->size())
            throw std::invalid_argument("DenseEnsemble: Upsilon_0 length differs from sector dimension");
        if (std::abs(upsilon0_.norm() - 1.0) > 1e-10) throw std::invalid_argument("DenseEnsemble: Upsilon_0 must be normalized");
        if (M_ < 0) throw std::invalid_argument("DenseEnsemble: negative component count");
        const auto D = basis_->size();
        layout_.add("upsilon.real", {static_cast<std::size_t>(M_), D});
        if (complex_) layout_.add("upsilon.imag", {static_cast<std::size_t>(M_), D});
        params_.resize(layout_.total());
        CounterRng rng(seed, 0xde75e);
        const double scale = 1.0 / std::sqrt(static_cast<double>(D) * (complex_ ? 2.0 : 1.0));
        for (auto& p : params_) p = scale * rng.normal();
    }

    [[nodiscard]] int num_components() const noexcept { return M_ + 1; }
    [[nodiscard]] int trainable_components() const noexcept { return M_; }
    [[nodiscard]] int sites() const noexcept { return basis_->sites(); }
    [[nodiscard]] bool is_complex() const noexcept { return complex_; }
    [[nodiscard]] const SectorBasis& basis() const noexcept { return *basis_; }
    [[nodiscard]] const StateVector& upsilon0() const noexcept { return upsilon0_; }

    [[nodiscard]] const ParamLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] std::span<const double> parameters() const noexcept { return params_; }
    [[nodiscard]] std::span<double> parameters() noexcept { return params_; }

    /// Upsilon_j(s) for each code; row j, column b. Out-of-sector codes give 0.
    [[nodiscard]] Eigen::MatrixXcd evaluate(std::span<const code_t> codes) const
    {
        const auto D = basis_->size();
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(M_ + 1, static_cast<Eigen::Index>(codes.size()));
        for (std::size_t b = 0; b < codes.size(); ++b) {
            const auto idx = basis_->index_of(codes[b]);
            if (idx == SectorBasis::npos) continue;
            const auto col = static_cast<Eigen::Index>(b);
            out(0, col) = upsilon0_(static_cast<Eigen::Index>(idx));
            for (int j = 0; j < M_; ++j) {
                const double re = params_[static_cast<std::size_t>(j) * D + idx];
                const double im = complex_ ? params_[(static_cast<std::size_t>(M_ + j)) * D + idx] : 0.0;
                out(j + 1, col) = cplx(re, im);
            }
        }
        return out;
    }

    /**
     * Adds dL/dtheta to grad given G(j, b) = dL/dRe Upsilon_j + i dL/dIm Upsilon_j
     * at codes[b]. Row 0 is frozen and ignored.
     */
    void accumulate_gradient(std::span<const code_t> codes, const Eigen::MatrixXcd& g, std::span<double> grad) const
    {
        const auto D = basis_->size();
        for (std::size_t b = 0; b < codes.size(); ++b) {
            const auto idx = basis_->index_of(codes[b]);
            if (idx == SectorBasis::npos) continue;
            for (int j = 0; j < M_; ++j) {
                const cplx v = g(j + 1, static_cast<Eigen::Index>(b));
                grad[static_cast<std::size_t>(j) * D + idx] += v.real();
                if (complex_) grad[static_cast<std::size_t>(M_ + j) * D + idx] += v.imag();
            }
        }
    }

private:
    std::shared_ptr<const SectorBasis> basis_;
    StateVector upsilon0_;
    int M_;
    bool complex_;
    ParamLayout layout_;
    std::vector<double> params_;
};

/// Amplitude-1 product state on s0 as a sector vector.
inline StateVector product_state_vector(const SectorBasis& basis, const SpinConfiguration& s0)
{
    const auto idx = basis.index_of(s0);
    if (idx == SectorBasis::npos) throw std::invalid_argument("product_state_vector: configuration not in sector");
    StateVector v = StateVector::Zero(static_cast<Eigen::Index>(basis.size()));
    v(static_cast<Eigen::Index>(idx)) = 1.0;
    return v;
}

}  // namespace cgsp
