// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file ensemble.hpp
 * @brief The Ensemble concept (Upsilon_0..Upsilon_M as evaluators over
 *        configurations), the autoregressive ensemble, and CgspModel, which
 *        pairs an ensemble with its mixing matrix.
 */

#pragma once

#include "cgsp/dense_ensemble.hpp"
#include "cgsp/mixing.hpp"
#include "cgsp/naqs.hpp"
#include "cgsp/util.hpp"

#include <Eigen/Core>

#include <concepts>
#include <span>
#include <stdexcept>
#include <vector>

namespace cgsp {

// clang-format off
template <typename E>
concept Ensemble = requires(const E& ce, E& e, std::span<const code_t> codes, const Eigen::MatrixXcd& g,
                            std::span<double> grad) {
    { ce.num_components() } -> std::convertible_to<int>;
    { ce.sites() } -> std::convertible_to<int>;
    { ce.layout() } -> std::convertible_to<const ParamLayout&>;
    { ce.parameters() } -> std::convertible_to<std::span<const double>>;
    { e.parameters() } -> std::convertible_to<std::span<double>>;
    { ce.evaluate(codes) } -> std::convertible_to<Eigen::MatrixXcd>;
    ce.accumulate_gradient(codes, g, grad);
};
// clang-format on

inline constexpr std::size_t kEvalChunk = 32;

/// Product-state Upsilon_0 plus M autoregressive components sharing one embedding.
class NaqsEnsemble {
public:
    NaqsEnsemble(SpinConfiguration s0, int trainable, NaqsConfig cfg, std::uint64_t seed)
        : net_(std::move(cfg), s0.sites(), s0.up_count(), trainable, seed), initial_(s0, net_.order())
    {
    }

    [[nodiscard]] int num_components() const noexcept { return net_.components() + 1; }
    [[nodiscard]] int trainable_components() const noexcept { return net_.components(); }
    [[nodiscard]] int sites() const noexcept { return net_.sites(); }
    [[nodiscard]] bool is_complex() const noexcept { return net_.is_complex(); }
    [[nodiscard]] const NaqsNetwork& network() const noexcept { return net_; }
    [[nodiscard]] const ProductState& initial() const noexcept { return initial_; }
    [[nodiscard]] const ParamLayout& layout() const noexcept { return net_.layout(); }
    [[nodiscard]] std::span<const double> parameters() const noexcept { return net_.parameters(); }
    [[nodiscard]] std::span<double> parameters() noexcept { return net_.parameters(); }

    [[nodiscard]] Eigen::MatrixXcd evaluate(std::span<const code_t> codes) const
    {
        const auto B = codes.size();
        Eigen::MatrixXcd out(num_components(), static_cast<Eigen::Index>(B));
        parallel_chunks(chunk_count(B, kEvalChunk), [&](std::size_t c) {
            NaqsTrace tr;
            const auto end = std::min(B, (c + 1) * kEvalChunk);
            for (std::size_t b = c * kEvalChunk; b < end; ++b) {
                const auto col = static_cast<Eigen::Index>(b);
                out(0, col) = initial_.amplitude(codes[b]);
                if (std::popcount(codes[b]) != net_.n_up()) {
                    out.col(col).tail(net_.components()).setZero();
                    continue;
                }
                net_.forward(groups_of(codes[b], net_.sites(), net_.order()), tr);
                out.col(col).tail(net_.components()) = net_.amplitudes(tr);
            }
        });
        return out;
    }

    void accumulate_gradient(std::span<const code_t> codes, const Eigen::MatrixXcd& g, std::span<double> grad) const
    {
        const auto B = codes.size();
        const auto n_chunks = chunk_count(B, kEvalChunk);
        std::vector<std::vector<double>> partial(n_chunks);
        parallel_chunks(n_chunks, [&](std::size_t c) {
            partial[c].assign(grad.size(), 0.0);
            NaqsTrace tr;
            const auto end = std::min(B, (c + 1) * kEvalChunk);
            for (std::size_t b = c * kEvalChunk; b < end; ++b) {
                if (std::popcount(codes[b]) != net_.n_up()) continue;
                const Eigen::VectorXcd gm = g.col(static_cast<Eigen::Index>(b)).tail(net_.components());
                if (gm.isZero(0.0)) continue;
                net_.forward(groups_of(codes[b], net_.sites(), net_.order()), tr);
                net_.backward(tr, gm, partial[c]);
            }
        });
        for (const auto& part : partial)
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += part[i];
    }

    /**
     * Masked raw conditionals at position j for a prefix (entries >= j ignored):
     * column m-1 holds z(h') of trainable component m.
     */
    [[nodiscard]] Eigen::MatrixXcd raw_conditionals(std::span<const std::uint8_t> groups, int j) const
    {
        NaqsTrace tr;
        std::vector<std::uint8_t> prefix(groups.begin(), groups.end());
        for (std::size_t q = static_cast<std::size_t>(j); q < prefix.size(); ++q) prefix[q] = 0;
        net_.forward(prefix, tr, j, j + 1);
        Eigen::MatrixXcd out(kOutcomes, net_.components());
        for (int m = 0; m < net_.components(); ++m) {
            const auto z = net_.masked_raw(tr, m, j);
            for (int h = 0; h < kOutcomes; ++h) out(h, m) = z[static_cast<std::size_t>(h)];
        }
        return out;
    }

private:
    NaqsNetwork net_;
    ProductState initial_;
};

/**
 * Ensemble plus mixing matrix. The flat parameter vector is the ensemble
 * parameters followed by A in row-major order.
 */
template <Ensemble E>
class CgspModel {
public:
    CgspModel(E ensemble, MixingMatrix mixing) : ensemble_(std::move(ensemble)), mixing_(std::move(mixing))
    {
        if (mixing_.components() != ensemble_.num_components())
            throw std::invalid_argument("CgspModel: mixing matrix has " + std::to_string(mixing_.components()) +
                                        " columns, ensemble has " + std::to_string(ensemble_.num_components()) +
                                        " components");
        layout_.append(ensemble_.layout());
        layout_.add("A", {static_cast<std::size_t>(mixing_.windows()), static_cast<std::size_t>(mixing_.components())});
    }

    [[nodiscard]] const E& ensemble() const noexcept { return ensemble_; }
    E& ensemble() noexcept { return ensemble_; }
    [[nodiscard]] const MixingMatrix& mixing() const noexcept { return mixing_; }
    MixingMatrix& mixing() noexcept { return mixing_; }
    [[nodiscard]] int windows() const noexcept { return mixing_.windows(); }
    [[nodiscard]] const ParamLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return layout_.total(); }

    [[nodiscard]] std::vector<double> get_parameters() const
    {
        std::vector<double> out(layout_.total());
        const auto ep = ensemble_.parameters();
        std::copy(ep.begin(), ep.end(), out.begin());
        const auto& A = mixing_.matrix();
        std::size_t k = ep.size();
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            for (Eigen::Index j = 0; j < A.cols(); ++j) out[k++] = A(i, j);
        return out;
    }

    void set_parameters(std::span<const double> theta)
    {
        if (theta.size() != layout_.total()) throw std::invalid_argument("CgspModel: parameter vector size mismatch");
        auto ep = ensemble_.parameters();
        std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(ep.size()), ep.begin());
        auto& A = mixing_.matrix();
        std::size_t k = ep.size();
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = theta[k++];
    }

    /// Phi_i(s) = sum_j C_ij Upsilon_j(s); N x B.
    [[nodiscard]] Eigen::MatrixXcd evaluate_components(std::span<const code_t> codes) const
    {
        return mixing_.coefficients().cast<cplx>() * ensemble_.evaluate(codes);
    }

private:
    E ensemble_;
    MixingMatrix mixing_;
    ParamLayout layout_;
};

/// Phi values for an ensemble and mixing matrix (N x B).
template <Ensemble E>
Eigen::MatrixXcd evaluate_components(const E& ensemble, const MixingMatrix& A, std::span<const code_t> codes)
{
    if (A.components() != ensemble.num_components()) throw std::invalid_argument("evaluate_components: shape mismatch");
    return A.coefficients().cast<cplx>() * ensemble.evaluate(codes);
}

}  // namespace cgsp
