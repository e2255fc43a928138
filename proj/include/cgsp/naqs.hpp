// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file naqs.hpp
 * @brief Grouped autoregressive wave functions sharing one causal embedding.
 *
 * Forward pass for a configuration s (l sites, G = l/4 groups):
 *
 *  1. Pre-processing. s is reordered by the spin order mu and packed into
 *     4-bit groups h_1..h_G. The network input at position j encodes group
 *     j-1 as four +-1 values; position 0 is the all-zero placeholder.
 *  2. Embedding. Causal dilated 1D convolutions (left zero padding, tanh).
 *     The outputs of every layer but the first are concatenated along the
 *     channel axis and rescaled by a 1x1 convolution (tanh). Output at
 *     position j depends on groups < j only.
 *  3. Projection. Per (component, position) two-layer heads map the
 *     embedding to 16 real (or 16 complex) raw amplitudes z(h').
 *  4. Post-processing. Outcomes that cannot complete a configuration with
 *     n_up up spins are zeroed, then z is divided by its L2 norm, giving the
 *     locally normalized conditional amplitude.
 *
 * Upsilon_m(s) is the product of the selected conditional amplitudes.
 */

#pragma once

#include "cgsp/exact.hpp"
#include "cgsp/lattice.hpp"
#include "cgsp/util.hpp"

#include <Eigen/Core>

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgsp {

inline constexpr int kGroupBits = 4;
inline constexpr int kOutcomes = 16;

struct NaqsConfig {
    std::vector<int> dilations{1, 1, 2};
    std::vector<int> kernels{2, 2, 2};
    std::vector<int> channels{32, 32, 32};
    int merge_channels = 32;
    int head_hidden = 16;
    bool complex_amplitudes = false;
    std::vector<int> spin_order;  ///< 0-based permutation; empty means identity
    double head_init_scale = 0.1;

    void validate(int sites) const
    {
        require_groupable(sites);
        if (dilations.empty()) throw std::invalid_argument("naqs: at least one convolution layer is required");
        if (dilations.size() != kernels.size() || dilations.size() != channels.size())
            throw std::invalid_argument("naqs: dilations, kernels and channels must have equal length");
        for (std::size_t i = 0; i < dilations.size(); ++i) {
            if (dilations[i] < 1) throw std::invalid_argument("naqs: dilation must be >= 1");
            if (kernels[i] < 1) throw std::invalid_argument("naqs: kernel must be >= 1");
            if (channels[i] < 1) throw std::invalid_argument("naqs: channels must be >= 1");
        }
        if (merge_channels < 1 || head_hidden < 1) throw std::invalid_argument("naqs: merge/head widths must be >= 1");
        if (!spin_order.empty() && static_cast<int>(spin_order.size()) != sites)
            throw std::invalid_argument("naqs: spin_order length differs from l");
    }
};

/// Outcome h' at group position j is legal iff the running up count can still end at n_up.
constexpr bool outcome_legal(int prefix_up, int outcome, int n_up, int position, int n_groups) noexcept
{
    const int up = prefix_up + std::popcount(static_cast<unsigned>(outcome));
    const int remaining = kGroupBits * (n_groups - 1 - position);
    return up <= n_up && n_up - up <= remaining;
}

/// Packed groups of a code under a spin order.
inline std::vector<std::uint8_t> groups_of(code_t code, int sites, const SpinOrder& order)
{
    return group_configuration(SpinConfiguration(sites, code), order).groups;
}

/// Frozen product state usable in evaluation and sampling modes.
class ProductState {
public:
    ProductState(SpinConfiguration s0, const SpinOrder& order) : s0_(s0), groups_(group_configuration(s0, order).groups) {}

    [[nodiscard]] const SpinConfiguration& configuration() const noexcept { return s0_; }
    [[nodiscard]] double amplitude(code_t code) const noexcept { return code == s0_.code() ? 1.0 : 0.0; }
    /// One-hot conditional at position j, independent of the prefix.
    [[nodiscard]] int outcome(int position) const { return groups_.at(static_cast<std::size_t>(position)); }

private:
    SpinConfiguration s0_;
    std::vector<std::uint8_t> groups_;
};

/// Intermediate values of one forward pass, kept for the backward pass.
struct NaqsTrace {
    std::vector<std::uint8_t> groups;
    Eigen::MatrixXd input;              ///< 4 x G
    std::vector<Eigen::MatrixXd> conv;  ///< C_l x G after tanh
    Eigen::MatrixXd cat;                ///< C_cat x G
    Eigen::MatrixXd embed;              ///< C_e x G after tanh
    Eigen::MatrixXd hidden;             ///< H x (M G), column m G + j
    Eigen::MatrixXd out;                ///< O x (M G), raw head output
};

class NaqsNetwork {
public:
    NaqsNetwork(NaqsConfig cfg, int sites, int n_up, int components, std::uint64_t seed)
        : cfg_(std::move(cfg)), sites_(sites), n_up_(n_up), G_(sites / kGroupBits), M_(components)
    {
        cfg_.validate(sites);
        if (n_up < 0 || n_up > sites) throw std::invalid_argument("naqs: n_up out of range");
        if (M_ < 1) throw std::invalid_argument("naqs: at least one trainable component is required");
        order_ = cfg_.spin_order.empty() ? SpinOrder::identity(sites) : SpinOrder(cfg_.spin_order);
        O_ = cfg_.complex_amplitudes ? 2 * kOutcomes : kOutcomes;

        const auto L = cfg_.dilations.size();
        int c_in = kGroupBits;
        for (std::size_t l = 0; l < L; ++l) {
            const auto K = static_cast<std::size_t>(cfg_.kernels[l]);
            const auto co = static_cast<std::size_t>(cfg_.channels[l]);
            conv_w_.push_back(layout_.add("conv" + std::to_string(l) + ".weight", {K, static_cast<std::size_t>(c_in), co}));
            conv_b_.push_back(layout_.add("conv" + std::to_string(l) + ".bias", {co}));
            c_in = cfg_.channels[l];
        }
        cat_first_ = L > 1 ? 1 : 0;
        C_cat_ = 0;
        for (std::size_t l = cat_first_; l < L; ++l) C_cat_ += cfg_.channels[l];
        const auto Ce = static_cast<std::size_t>(cfg_.merge_channels);
        const auto H = static_cast<std::size_t>(cfg_.head_hidden);
        const auto Ms = static_cast<std::size_t>(M_);
        const auto Gs = static_cast<std::size_t>(G_);
        const auto Os = static_cast<std::size_t>(O_);
        merge_w_ = layout_.add("merge.weight", {static_cast<std::size_t>(C_cat_), Ce});
        merge_b_ = layout_.add("merge.bias", {Ce});
        head1_w_ = layout_.add("head1.weight", {Ms, Gs, Ce, H});
        head1_b_ = layout_.add("head1.bias", {Ms, Gs, H});
        head2_w_ = layout_.add("head2.weight", {Ms, Gs, H, Os});
        head2_b_ = layout_.add("head2.bias", {Ms, Gs, Os});
        params_.assign(layout_.total(), 0.0);
        initialize(seed);
    }

    [[nodiscard]] const NaqsConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] int sites() const noexcept { return sites_; }
    [[nodiscard]] int n_up() const noexcept { return n_up_; }
    [[nodiscard]] int n_groups() const noexcept { return G_; }
    [[nodiscard]] int components() const noexcept { return M_; }
    [[nodiscard]] bool is_complex() const noexcept { return cfg_.complex_amplitudes; }
    [[nodiscard]] const SpinOrder& order() const noexcept { return order_; }
    [[nodiscard]] const ParamLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] std::span<const double> parameters() const noexcept { return params_; }
    [[nodiscard]] std::span<double> parameters() noexcept { return params_; }

    /// Runs the embedding and, for positions in [first, last), the heads.
    void forward(std::span<const std::uint8_t> groups, NaqsTrace& tr, int first = 0, int last = -1) const
    {
        if (static_cast<int>(groups.size()) != G_) throw std::invalid_argument("naqs: wrong group count");
        if (last < 0) last = G_;
        const double* p = params_.data();
        tr.groups.assign(groups.begin(), groups.end());
        tr.input = Eigen::MatrixXd::Zero(kGroupBits, G_);
        for (int j = 1; j < G_; ++j) {
            const unsigned h = groups[static_cast<std::size_t>(j - 1)];
            if (h > 15U) throw std::invalid_argument("naqs: illegal group value");
            for (int b = 0; b < kGroupBits; ++b) tr.input(b, j) = ((h >> static_cast<unsigned>(3 - b)) & 1U) ? 1.0 : -1.0;
        }
        if (groups.back() > 15U) throw std::invalid_argument("naqs: illegal group value");

        const auto L = cfg_.dilations.size();
        tr.conv.resize(L);
        const Eigen::MatrixXd* in = &tr.input;
        for (std::size_t l = 0; l < L; ++l) {
            const int co = cfg_.channels[l];
            const auto ci = static_cast<int>(in->rows());
            Eigen::MatrixXd pre = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(p + conv_b_[l], co)).replicate(1, G_);
            for (int k = 0; k < cfg_.kernels[l]; ++k) {
                const int shift = k * cfg_.dilations[l];
                if (shift >= G_) break;
                Eigen::Map<const Eigen::MatrixXd> W(p + conv_w_[l] + static_cast<std::size_t>(k * ci * co), co, ci);
                pre.rightCols(G_ - shift).noalias() += W * in->leftCols(G_ - shift);
            }
            tr.conv[l] = pre.array().tanh().matrix();
            in = &tr.conv[l];
        }

        tr.cat.resize(C_cat_, G_);
        int row = 0;
        for (std::size_t l = cat_first_; l < L; ++l) {
            tr.cat.middleRows(row, cfg_.channels[l]) = tr.conv[l];
            row += cfg_.channels[l];
        }
        const int Ce = cfg_.merge_channels;
        Eigen::Map<const Eigen::MatrixXd> Wm(p + merge_w_, Ce, C_cat_);
        Eigen::Map<const Eigen::VectorXd> bm(p + merge_b_, Ce);
        tr.embed = ((Wm * tr.cat).colwise() + bm).array().tanh().matrix();

        const int H = cfg_.head_hidden;
        tr.hidden = Eigen::MatrixXd::Zero(H, M_ * G_);
        tr.out = Eigen::MatrixXd::Zero(O_, M_ * G_);
        for (int m = 0; m < M_; ++m) {
            for (int j = first; j < last; ++j) {
                const int col = m * G_ + j;
                Eigen::Map<const Eigen::MatrixXd> W1(p + head1_w_ + static_cast<std::size_t>(col * H * Ce), H, Ce);
                Eigen::Map<const Eigen::VectorXd> b1(p + head1_b_ + static_cast<std::size_t>(col * H), H);
                Eigen::Map<const Eigen::MatrixXd> W2(p + head2_w_ + static_cast<std::size_t>(col * O_ * H), O_, H);
                Eigen::Map<const Eigen::VectorXd> b2(p + head2_b_ + static_cast<std::size_t>(col * O_), O_);
                tr.hidden.col(col) = (W1 * tr.embed.col(j) + b1).array().tanh().matrix();
                tr.out.col(col) = W2 * tr.hidden.col(col) + b2;
            }
        }
    }

    /// Masked raw amplitudes z(h') of component m at position j (unnormalized).
    [[nodiscard]] std::array<cplx, kOutcomes> masked_raw(const NaqsTrace& tr, int m, int j) const
    {
        int prefix_up = 0;
        for (int p = 0; p < j; ++p) prefix_up += std::popcount(static_cast<unsigned>(tr.groups[static_cast<std::size_t>(p)]));
        std::array<cplx, kOutcomes> z{};
        const auto col = tr.out.col(m * G_ + j);
        for (int h = 0; h < kOutcomes; ++h) {
            if (!outcome_legal(prefix_up, h, n_up_, j, G_)) continue;
            z[static_cast<std::size_t>(h)] = cfg_.complex_amplitudes ? cplx(col(h), col(kOutcomes + h)) : cplx(col(h), 0.0);
        }
        return z;
    }

    /// Locally normalized conditional amplitudes of component m at position j.
    [[nodiscard]] std::array<cplx, kOutcomes> conditional(const NaqsTrace& tr, int m, int j) const
    {
        auto z = masked_raw(tr, m, j);
        double n2 = 0.0;
        for (const auto& v : z) n2 += std::norm(v);
        if (n2 <= 0.0) return std::array<cplx, kOutcomes>{};
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& v : z) v *= inv;
        return z;
    }

    /// Upsilon_m for every trainable component, in order.
    [[nodiscard]] Eigen::VectorXcd amplitudes(const NaqsTrace& tr) const
    {
        Eigen::VectorXcd out(M_);
        for (int m = 0; m < M_; ++m) {
            cplx prod = 1.0;
            for (int j = 0; j < G_ && prod != cplx(0.0); ++j) {
                const auto a = conditional(tr, m, j);
                prod *= a[tr.groups[static_cast<std::size_t>(j)]];
            }
            out(m) = prod;
        }
        return out;
    }

    /**
     * Adds dL/dtheta to grad given g(m) = dL/dRe Upsilon_m + i dL/dIm Upsilon_m
     * for the configuration recorded in tr (a full forward pass).
     */
    void backward(const NaqsTrace& tr, const Eigen::VectorXcd& g, std::span<double> grad) const
    {
        const double* p = params_.data();
        double* gp = grad.data();
        const int H = cfg_.head_hidden;
        const int Ce = cfg_.merge_channels;
        Eigen::MatrixXd g_embed = Eigen::MatrixXd::Zero(Ce, G_);
        bool any = false;

        // An illegal selected outcome makes Upsilon identically zero: no gradient.
        for (int j = 0; j < G_; ++j)
            if (!legal_outcome_at(tr, j, tr.groups[static_cast<std::size_t>(j)])) return;

        for (int m = 0; m < M_; ++m) {
            if (g(m) == cplx(0.0)) continue;
            std::vector<std::array<cplx, kOutcomes>> z(static_cast<std::size_t>(G_));
            std::vector<double> norms(static_cast<std::size_t>(G_));
            std::vector<cplx> a(static_cast<std::size_t>(G_));
            bool degenerate = false;
            for (int j = 0; j < G_; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                z[ju] = masked_raw(tr, m, j);
                double n2 = 0.0;
                for (const auto& v : z[ju]) n2 += std::norm(v);
                norms[ju] = std::sqrt(n2);
                if (n2 <= 0.0) degenerate = true;
                else a[ju] = z[ju][tr.groups[ju]] / norms[ju];
            }
            if (degenerate) continue;
            for (int j = 0; j < G_; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                const int h = tr.groups[ju];
                cplx rest = 1.0;
                for (int q = 0; q < G_; ++q)
                    if (q != j) rest *= a[static_cast<std::size_t>(q)];
                if (rest == cplx(0.0)) continue;
                // a = z_h / |z|:  dL/dz_k = delta_kh ga / n - Re(conj(ga) z_h) z_k / n^3
                const cplx ga = g(m) * std::conj(rest);
                const double n = norms[ju];
                const double proj = (std::conj(ga) * z[ju][static_cast<std::size_t>(h)]).real() / (n * n * n);
                const int col = m * G_ + j;
                Eigen::VectorXd g_out = Eigen::VectorXd::Zero(O_);
                for (int k = 0; k < kOutcomes; ++k) {
                    cplx gz = -proj * z[ju][static_cast<std::size_t>(k)];
                    if (k == h) gz += ga / n;
                    g_out(k) = gz.real();
                    if (cfg_.complex_amplitudes) g_out(kOutcomes + k) = gz.imag();
                }
                // Masked outcomes are constants.
                int prefix_up = 0;
                for (int q = 0; q < j; ++q) prefix_up += std::popcount(static_cast<unsigned>(tr.groups[static_cast<std::size_t>(q)]));
                for (int k = 0; k < kOutcomes; ++k) {
                    if (outcome_legal(prefix_up, k, n_up_, j, G_)) continue;
                    g_out(k) = 0.0;
                    if (cfg_.complex_amplitudes) g_out(kOutcomes + k) = 0.0;
                }
                // head2
                const auto hid = tr.hidden.col(col);
                Eigen::Map<Eigen::MatrixXd> gW2(gp + head2_w_ + static_cast<std::size_t>(col * O_ * H), O_, H);
                Eigen::Map<Eigen::VectorXd> gb2(gp + head2_b_ + static_cast<std::size_t>(col * O_), O_);
                gW2.noalias() += g_out * hid.transpose();
                gb2 += g_out;
                Eigen::Map<const Eigen::MatrixXd> W2(p + head2_w_ + static_cast<std::size_t>(col * O_ * H), O_, H);
                const Eigen::VectorXd g_pre1 = ((W2.transpose() * g_out).array() * (1.0 - hid.array().square())).matrix();
                // head1
                Eigen::Map<Eigen::MatrixXd> gW1(gp + head1_w_ + static_cast<std::size_t>(col * H * Ce), H, Ce);
                Eigen::Map<Eigen::VectorXd> gb1(gp + head1_b_ + static_cast<std::size_t>(col * H), H);
                gW1.noalias() += g_pre1 * tr.embed.col(j).transpose();
                gb1 += g_pre1;
                Eigen::Map<const Eigen::MatrixXd> W1(p + head1_w_ + static_cast<std::size_t>(col * H * Ce), H, Ce);
                g_embed.col(j).noalias() += W1.transpose() * g_pre1;
                any = true;
            }
        }
        if (!any) return;

        // merge
        const Eigen::MatrixXd g_pre_m = (g_embed.array() * (1.0 - tr.embed.array().square())).matrix();
        Eigen::Map<Eigen::MatrixXd> gWm(gp + merge_w_, Ce, C_cat_);
        Eigen::Map<Eigen::VectorXd> gbm(gp + merge_b_, Ce);
        gWm.noalias() += g_pre_m * tr.cat.transpose();
        gbm += g_pre_m.rowwise().sum();
        Eigen::Map<const Eigen::MatrixXd> Wm(p + merge_w_, Ce, C_cat_);
        const Eigen::MatrixXd g_cat = Wm.transpose() * g_pre_m;

        // convolutions, last to first
        const auto L = cfg_.dilations.size();
        std::vector<Eigen::MatrixXd> g_conv(L);
        for (std::size_t l = 0; l < L; ++l) g_conv[l] = Eigen::MatrixXd::Zero(cfg_.channels[l], G_);
        int row = 0;
        for (std::size_t l = cat_first_; l < L; ++l) {
            g_conv[l] += g_cat.middleRows(row, cfg_.channels[l]);
            row += cfg_.channels[l];
        }
        for (std::size_t li = L; li-- > 0;) {
            const Eigen::MatrixXd& in = li == 0 ? tr.input : tr.conv[li - 1];
            const auto ci = static_cast<int>(in.rows());
            const int co = cfg_.channels[li];
            const Eigen::MatrixXd g_pre = (g_conv[li].array() * (1.0 - tr.conv[li].array().square())).matrix();
            Eigen::Map<Eigen::VectorXd>(gp + conv_b_[li], co) += g_pre.rowwise().sum();
            Eigen::MatrixXd g_in;
            if (li > 0) g_in = Eigen::MatrixXd::Zero(ci, G_);
            for (int k = 0; k < cfg_.kernels[li]; ++k) {
                const int shift = k * cfg_.dilations[li];
                if (shift >= G_) break;
                const auto off = conv_w_[li] + static_cast<std::size_t>(k * ci * co);
                Eigen::Map<Eigen::MatrixXd> gW(gp + off, co, ci);
                gW.noalias() += g_pre.rightCols(G_ - shift) * in.leftCols(G_ - shift).transpose();
                if (li > 0) {
                    Eigen::Map<const Eigen::MatrixXd> W(p + off, co, ci);
                    g_in.leftCols(G_ - shift).noalias() += W.transpose() * g_pre.rightCols(G_ - shift);
                }
            }
            if (li > 0) g_conv[li - 1] += g_in;
        }
    }

private:
    [[nodiscard]] bool legal_outcome_at(const NaqsTrace& tr, int j, int h) const noexcept
    {
        int prefix_up = 0;
        for (int q = 0; q < j; ++q) prefix_up += std::popcount(static_cast<unsigned>(tr.groups[static_cast<std::size_t>(q)]));
        return outcome_legal(prefix_up, h, n_up_, j, G_);
    }

    void initialize(std::uint64_t seed)
    {
        CounterRng rng(seed, 0x9a95);
        auto fill = [&](const std::string& name, double bound) {
            const auto& b = layout_.find(name);
            for (std::size_t i = 0; i < b.size; ++i) params_[b.offset + i] = rng.uniform(-bound, bound);
        };
        int c_in = kGroupBits;
        for (std::size_t l = 0; l < cfg_.dilations.size(); ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * cfg_.kernels[l]));
            fill("conv" + std::to_string(l) + ".weight", bound);
            fill("conv" + std::to_string(l) + ".bias", bound);
            c_in = cfg_.channels[l];
        }
        fill("merge.weight", 1.0 / std::sqrt(static_cast<double>(C_cat_)));
        fill("merge.bias", 1.0 / std::sqrt(static_cast<double>(C_cat_)));
        const double b1 = 1.0 / std::sqrt(static_cast<double>(cfg_.merge_channels));
        fill("head1.weight", b1);
        fill("head1.bias", b1);
        // Near-uniform conditionals: constant bias plus a small random readout.
        fill("head2.weight", cfg_.head_init_scale / std::sqrt(static_cast<double>(cfg_.head_hidden)));
        const auto& hb = layout_.find("head2.bias");
        for (std::size_t i = 0; i < hb.size; ++i) {
            const bool imag_part = cfg_.complex_amplitudes && (i % static_cast<std::size_t>(O_)) >= kOutcomes;
            params_[hb.offset + i] = imag_part ? 0.0 : 1.0;
        }
    }

    NaqsConfig cfg_;
    int sites_;
    int n_up_;
    int G_;
    int M_;
    int O_ = kOutcomes;
    SpinOrder order_;
    ParamLayout layout_;
    std::vector<double> params_;
    std::vector<std::size_t> conv_w_, conv_b_;
    std::size_t cat_first_ = 0;
    int C_cat_ = 0;
    std::size_t merge_w_ = 0, merge_b_ = 0, head1_w_ = 0, head1_b_ = 0, head2_w_ = 0, head2_b_ = 0;
};

}  // namespace cgsp
