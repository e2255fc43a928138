// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file sampler.hpp
 * @brief Direct ancestral sampling from the softened mixture of the
 *        autoregressive components.
 *
 * With softened conditionals q_j^m(h') = |z_h'|^{2 gamma} / sum |z|^{2 gamma}
 * and importance weights w_m, step j draws h'_j from
 *
 *     rho_j(h') = sum_m w_m Q_{<j}^m q_j^m(h') / sum_m w_m Q_{<j}^m,
 *
 * Q_{<j}^m being the product of the component's earlier softened factors.
 * The product of the rho_j telescopes to P(s) = sum_m w_m Q^m(s) / sum_m w_m.
 * Component 0 is the frozen product state (one-hot conditionals).
 */

#pragma once

#include "cgsp/ensemble.hpp"
#include "cgsp/lattice.hpp"
#include "cgsp/util.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace cgsp {

inline constexpr double kDefaultGamma = 0.5;
inline constexpr std::size_t kDefaultBatch = 4000;

class sampler_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct SamplerConfig {
    double gamma = kDefaultGamma;
    Eigen::VectorXd weights;  ///< w_0..w_M
    std::size_t batch = kDefaultBatch;
    std::uint64_t seed = 0;

    void validate(int components) const
    {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("sampler: gamma must lie in (0, 1]");
        if (weights.size() != components) throw std::invalid_argument("sampler: weight count differs from M + 1");
        if ((weights.array() < 0.0).any() || !weights.allFinite())
            throw std::invalid_argument("sampler: weights must be finite and nonnegative");
        if (!(weights.sum() > 0.0)) throw std::invalid_argument("sampler: weights must not all vanish");
    }
};

struct SampleBatch {
    int sites = 0;
    std::vector<code_t> configs;
    std::vector<double> logp;     ///< exact log P(s)
    std::vector<double> weights;  ///< estimator weights: 1/B for draws, P(s) for an enumerated sector
    bool enumerated = false;

    [[nodiscard]] std::size_t size() const noexcept { return configs.size(); }
    friend bool operator==(const SampleBatch&, const SampleBatch&) = default;
};

using OutcomeLogProbs = std::array<double, kOutcomes>;

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log q(h') for one component from masked raw amplitudes.
inline OutcomeLogProbs softened_log_probs(const Eigen::Ref<const Eigen::VectorXcd>& z, double gamma)
{
    OutcomeLogProbs lq;
    double mx = kNegInf;
    for (int h = 0; h < kOutcomes; ++h) {
        const double a = std::abs(z(h));
        lq[static_cast<std::size_t>(h)] = a > 0.0 ? 2.0 * gamma * std::log(a) : kNegInf;
        mx = std::max(mx, lq[static_cast<std::size_t>(h)]);
    }
    if (mx == kNegInf) return lq;
    double s = 0.0;
    for (double v : lq) s += v == kNegInf ? 0.0 : std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (double& v : lq)
        if (v != kNegInf) v -= lse;
    return lq;
}

/// Softened log q for all components (row m = component m, column h').
inline std::vector<OutcomeLogProbs> component_log_probs(const NaqsEnsemble& ens, std::span<const std::uint8_t> groups,
                                                        int j, double gamma)
{
    const int M = ens.trainable_components();
    std::vector<OutcomeLogProbs> lq(static_cast<std::size_t>(M + 1));
    lq[0].fill(kNegInf);
    lq[0][static_cast<std::size_t>(ens.initial().outcome(j))] = 0.0;
    const Eigen::MatrixXcd z = ens.raw_conditionals(groups, j);
    for (int m = 0; m < M; ++m) lq[static_cast<std::size_t>(m + 1)] = softened_log_probs(z.col(m), gamma);
    return lq;
}

/// rho_j from per-component cumulative log weights and softened conditionals.
inline std::array<double, kOutcomes> mixture_step(const std::vector<double>& log_weight,
                                                  const std::vector<OutcomeLogProbs>& lq)
{
    double mx = kNegInf;
    for (double v : log_weight) mx = std::max(mx, v);
    if (mx == kNegInf) throw sampler_error("sampler: every component has zero weight on this prefix");
    std::array<double, kOutcomes> rho{};
    double total = 0.0;
    for (std::size_t m = 0; m < log_weight.size(); ++m) {
        if (log_weight[m] == kNegInf) continue;
        const double r = std::exp(log_weight[m] - mx);
        total += r;
        for (int h = 0; h < kOutcomes; ++h) {
            const double v = lq[m][static_cast<std::size_t>(h)];
            if (v != kNegInf) rho[static_cast<std::size_t>(h)] += r * std::exp(v);
        }
    }
    for (double& v : rho) v /= total;
    return rho;
}

inline std::vector<double> initial_log_weights(const Eigen::VectorXd& w)
{
    std::vector<double> lw(static_cast<std::size_t>(w.size()));
    for (Eigen::Index m = 0; m < w.size(); ++m) lw[static_cast<std::size_t>(m)] = w(m) > 0.0 ? std::log(w(m)) : kNegInf;
    return lw;
}

inline std::uint64_t prefix_key(const std::vector<std::uint8_t>& groups, int j)
{
    std::uint64_t key = 0;
    for (int q = 0; q < j; ++q) key = (key << 4U) | groups[static_cast<std::size_t>(q)];
    return key;
}

}  // namespace detail

/**
 * Step distribution rho_j(. | prefix) for a prefix of j groups; also the
 * cumulative log weights reached by that prefix.
 */
inline std::array<double, kOutcomes> step_distribution(const NaqsEnsemble& ens, const SamplerConfig& cfg,
                                                       std::span<const std::uint8_t> prefix, int j)
{
    cfg.validate(ens.num_components());
    const int G = ens.network().n_groups();
    std::vector<std::uint8_t> groups(static_cast<std::size_t>(G), 0);
    std::copy(prefix.begin(), prefix.begin() + j, groups.begin());
    auto lw = detail::initial_log_weights(cfg.weights);
    for (int q = 0; q < j; ++q) {
        const auto lq = detail::component_log_probs(ens, groups, q, cfg.gamma);
        for (std::size_t m = 0; m < lw.size(); ++m) lw[m] += lq[m][groups[static_cast<std::size_t>(q)]];
    }
    return detail::mixture_step(lw, detail::component_log_probs(ens, groups, j, cfg.gamma));
}

/// Draws cfg.batch configurations by l/4 ancestral steps from all-zero placeholders.
inline SampleBatch draw(const NaqsEnsemble& ens, const SamplerConfig& cfg)
{
    cfg.validate(ens.num_components());
    const int G = ens.network().n_groups();
    const int sites = ens.sites();
    const auto B = cfg.batch;
    std::vector<std::vector<std::uint8_t>> groups(B, std::vector<std::uint8_t>(static_cast<std::size_t>(G), 0));
    std::vector<std::vector<double>> lw(B, detail::initial_log_weights(cfg.weights));
    std::vector<double> logp(B, 0.0);

    for (int j = 0; j < G; ++j) {
        // Conditionals depend on the prefix only; evaluate each distinct prefix once.
        std::map<std::uint64_t, std::vector<std::size_t>> by_prefix;
        for (std::size_t b = 0; b < B; ++b) by_prefix[detail::prefix_key(groups[b], j)].push_back(b);
        std::vector<const std::vector<std::size_t>*> buckets;
        buckets.reserve(by_prefix.size());
        for (const auto& kv : by_prefix) buckets.push_back(&kv.second);

        parallel_chunks(buckets.size(), [&](std::size_t u) {
            const auto& members = *buckets[u];
            const std::size_t rep = members.front();
            const auto lq = detail::component_log_probs(ens, groups[rep], j, cfg.gamma);
            const auto rho = detail::mixture_step(lw[rep], lq);
            for (std::size_t b : members) {
                const double x = counter_uniform(cfg.seed, b, static_cast<std::uint64_t>(j));
                int pick = -1;
                double acc = 0.0;
                for (int h = 0; h < kOutcomes; ++h) {
                    const double r = rho[static_cast<std::size_t>(h)];
                    if (r <= 0.0) continue;
                    acc += r;
                    pick = h;
                    if (x < acc) break;
                }
                if (pick < 0) throw sampler_error("sampler: all outcomes masked");
                const auto hu = static_cast<std::size_t>(pick);
                groups[b][static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(pick);
                logp[b] += std::log(rho[hu]);
                for (std::size_t m = 0; m < lw[b].size(); ++m) lw[b][m] += lq[m][hu];
            }
        });
    }

    SampleBatch out;
    out.sites = sites;
    out.configs.resize(B);
    out.logp = std::move(logp);
    out.weights.assign(B, B > 0 ? 1.0 / static_cast<double>(B) : 0.0);
    const auto& order = ens.network().order();
    for (std::size_t b = 0; b < B; ++b) {
        const auto s = ungroup_configuration(GroupedConfiguration{groups[b]}, order);
        if (s.up_count() != ens.network().n_up()) throw sampler_error("sampler: drew a configuration outside the sector");
        out.configs[b] = s.code();
    }
    return out;
}

/**
 * P(s) over the sector from the mixture form sum_m w_m Q^m(s) / sum_m w_m,
 * aligned with basis order.
 */
inline Eigen::VectorXd exact_mixture(const NaqsEnsemble& ens, const SamplerConfig& cfg, const SectorBasis& basis,
                                     std::size_t cap = kDefaultDenseCap)
{
    cfg.validate(ens.num_components());
    if (basis.size() > cap) throw capacity_error("exact_mixture: sector dimension exceeds cap");
    if (basis.sites() != ens.sites() || basis.n_up() != ens.network().n_up())
        throw std::invalid_argument("exact_mixture: basis does not match the ensemble sector");
    const int M = ens.trainable_components();
    const int G = ens.network().n_groups();
    const double wsum = cfg.weights.sum();
    Eigen::VectorXd P(static_cast<Eigen::Index>(basis.size()));
    parallel_chunks(chunk_count(basis.size(), kEvalChunk), [&](std::size_t c) {
        NaqsTrace tr;
        const auto end = std::min(basis.size(), (c + 1) * kEvalChunk);
        for (std::size_t i = c * kEvalChunk; i < end; ++i) {
            const code_t code = basis.code(i);
            const auto g = groups_of(code, ens.sites(), ens.network().order());
            ens.network().forward(g, tr);
            double p = cfg.weights(0) * ens.initial().amplitude(code);
            for (int m = 0; m < M; ++m) {
                if (cfg.weights(m + 1) <= 0.0) continue;
                double logq = 0.0;
                for (int j = 0; j < G && logq != detail::kNegInf; ++j) {
                    const auto z = ens.network().masked_raw(tr, m, j);
                    Eigen::VectorXcd zv(kOutcomes);
                    for (int h = 0; h < kOutcomes; ++h) zv(h) = z[static_cast<std::size_t>(h)];
                    logq += detail::softened_log_probs(zv, cfg.gamma)[g[static_cast<std::size_t>(j)]];
                }
                if (logq != detail::kNegInf) p += cfg.weights(m + 1) * std::exp(logq);
            }
            P(static_cast<Eigen::Index>(i)) = p / wsum;
        }
    });
    return P;
}

/// log P(s) along the ancestral rho_j chain for given configurations.
inline std::vector<double> chain_log_prob(const NaqsEnsemble& ens, const SamplerConfig& cfg, std::span<const code_t> codes)
{
    cfg.validate(ens.num_components());
    const int G = ens.network().n_groups();
    std::vector<double> out(codes.size());
    parallel_chunks(chunk_count(codes.size(), kEvalChunk), [&](std::size_t c) {
        const auto end = std::min(codes.size(), (c + 1) * kEvalChunk);
        for (std::size_t b = c * kEvalChunk; b < end; ++b) {
            if (std::popcount(codes[b]) != ens.network().n_up()) {
                out[b] = detail::kNegInf;
                continue;
            }
            const auto g = groups_of(codes[b], ens.sites(), ens.network().order());
            auto lw = detail::initial_log_weights(cfg.weights);
            double lp = 0.0;
            for (int j = 0; j < G; ++j) {
                const auto lq = detail::component_log_probs(ens, g, j, cfg.gamma);
                const auto rho = detail::mixture_step(lw, lq);
                const auto h = g[static_cast<std::size_t>(j)];
                if (rho[h] <= 0.0) {
                    lp = detail::kNegInf;
                    break;
                }
                lp += std::log(rho[h]);
                for (std::size_t m = 0; m < lw.size(); ++m) lw[m] += lq[m][h];
            }
            out[b] = lp;
        }
    });
    return out;
}

/// The whole sector as a weighted batch (weights = P); states with P = 0 are omitted.
inline SampleBatch enumerated_batch(const NaqsEnsemble& ens, const SamplerConfig& cfg, const SectorBasis& basis)
{
    const Eigen::VectorXd P = exact_mixture(ens, cfg, basis);
    SampleBatch out;
    out.sites = basis.sites();
    out.enumerated = true;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const double p = P(static_cast<Eigen::Index>(i));
        if (p <= 0.0) continue;
        out.configs.push_back(basis.code(i));
        out.logp.push_back(std::log(p));
        out.weights.push_back(p);
    }
    return out;
}

}  // namespace cgsp
