// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file breakdown.hpp
 * @brief Hierarchical decomposition: heavy components are re-decomposed as
 *        new initial states, and the leaves drive the reconstruction.
 *
 * Labels follow the tree: the root is "o", its children "1_i", their
 * children "1_i_j", and so on.
 */

#pragma once

#include "cgsp/dense_ensemble.hpp"
#include "cgsp/dynamics.hpp"
#include "cgsp/ensemble.hpp"
#include "cgsp/exact.hpp"
#include "cgsp/mixing.hpp"
#include "cgsp/trainer.hpp"
#include "cgsp/util.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgsp {

struct TreeNode {
    std::string label;
    int parent = -1;
    int depth = 0;  ///< 0 for the root
    double c2 = 0.0;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double sigma2 = 0.0;
    StateVector phi;  ///< absolute component c Theta
    std::vector<int> children;
    std::string warning;
    std::optional<double> final_loss;

    [[nodiscard]] bool is_leaf() const noexcept { return children.empty(); }
};

struct CgspTree {
    std::vector<TreeNode> nodes;
    double threshold = 0.0;
    int depth = 0;

    [[nodiscard]] std::vector<int> leaves() const
    {
        std::vector<int> out;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (i > 0 && nodes[i].is_leaf()) out.push_back(static_cast<int>(i));
        return out;
    }

    /// Leaves carrying weight (c^2 > 0).
    [[nodiscard]] std::size_t nonempty_leaf_count() const
    {
        std::size_t n = 0;
        for (int i : leaves())
            if (nodes[static_cast<std::size_t>(i)].c2 > 0.0) ++n;
        return n;
    }

    /// sum c^2 sigma^2 / sum c^2 over leaves.
    [[nodiscard]] double weighted_sigma2() const
    {
        double num = 0.0, den = 0.0;
        for (int i : leaves()) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            if (!(n.c2 > 0.0)) continue;
            num += n.c2 * n.sigma2;
            den += n.c2;
        }
        return den > 0.0 ? num / den : 0.0;
    }

    [[nodiscard]] int find(const std::string& label) const
    {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].label == label) return static_cast<int>(i);
        return -1;
    }
};

inline std::string child_label(const std::string& parent, std::size_t i)
{
    return (parent == "o" ? std::string("1") : parent) + "_" + std::to_string(i);
}

inline std::uint64_t node_seed(const std::string& label, std::uint64_t seed)
{
    return hash_combine(hash_string(label), seed);
}

enum class BreakdownBackend { exact, dense };

struct BreakdownConfig {
    int depth = 1;            ///< refinement levels below the root decomposition
    double threshold = 0.1;   ///< on c^2
    std::vector<int> windows{8};  ///< N per level; the last entry repeats
    BreakdownBackend backend = BreakdownBackend::exact;
    std::uint64_t seed = 0;
    // Trained backend only.
    int trainable = 4;
    double lambda_margin = 0.0;
    TrainConfig train;
    std::size_t dense_cap = kDefaultDenseCap;

    [[nodiscard]] int windows_at(int level) const
    {
        if (windows.empty()) throw std::invalid_argument("BreakdownConfig: no window counts");
        const auto i = std::min<std::size_t>(static_cast<std::size_t>(level), windows.size() - 1);
        return windows[i];
    }

    void validate() const
    {
        if (depth < 0) throw std::invalid_argument("breakdown.depth must be >= 0");
        if (!(threshold >= 0.0)) throw std::invalid_argument("breakdown.threshold must be >= 0");
        for (int n : windows)
            if (n < 1) throw std::invalid_argument("breakdown window counts must be >= 1");
        if (trainable < 0) throw std::invalid_argument("breakdown trainable component count must be >= 0");
    }
};

namespace detail {

/// Relative weight below which an eigen-component counts as rounding residue.
inline constexpr double kSupportTolerance = 1e-10;

/**
 * Exact windowed split of phi over its own spectral support; residue outside
 * the support goes to the nearest end window so the split sums to phi.
 */
inline std::vector<StateVector> exact_split(const EigenSystem& es, const StateVector& phi, int n)
{
    const StateVector b = es.spectral_weights(phi);
    const double scale = b.cwiseAbs().maxCoeff();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        if (std::abs(b(k)) <= kSupportTolerance * scale) continue;
        lo = std::min(lo, es.energies(k));
        hi = std::max(hi, es.energies(k));
    }
    if (!(hi >= lo)) return {};
    const auto w = SpectralWindows::covering(lo, hi, n);
    std::vector<StateVector> coeffs(static_cast<std::size_t>(n), StateVector::Zero(b.size()));
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        int i = w.locate(es.energies(k));
        if (i < 0) i = es.energies(k) < lo ? 0 : n - 1;
        coeffs[static_cast<std::size_t>(i)](k) = b(k);
    }
    std::vector<StateVector> out;
    for (auto& c : coeffs) out.emplace_back(es.vectors.cast<cplx>() * c);
    return out;
}

/// Spectral extent of phi, for deciding whether a split can do anything.
inline double support_width(const EigenSystem& es, const StateVector& phi)
{
    const StateVector b = es.spectral_weights(phi);
    const double scale = b.cwiseAbs().maxCoeff();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        if (std::abs(b(k)) <= kSupportTolerance * scale) continue;
        lo = std::min(lo, es.energies(k));
        hi = std::max(hi, es.energies(k));
    }
    return hi >= lo ? hi - lo : 0.0;
}

struct SplitResult {
    std::vector<StateVector> children;
    std::string warning;
    std::optional<double> final_loss;
};

inline SplitResult trained_split(const Problem& prob, const TreeNode& node, int n, const BreakdownConfig& cfg,
                                 std::pair<double, double> bounds)
{
    SplitResult out;
    const double norm = std::sqrt(node.c2);
    const StateVector u0 = node.phi / node.phi.norm();
    const auto seed = node_seed(node.label, cfg.seed);
    // The node's energy band: its Rayleigh quotient +- 2 sigma, inside the spectrum.
    double lo = bounds.first, hi = bounds.second;
    if (node.depth > 0) {
        const double s = std::sqrt(node.sigma2);
        lo = std::max(lo, node.lambda - 2.0 * s);
        hi = std::min(hi, node.lambda + 2.0 * s);
        if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(node.lambda)))) return out;
    }
    const LambdaGrid grid = LambdaGrid::from_bounds(lo, hi, n, cfg.lambda_margin);
    CounterRng rng(seed, 0xa);
    CgspModel<DenseEnsemble> model(DenseEnsemble(prob.basis, u0, cfg.trainable, false, seed),
                                   MixingMatrix::random(n, cfg.trainable, rng));
    TrainConfig tc = cfg.train;
    tc.mode = LossMode::exact;
    tc.seed = seed;
    TrainState state;
    try {
        train(model, grid, prob, tc, state);
    } catch (const training_error& e) {
        out.warning = e.what();
        return out;
    }
    out.final_loss = exact_loss(model, grid, prob).loss;
    for (auto& v : materialize(model, *prob.basis)) out.children.push_back(norm * v);
    return out;
}

inline void set_moments(const SparseHamiltonian& H, TreeNode& node)
{
    node.c2 = node.phi.squaredNorm();
    if (!(node.c2 > 0.0)) return;
    const StateVector hv = H.apply(node.phi);
    node.lambda = node.phi.dot(hv).real() / node.c2;
    node.sigma2 = std::max(0.0, hv.squaredNorm() / node.c2 - node.lambda * node.lambda);
}

}  // namespace detail

/**
 * Decomposes psi0, then re-decomposes every component with c^2 >= threshold,
 * level by level, up to cfg.depth refinement levels. Nodes at the same level
 * are processed concurrently and appended in label order.
 */
inline CgspTree run_breakdown(const Problem& prob, const StateVector& psi0, const BreakdownConfig& cfg)
{
    cfg.validate();
    if (static_cast<std::size_t>(psi0.size()) != prob.basis->size())
        throw std::invalid_argument("run_breakdown: initial state length differs from sector dimension");
    std::optional<EigenSystem> es;
    if (cfg.backend == BreakdownBackend::exact) es = diagonalize(prob.H, cfg.dense_cap);
    const auto bounds = cfg.backend == BreakdownBackend::exact
                            ? std::pair{es->energies.minCoeff(), es->energies.maxCoeff()}
                            : spectrum_bounds(prob.H, cfg.dense_cap);

    CgspTree tree;
    tree.threshold = cfg.threshold;
    tree.depth = cfg.depth;
    TreeNode root;
    root.label = "o";
    root.phi = psi0;
    detail::set_moments(prob.H, root);
    tree.nodes.push_back(std::move(root));

    std::vector<int> frontier{0};
    for (int level = 0; level <= cfg.depth && !frontier.empty(); ++level) {
        const int n = cfg.windows_at(level);
        std::vector<detail::SplitResult> results(frontier.size());
        parallel_chunks(frontier.size(), [&](std::size_t f) {
            const auto& node = tree.nodes[static_cast<std::size_t>(frontier[f])];
            if (cfg.backend == BreakdownBackend::exact) {
                if (level > 0 && detail::support_width(*es, node.phi) == 0.0) return;
                results[f].children = detail::exact_split(*es, node.phi, n);
            } else {
                results[f] = detail::trained_split(prob, node, n, cfg, bounds);
            }
        });
        std::vector<int> next;
        for (std::size_t f = 0; f < frontier.size(); ++f) {
            const auto p = static_cast<std::size_t>(frontier[f]);
            tree.nodes[p].warning = results[f].warning;
            tree.nodes[p].final_loss = results[f].final_loss;
            for (std::size_t i = 0; i < results[f].children.size(); ++i) {
                TreeNode child;
                child.label = child_label(tree.nodes[p].label, i);
                child.parent = static_cast<int>(p);
                child.depth = level + 1;
                child.phi = std::move(results[f].children[i]);
                detail::set_moments(prob.H, child);
                const int idx = static_cast<int>(tree.nodes.size());
                tree.nodes[p].children.push_back(idx);
                if (level < cfg.depth && child.c2 > 0.0 && child.c2 >= cfg.threshold) next.push_back(idx);
                tree.nodes.push_back(std::move(child));
            }
        }
        frontier = std::move(next);
    }
    return tree;
}

/// sum over leaves of exp(-i lambda t) c Theta.
inline StateVector leaf_reconstruct(const CgspTree& tree, double t)
{
    if (tree.nodes.empty()) throw std::invalid_argument("leaf_reconstruct: empty tree");
    const auto leaves = tree.leaves();
    if (leaves.empty()) return tree.nodes.front().phi;
    StateVector out = StateVector::Zero(tree.nodes.front().phi.size());
    for (int i : leaves) {
        const auto& n = tree.nodes[static_cast<std::size_t>(i)];
        if (!(n.c2 > 0.0)) continue;
        if (!std::isfinite(n.lambda)) throw std::invalid_argument("leaf_reconstruct: leaf " + n.label + " has no energy");
        out += std::exp(cplx(0.0, -n.lambda * t)) * n.phi;
    }
    return out;
}

}  // namespace cgsp
