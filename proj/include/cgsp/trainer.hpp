// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file trainer.hpp
 * @brief Unconstrained CGSP loss
 *
 *     L = (2(N-1) / (Lambda_{N-1} - Lambda_0))^2 sum_i <Phi_i|(H - Lambda_i)^2|Phi_i>
 *
 * with exact and importance-sampled estimators, reverse-mode gradients
 * through the mixing matrix and the ensemble, Adam, and the training loop.
 */

#pragma once

#include "cgsp/ensemble.hpp"
#include "cgsp/exact.hpp"
#include "cgsp/hamiltonian.hpp"
#include "cgsp/sampler.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

namespace cgsp {

class training_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sector Hamiltonian bundle shared by the estimators.
struct Problem {
    XxzParams xxz;
    std::shared_ptr<const SectorBasis> basis;
    SparseHamiltonian H;

    static Problem build(const XxzParams& p, int n_up, std::size_t sector_cap = kDefaultSectorCap)
    {
        p.validate();
        auto basis = std::make_shared<const SectorBasis>(p.sites, n_up, sector_cap);
        SparseHamiltonian H = build_xxz(p, *basis);
        return {p, std::move(basis), std::move(H)};
    }
};

/// Arithmetic Lambda_0..Lambda_{N-1}.
struct LambdaGrid {
    Eigen::VectorXd Lambda;
    double epsilon = 0.0;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(Lambda.size()); }

    /// (2(N-1)/(Lambda_{N-1}-Lambda_0))^2, defined as 1 for a single bin.
    [[nodiscard]] double prefactor() const
    {
        const auto N = Lambda.size();
        if (N <= 1) return 1.0;
        const double span = Lambda(N - 1) - Lambda(0);
        const double f = 2.0 * static_cast<double>(N - 1) / span;
        return f * f;
    }

    static LambdaGrid from_bounds(double e_min, double e_max, int N, double margin = 0.0)
    {
        if (N < 1) throw std::invalid_argument("LambdaGrid: N must be >= 1");
        if (!(e_max >= e_min)) throw std::invalid_argument("LambdaGrid: inverted bounds");
        if (margin < 0.0) throw std::invalid_argument("LambdaGrid: margin must be nonnegative");
        const double range = e_max - e_min;
        const double lo = e_min - margin * range;
        const double hi = e_max + margin * range;
        LambdaGrid g;
        g.Lambda.resize(N);
        if (N == 1) {
            g.Lambda(0) = 0.5 * (lo + hi);
            g.epsilon = hi - lo;
            return g;
        }
        g.epsilon = (hi - lo) / (N - 1);
        for (int i = 0; i < N; ++i) g.Lambda(i) = lo + g.epsilon * i;
        g.Lambda(N - 1) = hi;
        return g;
    }
};

inline LambdaGrid build_lambda_grid(const SparseHamiltonian& H, int N, double margin = 0.0,
                                    std::size_t dense_cap = kDefaultDenseCap)
{
    const auto [lo, hi] = spectrum_bounds(H, dense_cap);
    return LambdaGrid::from_bounds(lo, hi, N, margin);
}

struct LossResult {
    double loss = 0.0;
    double stderr_ = 0.0;
    std::vector<double> c2;  ///< per-bin <Phi_i|Phi_i> (exact or estimated)
    std::vector<double> grad;

    [[nodiscard]] double sum_c2() const
    {
        double s = 0.0;
        for (double v : c2) s += v;
        return s;
    }
};

namespace detail {

/// Pulls dL/dPhi back through Phi = C Upsilon into the model gradient.
template <Ensemble E>
void backprop_components(const CgspModel<E>& model, std::span<const code_t> codes, const Eigen::MatrixXcd& upsilon,
                         const Eigen::MatrixXd& C, const Eigen::MatrixXcd& g_phi, std::vector<double>& grad)
{
    grad.assign(model.parameter_count(), 0.0);
    const Eigen::MatrixXcd g_ups = C.transpose().cast<cplx>() * g_phi;
    const Eigen::MatrixXd dC = (g_phi.conjugate() * upsilon.transpose()).real();
    const Eigen::MatrixXd dA = MixingMatrix::pullback(dC);
    const auto n_ens = model.ensemble().parameters().size();
    model.ensemble().accumulate_gradient(codes, g_ups, std::span<double>(grad.data(), n_ens));
    std::size_t k = n_ens;
    for (Eigen::Index i = 0; i < dA.rows(); ++i)
        for (Eigen::Index j = 0; j < dA.cols(); ++j) grad[k++] = dA(i, j);
}

inline void check_finite(const std::vector<double>& grad, const ParamLayout& layout)
{
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i])) throw training_error("non-finite gradient at parameter " + layout.owner(i));
}

}  // namespace detail

/// Exact sums over the sector: <Phi_i|(H-Lambda_i)^2|Phi_i> = ||(H - Lambda_i) Phi_i||^2.
template <Ensemble E>
LossResult exact_loss(const CgspModel<E>& model, const LambdaGrid& grid, const Problem& prob, bool with_grad = false,
                      std::size_t cap = kDefaultDenseCap)
{
    if (prob.basis->size() > cap) throw capacity_error("exact_loss: sector dimension exceeds cap");
    if (grid.size() != model.windows()) throw std::invalid_argument("exact_loss: grid size differs from N");
    const auto& codes = prob.basis->codes();
    const Eigen::MatrixXcd ups = model.ensemble().evaluate(codes);
    const Eigen::MatrixXd C = model.mixing().coefficients();
    const Eigen::MatrixXcd phi = C.cast<cplx>() * ups;
    const double pref = grid.prefactor();
    LossResult r;
    Eigen::MatrixXcd g_phi;
    if (with_grad) g_phi.resize(phi.rows(), phi.cols());
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
        const Eigen::VectorXcd v = phi.row(i).transpose();
        const Eigen::VectorXcd res = prob.H.apply(v) - grid.Lambda(i) * v;
        r.loss += pref * res.squaredNorm();
        r.c2.push_back(v.squaredNorm());
        if (with_grad) g_phi.row(i) = (2.0 * pref * (prob.H.apply(res) - grid.Lambda(i) * res)).transpose();
    }
    if (with_grad) {
        detail::backprop_components(model, codes, ups, C, g_phi, r.grad);
        detail::check_finite(r.grad, model.layout());
    }
    return r;
}

/**
 * Importance-sampled loss sum_b w_b X_b with X_b = pref sum_i |[(H-Lambda_i)Phi_i](s_b)|^2 / P(s_b);
 * the residual is evaluated through the connected elements of H at s_b.
 */
template <Ensemble E>
LossResult mc_loss(const CgspModel<E>& model, const LambdaGrid& grid, const XxzParams& xxz, const SampleBatch& batch,
                   bool with_grad = false)
{
    if (grid.size() != model.windows()) throw std::invalid_argument("mc_loss: grid size differs from N");
    const auto B = batch.size();
    if (B == 0) throw std::invalid_argument("mc_loss: empty batch");

    // Distinct configurations: samples first, then their connections.
    std::vector<code_t> unique;
    std::unordered_map<code_t, std::size_t> index;
    auto intern = [&](code_t c) {
        auto [it, inserted] = index.try_emplace(c, unique.size());
        if (inserted) unique.push_back(c);
        return it->second;
    };
    std::vector<std::size_t> sample_idx(B);
    for (std::size_t b = 0; b < B; ++b) sample_idx[b] = intern(batch.configs[b]);
    const std::size_t n_samples_unique = unique.size();
    std::vector<std::vector<std::pair<std::size_t, double>>> conn(n_samples_unique);
    for (std::size_t u = 0; u < n_samples_unique; ++u) {
        for (const auto& c : local_connections(xxz, SpinConfiguration(batch.sites, unique[u])))
            conn[u].emplace_back(intern(c.code), c.amplitude);
    }

    const Eigen::MatrixXcd ups = model.ensemble().evaluate(unique);
    const Eigen::MatrixXd C = model.mixing().coefficients();
    const Eigen::MatrixXcd phi = C.cast<cplx>() * ups;
    const auto N = phi.rows();
    const double pref = grid.prefactor();

    // Residuals per distinct sample configuration.
    Eigen::MatrixXcd res = Eigen::MatrixXcd::Zero(N, static_cast<Eigen::Index>(n_samples_unique));
    for (std::size_t u = 0; u < n_samples_unique; ++u) {
        const auto col = static_cast<Eigen::Index>(u);
        for (const auto& [v, amp] : conn[u]) res.col(col) += amp * phi.col(static_cast<Eigen::Index>(v));
        res.col(col) -= (grid.Lambda.array() * phi.col(col).array()).matrix();
    }

    LossResult r;
    r.c2.assign(static_cast<std::size_t>(N), 0.0);
    std::vector<double> X(B);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_samples_unique));
    for (std::size_t b = 0; b < B; ++b) {
        const double P = std::exp(batch.logp[b]);
        if (!(P > 0.0) || !std::isfinite(P))
            throw training_error("mc_loss: nonpositive sampling probability (sampler/evaluator mismatch)");
        const auto col = static_cast<Eigen::Index>(sample_idx[b]);
        X[b] = pref * res.col(col).squaredNorm() / P;
        r.loss += batch.weights[b] * X[b];
        for (Eigen::Index i = 0; i < N; ++i) r.c2[static_cast<std::size_t>(i)] += batch.weights[b] * std::norm(phi(i, col)) / P;
        coef(col) += batch.weights[b] / P;
    }
    if (!batch.enumerated && B > 1) {
        double var = 0.0;
        for (double x : X) var += (x - r.loss) * (x - r.loss);
        r.stderr_ = std::sqrt(var / static_cast<double>(B - 1) / static_cast<double>(B));
    }

    if (with_grad) {
        Eigen::MatrixXcd g_phi = Eigen::MatrixXcd::Zero(N, static_cast<Eigen::Index>(unique.size()));
        for (std::size_t u = 0; u < n_samples_unique; ++u) {
            const auto col = static_cast<Eigen::Index>(u);
            if (coef(col) == 0.0) continue;
            const Eigen::VectorXcd gr = 2.0 * pref * coef(col) * res.col(col);
            for (const auto& [v, amp] : conn[u]) g_phi.col(static_cast<Eigen::Index>(v)) += amp * gr;
            g_phi.col(col) -= (grid.Lambda.array() * gr.array()).matrix();
        }
        detail::backprop_components(model, unique, ups, C, g_phi, r.grad);
        detail::check_finite(r.grad, model.layout());
    }
    return r;
}

// Adam {{{

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

inline void adam_step(std::vector<double>& theta, AdamState& st, std::span<const double> grad, const AdamConfig& cfg)
{
    if (grad.size() != theta.size()) throw std::invalid_argument("adam_step: gradient size mismatch");
    if (st.m.empty()) {
        st.m.assign(theta.size(), 0.0);
        st.v.assign(theta.size(), 0.0);
    }
    ++st.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

// }}}

enum class LossMode { exact, mc };

struct TrainConfig {
    int iterations = 1000;
    std::size_t batch = kDefaultBatch;
    AdamConfig adam;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  ///< 0: only at the end
    LossMode mode = LossMode::exact;
    double gamma = kDefaultGamma;
    int weight_refresh = 50;
};

struct MetricRecord {
    std::int64_t iter = 0;
    double loss = 0.0;
    double loss_stderr = 0.0;
    double sum_c2 = 0.0;
    double seconds = 0.0;
};

struct TrainState {
    std::int64_t iteration = 0;
    AdamState adam;
    std::uint64_t seed = 0;
    Eigen::VectorXd sampler_weights;  ///< weights in force for the current refresh period
    std::vector<MetricRecord> metrics;
};

struct TrainCallbacks {
    std::function<void(const MetricRecord&)> on_metrics;
    std::function<void(const TrainState&)> on_checkpoint;
};

/**
 * Sample -> estimate -> gradient -> Adam loop from state.iteration up to
 * cfg.iterations. Metrics for iteration k describe the parameters before
 * update k. A non-finite loss throws before any further checkpoint.
 */
template <Ensemble E>
void train(CgspModel<E>& model, const LambdaGrid& grid, const Problem& prob, const TrainConfig& cfg, TrainState& state,
           const TrainCallbacks& cb = {})
{
    if (cfg.iterations < 0) throw std::invalid_argument("train: negative iteration budget");
    if (cfg.weight_refresh < 1) throw std::invalid_argument("train: weight_refresh must be >= 1");
    if (cfg.mode == LossMode::mc) {
        if constexpr (!std::is_same_v<E, NaqsEnsemble>) {
            throw std::invalid_argument("train: Monte Carlo mode requires the autoregressive ensemble");
        }
    }
    state.seed = cfg.seed;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> theta = model.get_parameters();

    for (std::int64_t it = state.iteration; it < cfg.iterations; ++it) {
        LossResult r;
        if (cfg.mode == LossMode::exact) {
            r = exact_loss(model, grid, prob, true);
        } else if constexpr (std::is_same_v<E, NaqsEnsemble>) {
            if (state.sampler_weights.size() == 0 || it % cfg.weight_refresh == 0)
                state.sampler_weights = default_weights(model.mixing());
            SamplerConfig sc;
            sc.gamma = cfg.gamma;
            sc.weights = state.sampler_weights;
            sc.batch = cfg.batch;
            sc.seed = hash_combine(cfg.seed, static_cast<std::uint64_t>(it));
            const SampleBatch batch = draw(model.ensemble(), sc);
            r = mc_loss(model, grid, prob.xxz, batch, true);
        }
        if (!std::isfinite(r.loss)) throw training_error("train: non-finite loss at iteration " + std::to_string(it));

        MetricRecord rec;
        rec.iter = it;
        rec.loss = r.loss;
        rec.loss_stderr = r.stderr_;
        rec.sum_c2 = r.sum_c2();
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        state.metrics.push_back(rec);
        if (cb.on_metrics) cb.on_metrics(rec);

        adam_step(theta, state.adam, r.grad, cfg.adam);
        model.set_parameters(theta);
        state.iteration = it + 1;
        if (cfg.checkpoint_every > 0 && state.iteration % cfg.checkpoint_every == 0 && state.iteration < cfg.iterations &&
            cb.on_checkpoint)
            cb.on_checkpoint(state);
    }
    if (cb.on_checkpoint) cb.on_checkpoint(state);
}

}  // namespace cgsp
