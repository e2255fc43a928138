// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsp/trainer.hpp"

#include "catch_amalgamated.hpp"

#include <Eigen/Dense>

#include <random>

using namespace cgsp;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Problem chain(int l)
{
    XxzParams p;
    p.sites = l;
    return Problem::build(p, l / 2);
}

CgspModel<DenseEnsemble> dense_model(const Problem& prob, int M, int N, std::uint64_t seed, bool cx = false)
{
    CounterRng rng(seed, 3);
    return {DenseEnsemble(prob.basis, product_state_vector(*prob.basis, domain_wall(prob.xxz.sites)), M, cx, seed),
            MixingMatrix::random(N, M, rng)};
}

CgspModel<NaqsEnsemble> naqs_model(int M, int N, std::uint64_t seed, bool cx = false)
{
    NaqsConfig cfg;
    cfg.complex_amplitudes = cx;
    cfg.channels = {8, 8, 8};
    cfg.merge_channels = 8;
    cfg.head_hidden = 6;
    CounterRng rng(seed, 3);
    NaqsEnsemble ens(domain_wall(8), M, cfg, seed);
    for (auto& p : ens.parameters()) p += 0.3 * rng.normal();
    Eigen::MatrixXd A(N, M + 1);
    for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = 0.3 * rng.normal();
    return {std::move(ens), MixingMatrix(A)};
}

// Reference loss by dense matrices.
template <typename Model>
double brute_loss(const Model& model, const LambdaGrid& grid, const Problem& prob)
{
    const Eigen::MatrixXd H = prob.H.dense();
    const Eigen::MatrixXcd phi = model.evaluate_components(prob.basis->codes());
    const auto D = H.rows();
    double L = 0.0;
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
        const Eigen::MatrixXd S = H - grid.Lambda(i) * Eigen::MatrixXd::Identity(D, D);
        const Eigen::VectorXcd v = phi.row(i).transpose();
        L += (v.adjoint() * (S * S).cast<cplx>() * v)(0).real();
    }
    return grid.prefactor() * L;
}

template <typename F>
double central_difference(std::vector<double>& theta, std::size_t i, F&& f, double h = 1e-5)
{
    const double keep = theta[i];
    theta[i] = keep + h;
    const double up = f(theta);
    theta[i] = keep - h;
    const double dn = f(theta);
    theta[i] = keep;
    return (up - dn) / (2.0 * h);
}

}  // namespace

TEST_CASE("lambda grid")
{
    const auto g2 = LambdaGrid::from_bounds(-3.0, 1.0, 2);
    CHECK(g2.Lambda(0) == -3.0);
    CHECK(g2.Lambda(1) == 1.0);
    const auto g = LambdaGrid::from_bounds(-3.0, 1.0, 9, 0.1);
    CHECK(g.Lambda(0) <= -3.0);
    CHECK(g.Lambda(8) >= 1.0);
    for (int i = 1; i < 9; ++i) CHECK_THAT(g.Lambda(i) - g.Lambda(i - 1), WithinAbs(g.epsilon, 1e-14));
    CHECK_THAT(g.epsilon, WithinAbs((g.Lambda(8) - g.Lambda(0)) / 8.0, 1e-15));
    CHECK(LambdaGrid::from_bounds(0.0, 1.0, 1).prefactor() == 1.0);
    CHECK_THAT(g2.prefactor(), WithinAbs(0.25, 1e-15));
    CHECK_THROWS(LambdaGrid::from_bounds(1.0, 0.0, 3));
    const auto prob = chain(8);
    const auto gb = build_lambda_grid(prob.H, 16);
    const auto es = diagonalize(prob.H);
    CHECK(gb.Lambda(0) == es.energies.minCoeff());
    CHECK(gb.Lambda(15) == es.energies.maxCoeff());
}

TEST_CASE("exact loss matches dense matrix arithmetic at l=4")
{
    const auto prob = chain(4);
    for (bool cx : {false, true}) {
        const auto model = dense_model(prob, 3, 4, 11, cx);
        const auto grid = build_lambda_grid(prob.H, 4);
        CHECK_THAT(exact_loss(model, grid, prob).loss, WithinRel(brute_loss(model, grid, prob), 1e-10));
    }
    // Single bin: Phi_0 = Upsilon_0 and no prefactor.
    const auto one = dense_model(prob, 2, 1, 1);
    const auto g1 = build_lambda_grid(prob.H, 1);
    const StateVector u0 = one.ensemble().upsilon0();
    const StateVector r = prob.H.apply(u0) - g1.Lambda(0) * u0;
    CHECK_THAT(exact_loss(one, g1, prob).loss, WithinRel(r.squaredNorm(), 1e-12));
}

TEST_CASE("eigenstate components give zero loss")
{
    const auto prob = chain(4);
    const auto es = diagonalize(prob.H);
    const auto D = static_cast<int>(prob.basis->size());
    const StateVector psi0 = product_state_vector(*prob.basis, domain_wall(4));
    const Eigen::VectorXd b = es.vectors.transpose() * psi0.real();
    // Upsilon_j = v_j; C_ij = b_i delta_ij - b_j / N reproduces Phi_i = b_i v_i.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(D, D + 1);
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) A(i, j + 1) = (i == j ? b(i) : 0.0) - b(j) / D;
    CgspModel<DenseEnsemble> model(DenseEnsemble(prob.basis, psi0, D, false, 0), MixingMatrix(A));
    auto p = model.ensemble().parameters();
    for (int j = 0; j < D; ++j)
        for (int s = 0; s < D; ++s) p[static_cast<std::size_t>(j * D + s)] = es.vectors(s, j);
    LambdaGrid grid;
    grid.Lambda = es.energies;
    CHECK(exact_loss(model, grid, prob).loss < 1e-24);
}

TEST_CASE("exact gradients match central differences")
{
    for (int l : {4, 8}) {
        const auto prob = chain(l);
        auto model = dense_model(prob, 3, 5, 21, true);
        const auto grid = build_lambda_grid(prob.H, 5);
        const auto r = exact_loss(model, grid, prob, true);
        auto theta = model.get_parameters();
        auto f = [&](const std::vector<double>& t) {
            model.set_parameters(t);
            return exact_loss(model, grid, prob).loss;
        };
        std::mt19937_64 rng(static_cast<unsigned>(l));
        for (int n = 0; n < 50; ++n) {
            const auto i = static_cast<std::size_t>(rng() % theta.size());
            const double fd = central_difference(theta, i, f);
            CHECK(std::abs(fd - r.grad[i]) <= 1e-4 * std::max(std::abs(fd), 1e-3));
        }
        model.set_parameters(theta);
    }
    // Autoregressive ensemble, complex amplitudes.
    const auto prob = chain(8);
    auto model = naqs_model(2, 4, 5, true);
    const auto grid = build_lambda_grid(prob.H, 4);
    const auto r = exact_loss(model, grid, prob, true);
    auto theta = model.get_parameters();
    auto f = [&](const std::vector<double>& t) {
        model.set_parameters(t);
        return exact_loss(model, grid, prob).loss;
    };
    std::mt19937_64 rng(99);
    for (int n = 0; n < 50; ++n) {
        const auto i = static_cast<std::size_t>(rng() % theta.size());
        const double fd = central_difference(theta, i, f);
        CHECK(std::abs(fd - r.grad[i]) <= 1e-4 * std::max(std::abs(fd), 1e-3));
    }
}

TEST_CASE("sampled-loss gradient matches central differences at a fixed batch")
{
    const auto prob = chain(8);
    auto model = naqs_model(2, 4, 6);
    const auto grid = build_lambda_grid(prob.H, 4);
    SamplerConfig sc;
    sc.weights = default_weights(model.mixing());
    sc.batch = 64;
    sc.seed = 1;
    const auto batch = draw(model.ensemble(), sc);
    const auto r = mc_loss(model, grid, prob.xxz, batch, true);
    auto theta = model.get_parameters();
    auto f = [&](const std::vector<double>& t) {
        model.set_parameters(t);
        return mc_loss(model, grid, prob.xxz, batch).loss;
    };
    std::mt19937_64 rng(5);
    for (int n = 0; n < 50; ++n) {
        const auto i = static_cast<std::size_t>(rng() % theta.size());
        const double fd = central_difference(theta, i, f);
        CHECK(std::abs(fd - r.grad[i]) <= 1e-4 * std::max(std::abs(fd), 1e-3));
    }
}

TEST_CASE("enumerated batch reproduces the exact loss and gradient")
{
    const auto prob = chain(8);
    const auto model = naqs_model(3, 6, 7, true);
    const auto grid = build_lambda_grid(prob.H, 6);
    SamplerConfig sc;
    sc.weights = default_weights(model.mixing());
    const auto batch = enumerated_batch(model.ensemble(), sc, *prob.basis);
    const auto ex = exact_loss(model, grid, prob, true);
    const auto mc = mc_loss(model, grid, prob.xxz, batch, true);
    CHECK_THAT(mc.loss, WithinAbs(ex.loss, 1e-8));
    for (std::size_t i = 0; i < ex.c2.size(); ++i) CHECK_THAT(mc.c2[i], WithinAbs(ex.c2[i], 1e-8));
    for (std::size_t i = 0; i < ex.grad.size(); ++i) CHECK_THAT(mc.grad[i], WithinAbs(ex.grad[i], 1e-8));
    CHECK(mc.stderr_ == 0.0);
}

TEST_CASE("sampled loss is consistent with the exact loss")
{
    const auto prob = chain(8);
    const auto model = naqs_model(3, 6, 8);
    const auto grid = build_lambda_grid(prob.H, 6);
    const double exact = exact_loss(model, grid, prob).loss;
    SamplerConfig sc;
    sc.weights = default_weights(model.mixing());
    sc.batch = 4000;
    int inside = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        sc.seed = seed;
        const auto r = mc_loss(model, grid, prob.xxz, draw(model.ensemble(), sc));
        CHECK(r.stderr_ > 0.0);
        inside += std::abs(r.loss - exact) <= 3.0 * r.stderr_;
    }
    CHECK(inside == 5);
}

TEST_CASE("adam")
{
    std::vector<double> theta{1.0, -2.0};
    AdamState st;
    adam_step(theta, st, std::vector<double>{0.0, 0.0}, AdamConfig{});
    CHECK(theta == std::vector<double>{1.0, -2.0});
    CHECK(st.step == 1);
    std::vector<double> t2{1.0, -2.0};
    AdamState s2;
    const AdamConfig cfg;
    adam_step(t2, s2, std::vector<double>{0.5, -4.0}, cfg);
    // First step: m_hat = g, v_hat = g^2.
    CHECK_THAT(t2[0], WithinAbs(1.0 - 1e-3 * 0.5 / (0.5 + 1e-8), 1e-15));
    CHECK_THAT(t2[1], WithinAbs(-2.0 + 1e-3 * 4.0 / (4.0 + 1e-8), 1e-15));
    CHECK(cfg.lr == 1e-3);
    CHECK(kDefaultBatch == 4000);
    CHECK_THROWS(adam_step(t2, s2, std::vector<double>{1.0}, cfg));
}

TEST_CASE("zero iterations writes only the initial checkpoint")
{
    const auto prob = chain(4);
    auto model = dense_model(prob, 2, 3, 1);
    const auto before = model.get_parameters();
    TrainConfig tc;
    tc.iterations = 0;
    TrainState st;
    int checkpoints = 0;
    train(model, build_lambda_grid(prob.H, 3), prob, tc, st, {{}, [&](const TrainState& s) {
                                                                 ++checkpoints;
                                                                 CHECK(s.iteration == 0);
                                                             }});
    CHECK(checkpoints == 1);
    CHECK(st.metrics.empty());
    CHECK(model.get_parameters() == before);
}

TEST_CASE("training lowers the loss and logs increasing iterations")
{
    const auto prob = chain(8);
    auto model = dense_model(prob, 4, 8, 2);
    const auto grid = build_lambda_grid(prob.H, 8);
    TrainConfig tc;
    tc.iterations = 300;
    tc.checkpoint_every = 100;
    TrainState st;
    std::vector<std::int64_t> saved;
    train(model, grid, prob, tc, st, {{}, [&](const TrainState& s) { saved.push_back(s.iteration); }});
    CHECK(saved == std::vector<std::int64_t>{100, 200, 300});
    for (std::size_t i = 1; i < st.metrics.size(); ++i) CHECK(st.metrics[i].iter == st.metrics[i - 1].iter + 1);
    CHECK(st.metrics.back().loss < 0.5 * st.metrics.front().loss);
}

TEST_CASE("sampled training is deterministic and resumable")
{
    const auto prob = chain(8);
    const auto grid = build_lambda_grid(prob.H, 4);
    TrainConfig tc;
    tc.iterations = 12;
    tc.batch = 256;
    tc.mode = LossMode::mc;
    tc.seed = 4;
    tc.weight_refresh = 5;

    auto run = [&](int threads) {
        set_num_threads(threads);
        auto model = naqs_model(2, 4, 9);
        TrainState st;
        train(model, grid, prob, tc, st);
        set_num_threads(0);
        return std::pair{model.get_parameters(), st.metrics};
    };
    const auto [pa, ma] = run(1);
    const auto [pb, mb] = run(4);
    CHECK(pa == pb);
    REQUIRE(ma.size() == mb.size());
    for (std::size_t i = 0; i < ma.size(); ++i) {
        CHECK(ma[i].loss == mb[i].loss);
        CHECK(ma[i].loss_stderr == mb[i].loss_stderr);
        CHECK(ma[i].sum_c2 == mb[i].sum_c2);
    }

    // Stop at 7, then resume from the saved state.
    auto model = naqs_model(2, 4, 9);
    TrainState st;
    auto first = tc;
    first.iterations = 7;
    train(model, grid, prob, first, st);
    const auto theta = model.get_parameters();
    const TrainState saved = st;
    auto resumed = naqs_model(2, 4, 9);
    resumed.set_parameters(theta);
    TrainState st2 = saved;
    train(resumed, grid, prob, tc, st2);
    CHECK(resumed.get_parameters() == pa);
    for (std::size_t i = 0; i < ma.size(); ++i) CHECK(st2.metrics[i].loss == ma[i].loss);
}

TEST_CASE("non-finite gradients are reported by parameter name")
{
    const auto prob = chain(4);
    auto model = dense_model(prob, 2, 3, 1);
    auto theta = model.get_parameters();
    theta[3] = std::numeric_limits<double>::infinity();
    model.set_parameters(theta);
    TrainConfig tc;
    tc.iterations = 5;
    TrainState st;
    CHECK_THROWS_WITH(train(model, build_lambda_grid(prob.H, 3), prob, tc, st), ContainsSubstring("upsilon.real"));
}

TEST_CASE("sampled mode needs the autoregressive ensemble")
{
    const auto prob = chain(4);
    auto model = dense_model(prob, 2, 3, 1);
    TrainConfig tc;
    tc.mode = LossMode::mc;
    TrainState st;
    CHECK_THROWS_AS(train(model, build_lambda_grid(prob.H, 3), prob, tc, st), std::invalid_argument);
}
