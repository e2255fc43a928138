// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsp/dense_ensemble.hpp"
#include "cgsp/ensemble.hpp"
#include "cgsp/mixing.hpp"

#include "catch_amalgamated.hpp"

using namespace cgsp;
using Catch::Matchers::WithinAbs;

TEST_CASE("zero mixing matrix splits Upsilon_0 evenly")
{
    const auto C = MixingMatrix::zeros(5, 3).coefficients();
    for (Eigen::Index i = 0; i < 5; ++i) {
        CHECK(C(i, 0) == 0.2);
        for (Eigen::Index j = 1; j < 4; ++j) CHECK(C(i, j) == 0.0);
    }
    const auto w = default_weights(MixingMatrix::zeros(5, 3));
    CHECK_THAT(w(0), WithinAbs(1.0, 1e-15));
    CHECK(w.tail(3).isZero(0.0));
}

TEST_CASE("coefficient column sums telescope")
{
    CounterRng rng(4, 0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd A(6, 4);
        for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = rng.normal();
        const auto C = MixingMatrix(A).coefficients();
        const Eigen::VectorXd s = C.colwise().sum().transpose();
        CHECK_THAT(s(0), WithinAbs(1.0, 1e-14));
        CHECK(s.tail(3).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("weights for a single nonzero entry")
{
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 3);
    A(0, 1) = 0.8;
    const auto w = default_weights(MixingMatrix(A));
    // Column 1 of C is (a/2, -a/2).
    CHECK_THAT(w(1), WithinAbs(0.8, 1e-15));
    CHECK_THAT(w(0), WithinAbs(1.0, 1e-15));
    CHECK(w(2) == 0.0);
}

TEST_CASE("weights are invariant under column shifts")
{
    CounterRng rng(2, 0);
    auto mix = MixingMatrix::random(4, 3, rng);
    Eigen::MatrixXd shifted = mix.matrix();
    shifted.col(2).array() += 0.37;
    CHECK((default_weights(mix) - default_weights(MixingMatrix(shifted))).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mixing matrix validation")
{
    CHECK_THROWS(MixingMatrix(Eigen::MatrixXd(0, 3)));
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(MixingMatrix(bad));
}

TEST_CASE("pullback equals the finite-difference derivative of C")
{
    CounterRng rng(8, 0);
    Eigen::MatrixXd A(4, 3), W(4, 3);
    for (Eigen::Index i = 0; i < A.size(); ++i) {
        A(i) = rng.normal();
        W(i) = rng.normal();
    }
    // f(A) = sum W .* C(A)  =>  df/dA = pullback(W)
    auto f = [&](const Eigen::MatrixXd& a) { return (W.array() * MixingMatrix(a).coefficients().array()).sum(); };
    const auto g = MixingMatrix::pullback(W);
    for (Eigen::Index i = 0; i < A.size(); ++i) {
        Eigen::MatrixXd ap = A, am = A;
        ap(i) += 1e-6;
        am(i) -= 1e-6;
        CHECK_THAT(g(i), WithinAbs((f(ap) - f(am)) / 2e-6, 1e-8));
    }
}

TEST_CASE("dense ensemble evaluation matches direct matrix arithmetic at l=4")
{
    auto basis = std::make_shared<const SectorBasis>(4, 2);
    const auto s0 = SpinConfiguration::from_string("0011");
    const StateVector u0 = product_state_vector(*basis, s0);
    for (bool cx : {false, true}) {
        DenseEnsemble ens(basis, u0, 3, cx, 5);
        CounterRng rng(6, 0);
        const auto mix = MixingMatrix::random(4, 3, rng);
        // Reference: Upsilon matrix assembled from raw parameters.
        Eigen::MatrixXcd U(4, 6);
        U.row(0) = u0.transpose();
        const auto p = ens.parameters();
        for (int j = 0; j < 3; ++j)
            for (int s = 0; s < 6; ++s) U(j + 1, s) = cplx(p[static_cast<std::size_t>(j * 6 + s)], cx ? p[static_cast<std::size_t>((3 + j) * 6 + s)] : 0.0);
        Eigen::MatrixXd A = mix.matrix();
        Eigen::MatrixXd C(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) C(i, j) = (j == 0 ? 0.25 : 0.0) + A(i, j) - A.col(j).mean();
        const Eigen::MatrixXcd ref = C.cast<cplx>() * U;
        const auto phi = evaluate_components(ens, mix, basis->codes());
        CHECK((phi - ref).cwiseAbs().maxCoeff() < 1e-14);
        // Constraint identity.
        const Eigen::VectorXcd sum = phi.colwise().sum().transpose();
        CHECK((sum - u0).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("dense ensemble guards")
{
    auto basis = std::make_shared<const SectorBasis>(4, 2);
    StateVector u = StateVector::Zero(6);
    u(0) = 2.0;
    CHECK_THROWS(DenseEnsemble(basis, u, 2, false, 1));
    CHECK_THROWS(DenseEnsemble(basis, StateVector::Zero(5), 2, false, 1));
    const DenseEnsemble ens(basis, product_state_vector(*basis, SpinConfiguration::from_string("0011")), 2, false, 1);
    const code_t outside = SpinConfiguration::from_string("0111").code();
    CHECK(ens.evaluate(std::span<const code_t>(&outside, 1)).isZero(0.0));
}

TEST_CASE("frozen component receives no gradient")
{
    auto basis = std::make_shared<const SectorBasis>(4, 2);
    const DenseEnsemble ens(basis, product_state_vector(*basis, SpinConfiguration::from_string("0011")), 2, true, 1);
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(3, 6);
    g.row(0).setConstant(cplx(1.0, 1.0));
    std::vector<double> grad(ens.parameters().size(), 0.0);
    ens.accumulate_gradient(basis->codes(), g, grad);
    for (double v : grad) CHECK(v == 0.0);
    CHECK(ens.layout().blocks().size() == 2);  // upsilon.real, upsilon.imag; no block for Upsilon_0
}

TEST_CASE("product state")
{
    const auto s0 = domain_wall(8);
    const ProductState ps(s0, SpinOrder::identity(8));
    CHECK(ps.amplitude(s0.code()) == 1.0);
    CHECK(ps.amplitude(SpinConfiguration::from_string("00011011").code()) == 0.0);
}

TEST_CASE("constraint identity for the autoregressive ensemble")
{
    const SectorBasis basis(8, 4);
    NaqsConfig cfg;
    cfg.complex_amplitudes = true;
    const NaqsEnsemble ens(domain_wall(8), 3, cfg, 9);
    CounterRng rng(10, 0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd A(6, 4);
        for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = 3.0 * rng.normal();
        const auto phi = evaluate_components(ens, MixingMatrix(A), basis.codes());
        const auto ups = ens.evaluate(basis.codes());
        CHECK((phi.colwise().sum() - ups.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("model parameter vector round-trips")
{
    auto basis = std::make_shared<const SectorBasis>(4, 2);
    CounterRng rng(1, 0);
    CgspModel<DenseEnsemble> model(
        DenseEnsemble(basis, product_state_vector(*basis, SpinConfiguration::from_string("0011")), 2, false, 1),
        MixingMatrix::random(3, 2, rng));
    auto theta = model.get_parameters();
    CHECK(theta.size() == 2 * 6 + 3 * 3);
    for (auto& v : theta) v += 1.0;
    model.set_parameters(theta);
    CHECK(model.get_parameters() == theta);
    CHECK(model.layout().find("A").offset == 12);
    CHECK_THROWS(model.set_parameters(std::vector<double>(3)));
    CHECK_THROWS(CgspModel<DenseEnsemble>(model.ensemble(), MixingMatrix::zeros(3, 4)));
}
