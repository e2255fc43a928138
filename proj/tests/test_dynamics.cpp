// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsp/dense_ensemble.hpp"
#include "cgsp/dynamics.hpp"

#include "catch_amalgamated.hpp"
#include "fixture.hpp"

#include <Eigen/Dense>

using namespace cgsp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Quench {
    XxzParams p;
    SectorBasis basis{8, 4};
    SparseHamiltonian H = build_xxz(p, basis);
    EigenSystem es = diagonalize(H);
    StateVector psi0 = product_state_vector(basis, domain_wall(8));

    [[nodiscard]] ExactProjection project(int N) const
    {
        return exact_projection(es, psi0, SpectralWindows::covering(es.energies.minCoeff(), es.energies.maxCoeff(), N));
    }
};

}  // namespace

TEST_CASE("reconstruction at t = 0 and single components")
{
    const Quench q;
    const auto dec = SpectralDecomposition::from_projection(q.H, q.project(16));
    CHECK((reconstruct(dec, 0.0) - q.psi0).norm() < 1e-10);
    const auto one = SpectralDecomposition::from_components(q.H, {q.psi0});
    const auto m0 = magnetization(reconstruct(one, 0.0), q.basis).values;
    const auto m3 = magnetization(reconstruct(one, 3.0), q.basis).values;
    for (std::size_t k = 0; k < 8; ++k) CHECK_THAT(m3[k], WithinAbs(m0[k], 1e-14));
    CHECK_THROWS(reconstruct(SpectralDecomposition{}, 0.0));
}

TEST_CASE("Rayleigh-quotient reconstruction stays within the window bound")
{
    const Quench q;
    for (int N : {8, 16, 32}) {
        const auto proj = q.project(N);
        const auto dec = SpectralDecomposition::from_projection(q.H, proj);
        // Each window's Rayleigh quotient lies in its window, so the bound still holds.
        for (int k = 0; k <= 20; ++k) {
            const double t = 0.25 * k;
            CHECK((exact_evolve(q.es, q.psi0, t) - reconstruct(dec, t)).norm() <= proj.windows.epsilon * t / 2.0 + 1e-8);
        }
        CHECK(dec.overlap_bound() < 1e-10);
    }
}

TEST_CASE("dropped components")
{
    const Quench q;
    std::vector<StateVector> comps{q.psi0, 1e-8 * q.psi0, StateVector::Zero(70)};
    const auto dec = SpectralDecomposition::from_components(q.H, comps);
    CHECK(dec.kept == std::vector<bool>{true, false, false});
    CHECK(std::isnan(dec.lambda[2]));
    CHECK_THROWS(SpectralDecomposition::from_components(q.H, {StateVector::Zero(3)}));
}

TEST_CASE("magnetization")
{
    const Quench q;
    const auto m = magnetization(q.psi0, q.basis).values;
    CHECK(m == std::vector<double>{-1, -1, -1, -1, 1, 1, 1, 1});
    for (double t : {0.3, 1.7, 4.0}) {
        const auto mt = magnetization(exact_evolve(q.es, q.psi0, t), q.basis).values;
        double s = 0.0;
        for (double v : mt) {
            s += v;
            CHECK(std::abs(v) <= 1.0 + 1e-12);
        }
        CHECK_THAT(s, WithinAbs(0.0, 1e-12));
    }
    const auto scaled = magnetization(2.0 * q.psi0, q.basis);
    CHECK(scaled.norm == 2.0);
    CHECK(scaled.values == m);
}

TEST_CASE("observables match the integrator fixtures")
{
    const Quench q;
    for (const auto& row : read_fixture("quench_l8_magnetization.csv")) {
        const auto m = magnetization(exact_evolve(q.es, q.psi0, row.t), q.basis).values;
        CHECK_THAT(m[static_cast<std::size_t>(row.k - 1)], WithinAbs(row.value, 1e-8));
    }
    for (const auto& row : read_fixture("quench_l8_correlator.csv")) {
        const double c = connected_correlator(exact_evolve(q.es, q.psi0, row.t), q.basis, row.k);
        CHECK_THAT(c, WithinAbs(row.value, 1e-8));
    }
}

TEST_CASE("correlator edge cases")
{
    const Quench q;
    for (int k = 1; k <= 8; ++k) CHECK(connected_correlator(q.psi0, q.basis, k) == 0.0);
    CHECK(partner_site(1, 8) == 4);
    CHECK(partner_site(5, 8) == 8);
    CHECK(partner_site(6, 8) == 7);
    // Same-site connected part is 1 - <sigma>^2.
    const StateVector psi = exact_evolve(q.es, q.psi0, 0.8);
    const double z = magnetization(psi, q.basis).values[2];
    CHECK_THAT(connected_zz(psi, q.basis, 3, 3), WithinAbs(1.0 - z * z, 1e-12));
    CHECK_THROWS(connected_correlator(psi, q.basis, 0));
}

TEST_CASE("K matrix")
{
    const Quench q;
    // Eigenstate components: K = 0.
    std::vector<StateVector> eig;
    for (int k = 0; k < 3; ++k) eig.emplace_back(q.es.vectors.col(k).cast<cplx>());
    const auto ke = k_matrix(SpectralDecomposition::from_components(q.H, eig), q.H);
    CHECK(ke.K.cwiseAbs().maxCoeff() < 1e-10);

    // Exact windows: K diagonal, diagonal = sigma^2, weighted diagonal = |sigma|^2.
    const auto dec = SpectralDecomposition::from_projection(q.H, q.project(8));
    const auto km = k_matrix(dec, q.H);
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < km.K.rows(); ++i) {
        for (Eigen::Index j = 0; j < km.K.cols(); ++j)
            if (i != j) CHECK(std::abs(km.K(i, j)) < 1e-10);
        CHECK_THAT(km.K(i, i).real(), WithinAbs(dec.sigma2[static_cast<std::size_t>(i)], 1e-10));
        num += km.c(i) * km.c(i) * km.K(i, i).real();
        den += km.c(i) * km.c(i);
    }
    CHECK_THAT(num / den, WithinAbs(dec.weighted_sigma2(), 1e-12));

    // Short-time law.
    const double t = 1e-3;
    const double err = (exact_evolve(q.es, q.psi0, t) - reconstruct(dec, t)).squaredNorm();
    CHECK_THAT(err, WithinRel(km.error_estimate(t), 1e-2));
}

TEST_CASE("K matrix matches dense arithmetic at l=4")
{
    XxzParams p;
    p.sites = 4;
    const SectorBasis basis(4, 2);
    const auto H = build_xxz(p, basis);
    const Eigen::MatrixXd Hd = H.dense();
    CounterRng rng(3, 0);
    std::vector<StateVector> comps;
    for (int i = 0; i < 3; ++i) {
        StateVector v(6);
        for (int s = 0; s < 6; ++s) v(s) = cplx(rng.normal(), rng.normal());
        comps.push_back(v);
    }
    const auto dec = SpectralDecomposition::from_components(H, comps);
    const auto km = k_matrix(dec, H);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const StateVector ti = comps[static_cast<std::size_t>(i)].normalized();
            const StateVector tj = comps[static_cast<std::size_t>(j)].normalized();
            const double li = (ti.adjoint() * Hd.cast<cplx>() * ti)(0).real();
            const double lj = (tj.adjoint() * Hd.cast<cplx>() * tj)(0).real();
            const Eigen::MatrixXcd Ai = (Hd - li * Eigen::MatrixXd::Identity(6, 6)).cast<cplx>();
            const Eigen::MatrixXcd Aj = (Hd - lj * Eigen::MatrixXd::Identity(6, 6)).cast<cplx>();
            const cplx ref = (ti.adjoint() * Ai * Aj * tj)(0);
            CHECK(std::abs(km.K(i, j) - ref) < 1e-12);
        }
    const Eigen::VectorXcd c = km.c.cast<cplx>();
    CHECK(c.dot(km.K * c).real() >= -1e-10);
}

TEST_CASE("coherence time")
{
    CHECK(coherence_time(1.0) == 0.7071067811865476);
    CHECK(std::isinf(coherence_time(0.0)));
    CHECK_THAT(coherence_time(0.5) * coherence_time(0.5) * 0.25, WithinAbs(0.5, 1e-15));
}

TEST_CASE("fidelity and grids")
{
    const Quench q;
    CHECK_THAT(fidelity(q.psi0, cplx(0.0, 2.0) * q.psi0), WithinAbs(1.0, 1e-15));
    CHECK_THROWS(fidelity(q.psi0, StateVector::Zero(70)));
    const auto ts = time_grid(0.0, 5.0, 0.25);
    CHECK(ts.size() == 21);
    CHECK(ts.back() == 5.0);
    const auto sq = over_grid<double>(ts.size(), [&](std::size_t k) { return ts[k] * ts[k]; });
    CHECK(sq[4] == 1.0);
}
