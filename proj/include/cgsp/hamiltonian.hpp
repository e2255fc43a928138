// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file hamiltonian.hpp
 * @brief XXZ chain H = sum_k J (Sx Sx + Sy Sy + Delta Sz Sz) + h Sz with
 *        S = sigma/2, restricted to a fixed-magnetization sector.
 *
 * The bond set is {(k, k+1 mod l)} for periodic chains and {(k, k+1)}, k < l-1,
 * for open chains. A periodic l = 2 chain visits the single bond twice.
 */

#pragma once

#include "cgsp/lattice.hpp"

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cgsp {

struct XxzParams {
    double J = 1.0;
    double Delta = -1.0;
    double h = 0.0;
    int sites = 8;
    bool periodic = true;

    void validate() const
    {
        if (sites < 2) throw std::invalid_argument("XxzParams: l must be >= 2");
        if (!std::isfinite(J) || J == 0.0) throw std::invalid_argument("XxzParams: J must be finite and nonzero");
        if (!std::isfinite(Delta)) throw std::invalid_argument("XxzParams: Delta must be finite");
        if (!std::isfinite(h)) throw std::invalid_argument("XxzParams: h must be finite");
    }

    [[nodiscard]] std::vector<std::pair<int, int>> bonds() const
    {
        std::vector<std::pair<int, int>> out;
        const int n = periodic ? sites : sites - 1;
        for (int k = 0; k < n; ++k) out.emplace_back(k, (k + 1) % sites);
        return out;
    }
};

struct Connection {
    code_t code;
    double amplitude;
};

/// Nonzero entries of the row of H at s, diagonal first, then spin exchanges
/// in bond order with repeated targets merged.
inline std::vector<Connection> local_connections(const XxzParams& p, const SpinConfiguration& s)
{
    if (s.sites() != p.sites) throw std::invalid_argument("local_connections: length mismatch");
    const code_t code = s.code();
    double diag = 0.0;
    for (int k = 0; k < p.sites; ++k) diag += 0.5 * p.h * s.spin(k);
    std::vector<Connection> out;
    out.push_back({code, 0.0});
    for (auto [a, b] : p.bonds()) {
        const int sa = s.spin(a);
        const int sb = s.spin(b);
        diag += p.J * p.Delta * (sa == sb ? 0.25 : -0.25);
        if (sa != sb) {
            const code_t flipped = code ^ site_mask(p.sites, a) ^ site_mask(p.sites, b);
            bool merged = false;
            for (auto& c : out) {
                if (c.code == flipped) {
                    c.amplitude += 0.5 * p.J;
                    merged = true;
                    break;
                }
            }
            if (!merged) out.push_back({flipped, 0.5 * p.J});
        }
    }
    out.front().amplitude = diag;
    if (diag == 0.0) out.erase(out.begin());
    return out;
}

/**
 * Row-wise sparse sector matrix. Rows hold (column, value) pairs, diagonal
 * included, sorted by column.
 */
class SparseHamiltonian {
public:
    struct Entry {
        std::size_t col;
        double value;
    };

    SparseHamiltonian() = default;
    explicit SparseHamiltonian(std::vector<std::vector<Entry>> rows) : rows_(std::move(rows)) {}

    [[nodiscard]] std::size_t dim() const noexcept { return rows_.size(); }
    [[nodiscard]] const std::vector<Entry>& row(std::size_t r) const { return rows_.at(r); }
    [[nodiscard]] const std::vector<std::vector<Entry>>& rows() const noexcept { return rows_; }

    /// y = H x for real or complex vectors.
    template <typename Derived>
    [[nodiscard]] Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> apply(const Eigen::MatrixBase<Derived>& x) const
    {
        if (static_cast<std::size_t>(x.size()) != dim()) throw std::invalid_argument("SparseHamiltonian::apply: dimension mismatch");
        using Scalar = typename Derived::Scalar;
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y(x.size());
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            Scalar acc(0);
            for (const auto& e : rows_[r]) acc += e.value * x(static_cast<Eigen::Index>(e.col));
            y(static_cast<Eigen::Index>(r)) = acc;
        }
        return y;
    }

    [[nodiscard]] Eigen::MatrixXd dense() const
    {
        const auto n = static_cast<Eigen::Index>(dim());
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t r = 0; r < rows_.size(); ++r)
            for (const auto& e : rows_[r]) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e.col)) += e.value;
        return m;
    }

    [[nodiscard]] double diagonal(std::size_t r) const
    {
        for (const auto& e : rows_.at(r))
            if (e.col == r) return e.value;
        return 0.0;
    }

private:
    std::vector<std::vector<Entry>> rows_;
};

inline SparseHamiltonian build_xxz(const XxzParams& p, const SectorBasis& basis)
{
    p.validate();
    if (basis.sites() != p.sites) throw std::invalid_argument("build_xxz: basis and parameters disagree on l");
    std::vector<std::vector<SparseHamiltonian::Entry>> rows(basis.size());
    for (std::size_t r = 0; r < basis.size(); ++r) {
        for (const auto& c : local_connections(p, basis.state(r))) {
            const std::size_t col = basis.index_of(c.code);
            rows[r].push_back({col, c.amplitude});
        }
        std::sort(rows[r].begin(), rows[r].end(), [](const auto& a, const auto& b) { return a.col < b.col; });
    }
    return SparseHamiltonian(std::move(rows));
}

}  // namespace cgsp
