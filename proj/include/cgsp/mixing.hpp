// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file mixing.hpp
 * @brief Mixing matrix A that recombines Upsilon_0..Upsilon_M into components
 *
 *     Phi_i = sum_j (delta_{j0}/N + A_ij - mean_i' A_i'j) Upsilon_j
 *
 * so that sum_i Phi_i = Upsilon_0 for every A.
 */

#pragma once

#include "cgsp/util.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace cgsp {

class MixingMatrix {
public:
    MixingMatrix() = default;
    explicit MixingMatrix(Eigen::MatrixXd A) : A_(std::move(A))
    {
        if (A_.rows() < 1 || A_.cols() < 1) throw std::invalid_argument("MixingMatrix: empty matrix");
        if (!A_.allFinite()) throw std::invalid_argument("MixingMatrix: non-finite entry");
    }

    static MixingMatrix zeros(int N, int M) { return MixingMatrix(Eigen::MatrixXd::Zero(N, M + 1)); }

    /// Entries uniform in +-1/(N sqrt(M+1)), a neighbourhood of the A = 0 point.
    static MixingMatrix random(int N, int M, CounterRng& rng)
    {
        const double r = 1.0 / (N * std::sqrt(static_cast<double>(M + 1)));
        Eigen::MatrixXd A(N, M + 1);
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = rng.uniform(-r, r);
        return MixingMatrix(std::move(A));
    }

    [[nodiscard]] int windows() const noexcept { return static_cast<int>(A_.rows()); }
    [[nodiscard]] int components() const noexcept { return static_cast<int>(A_.cols()); }  ///< M + 1
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return A_; }
    Eigen::MatrixXd& matrix() noexcept { return A_; }

    /// C_ij = delta_{j0}/N + A_ij - mean_i A_ij.
    [[nodiscard]] Eigen::MatrixXd coefficients() const
    {
        Eigen::MatrixXd C = A_.rowwise() - A_.colwise().mean();
        C.col(0).array() += 1.0 / static_cast<double>(A_.rows());
        return C;
    }

    /// Pulls dL/dC back to dL/dA (the column-mean projection is self-adjoint).
    [[nodiscard]] static Eigen::MatrixXd pullback(const Eigen::MatrixXd& dC)
    {
        return dC.rowwise() - dC.colwise().mean();
    }

private:
    Eigen::MatrixXd A_;
};

/// Sampler importance weights w_m = sum_i |C_im|.
inline Eigen::VectorXd default_weights(const MixingMatrix& A)
{
    return A.coefficients().cwiseAbs().colwise().sum().transpose();
}

}  // namespace cgsp
