// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file spectral_ideal.hpp
 * @brief Closed-form minimizer of the weighted-variance objective for a fully
 *        expressive ansatz, g_{i,k} = b_k / sum_j (E_k - L_i)^2 / (E_k - L_j)^2,
 *        and its per-bin variance profile.
 */

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cgsp {

struct IdealMinimizer {
    Eigen::MatrixXd g;       ///< N x N_h
    Eigen::VectorXd Lambda;  ///< N
    Eigen::VectorXd b;       ///< N_h
    Eigen::VectorXd E;       ///< N_h
};

struct VarianceProfile {
    std::vector<double> sigma2;  ///< per bin, 0 for empty bins
    std::vector<double> lambda;  ///< per-bin Rayleigh quotient
    std::vector<double> c2;      ///< per-bin weight sum_k g_{i,k}^2
    std::vector<bool> empty;
    double weighted_sigma2 = 0.0;  ///< sum c2 sigma2 / sum c2
};

inline IdealMinimizer ideal_cgsp(const Eigen::VectorXd& b, const Eigen::VectorXd& E, const Eigen::VectorXd& Lambda)
{
    if (b.size() != E.size()) throw std::invalid_argument("ideal_cgsp: b and E sizes differ");
    if (Lambda.size() < 1) throw std::invalid_argument("ideal_cgsp: empty Lambda grid");
    for (Eigen::Index i = 0; i < Lambda.size(); ++i)
        for (Eigen::Index j = i + 1; j < Lambda.size(); ++j)
            if (Lambda(i) == Lambda(j)) throw std::invalid_argument("ideal_cgsp: duplicate Lambda values");

    const Eigen::Index n = Lambda.size();
    const Eigen::Index nh = E.size();
    IdealMinimizer m{Eigen::MatrixXd::Zero(n, nh), Lambda, b, E};
    for (Eigen::Index k = 0; k < nh; ++k) {
        // Resonance: E_k on a grid point takes the whole weight (limit of the closed form).
        Eigen::Index hit = -1;
        for (Eigen::Index i = 0; i < n; ++i)
            if (E(k) == Lambda(i)) hit = i;
        if (hit >= 0) {
            m.g(hit, k) = b(k);
            continue;
        }
        // g_i = b w_i / sum_j w_j with w_i = (E_k - L_i)^{-2}; equivalent and overflow-free.
        double dmin = std::abs(E(k) - Lambda(0));
        for (Eigen::Index i = 1; i < n; ++i) dmin = std::min(dmin, std::abs(E(k) - Lambda(i)));
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r = dmin / (E(k) - Lambda(i));
            w(i) = r * r;
        }
        m.g.col(k) = b(k) * w / w.sum();
    }
    return m;
}

inline VarianceProfile ideal_variance_profile(const IdealMinimizer& m, const Eigen::VectorXd& E)
{
    if (E.size() != m.g.cols()) throw std::invalid_argument("ideal_variance_profile: size mismatch");
    VarianceProfile p;
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < m.g.rows(); ++i) {
        const Eigen::ArrayXd g2 = m.g.row(i).transpose().array().square();
        const double c2 = g2.sum();
        if (c2 <= 0.0) {
            p.sigma2.push_back(0.0);
            p.lambda.push_back(0.0);
            p.c2.push_back(0.0);
            p.empty.push_back(true);
            continue;
        }
        const double lambda = (g2 * E.array()).sum() / c2;
        const double s2 = (g2 * (E.array() - lambda).square()).sum() / c2;
        p.sigma2.push_back(s2);
        p.lambda.push_back(lambda);
        p.c2.push_back(c2);
        p.empty.push_back(false);
        num += c2 * s2;
        den += c2;
    }
    p.weighted_sigma2 = den > 0.0 ? num / den : 0.0;
    return p;
}

/// Sum_{i,k} g_{i,k}^2 (E_k - Lambda_i)^2
inline double ideal_objective(const Eigen::MatrixXd& g, const Eigen::VectorXd& E, const Eigen::VectorXd& Lambda)
{
    double acc = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index k = 0; k < g.cols(); ++k) {
            const double d = E(k) - Lambda(i);
            acc += g(i, k) * g(i, k) * d * d;
        }
    return acc;
}

}  // namespace cgsp
