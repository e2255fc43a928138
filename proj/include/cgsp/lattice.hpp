// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file lattice.hpp
 * @brief Spin configurations, fixed-magnetization sector bases and the
 *        grouped (hexadecimal) encoding consumed by the autoregressive ansatz.
 *
 * Bit convention: site k (0-based) of an l-site chain is stored at bit
 * (l - 1 - k) of the integer code, so the code reads s_1 s_2 ... s_l as an
 * l-digit binary number with s_1 most significant. 0 = down, 1 = up.
 */

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cgsp {

using code_t = std::uint64_t;

inline constexpr int kMaxSites = 64;
inline constexpr std::size_t kDefaultSectorCap = 2'000'000;

class capacity_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** Binary spin pattern of an l-site chain. */
class SpinConfiguration {
public:
    SpinConfiguration() = default;
    SpinConfiguration(int sites, code_t code) : sites_(sites), code_(code)
    {
        if (sites < 1 || sites > kMaxSites) {
            throw std::invalid_argument("SpinConfiguration: site count out of range");
        }
        if (sites < 64 && (code >> sites) != 0) {
            throw std::invalid_argument("SpinConfiguration: code has bits beyond l");
        }
    }

    static SpinConfiguration from_bits(const std::vector<int>& bits)
    {
        code_t code = 0;
        for (int b : bits) {
            if (b != 0 && b != 1) {
                throw std::invalid_argument("SpinConfiguration: spin values must be 0 or 1");
            }
            code = (code << 1U) | static_cast<code_t>(b);
        }
        return {static_cast<int>(bits.size()), code};
    }

    /// Parses a bit-string such as "00001111" (site 1 first).
    static SpinConfiguration from_string(std::string_view text)
    {
        std::vector<int> bits;
        bits.reserve(text.size());
        for (char ch : text) {
            if (ch != '0' && ch != '1') {
                throw std::invalid_argument("SpinConfiguration: bit-string must contain only 0/1");
            }
            bits.push_back(ch - '0');
        }
        return from_bits(bits);
    }

    [[nodiscard]] int sites() const noexcept { return sites_; }
    [[nodiscard]] code_t code() const noexcept { return code_; }
    /// 1 for up, 0 for down.
    [[nodiscard]] int bit(int k) const noexcept { return static_cast<int>((code_ >> (sites_ - 1 - k)) & 1U); }
    /// +1 for up, -1 for down.
    [[nodiscard]] int spin(int k) const noexcept { return 2 * bit(k) - 1; }
    [[nodiscard]] int up_count() const noexcept { return std::popcount(code_); }

    [[nodiscard]] std::vector<int> bits() const
    {
        std::vector<int> out(static_cast<std::size_t>(sites_));
        for (int k = 0; k < sites_; ++k) out[static_cast<std::size_t>(k)] = bit(k);
        return out;
    }

    [[nodiscard]] std::string to_string() const
    {
        std::string out;
        for (int k = 0; k < sites_; ++k) out.push_back(static_cast<char>('0' + bit(k)));
        return out;
    }

    friend bool operator==(const SpinConfiguration&, const SpinConfiguration&) = default;

private:
    int sites_ = 0;
    code_t code_ = 0;
};

/// Bit mask of the site k of an l-site chain.
constexpr code_t site_mask(int sites, int k) noexcept
{
    return code_t{1} << static_cast<unsigned>(sites - 1 - k);
}

inline double binomial(int n, int k)
{
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

/**
 * All configurations of l sites with exactly n_up up spins, sorted by code.
 * Immutable after construction.
 */
class SectorBasis {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    SectorBasis(int sites, int n_up, std::size_t cap = kDefaultSectorCap) : sites_(sites), n_up_(n_up)
    {
        if (sites < 1 || sites > 62) throw std::invalid_argument("SectorBasis: l must be in [1, 62]");
        if (n_up < 0 || n_up > sites) throw std::invalid_argument("SectorBasis: n_up must be in [0, l]");
        const double dim = binomial(sites, n_up);
        if (dim > static_cast<double>(cap)) {
            throw capacity_error("SectorBasis: sector dimension " + std::to_string(static_cast<long long>(dim)) +
                                 " exceeds cap " + std::to_string(cap));
        }
        codes_.reserve(static_cast<std::size_t>(dim));
        if (n_up == 0) {
            codes_.push_back(0);
            return;
        }
        // Gosper's hack walks same-popcount codes in increasing order.
        code_t v = (code_t{1} << static_cast<unsigned>(n_up)) - 1;
        const code_t limit = code_t{1} << static_cast<unsigned>(sites);
        while (v < limit) {
            codes_.push_back(v);
            const code_t t = v | (v - 1);
            v = (t + 1) | (((~t & -~t) - 1) >> static_cast<unsigned>(std::countr_zero(v) + 1));
        }
    }

    [[nodiscard]] int sites() const noexcept { return sites_; }
    [[nodiscard]] int n_up() const noexcept { return n_up_; }
    [[nodiscard]] std::size_t size() const noexcept { return codes_.size(); }
    [[nodiscard]] const std::vector<code_t>& codes() const noexcept { return codes_; }
    [[nodiscard]] code_t code(std::size_t i) const { return codes_.at(i); }
    [[nodiscard]] SpinConfiguration state(std::size_t i) const { return {sites_, codes_.at(i)}; }

    /// Ordinal of a code in the sector, or npos when it is not a sector state.
    [[nodiscard]] std::size_t index_of(code_t code) const noexcept
    {
        auto it = std::lower_bound(codes_.begin(), codes_.end(), code);
        if (it == codes_.end() || *it != code) return npos;
        return static_cast<std::size_t>(it - codes_.begin());
    }
    [[nodiscard]] std::size_t index_of(const SpinConfiguration& s) const noexcept
    {
        if (s.sites() != sites_) return npos;
        return index_of(s.code());
    }
    [[nodiscard]] bool contains(code_t code) const noexcept { return index_of(code) != npos; }

private:
    int sites_;
    int n_up_;
    std::vector<code_t> codes_;
};

/// Permutation mu of the natural site order, stored 0-based.
class SpinOrder {
public:
    SpinOrder() = default;
    explicit SpinOrder(std::vector<int> mu) : mu_(std::move(mu))
    {
        std::vector<int> seen(mu_.size(), 0);
        for (int v : mu_) {
            if (v < 0 || static_cast<std::size_t>(v) >= mu_.size() || seen[static_cast<std::size_t>(v)]++) {
                throw std::invalid_argument("SpinOrder: not a permutation");
            }
        }
    }
    static SpinOrder identity(int sites)
    {
        std::vector<int> mu(static_cast<std::size_t>(sites));
        std::iota(mu.begin(), mu.end(), 0);
        return SpinOrder(std::move(mu));
    }
    static SpinOrder reversed(int sites)
    {
        std::vector<int> mu(static_cast<std::size_t>(sites));
        for (int k = 0; k < sites; ++k) mu[static_cast<std::size_t>(k)] = sites - 1 - k;
        return SpinOrder(std::move(mu));
    }

    [[nodiscard]] int sites() const noexcept { return static_cast<int>(mu_.size()); }
    [[nodiscard]] int operator[](int i) const noexcept { return mu_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const std::vector<int>& values() const noexcept { return mu_; }
    [[nodiscard]] bool is_identity() const noexcept
    {
        for (std::size_t i = 0; i < mu_.size(); ++i)
            if (mu_[i] != static_cast<int>(i)) return false;
        return true;
    }

private:
    std::vector<int> mu_;
};

/// Sequence of 4-bit groups h_1 ... h_{l/4}.
struct GroupedConfiguration {
    std::vector<std::uint8_t> groups;
    friend bool operator==(const GroupedConfiguration&, const GroupedConfiguration&) = default;
};

inline void require_groupable(int sites)
{
    if (sites % 4 != 0) throw std::invalid_argument("grouping requires l divisible by 4");
}

/// groups[j] packs spins s_{mu(4j)}..s_{mu(4j+3)}, first spin most significant.
inline GroupedConfiguration group_configuration(const SpinConfiguration& s, const SpinOrder& order)
{
    require_groupable(s.sites());
    if (order.sites() != s.sites()) throw std::invalid_argument("group_configuration: order length mismatch");
    const int n_groups = s.sites() / 4;
    GroupedConfiguration g;
    g.groups.resize(static_cast<std::size_t>(n_groups));
    for (int j = 0; j < n_groups; ++j) {
        unsigned v = 0;
        for (int b = 0; b < 4; ++b) v = (v << 1U) | static_cast<unsigned>(s.bit(order[4 * j + b]));
        g.groups[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(v);
    }
    return g;
}

inline SpinConfiguration ungroup_configuration(const GroupedConfiguration& g, const SpinOrder& order)
{
    const int sites = static_cast<int>(g.groups.size()) * 4;
    if (order.sites() != sites) throw std::invalid_argument("ungroup_configuration: order length mismatch");
    code_t code = 0;
    for (int j = 0; j < sites / 4; ++j) {
        const unsigned v = g.groups[static_cast<std::size_t>(j)];
        if (v > 15U) throw std::invalid_argument("ungroup_configuration: group value exceeds 15");
        for (int b = 0; b < 4; ++b) {
            if ((v >> static_cast<unsigned>(3 - b)) & 1U) code |= site_mask(sites, order[4 * j + b]);
        }
    }
    return {sites, code};
}

/// Domain wall: first half down, second half up.
inline SpinConfiguration domain_wall(int sites)
{
    code_t code = 0;
    for (int k = sites / 2; k < sites; ++k) code |= site_mask(sites, k);
    return {sites, code};
}

}  // namespace cgsp
