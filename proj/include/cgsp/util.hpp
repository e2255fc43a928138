// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file util.hpp
 * @brief Parameter layouts, counter-based random streams and a chunked
 *        parallel loop whose results do not depend on the worker count.
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cgsp {

// Parameter layout {{{

struct ParamBlock {
    std::string name;
    std::vector<std::size_t> shape;  ///< row-major
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Named, shaped views into one flat parameter vector.
class ParamLayout {
public:
    std::size_t add(std::string name, std::vector<std::size_t> shape)
    {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        blocks_.push_back({std::move(name), std::move(shape), total_, n});
        total_ += n;
        return blocks_.back().offset;
    }

    [[nodiscard]] std::size_t total() const noexcept { return total_; }
    [[nodiscard]] const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }

    [[nodiscard]] const ParamBlock& find(const std::string& name) const
    {
        for (const auto& b : blocks_)
            if (b.name == name) return b;
        throw std::out_of_range("ParamLayout: no block named " + name);
    }

    /// Name of the block that owns flat index i.
    [[nodiscard]] std::string owner(std::size_t i) const
    {
        for (const auto& b : blocks_)
            if (i >= b.offset && i < b.offset + b.size) return b.name + "[" + std::to_string(i - b.offset) + "]";
        return "<out of range>";
    }

    /// Appends another layout, shifting its offsets.
    void append(const ParamLayout& other, const std::string& prefix = {})
    {
        for (const auto& b : other.blocks_) add(prefix + b.name, b.shape);
    }

private:
    std::vector<ParamBlock> blocks_;
    std::size_t total_ = 0;
};

// }}}

// Random streams {{{

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept
{
    return mix64(a ^ (mix64(b) + 0x632be59bd9b4e019ULL + (a << 6U) + (a >> 2U)));
}

inline std::uint64_t hash_string(const std::string& s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(h);
}

/// Uniform double in [0, 1) keyed by (seed, a, b).
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept
{
    const std::uint64_t x = hash_combine(hash_combine(seed, a), b);
    return static_cast<double>(x >> 11U) * 0x1.0p-53;
}

/// Sequential stream over counter_uniform; portable across standard libraries.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(hash_combine(seed, stream)) {}

    double uniform() noexcept { return counter_uniform(seed_, counter_++, 0); }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() noexcept
    {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// }}}

// Parallel loop {{{

namespace detail {
inline std::atomic<int>& thread_setting()
{
    static std::atomic<int> n{0};
    return n;
}

inline bool& in_worker()
{
    thread_local bool flag = false;
    return flag;
}
}  // namespace detail

/// Caps worker threads; 0 restores the hardware default.
inline void set_num_threads(int n) { detail::thread_setting() = std::max(0, n); }

inline int num_threads()
{
    const int n = detail::thread_setting();
    if (n > 0) return n;
    return std::max(1U, std::thread::hardware_concurrency());
}

/**
 * Calls fn(chunk) for chunk in [0, n_chunks). Chunks are independent; any
 * reduction over their results must be done by the caller in chunk order.
 * Nested calls from a worker run serially.
 */
inline void parallel_chunks(std::size_t n_chunks, const std::function<void(std::size_t)>& fn)
{
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), n_chunks);
    if (workers <= 1 || detail::in_worker()) {
        for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            detail::in_worker() = true;
            for (std::size_t c = next++; c < n_chunks; c = next++) {
                if (failed) return;
                try {
                    fn(c);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Number of fixed-size chunks covering n items.
constexpr std::size_t chunk_count(std::size_t n, std::size_t chunk) noexcept { return (n + chunk - 1) / chunk; }

// }}}

}  // namespace cgsp
