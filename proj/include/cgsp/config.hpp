// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file config.hpp
 * @brief Experiment configuration: a nested JSON document resolved against
 *        defaults and validated at parse time.
 */

#pragma once

#include "cgsp/breakdown.hpp"
#include "cgsp/hamiltonian.hpp"
#include "cgsp/lattice.hpp"
#include "cgsp/naqs.hpp"
#include "cgsp/sampler.hpp"
#include "cgsp/trainer.hpp"

#include "json.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgsp {

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class AnsatzKind { dense, naqs };

struct ExperimentConfig {
    XxzParams model;
    int n_up = -1;  ///< resolved from the initial configuration when absent
    std::string initial_configuration;  ///< empty means the domain wall
    int M = 8;
    int N = 16;
    double lambda_margin = 0.0;
    AnsatzKind ansatz = AnsatzKind::dense;
    NaqsConfig naqs;
    int iterations = 1000;
    std::size_t batch = kDefaultBatch;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;
    LossMode mode = LossMode::exact;
    double gamma = kDefaultGamma;
    int weight_refresh = 50;
    int breakdown_depth = 1;
    double breakdown_threshold = 0.1;
    std::vector<int> breakdown_windows;  ///< empty means N at every level
    BreakdownBackend breakdown_backend = BreakdownBackend::exact;
    double t_max = 5.0;
    double dt = 0.25;
    std::string output_directory;

    [[nodiscard]] SpinConfiguration initial_state() const
    {
        if (initial_configuration.empty()) return domain_wall(model.sites);
        return SpinConfiguration::from_string(initial_configuration);
    }

    [[nodiscard]] TrainConfig train_config() const
    {
        TrainConfig t;
        t.iterations = iterations;
        t.batch = batch;
        t.adam.lr = lr;
        t.seed = seed;
        t.checkpoint_every = checkpoint_every;
        t.mode = mode;
        t.gamma = gamma;
        t.weight_refresh = weight_refresh;
        return t;
    }

    [[nodiscard]] BreakdownConfig breakdown_config() const
    {
        BreakdownConfig b;
        b.depth = breakdown_depth;
        b.threshold = breakdown_threshold;
        b.windows = breakdown_windows.empty() ? std::vector<int>{N} : breakdown_windows;
        b.backend = breakdown_backend;
        b.seed = seed;
        b.trainable = M;
        b.lambda_margin = lambda_margin;
        b.train = train_config();
        return b;
    }
};

namespace detail {

template <typename T>
T field(const nlohmann::json& section, const std::string& path, const char* key, T fallback)
{
    if (!section.contains(key)) return fallback;
    try {
        return section.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error(path + "." + key + ": wrong type");
    }
}

inline const nlohmann::json& section(const nlohmann::json& doc, const char* key)
{
    static const nlohmann::json empty = nlohmann::json::object();
    if (!doc.contains(key)) return empty;
    if (!doc.at(key).is_object()) throw config_error(std::string(key) + ": expected an object");
    return doc.at(key);
}

inline void require(bool ok, const std::string& message)
{
    if (!ok) throw config_error(message);
}

}  // namespace detail

/// Parses and validates; every violation names the offending key.
inline ExperimentConfig parse_config(const nlohmann::json& doc)
{
    using detail::field;
    using detail::require;
    if (!doc.is_object()) throw config_error("config: top level must be an object");
    ExperimentConfig c;

    const auto& model = detail::section(doc, "model");
    c.model.sites = field(model, "model", "l", c.model.sites);
    c.model.J = field(model, "model", "J", c.model.J);
    c.model.Delta = field(model, "model", "Delta", c.model.Delta);
    c.model.h = field(model, "model", "h", c.model.h);
    c.model.periodic = field(model, "model", "periodic", c.model.periodic);
    require(c.model.sites >= 2 && c.model.sites <= kMaxSites, "model.l: must lie in [2, 64]");
    require(std::isfinite(c.model.J) && c.model.J != 0.0, "model.J: must be finite and nonzero");
    require(std::isfinite(c.model.Delta), "model.Delta: must be finite");
    require(std::isfinite(c.model.h), "model.h: must be finite");

    const auto& quench = detail::section(doc, "quench");
    c.initial_configuration = field(quench, "quench", "initial_configuration", std::string());
    if (!c.initial_configuration.empty()) {
        require(static_cast<int>(c.initial_configuration.size()) == c.model.sites,
                "quench.initial_configuration: length differs from model.l");
        require(c.initial_configuration.find_first_not_of("01") == std::string::npos,
                "quench.initial_configuration: must contain only 0/1");
    }
    const int ups = c.initial_state().up_count();
    const auto& sector = detail::section(doc, "sector");
    c.n_up = field(sector, "sector", "n_up", ups);
    require(c.n_up >= 0 && c.n_up <= c.model.sites, "sector.n_up: must lie in [0, l]");
    require(c.n_up == ups, "sector.n_up: initial configuration lies outside the sector");

    const auto& cgsp = detail::section(doc, "cgsp");
    c.M = field(cgsp, "cgsp", "M", c.M);
    c.N = field(cgsp, "cgsp", "N", c.N);
    c.lambda_margin = field(cgsp, "cgsp", "lambda_margin", c.lambda_margin);
    const auto ansatz = field(cgsp, "cgsp", "ansatz", std::string("dense"));
    require(c.M >= 0, "cgsp.M: must be >= 0");
    require(c.N >= 1, "cgsp.N: must be >= 1");
    require(std::isfinite(c.lambda_margin) && c.lambda_margin >= 0.0, "cgsp.lambda_margin: must be >= 0");
    if (ansatz == "dense") {
        c.ansatz = AnsatzKind::dense;
    } else if (ansatz == "naqs") {
        c.ansatz = AnsatzKind::naqs;
    } else {
        throw config_error("cgsp.ansatz: expected \"dense\" or \"naqs\"");
    }
    if (cgsp.contains("naqs")) {
        const auto& nq = cgsp.at("naqs");
        require(nq.is_object(), "cgsp.naqs: expected an object");
        c.naqs.dilations = field(nq, "cgsp.naqs", "dilations", c.naqs.dilations);
        const auto L = c.naqs.dilations.size();
        c.naqs.kernels.assign(L, field(nq, "cgsp.naqs", "kernel", 2));
        c.naqs.channels.assign(L, field(nq, "cgsp.naqs", "channels", 32));
        c.naqs.merge_channels = field(nq, "cgsp.naqs", "merge_channels", c.naqs.merge_channels);
        c.naqs.head_hidden = field(nq, "cgsp.naqs", "head_hidden", c.naqs.head_hidden);
        c.naqs.complex_amplitudes = field(nq, "cgsp.naqs", "complex", false);
        c.naqs.spin_order = field(nq, "cgsp.naqs", "spin_order", c.naqs.spin_order);
    }
    if (c.ansatz == AnsatzKind::naqs) {
        try {
            c.naqs.validate(c.model.sites);
            if (!c.naqs.spin_order.empty()) (void)SpinOrder(c.naqs.spin_order);
        } catch (const std::exception& e) {
            throw config_error(std::string("cgsp.naqs: ") + e.what());
        }
    }

    const auto& train = detail::section(doc, "train");
    c.iterations = field(train, "train", "iterations", c.iterations);
    c.batch = field(train, "train", "batch", c.batch);
    c.lr = field(train, "train", "lr", c.lr);
    c.seed = field(train, "train", "seed", c.seed);
    c.checkpoint_every = field(train, "train", "checkpoint_every", c.checkpoint_every);
    const auto mode = field(train, "train", "mode", std::string(c.ansatz == AnsatzKind::naqs ? "mc" : "exact"));
    require(c.iterations >= 0, "train.iterations: must be >= 0");
    require(c.batch >= 1, "train.batch: must be >= 1");
    require(std::isfinite(c.lr) && c.lr > 0.0, "train.lr: must be positive");
    require(c.checkpoint_every >= 0, "train.checkpoint_every: must be >= 0");
    if (mode == "exact") {
        c.mode = LossMode::exact;
    } else if (mode == "mc") {
        c.mode = LossMode::mc;
        require(c.ansatz == AnsatzKind::naqs, "train.mode: \"mc\" requires cgsp.ansatz \"naqs\"");
    } else {
        throw config_error("train.mode: expected \"exact\" or \"mc\"");
    }

    const auto& sampler = detail::section(doc, "sampler");
    c.gamma = field(sampler, "sampler", "gamma", c.gamma);
    c.weight_refresh = field(sampler, "sampler", "weight_refresh", c.weight_refresh);
    require(std::isfinite(c.gamma) && c.gamma > 0.0 && c.gamma <= 1.0, "sampler.gamma: must lie in (0, 1]");
    require(c.weight_refresh >= 1, "sampler.weight_refresh: must be >= 1");

    const auto& bd = detail::section(doc, "breakdown");
    c.breakdown_depth = field(bd, "breakdown", "depth", c.breakdown_depth);
    c.breakdown_threshold = field(bd, "breakdown", "threshold", c.breakdown_threshold);
    c.breakdown_windows = field(bd, "breakdown", "windows", c.breakdown_windows);
    const auto backend = field(bd, "breakdown", "backend", std::string("exact"));
    require(c.breakdown_depth >= 0, "breakdown.depth: must be >= 0");
    require(std::isfinite(c.breakdown_threshold) && c.breakdown_threshold >= 0.0, "breakdown.threshold: must be >= 0");
    for (int n : c.breakdown_windows) require(n >= 1, "breakdown.windows: entries must be >= 1");
    if (backend == "exact") {
        c.breakdown_backend = BreakdownBackend::exact;
    } else if (backend == "dense") {
        c.breakdown_backend = BreakdownBackend::dense;
    } else {
        throw config_error("breakdown.backend: expected \"exact\" or \"dense\"");
    }

    const auto& dyn = detail::section(doc, "dynamics");
    c.t_max = field(dyn, "dynamics", "t_max", c.t_max);
    c.dt = field(dyn, "dynamics", "dt", c.dt);
    require(std::isfinite(c.t_max) && c.t_max >= 0.0, "dynamics.t_max: must be >= 0");
    require(std::isfinite(c.dt) && c.dt > 0.0, "dynamics.dt: must be positive");

    const auto& out = detail::section(doc, "output");
    c.output_directory = field(out, "output", "directory", std::string());
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    return parse_config(doc);
}

/// Fully resolved configuration, defaults included.
inline nlohmann::json to_json(const ExperimentConfig& c)
{
    nlohmann::json j;
    j["model"] = {{"l", c.model.sites}, {"J", c.model.J}, {"Delta", c.model.Delta}, {"h", c.model.h},
                  {"periodic", c.model.periodic}};
    j["sector"] = {{"n_up", c.n_up}};
    j["quench"] = {{"initial_configuration", c.initial_state().to_string()}};
    j["cgsp"] = {{"M", c.M},
                 {"N", c.N},
                 {"lambda_margin", c.lambda_margin},
                 {"ansatz", c.ansatz == AnsatzKind::dense ? "dense" : "naqs"},
                 {"naqs",
                  {{"dilations", c.naqs.dilations},
                   {"kernel", c.naqs.kernels.empty() ? 2 : c.naqs.kernels.front()},
                   {"channels", c.naqs.channels.empty() ? 32 : c.naqs.channels.front()},
                   {"merge_channels", c.naqs.merge_channels},
                   {"head_hidden", c.naqs.head_hidden},
                   {"complex", c.naqs.complex_amplitudes},
                   {"spin_order", c.naqs.spin_order}}}};
    j["train"] = {{"iterations", c.iterations},
                  {"batch", c.batch},
                  {"lr", c.lr},
                  {"seed", c.seed},
                  {"checkpoint_every", c.checkpoint_every},
                  {"mode", c.mode == LossMode::exact ? "exact" : "mc"}};
    j["sampler"] = {{"gamma", c.gamma}, {"weight_refresh", c.weight_refresh}};
    j["breakdown"] = {{"depth", c.breakdown_depth},
                      {"threshold", c.breakdown_threshold},
                      {"windows", c.breakdown_windows},
                      {"backend", c.breakdown_backend == BreakdownBackend::exact ? "exact" : "dense"}};
    j["dynamics"] = {{"t_max", c.t_max}, {"dt", c.dt}};
    j["output"] = {{"directory", c.output_directory}};
    return j;
}

/// Hash of everything that shapes the trained parameters' meaning.
inline std::uint64_t fingerprint(const ExperimentConfig& c)
{
    const auto j = to_json(c);
    nlohmann::json key = {{"model", j["model"]}, {"sector", j["sector"]}, {"quench", j["quench"]}, {"cgsp", j["cgsp"]}};
    return hash_string(key.dump());
}

}  // namespace cgsp
