// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file io.hpp
 * @brief CSV output, metrics lines, checkpoints and tree manifests.
 */

#pragma once

#include "cgsp/breakdown.hpp"
#include "cgsp/ensemble.hpp"
#include "cgsp/trainer.hpp"

#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgsp {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kManifestVersion = 1;

/// 17 significant digits, enough to round-trip a double.
inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path)
    {
        if (!out_) throw io_error("cannot write " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    void row(const std::vector<double>& values)
    {
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline std::string metrics_line(const MetricRecord& r)
{
    const nlohmann::json j = {
        {"iter", r.iter}, {"loss", r.loss}, {"loss_stderr", r.loss_stderr}, {"sum_c2", r.sum_c2}, {"seconds", r.seconds}};
    return j.dump();
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw io_error(path.string() + ": " + e.what());
    }
}

// Checkpoints {{{

template <Ensemble E>
nlohmann::json checkpoint_json(const CgspModel<E>& model, const TrainState& state, std::uint64_t fp)
{
    const auto theta = model.get_parameters();
    nlohmann::json arrays = nlohmann::json::array();
    for (const auto& b : model.layout().blocks()) {
        std::vector<double> data(theta.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                 theta.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size));
        arrays.push_back({{"name", b.name}, {"shape", b.shape}, {"data", data}});
    }
    std::vector<double> w(state.sampler_weights.data(), state.sampler_weights.data() + state.sampler_weights.size());
    return {{"format", "cgsp-checkpoint"},
            {"version", kCheckpointVersion},
            {"fingerprint", fp},
            {"iteration", state.iteration},
            {"seed", state.seed},
            {"arrays", arrays},
            {"optimizer", {{"step", state.adam.step}, {"m", state.adam.m}, {"v", state.adam.v}}},
            {"sampler_weights", w}};
}

/// Restores parameters and optimizer state; arrays are matched by name and shape.
template <Ensemble E>
void restore_checkpoint(const nlohmann::json& j, CgspModel<E>& model, TrainState& state, std::uint64_t fp)
{
    try {
        if (j.at("format") != "cgsp-checkpoint") throw io_error("checkpoint: unknown format");
        if (j.at("version").get<int>() != kCheckpointVersion) throw io_error("checkpoint: unsupported version");
        if (j.at("fingerprint").get<std::uint64_t>() != fp)
            throw io_error("checkpoint: fingerprint does not match the configuration");
        std::vector<double> theta(model.parameter_count());
        for (const auto& b : model.layout().blocks()) {
            const nlohmann::json* found = nullptr;
            for (const auto& a : j.at("arrays"))
                if (a.at("name") == b.name) found = &a;
            if (!found) throw io_error("checkpoint: missing array " + b.name);
            if (found->at("shape").get<std::vector<std::size_t>>() != b.shape)
                throw io_error("checkpoint: shape mismatch for " + b.name);
            const auto data = found->at("data").get<std::vector<double>>();
            if (data.size() != b.size) throw io_error("checkpoint: size mismatch for " + b.name);
            std::copy(data.begin(), data.end(), theta.begin() + static_cast<std::ptrdiff_t>(b.offset));
        }
        model.set_parameters(theta);
        state.iteration = j.at("iteration").get<std::int64_t>();
        state.seed = j.at("seed").get<std::uint64_t>();
        state.adam.step = j.at("optimizer").at("step").get<std::uint64_t>();
        state.adam.m = j.at("optimizer").at("m").get<std::vector<double>>();
        state.adam.v = j.at("optimizer").at("v").get<std::vector<double>>();
        const auto w = j.at("sampler_weights").get<std::vector<double>>();
        state.sampler_weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("checkpoint: ") + e.what());
    }
}

/// Writes to a temporary file and renames, so a crash never leaves a torn checkpoint.
inline void save_atomically(const std::filesystem::path& path, const nlohmann::json& j)
{
    auto tmp = path;
    tmp += ".tmp";
    write_json(tmp, j);
    std::filesystem::rename(tmp, path);
}

// }}}

// Tree manifests {{{

inline nlohmann::json state_json(const StateVector& v)
{
    std::vector<double> re(static_cast<std::size_t>(v.size())), im(re.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        re[static_cast<std::size_t>(i)] = v(i).real();
        im[static_cast<std::size_t>(i)] = v(i).imag();
    }
    return {{"re", re}, {"im", im}};
}

inline StateVector state_from_json(const nlohmann::json& j)
{
    const auto re = j.at("re").get<std::vector<double>>();
    const auto im = j.at("im").get<std::vector<double>>();
    if (re.size() != im.size()) throw io_error("state: re/im length mismatch");
    StateVector v(static_cast<Eigen::Index>(re.size()));
    for (std::size_t i = 0; i < re.size(); ++i) v(static_cast<Eigen::Index>(i)) = cplx(re[i], im[i]);
    return v;
}

/// Manifest plus one state file per node under dir/states.
inline void write_tree(const CgspTree& tree, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir / "states");
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
        const std::string file = "states/" + n.label + ".json";
        write_json(dir / file, state_json(n.phi));
        nlohmann::json e = {{"label", n.label},
                            {"parent", n.parent < 0 ? nlohmann::json(nullptr)
                                                    : nlohmann::json(tree.nodes[static_cast<std::size_t>(n.parent)].label)},
                            {"depth", n.depth},
                            {"c2", n.c2},
                            {"lambda", std::isfinite(n.lambda) ? nlohmann::json(n.lambda) : nlohmann::json(nullptr)},
                            {"sigma2", n.sigma2},
                            {"leaf", n.is_leaf()},
                            {"warning", n.warning},
                            {"final_loss", n.final_loss ? nlohmann::json(*n.final_loss) : nlohmann::json(nullptr)},
                            {"state", file}};
        nodes.push_back(std::move(e));
    }
    write_json(dir / "manifest.json", {{"format", "cgsp-tree"},
                                        {"version", kManifestVersion},
                                        {"threshold", tree.threshold},
                                        {"depth", tree.depth},
                                        {"nodes", nodes}});
}

inline CgspTree read_tree(const std::filesystem::path& dir)
{
    const auto j = read_json(dir / "manifest.json");
    CgspTree tree;
    try {
        if (j.at("format") != "cgsp-tree") throw io_error("manifest: unknown format");
        if (j.at("version").get<int>() != kManifestVersion) throw io_error("manifest: unsupported version");
        tree.threshold = j.at("threshold").get<double>();
        tree.depth = j.at("depth").get<int>();
        for (const auto& e : j.at("nodes")) {
            TreeNode n;
            n.label = e.at("label").get<std::string>();
            if (!e.at("parent").is_null()) {
                n.parent = tree.find(e.at("parent").get<std::string>());
                if (n.parent < 0) throw io_error("manifest: parent listed after child " + n.label);
                tree.nodes[static_cast<std::size_t>(n.parent)].children.push_back(static_cast<int>(tree.nodes.size()));
            }
            n.depth = e.at("depth").get<int>();
            n.c2 = e.at("c2").get<double>();
            n.lambda = e.at("lambda").is_null() ? std::numeric_limits<double>::quiet_NaN() : e.at("lambda").get<double>();
            n.sigma2 = e.at("sigma2").get<double>();
            n.warning = e.at("warning").get<std::string>();
            if (!e.at("final_loss").is_null()) n.final_loss = e.at("final_loss").get<double>();
            n.phi = state_from_json(read_json(dir / e.at("state").get<std::string>()));
            tree.nodes.push_back(std::move(n));
        }
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("manifest: ") + e.what());
    }
    return tree;
}

// }}}

}  // namespace cgsp
