// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: exact | project | train | dynamics | breakdown.

#include "cgsp/breakdown.hpp"
#include "cgsp/config.hpp"
#include "cgsp/dynamics.hpp"
#include "cgsp/exact.hpp"
#include "cgsp/io.hpp"
#include "cgsp/trainer.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace cgsp;
using json = nlohmann::json;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Context {
    std::string config_path;
    ExperimentConfig cfg;
    fs::path out;
    std::optional<fs::path> checkpoint;
    bool resume = false;
};

fs::path output_directory(const ExperimentConfig& cfg, const std::string& config_path, const std::string& command)
{
    if (!cfg.output_directory.empty()) return cfg.output_directory;
    const char* root = std::getenv("CGSP_OUTPUT_ROOT");
    return fs::path(root && *root ? root : "cgsp_output") / fs::path(config_path).stem() / command;
}

void echo_config(const Context& ctx)
{
    fs::create_directories(ctx.out);
    fs::copy_file(ctx.config_path, ctx.out / "config_input.json", fs::copy_options::overwrite_existing);
    write_json(ctx.out / "config.json", to_json(ctx.cfg));
}

Problem make_problem(const ExperimentConfig& cfg) { return Problem::build(cfg.model, cfg.n_up); }

StateVector initial_vector(const ExperimentConfig& cfg, const Problem& prob)
{
    return product_state_vector(*prob.basis, cfg.initial_state());
}

void write_observables(const fs::path& dir, const SectorBasis& basis, const std::vector<double>& ts,
                       const std::vector<StateVector>& states)
{
    CsvWriter mag(dir / "magnetization.csv", {"t", "k", "sigma_z"});
    CsvWriter cor(dir / "correlator.csv", {"t", "k", "corr_c"});
    const auto profiles = over_grid<std::pair<std::vector<double>, std::vector<double>>>(ts.size(), [&](std::size_t i) {
        return std::pair{magnetization(states[i], basis).values, correlator_profile(states[i], basis)};
    });
    for (std::size_t i = 0; i < ts.size(); ++i)
        for (int k = 0; k < basis.sites(); ++k) {
            mag.row({ts[i], static_cast<double>(k + 1), profiles[i].first[static_cast<std::size_t>(k)]});
            cor.row({ts[i], static_cast<double>(k + 1), profiles[i].second[static_cast<std::size_t>(k)]});
        }
}

int cmd_exact(const Context& ctx)
{
    echo_config(ctx);
    const auto prob = make_problem(ctx.cfg);
    const auto es = diagonalize(prob.H);
    const auto psi0 = initial_vector(ctx.cfg, prob);
    const auto b = es.spectral_weights(psi0);
    CsvWriter spec(ctx.out / "spectrum.csv", {"i", "E_i", "b2_i"});
    for (Eigen::Index i = 0; i < es.energies.size(); ++i)
        spec.row({static_cast<double>(i), es.energies(i), std::norm(b(i))});
    const auto ts = time_grid(0.0, ctx.cfg.t_max, ctx.cfg.dt);
    const auto states = over_grid<StateVector>(ts.size(), [&](std::size_t i) { return exact_evolve(es, psi0, ts[i]); });
    write_observables(ctx.out, *prob.basis, ts, states);
    std::cout << "dimension " << prob.basis->size() << ", E in [" << es.energies.minCoeff() << ", "
              << es.energies.maxCoeff() << "]\n";
    return 0;
}

int cmd_project(const Context& ctx)
{
    echo_config(ctx);
    const auto prob = make_problem(ctx.cfg);
    const auto es = diagonalize(prob.H);
    const auto psi0 = initial_vector(ctx.cfg, prob);
    const auto windows = SpectralWindows::covering(es.energies.minCoeff(), es.energies.maxCoeff(), ctx.cfg.N);
    const auto proj = exact_projection(es, psi0, windows);
    CsvWriter amp(ctx.out / "spectral_amplitudes.csv", {"i", "Lambda_i", "c2_i"});
    for (std::size_t i = 0; i < proj.size(); ++i)
        amp.row({static_cast<double>(i), proj.lambda[i], proj.c[i] * proj.c[i]});
    const auto dim = static_cast<Eigen::Index>(prob.basis->size());
    const auto ts = time_grid(0.0, ctx.cfg.t_max, ctx.cfg.dt);
    const auto errs = over_grid<double>(ts.size(), [&](std::size_t i) {
        return (exact_evolve(es, psi0, ts[i]) - proj.reconstruct(ts[i], dim)).norm();
    });
    CsvWriter err(ctx.out / "error.csv", {"t", "error", "bound"});
    for (std::size_t i = 0; i < ts.size(); ++i) err.row({ts[i], errs[i], windows.epsilon * ts[i] / 2.0});
    std::cout << "epsilon " << windows.epsilon << '\n';
    return 0;
}

// Model construction {{{

CgspModel<DenseEnsemble> make_dense(const ExperimentConfig& cfg, const Problem& prob)
{
    CounterRng rng(cfg.seed, 0xa);
    return {DenseEnsemble(prob.basis, initial_vector(cfg, prob), cfg.M, false, cfg.seed),
            MixingMatrix::random(cfg.N, cfg.M, rng)};
}

CgspModel<NaqsEnsemble> make_naqs(const ExperimentConfig& cfg)
{
    CounterRng rng(cfg.seed, 0xa);
    return {NaqsEnsemble(cfg.initial_state(), cfg.M, cfg.naqs, cfg.seed), MixingMatrix::random(cfg.N, cfg.M, rng)};
}

template <typename F>
int with_model(const ExperimentConfig& cfg, const Problem& prob, F&& fn)
{
    if (cfg.ansatz == AnsatzKind::dense) {
        auto model = make_dense(cfg, prob);
        return fn(model);
    }
    if (cfg.M < 1) throw config_error("cgsp.M: the naqs ansatz needs at least one trainable component");
    auto model = make_naqs(cfg);
    return fn(model);
}

fs::path checkpoint_path(const Context& ctx) { return ctx.checkpoint.value_or(ctx.out / "checkpoint.json"); }

// }}}

int cmd_train(const Context& ctx)
{
    echo_config(ctx);
    const auto prob = make_problem(ctx.cfg);
    const auto grid = build_lambda_grid(prob.H, ctx.cfg.N, ctx.cfg.lambda_margin);
    const auto fp = fingerprint(ctx.cfg);
    return with_model(ctx.cfg, prob, [&](auto& model) {
        TrainState state;
        const auto ckpt = checkpoint_path(ctx);
        if (ctx.resume) restore_checkpoint(read_json(ckpt), model, state, fp);

        // Keep the log consistent with the resumed iteration.
        const auto metrics_path = ctx.out / "metrics.jsonl";
        std::vector<std::string> kept;
        if (ctx.resume && fs::exists(metrics_path)) {
            std::ifstream in(metrics_path);
            for (std::string line; std::getline(in, line);)
                if (!line.empty() && json::parse(line).at("iter").template get<std::int64_t>() < state.iteration)
                    kept.push_back(line);
        }
        std::ofstream metrics(metrics_path, std::ios::trunc);
        for (const auto& line : kept) metrics << line << '\n';

        TrainCallbacks cb;
        cb.on_metrics = [&](const MetricRecord& r) { metrics << metrics_line(r) << '\n' << std::flush; };
        cb.on_checkpoint = [&](const TrainState& s) { save_atomically(ckpt, checkpoint_json(model, s, fp)); };
        train(model, grid, prob, ctx.cfg.train_config(), state, cb);

        json summary = {{"iterations", state.iteration}, {"seed", ctx.cfg.seed}, {"fingerprint", fp}};
        if (!state.metrics.empty()) summary["final_logged_loss"] = state.metrics.back().loss;
        if (prob.basis->size() <= kDefaultDenseCap) summary["exact_loss"] = exact_loss(model, grid, prob).loss;
        write_json(ctx.out / "summary.json", summary);
        std::cout << "trained to iteration " << state.iteration;
        if (summary.contains("exact_loss")) std::cout << ", exact loss " << summary["exact_loss"].template get<double>();
        std::cout << '\n';
        return 0;
    });
}

void write_decomposition_outputs(const Context& ctx, const Problem& prob, const SpectralDecomposition& dec,
                                 const std::vector<double>& Lambda, json& summary)
{
    CsvWriter amp(ctx.out / "spectral_amplitudes.csv", {"i", "Lambda_i", "c2_i", "lambda_i", "sigma2_i"});
    for (std::size_t i = 0; i < dec.size(); ++i)
        amp.row({static_cast<double>(i), i < Lambda.size() ? Lambda[i] : std::numeric_limits<double>::quiet_NaN(),
                 dec.c2[i], dec.lambda[i], dec.sigma2[i]});
    const auto ts = time_grid(0.0, ctx.cfg.t_max, ctx.cfg.dt);
    const auto states = over_grid<StateVector>(ts.size(), [&](std::size_t i) { return reconstruct(dec, ts[i]); });
    write_observables(ctx.out, *prob.basis, ts, states);

    const double sigma = std::sqrt(dec.weighted_sigma2());
    const double Tc = coherence_time(sigma);
    summary["sigma"] = sigma;
    summary["T_c"] = std::isfinite(Tc) ? json(Tc) : json("inf");
    summary["sum_c2"] = dec.total_c2();
    summary["overlap_bound"] = dec.overlap_bound();

    if (prob.basis->size() <= kDefaultDenseCap) {
        const auto es = diagonalize(prob.H);
        const auto psi0 = initial_vector(ctx.cfg, prob);
        const auto km = k_matrix(dec, prob.H);
        CsvWriter fid(ctx.out / "fidelity.csv", {"t", "fidelity", "error", "estimate"});
        const auto rows = over_grid<std::array<double, 2>>(ts.size(), [&](std::size_t i) {
            const StateVector ex = exact_evolve(es, psi0, ts[i]);
            return std::array<double, 2>{fidelity(ex, states[i]), (ex - states[i]).norm()};
        });
        for (std::size_t i = 0; i < ts.size(); ++i)
            fid.row({ts[i], rows[i][0], rows[i][1], std::sqrt(km.error_estimate(ts[i]))});
        if (std::isfinite(Tc))
            summary["fidelity_at_T_c"] = fidelity(exact_evolve(es, psi0, Tc), reconstruct(dec, Tc));
    }
    std::cout << "|sigma| " << sigma << ", T_c " << Tc << '\n';
}

int cmd_dynamics(const Context& ctx)
{
    echo_config(ctx);
    const auto prob = make_problem(ctx.cfg);
    const auto grid = build_lambda_grid(prob.H, ctx.cfg.N, ctx.cfg.lambda_margin);
    const auto fp = fingerprint(ctx.cfg);
    fs::path ckpt = ctx.checkpoint.value_or(output_directory(ctx.cfg, ctx.config_path, "train") / "checkpoint.json");
    return with_model(ctx.cfg, prob, [&](auto& model) {
        TrainState state;
        restore_checkpoint(read_json(ckpt), model, state, fp);
        const auto dec = SpectralDecomposition::from_components(prob.H, materialize(model, *prob.basis));
        json summary = {{"checkpoint", ckpt.string()}, {"iteration", state.iteration}, {"seed", ctx.cfg.seed}};
        std::vector<double> Lambda(grid.Lambda.data(), grid.Lambda.data() + grid.Lambda.size());
        write_decomposition_outputs(ctx, prob, dec, Lambda, summary);
        write_json(ctx.out / "summary.json", summary);
        return 0;
    });
}

int cmd_breakdown(const Context& ctx)
{
    echo_config(ctx);
    const auto prob = make_problem(ctx.cfg);
    const auto psi0 = initial_vector(ctx.cfg, prob);
    const auto tree = run_breakdown(prob, psi0, ctx.cfg.breakdown_config());
    write_tree(tree, ctx.out / "tree");
    std::vector<StateVector> leaves;
    for (int i : tree.leaves()) leaves.push_back(tree.nodes[static_cast<std::size_t>(i)].phi);
    const auto dec = SpectralDecomposition::from_components(prob.H, std::move(leaves));
    json summary = {{"nodes", tree.nodes.size()},
                    {"leaves", tree.leaves().size()},
                    {"nonempty_leaves", tree.nonempty_leaf_count()},
                    {"seed", ctx.cfg.seed}};
    for (const auto& n : tree.nodes)
        if (!n.warning.empty()) summary["warnings"][n.label] = n.warning;
    write_decomposition_outputs(ctx, prob, dec, {}, summary);
    write_json(ctx.out / "summary.json", summary);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Coarse-grained spectral projection of spin-chain quench dynamics"};
    app.require_subcommand(1);
    Context ctx;
    int threads = 0;
    std::string out_override, checkpoint;
    auto add = [&](const std::string& name, const std::string& help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("config", ctx.config_path, "Experiment configuration (JSON)")->required();
        sub->add_option("--threads", threads, "Worker thread cap (0: hardware default)")->check(CLI::NonNegativeNumber);
        sub->add_option("--output", out_override, "Output directory (overrides output.directory)");
        return sub;
    };
    add("exact", "Exact diagonalization, evolution and observables");
    add("project", "Exact windowed projection and its error bound");
    auto* train_cmd = add("train", "Train the CGSP decomposition");
    train_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file (default: <output>/checkpoint.json)");
    train_cmd->add_flag("--resume", ctx.resume, "Resume from the checkpoint");
    auto* dyn_cmd = add("dynamics", "Reconstruct dynamics from a trained checkpoint");
    dyn_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file (default: the train output)");
    add("breakdown", "Hierarchical decomposition tree");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    if (!checkpoint.empty()) ctx.checkpoint = checkpoint;
    set_num_threads(threads);

    try {
        ctx.cfg = load_config(ctx.config_path);
        ctx.out = out_override.empty() ? output_directory(ctx.cfg, ctx.config_path, command) : fs::path(out_override);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        if (command == "exact") return cmd_exact(ctx);
        if (command == "project") return cmd_project(ctx);
        if (command == "train") return cmd_train(ctx);
        if (command == "dynamics") return cmd_dynamics(ctx);
        return cmd_breakdown(ctx);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
