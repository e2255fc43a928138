// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsp/config.hpp"
#include "cgsp/io.hpp"

#include "catch_amalgamated.hpp"

#include <filesystem>

using namespace cgsp;
using Catch::Matchers::ContainsSubstring;
using json = nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("cgsp_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("defaults")
{
    const auto c = parse_config(json::object());
    CHECK(c.model.sites == 8);
    CHECK(c.n_up == 4);
    CHECK(c.initial_state().to_string() == "00001111");
    CHECK(c.batch == 4000);
    CHECK(c.lr == 1e-3);
    CHECK(c.gamma == 0.5);
    CHECK(c.weight_refresh == 50);
}

TEST_CASE("diagnostics name the offending key")
{
    auto bad = [](const char* text) {
        try {
            parse_config(json::parse(text));
        } catch (const config_error& e) {
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    CHECK_THAT(bad(R"({"model": {"l": 1}})"), ContainsSubstring("model.l"));
    CHECK_THAT(bad(R"({"model": {"J": 0}})"), ContainsSubstring("model.J"));
    CHECK_THAT(bad(R"({"model": {"l": "eight"}})"), ContainsSubstring("model.l"));
    CHECK_THAT(bad(R"({"quench": {"initial_configuration": "0011"}})"), ContainsSubstring("initial_configuration"));
    CHECK_THAT(bad(R"({"sector": {"n_up": 3}})"), ContainsSubstring("sector.n_up"));
    CHECK_THAT(bad(R"({"cgsp": {"N": 0}})"), ContainsSubstring("cgsp.N"));
    CHECK_THAT(bad(R"({"cgsp": {"ansatz": "rbm"}})"), ContainsSubstring("cgsp.ansatz"));
    CHECK_THAT(bad(R"({"model": {"l": 6}, "quench": {"initial_configuration": "000111"}, "cgsp": {"ansatz": "naqs"}})"),
               ContainsSubstring("cgsp.naqs"));
    CHECK_THAT(bad(R"({"train": {"mode": "mc"}})"), ContainsSubstring("train.mode"));
    CHECK_THAT(bad(R"({"sampler": {"gamma": 1.5}})"), ContainsSubstring("sampler.gamma"));
    CHECK_THAT(bad(R"({"breakdown": {"threshold": -1}})"), ContainsSubstring("breakdown.threshold"));
    CHECK_THAT(bad(R"({"dynamics": {"dt": 0}})"), ContainsSubstring("dynamics.dt"));
    CHECK_THAT(bad(R"([1, 2])"), ContainsSubstring("top level"));
}

TEST_CASE("resolved config round-trips")
{
    const auto c = parse_config(json::parse(R"({"model": {"l": 4, "Delta": 0.5}, "cgsp": {"ansatz": "naqs", "M": 2}})"));
    CHECK(c.mode == LossMode::mc);
    const auto again = parse_config(to_json(c));
    CHECK(to_json(again) == to_json(c));
    CHECK(fingerprint(again) == fingerprint(c));
    auto other = c;
    other.model.Delta = 0.6;
    CHECK(fingerprint(other) != fingerprint(c));
    auto train_only = c;
    train_only.iterations = 5;
    CHECK(fingerprint(train_only) == fingerprint(c));
}

TEST_CASE("csv formatting keeps full precision")
{
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    const auto dir = scratch("csv");
    {
        CsvWriter w(dir / "x.csv", {"t", "k", "sigma_z"});
        w.row({0.5, 1, -1.0 / 3.0});
    }
    std::ifstream in(dir / "x.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "t,k,sigma_z");
    CHECK(row == "0.5,1,-0.33333333333333331");
}

TEST_CASE("metrics line")
{
    MetricRecord r;
    r.iter = 3;
    r.loss = 0.25;
    const auto j = json::parse(metrics_line(r));
    CHECK(j.at("iter") == 3);
    CHECK(j.at("loss") == 0.25);
    for (const char* key : {"loss_stderr", "sum_c2", "seconds"}) CHECK(j.contains(key));
}

TEST_CASE("checkpoint round-trip and fingerprint guard")
{
    XxzParams p;
    const auto prob = Problem::build(p, 4);
    CounterRng rng(1, 0);
    NaqsConfig nc;
    nc.channels = {4, 4, 4};
    nc.merge_channels = 4;
    nc.head_hidden = 3;
    CgspModel<NaqsEnsemble> model(NaqsEnsemble(domain_wall(8), 2, nc, 1), MixingMatrix::random(4, 2, rng));
    TrainConfig tc;
    tc.iterations = 3;
    tc.batch = 64;
    tc.mode = LossMode::mc;
    TrainState st;
    train(model, build_lambda_grid(prob.H, 4), prob, tc, st);

    const auto dir = scratch("ckpt");
    save_atomically(dir / "checkpoint.json", checkpoint_json(model, st, 42));
    CgspModel<NaqsEnsemble> fresh(NaqsEnsemble(domain_wall(8), 2, nc, 7), MixingMatrix::zeros(4, 2));
    TrainState st2;
    restore_checkpoint(read_json(dir / "checkpoint.json"), fresh, st2, 42);
    CHECK(fresh.get_parameters() == model.get_parameters());
    CHECK(st2.iteration == 3);
    CHECK(st2.adam.m == st.adam.m);
    CHECK(st2.adam.v == st.adam.v);
    CHECK(st2.adam.step == st.adam.step);
    CHECK(st2.sampler_weights == st.sampler_weights);
    CHECK_THROWS_WITH(restore_checkpoint(read_json(dir / "checkpoint.json"), fresh, st2, 43), ContainsSubstring("fingerprint"));
    auto j = read_json(dir / "checkpoint.json");
    j["arrays"][0]["shape"] = {1};
    CHECK_THROWS_WITH(restore_checkpoint(j, fresh, st2, 42), ContainsSubstring("shape"));
}

TEST_CASE("tree manifest round-trip")
{
    XxzParams p;
    const auto prob = Problem::build(p, 4);
    const StateVector psi0 = product_state_vector(*prob.basis, domain_wall(8));
    BreakdownConfig bc;
    bc.depth = 1;
    bc.windows = {4};
    const auto tree = run_breakdown(prob, psi0, bc);
    const auto dir = scratch("tree");
    write_tree(tree, dir);
    const auto back = read_tree(dir);
    REQUIRE(back.nodes.size() == tree.nodes.size());
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        CHECK(back.nodes[i].label == tree.nodes[i].label);
        CHECK(back.nodes[i].parent == tree.nodes[i].parent);
        CHECK(back.nodes[i].children == tree.nodes[i].children);
        CHECK(back.nodes[i].phi == tree.nodes[i].phi);
        CHECK((back.nodes[i].lambda == tree.nodes[i].lambda ||
               (std::isnan(back.nodes[i].lambda) && std::isnan(tree.nodes[i].lambda))));
    }
    CHECK(leaf_reconstruct(back, 1.5) == leaf_reconstruct(tree, 1.5));
}
