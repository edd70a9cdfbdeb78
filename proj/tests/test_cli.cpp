#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "ppgauth/cli.hpp"
#include "ppgauth/errors.hpp"
#include "ppgauth/net/model_io.hpp"

using namespace ppgauth;
using namespace ppgauth::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "ppgauth");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

json quick_config() {
    return {{"seed", 3},
            {"dataset", {{"subjects", 4}, {"duration_s", 60}}},
            {"model", {{"name", "tiny"}}},
            {"train", {{"epochs", 2}, {"steps_per_epoch", 3}, {"val_pairs", 6}, {"learning_rate", 1e-3}}},
            {"eval", {{"pairs", 10}, {"rank1_probes", 1}}}};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run config defaults and validation") {
    const auto c = run_config_from_json({{"seed", 11}});
    CHECK(c.seed == 11);
    CHECK(c.model.name == "mini");
    CHECK(c.model.rng_seed == 11);
    CHECK(c.train.seed == 11);
    CHECK(c.dataset.subjects == 8);
    CHECK(c.mode == signal::PreprocessMode::Band05_8Norm);

    CHECK_THROWS_AS(run_config_from_json(json::object()), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"extra", 2}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"dataset", {{"subject", 4}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"model", {{"blocks", 4}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"train", {{"lr", 4}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"preprocess", {{"mode", "loud"}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"seed", 1}, {"featurizer", {{"c", 7.0}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"seed", "x"}}), ConfigError);
    CHECK_THROWS_AS(
        run_config_from_json({{"seed", 1}, {"dataset", {{"fractions", {{"train", 0.9}, {"val", 0.2}, {"test", 0.2}}}}}}),
        ConfigError);
}

TEST_CASE("resolved config round-trips") {
    const auto c = run_config_from_json(quick_config());
    const auto j = to_json(c);
    CHECK(to_json(run_config_from_json(j)) == j);
    CHECK(j["model"]["name"] == "tiny");
    CHECK(j["train"]["seed"] == 3);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(invoke({}) == 2);
    CHECK(invoke({"bogus"}) == 2);
    CHECK(invoke({"synth"}) == 2);
    CHECK(invoke({"synth", "--out", "x", "--subjects", "many"}) == 2);
    CHECK(invoke({"eval", "--model", "m", "--report", "r", "--split", "sideways"}) == 2);
    CHECK(invoke({"--help"}) == 0);
}

TEST_CASE("synth is deterministic") {
    TempDir dir("ppgauth_cli_synth");
    CHECK(invoke({"synth", "--subjects", "3", "--duration", "12", "--seed", "7", "--out", (dir.path / "a").string()}) == 0);
    CHECK(invoke({"synth", "--subjects", "3", "--duration", "12", "--seed", "7", "--out", (dir.path / "b").string()}) == 0);
    for (const char* f : {"S01.csv", "S02.csv", "S03.csv"}) {
        REQUIRE(fs::exists(dir.path / "a" / f));
        CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
    }
    CHECK_FALSE(fs::exists(dir.path / "a" / "S04.csv"));
    CHECK(signal::read_record(dir.path / "a" / "S02.csv").size() == 3000);
}

TEST_CASE("preprocess and featurize") {
    TempDir dir("ppgauth_cli_feat");
    const auto in = (dir.path / "S01.csv").string();
    signal::write_record(signal::synth_ppg(signal::default_registry(1)[0], 12.0, 1), in);
    CHECK(invoke({"preprocess", "--in", in, "--mode", "band05_8", "--out", (dir.path / "f.csv").string()}) == 0);
    CHECK(invoke({"featurize", "--in", in, "--out", (dir.path / "img.pqi").string()}) == 0);
    CHECK(chaos01::read_pqi(dir.path / "img.pqi").data.size() == 299u * 299u * 3u);
    CHECK(invoke({"featurize", "--in", in, "--pgm", "--out", (dir.path / "img").string()}) == 0);
    CHECK(fs::exists(dir.path / "img_c2.pgm"));
    CHECK(invoke({"featurize", "--in", in, "--png", "--pgm"}) == 2);
    CHECK(invoke({"featurize", "--in", (dir.path / "missing.csv").string()}) == 1);
}

TEST_CASE("train, eval, enroll, verify and identify") {
    TempDir dir("ppgauth_cli_flow");
    const auto cfg = dir.path / "run.json";
    std::ofstream(cfg) << quick_config().dump();
    const auto model = (dir.path / "m.snm").string();
    REQUIRE(invoke({"train", "--config", cfg.string(), "--out", model}) == 0);
    CHECK(fs::exists(dir.path / "m.history.json"));
    const auto m = net::load_model(model);
    CHECK(m.metadata["run_config"] == to_json(run_config_from_json(quick_config())));
    CHECK(m.metadata.contains("eer_threshold"));

    // Identical config, identical bytes.
    const auto again = (dir.path / "m2.snm").string();
    REQUIRE(invoke({"train", "--config", cfg.string(), "--out", again}) == 0);
    CHECK(slurp(model) == slurp(again));

    for (const char* split : {"data-disjoint", "user-disjoint"}) {
        const auto report = dir.path / (std::string(split) + ".json");
        REQUIRE(invoke({"eval", "--model", model, "--split", split, "--report", report.string()}) == 0);
        const auto r = json::parse(slurp(report));
        for (const char* k : {"eer", "eer_threshold", "precision", "recall", "f1", "auc_roc", "rank1"})
            CHECK(r.contains(k));
        CHECK(r["split"] == split);
        CHECK(r["run_config"] == m.metadata["run_config"]);
        CHECK(fs::exists(dir.path / (std::string(split) + ".roc.csv")));
        CHECK(fs::exists(dir.path / (std::string(split) + ".pr.csv")));
    }

    const auto probe = (dir.path / "S01.csv").string();
    signal::write_record(signal::synth_ppg(signal::default_registry(2)[0], 12.0, 99), probe);
    const auto store = (dir.path / "templates").string();
    CHECK(invoke({"enroll", "--store", store, "--model", model, "--ppg", probe, "--id", "S01"}) == 0);
    CHECK(invoke({"enroll", "--store", store, "--model", model, "--ppg", probe, "--id", "S01"}) == 1);
    CHECK(invoke({"enroll", "--store", store, "--model", model, "--ppg", probe}) == 2);
    CHECK(invoke({"verify", "--store", store, "--model", model, "--ppg", probe, "--id", "S01", "--threshold", "0"}) == 0);
    CHECK(invoke({"verify", "--store", store, "--model", model, "--ppg", probe, "--id", "S01", "--threshold", "1.5"}) ==
          3);
    CHECK(invoke({"verify", "--store", store, "--model", model, "--ppg", probe, "--id", "S02"}) == 1);
    CHECK(invoke({"identify", "--store", store, "--model", model, "--ppg", probe}) == 0);
    CHECK(invoke({"identify", "--store", (dir.path / "empty").string(), "--model", model, "--ppg", probe}) == 1);
}

}
