#include <cmath>
#include <fstream>
#include <set>

#include "ppgauth/cli.hpp"
#include "ppgauth/errors.hpp"

namespace ppgauth::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section, const std::set<std::string>& keys) {
    if (!j.is_object()) throw ConfigError("cli", section + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) throw ConfigError("cli", "unknown key '" + it.key() + "' in " + section);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("cli", section + "." + key + " has the wrong type");
    }
}

DatasetConfig dataset_from_json(const json& j) {
    check_keys(j, "dataset",
               {"subjects", "duration_s", "sample_rate_hz", "ppg_dir", "window_s", "segments_per_window", "split",
                "fractions"});
    DatasetConfig d;
    read(j, "subjects", d.subjects, "dataset");
    read(j, "duration_s", d.duration_s, "dataset");
    read(j, "sample_rate_hz", d.sample_rate_hz, "dataset");
    read(j, "ppg_dir", d.ppg_dir, "dataset");
    read(j, "window_s", d.window_s, "dataset");
    read(j, "segments_per_window", d.segments_per_window, "dataset");
    if (j.contains("split")) {
        std::string s;
        read(j, "split", s, "dataset");
        try {
            d.split = net::parse_split_mode(s);
        } catch (const Error& e) {
            throw ConfigError("cli", e.what());
        }
    }
    if (j.contains("fractions")) {
        const auto& f = j.at("fractions");
        check_keys(f, "dataset.fractions", {"train", "val", "test"});
        read(f, "train", d.fractions.train, "dataset.fractions");
        read(f, "val", d.fractions.val, "dataset.fractions");
        read(f, "test", d.fractions.test, "dataset.fractions");
    }
    if (d.subjects < 2) throw ConfigError("cli", "dataset.subjects must be at least 2");
    if (!(d.duration_s >= d.window_s) || !(d.window_s > 0.0))
        throw ConfigError("cli", "dataset.duration_s must cover at least one window");
    if (!(d.sample_rate_hz > 0.0)) throw ConfigError("cli", "dataset.sample_rate_hz must be positive");
    if (d.segments_per_window < 1) throw ConfigError("cli", "dataset.segments_per_window must be positive");
    const auto& f = d.fractions;
    if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
        throw ConfigError("cli", "dataset.fractions must be non-negative and sum to 1");
    return d;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    check_keys(j, "run config", {"seed", "dataset", "preprocess", "featurizer", "model", "train", "eval", "store"});
    if (!j.contains("seed")) throw ConfigError("cli", "run config needs a seed");
    RunConfig c;
    read(j, "seed", c.seed, "run config");
    if (j.contains("dataset")) c.dataset = dataset_from_json(j.at("dataset"));

    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        check_keys(p, "preprocess", {"mode"});
        std::string mode(signal::to_string(c.mode));
        read(p, "mode", mode, "preprocess");
        try {
            c.mode = signal::parse_preprocess_mode(mode);
        } catch (const Error& e) {
            throw ConfigError("cli", e.what());
        }
    }

    if (j.contains("featurizer")) {
        const auto& f = j.at("featurizer");
        check_keys(f, "featurizer", {"schedule", "c"});
        std::string schedule = "fixed";
        read(f, "schedule", schedule, "featurizer");
        if (schedule == "fixed")
            c.featurizer.kind = chaos01::CSchedule::Kind::Fixed;
        else if (schedule == "sweep")
            c.featurizer.kind = chaos01::CSchedule::Kind::Sweep;
        else
            throw ConfigError("cli", "featurizer.schedule must be fixed or sweep");
        read(f, "c", c.featurizer.fixed_c, "featurizer");
    }
    try {
        chaos01::channel_params(c.featurizer);
    } catch (const Error& e) {
        throw ConfigError("cli", std::string("featurizer: ") + e.what());
    }

    json model = j.value("model", json::object());
    if (!model.is_object()) throw ConfigError("cli", "model must be a JSON object");
    if (!model.contains("name")) model["name"] = "mini";
    if (!model.contains("rng_seed")) model["rng_seed"] = c.seed;
    c.model = net::model_config_from_json(model);

    json train = j.value("train", json::object());
    if (!train.is_object()) throw ConfigError("cli", "train must be a JSON object");
    if (!train.contains("seed")) train["seed"] = c.seed;
    c.train = net::train_config_from_json(train);

    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, "eval", {"pairs", "rank1", "rank1_probes", "threshold_pairs"});
        read(e, "pairs", c.eval.pairs, "eval");
        read(e, "rank1", c.eval.rank1, "eval");
        read(e, "rank1_probes", c.eval.rank1_probes, "eval");
        read(e, "threshold_pairs", c.eval.threshold_pairs, "eval");
        if (c.eval.pairs < 2 || c.eval.threshold_pairs < 2 || c.eval.rank1_probes < 1)
            throw ConfigError("cli", "eval.pairs and eval.threshold_pairs must be at least 2, eval.rank1_probes positive");
    }

    if (j.contains("store")) {
        const auto& s = j.at("store");
        check_keys(s, "store", {"dir", "overwrite"});
        read(s, "dir", c.store.dir, "store");
        read(s, "overwrite", c.store.overwrite, "store");
    }
    return c;
}

json to_json(const RunConfig& c) {
    const auto& d = c.dataset;
    return {
        {"seed", c.seed},
        {"dataset",
         {{"subjects", d.subjects},
          {"duration_s", d.duration_s},
          {"sample_rate_hz", d.sample_rate_hz},
          {"ppg_dir", d.ppg_dir},
          {"window_s", d.window_s},
          {"segments_per_window", d.segments_per_window},
          {"split", std::string(net::to_string(d.split))},
          {"fractions", {{"train", d.fractions.train}, {"val", d.fractions.val}, {"test", d.fractions.test}}}}},
        {"preprocess", {{"mode", std::string(signal::to_string(c.mode))}}},
        {"featurizer",
         {{"schedule", c.featurizer.kind == chaos01::CSchedule::Kind::Fixed ? "fixed" : "sweep"},
          {"c", c.featurizer.fixed_c}}},
        {"model", net::to_json(c.model)},
        {"train", net::to_json(c.train)},
        {"eval", {{"pairs", c.eval.pairs}, {"rank1", c.eval.rank1}, {"rank1_probes", c.eval.rank1_probes},
                  {"threshold_pairs", c.eval.threshold_pairs}}},
        {"store", {{"dir", c.store.dir}, {"overwrite", c.store.overwrite}}},
    };
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cli", "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("cli", path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

RunConfig config_of(const net::SiameseModel& model) {
    if (!model.metadata.is_object() || !model.metadata.contains("run_config"))
        throw ConfigError("cli", "model carries no run config");
    return run_config_from_json(model.metadata.at("run_config"));
}

}  // namespace ppgauth::cli
