#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "ppgauth/cli.hpp"
#include "ppgauth/errors.hpp"
#include "ppgauth/net/model_io.hpp"
#include "ppgauth/store.hpp"

namespace ppgauth::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kDomainError = 1;
constexpr int kUsageError = 2;
constexpr int kReject = 3;

void write_json(const json& j, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ParameterError("cli", "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw ParameterError("cli", "write failed for " + path.string());
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
    auto p = path;
    p.replace_extension();
    return p.string() + suffix;
}

struct Options {
    // synth
    std::size_t subjects = 8;
    double duration = 60.0;
    std::uint64_t seed = 0;
    std::string format = "csv";
    // shared
    std::string in, out, mode = "band05_8_norm", config, model, report, split, history, store, ppg, id;
    double c = chaos01::kDefaultC;
    bool png = false, pgm = false, overwrite = false;
    std::optional<double> threshold;
    std::optional<std::uint64_t> created_at;
};

int do_synth(const Options& o) {
    RunConfig config;
    config.seed = o.seed;
    config.dataset.subjects = o.subjects;
    config.dataset.duration_s = o.duration;
    if (o.subjects < 1) throw ParameterError("cli", "--subjects must be positive");
    fs::create_directories(o.out);
    for (const auto& r : acquire_session(config, 0, o.duration)) {
        const auto path = fs::path(o.out) / (r.subject_id + "." + o.format);
        signal::write_record(r, path);
        std::cout << path.string() << '\n';
    }
    return 0;
}

int do_preprocess(const Options& o) {
    const auto record = signal::preprocess(signal::read_record(o.in), signal::parse_preprocess_mode(o.mode));
    signal::write_record(record, o.out);
    return 0;
}

int do_featurize(const Options& o) {
    const auto record = signal::read_record(o.in);
    chaos01::CSchedule schedule;
    schedule.fixed_c = o.c;
    const auto image = store::protocol_image(record, signal::parse_preprocess_mode(o.mode),
                                             chaos01::channel_params(schedule));
    const fs::path out = o.out.empty() ? fs::path(o.in).replace_extension(".pqi") : fs::path(o.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    if (o.png || o.pgm) {
        for (int ch = 0; ch < image.channels; ++ch) {
            const auto path = sibling(out, "_c" + std::to_string(ch) + (o.png ? ".png" : ".pgm"));
            if (o.png)
                chaos01::write_png(image.channel(ch), path);
            else
                chaos01::write_pgm(image.channel(ch), path);
            std::cout << path.string() << '\n';
        }
    } else {
        chaos01::write_pqi(image, out);
        std::cout << out.string() << '\n';
    }
    return 0;
}

int do_train(const Options& o) {
    const auto config = load_run_config(o.config);
    auto outcome = train_model(config, [](const net::EpochRecord& e) {
        std::cerr << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss << '\n';
    });
    net::save_model(outcome.model, o.out);
    json history{{"epochs", net::history_json(outcome.history)},
                 {"best_epoch", outcome.history.best_epoch},
                 {"best_val_loss", outcome.history.best_val_loss},
                 {"stopped_early", outcome.history.stopped_early},
                 {"validation_eer", outcome.validation.eer},
                 {"eer_threshold", outcome.validation.threshold},
                 {"run_config", to_json(config)}};
    write_json(history, o.history.empty() ? sibling(o.out, ".history.json") : fs::path(o.history));
    std::cout << json{{"model", o.out},
                      {"version_hash", net::to_hex(net::version_hash(outcome.model))},
                      {"best_epoch", outcome.history.best_epoch},
                      {"eer_threshold", outcome.validation.threshold}}
                     .dump()
              << '\n';
    return 0;
}

int do_eval(const Options& o) {
    const auto model = net::load_model(o.model);
    const auto config = o.config.empty() ? config_of(model) : load_run_config(o.config);
    const auto split = o.split.empty() ? config.dataset.split : net::parse_split_mode(o.split);
    const auto outcome = evaluate_model(model, config, split);
    const auto report = report_json(outcome, config, split);
    write_json(report, o.report);
    eval::write_roc_csv(outcome.roc, sibling(o.report, ".roc.csv"));
    eval::write_pr_csv(outcome.pr, sibling(o.report, ".pr.csv"));
    std::cout << eval::to_json(outcome.report).dump() << '\n';
    return 0;
}

store::EnrollOptions enroll_options(const net::SiameseModel& model, const Options& o) {
    store::EnrollOptions opt;
    if (model.metadata.contains("run_config")) {
        const auto config = config_of(model);
        opt.mode = config.mode;
        opt.params = chaos01::channel_params(config.featurizer);
    }
    opt.overwrite = o.overwrite;
    opt.created_at = o.created_at;
    return opt;
}

int do_enroll(const Options& o) {
    const auto model = net::load_model(o.model);
    store::TemplateStore st(o.store);
    const auto t = store::enroll(st, o.id, signal::read_record(o.ppg), model, enroll_options(model, o));
    std::cout << json{{"subject_id", t.subject_id},
                      {"path", st.path_for(t.subject_id).string()},
                      {"mode", std::string(signal::to_string(t.mode))},
                      {"c", t.c_values},
                      {"model_hash", net::to_hex(t.model_hash)}}
                     .dump()
              << '\n';
    return 0;
}

int do_verify(const Options& o) {
    const auto model = net::load_model(o.model);
    const store::TemplateStore st(o.store);
    const auto r = store::verify(st, o.id, signal::read_record(o.ppg), model, o.threshold);
    const bool accept = r.decision == store::Decision::Accept;
    std::cout << json{{"subject_id", o.id},
                      {"score", r.score},
                      {"threshold", r.threshold},
                      {"decision", accept ? "accept" : "reject"}}
                     .dump()
              << '\n';
    return accept ? 0 : kReject;
}

int do_identify(const Options& o) {
    const auto model = net::load_model(o.model);
    const store::TemplateStore st(o.store);
    auto ranked = json::array();
    for (const auto& [id, score] : store::identify(st, signal::read_record(o.ppg), model))
        ranked.push_back({{"subject_id", id}, {"score", score}});
    std::cout << ranked.dump() << '\n';
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"PPG biometric authentication: 0-1 test images and a Siamese network", "ppgauth"};
    app.require_subcommand(1);
    Options o;
    const std::string modes = "raw|band01_8|band05_8|band05_8_norm";

    auto* synth = app.add_subcommand("synth", "synthesize one PPG record per subject");
    synth->add_option("--subjects", o.subjects, "number of subjects")->capture_default_str();
    synth->add_option("--duration", o.duration, "seconds per record")->capture_default_str();
    synth->add_option("--seed", o.seed, "acquisition seed")->capture_default_str();
    synth->add_option("--out", o.out, "output directory")->required();
    synth->add_option("--format", o.format, "csv or ppg")->check(CLI::IsMember({"csv", "ppg"}))->capture_default_str();

    auto* pre = app.add_subcommand("preprocess", "filter and normalize a record");
    pre->add_option("--in", o.in, "input record (.csv or .ppg)")->required();
    pre->add_option("--mode", o.mode, modes)->capture_default_str();
    pre->add_option("--out", o.out, "output record")->required();

    auto* feat = app.add_subcommand("featurize", "feature image of the first 12 s of a record");
    feat->add_option("--in", o.in, "input record")->required();
    feat->add_option("--mode", o.mode, modes)->capture_default_str();
    feat->add_option("--c", o.c, "rotation parameter for every channel")->capture_default_str();
    feat->add_option("--out", o.out, "output path (default: input with .pqi)");
    auto* png = feat->add_flag("--png", o.png, "write one PNG per channel");
    feat->add_flag("--pgm", o.pgm, "write one PGM per channel")->excludes(png);

    auto* train = app.add_subcommand("train", "train a model from a run config");
    train->add_option("--config", o.config, "run config JSON")->required();
    train->add_option("--out", o.out, "model file")->required();
    train->add_option("--history", o.history, "history JSON (default: <model>.history.json)");

    auto* ev = app.add_subcommand("eval", "metrics of a model on the test partition");
    ev->add_option("--model", o.model, "model file")->required();
    ev->add_option("--split", o.split, "user-disjoint or data-disjoint (default: the training split)")
        ->check(CLI::IsMember({"user-disjoint", "data-disjoint"}));
    ev->add_option("--report", o.report, "report JSON; curves go to <report>.roc.csv and .pr.csv")->required();
    ev->add_option("--config", o.config, "run config (default: the one stored in the model)");

    auto add_store_options = [&](CLI::App* cmd, bool needs_id) {
        cmd->add_option("--store", o.store, "template directory")->required();
        cmd->add_option("--model", o.model, "model file")->required();
        cmd->add_option("--ppg", o.ppg, "12 s record")->required();
        auto* id = cmd->add_option("--id", o.id, "subject id");
        if (needs_id) id->required();
    };
    auto* enroll = app.add_subcommand("enroll", "store a subject's template");
    add_store_options(enroll, true);
    enroll->add_flag("--overwrite", o.overwrite, "replace an existing template");
    enroll->add_option("--created-at", o.created_at, "template timestamp, UTC seconds (default: now)");
    auto* verify = app.add_subcommand("verify", "check an identity claim; exit 0 accept, 3 reject");
    add_store_options(verify, true);
    verify->add_option("--threshold", o.threshold, "decision threshold (default: the model's)");
    auto* identify = app.add_subcommand("identify", "rank enrolled subjects for a record");
    add_store_options(identify, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*synth) return do_synth(o);
        if (*pre) return do_preprocess(o);
        if (*feat) return do_featurize(o);
        if (*train) return do_train(o);
        if (*ev) return do_eval(o);
        if (*enroll) return do_enroll(o);
        if (*verify) return do_verify(o);
        if (*identify) return do_identify(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDomainError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDomainError;
    }
    return kUsageError;
}

}  // namespace ppgauth::cli
