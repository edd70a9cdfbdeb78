#include <algorithm>
#include <numeric>
#include <random>

#include "ppgauth/cli.hpp"
#include "ppgauth/errors.hpp"

namespace ppgauth::cli {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) { return splitmix(seed ^ splitmix(tag)); }

constexpr std::uint64_t kEvalPairs = 0xe7a1;
constexpr std::uint64_t kRank1 = 0x4a41;
constexpr std::uint64_t kThreshold = 0x7e5d;

// Three distinct segments of one subject, preferring ones not used yet.
chaos01::FeatureImage draw_image(const net::SubjectSegments& s, const net::ImageSpec& spec, std::mt19937_64& rng,
                                 std::vector<bool>& used) {
    std::vector<std::size_t> fresh, all(s.segments.size());
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i : all)
        if (!used[i]) fresh.push_back(i);
    auto& pool = fresh.size() >= 3 ? fresh : all;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<signal::Segment> picked;
    for (std::size_t k = 0; k < 3; ++k) {
        used[pool[k]] = true;
        picked.push_back(s.segments[pool[k]]);
    }
    auto image = chaos01::featurize(picked, spec.params);
    image.provenance.subject_id = s.subject_id;
    return image;
}

}  // namespace

std::vector<signal::PpgRecord> acquire(const RunConfig& config) {
    const auto& d = config.dataset;
    if (d.ppg_dir.empty()) return acquire_session(config, 0, d.duration_s);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(d.ppg_dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<signal::PpgRecord> out;
    for (const auto& f : files) out.push_back(signal::read_record(f));
    if (out.empty()) throw InsufficientDataError("cli", "no records in " + d.ppg_dir);
    return out;
}

std::vector<signal::PpgRecord> acquire_session(const RunConfig& config, std::uint64_t session, double duration_s) {
    const auto& d = config.dataset;
    const auto profiles = signal::default_registry(d.subjects);
    std::vector<signal::PpgRecord> out;
    out.reserve(profiles.size());
    for (const auto& p : profiles)
        out.push_back(signal::synth_ppg(p, duration_s, derive(config.seed, 0x5e55 + session), d.sample_rate_hz));
    return out;
}

net::ImageSpec image_spec(const RunConfig& config) {
    return {config.model.input_hw, chaos01::channel_params(config.featurizer)};
}

Prepared prepare(const RunConfig& config, std::optional<net::SplitMode> split) {
    const auto records = acquire(config);
    Prepared p;
    p.data = net::build_dataset(records, config.mode,
                                {config.dataset.window_s, config.dataset.segments_per_window, config.seed});
    p.split = net::split_data(p.data, split.value_or(config.dataset.split), config.dataset.fractions, config.seed);
    return p;
}

TrainOutcome train_model(const RunConfig& config, const std::function<void(const net::EpochRecord&)>& on_epoch) {
    const auto prepared = prepare(config);
    const auto spec = image_spec(config);
    TrainOutcome out{net::SiameseModel(config.model), {}, {}};
    out.history = net::train(out.model, prepared.split.train, prepared.split.val, spec, config.train, on_epoch);

    // A larger validation pair set than early stopping uses; the threshold
    // estimate is noisy on a hundred pairs.
    const auto val =
        net::make_pairs(prepared.split.val, spec, config.eval.threshold_pairs, derive(config.seed, kThreshold));
    const auto scores = net::pair_scores(out.model, val);
    eval::ScoreSet set;
    for (std::size_t i = 0; i < scores.size(); ++i)
        (val.labels[i] > 0.5 ? set.genuine : set.impostor).push_back(scores[i]);
    out.validation = eval::eer(set);

    auto& m = out.model.metadata;
    m["run_config"] = to_json(config);
    m["history"] = net::history_json(out.history);
    m["best_epoch"] = out.history.best_epoch;
    m["validation_eer"] = out.validation.eer;
    m["eer_threshold"] = out.validation.threshold;
    return out;
}

EvalOutcome evaluate_model(const net::SiameseModel& model, const RunConfig& config,
                           std::optional<net::SplitMode> split) {
    const auto prepared = prepare(config, split);
    const auto spec = image_spec(config);
    const auto& test = prepared.split.test;

    EvalOutcome out;
    const auto pairs = net::make_pairs(test, spec, config.eval.pairs, derive(config.seed, kEvalPairs));
    const auto scores = net::pair_scores(model, pairs);
    for (std::size_t i = 0; i < scores.size(); ++i)
        (pairs.labels[i] > 0.5 ? out.scores.genuine : out.scores.impostor).push_back(scores[i]);

    std::optional<double> r1;
    if (config.eval.rank1 && test.size() >= 2) {
        std::mt19937_64 rng(derive(config.seed, kRank1));
        std::vector<std::pair<std::string, chaos01::FeatureImage>> gallery, probes;
        for (const auto& s : test) {
            if (s.segments.size() < 3) continue;
            std::vector<bool> used(s.segments.size(), false);
            gallery.emplace_back(s.subject_id, draw_image(s, spec, rng, used));
            for (int k = 0; k < config.eval.rank1_probes; ++k)
                probes.emplace_back(s.subject_id, draw_image(s, spec, rng, used));
        }
        r1 = eval::rank1(gallery, probes, model);
    }
    out.report = eval::evaluate(out.scores, r1);
    out.roc = eval::roc(out.scores);
    out.pr = eval::precision_recall_f1(out.scores);
    return out;
}

nlohmann::json report_json(const EvalOutcome& outcome, const RunConfig& config, net::SplitMode split) {
    auto j = eval::to_json(outcome.report);
    j["split"] = std::string(net::to_string(split));
    j["genuine_pairs"] = outcome.scores.genuine.size();
    j["impostor_pairs"] = outcome.scores.impostor.size();
    j["run_config"] = to_json(config);
    return j;
}

}  // namespace ppgauth::cli
