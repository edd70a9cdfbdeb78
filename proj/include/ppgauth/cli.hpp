#pragma once

// Run configuration, the synth -> train -> eval pipeline and the command-line
// front end.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgauth/chaos01.hpp"
#include "ppgauth/eval.hpp"
#include "ppgauth/net/data.hpp"
#include "ppgauth/net/model.hpp"
#include "ppgauth/net/train.hpp"
#include "ppgauth/signal.hpp"

namespace ppgauth::cli {

struct DatasetConfig {
    std::size_t subjects = 8;
    double duration_s = 60.0;
    double sample_rate_hz = signal::kDefaultSampleRateHz;
    /// Read every record file in this directory instead of synthesizing.
    std::string ppg_dir;
    double window_s = 12.0;
    std::size_t segments_per_window = 30;
    net::SplitMode split = net::SplitMode::DataDisjoint;
    net::SplitFractions fractions;
};

struct EvalConfig {
    /// Balanced genuine/impostor pairs drawn from the test partition.
    int pairs = 200;
    bool rank1 = true;
    int rank1_probes = 4;
    /// Validation pairs behind the stored decision threshold.
    int threshold_pairs = 1000;
};

struct StoreConfig {
    std::string dir = "templates";
    bool overwrite = false;
};

struct RunConfig {
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    signal::PreprocessMode mode = signal::PreprocessMode::Band05_8Norm;
    chaos01::CSchedule featurizer;
    /// Defaults to the `mini` preset; rng_seed defaults to `seed`.
    net::ModelConfig model = net::ModelConfig::mini();
    /// train.seed defaults to `seed`.
    net::TrainConfig train;
    EvalConfig eval;
    StoreConfig store;
};

/// `seed` is mandatory; every other field is defaulted. Unknown keys are
/// rejected with ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
/// The fully resolved config; parsing it back yields the same RunConfig.
nlohmann::json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);
/// The config a model was trained with, from its metadata.
RunConfig config_of(const net::SiameseModel& model);

/// One record per subject: synthesized from the default registry, or read
/// from `dataset.ppg_dir` in file-name order.
std::vector<signal::PpgRecord> acquire(const RunConfig& config);
/// Fresh acquisitions of the registry subjects: same profiles, a different
/// noise and heart-rate draw for every `session`.
std::vector<signal::PpgRecord> acquire_session(const RunConfig& config, std::uint64_t session, double duration_s);

net::ImageSpec image_spec(const RunConfig& config);

struct Prepared {
    net::SegmentDataset data;
    net::DataSplit split;
};
Prepared prepare(const RunConfig& config, std::optional<net::SplitMode> split = std::nullopt);

struct TrainOutcome {
    net::SiameseModel model;
    net::TrainHistory history;
    /// EER working point on the validation pairs, stored in the model.
    eval::EerResult validation;
};

/// Trains, calibrates the threshold on validation pairs and records the run
/// config, history and threshold in the model metadata.
TrainOutcome train_model(const RunConfig& config,
                         const std::function<void(const net::EpochRecord&)>& on_epoch = {});

struct EvalOutcome {
    eval::ScoreSet scores;
    eval::MetricsReport report;
    eval::RocCurve roc;
    std::vector<eval::PrPoint> pr;
};

/// Scores balanced pairs of the test partition and, when enabled, rank-1
/// identification of its subjects.
EvalOutcome evaluate_model(const net::SiameseModel& model, const RunConfig& config,
                           std::optional<net::SplitMode> split = std::nullopt);
/// The metrics report with the run config and split echoed.
nlohmann::json report_json(const EvalOutcome& outcome, const RunConfig& config, net::SplitMode split);

/// Entry point of the `ppgauth` tool. Exit codes: 0 success, 1 domain error,
/// 2 usage error, 3 verification reject.
int run(int argc, const char* const* argv);

}  // namespace ppgauth::cli
