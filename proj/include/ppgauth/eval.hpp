#pragma once

// Verification and identification metrics. A comparison is accepted iff its
// score is at least the threshold.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgauth/chaos01.hpp"
#include "ppgauth/net/model.hpp"

namespace ppgauth::eval {

struct ScoreSet {
    std::vector<double> genuine;
    std::vector<double> impostor;
};

/// Sorted distinct scores framed by -inf and +inf.
std::vector<double> thresholds(const ScoreSet& scores);

struct Rates {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    double fnr = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Rates rates_at(const ScoreSet& scores, double threshold);

struct RocPoint {
    double threshold, fpr, tpr;
};

struct RocCurve {
    /// Ordered by decreasing threshold, from (0,0) to (1,1).
    std::vector<RocPoint> points;
    double auc = 0.0;
};

RocCurve roc(const ScoreSet& scores);

struct PrPoint {
    double threshold, precision, recall, f1;
};

struct PrfAt {
    double precision, recall, f1;
};

/// Precision is 1 when nothing is accepted; f1 is 0 when P + R = 0.
PrfAt precision_recall_f1_at(const ScoreSet& scores, double threshold);
std::vector<PrPoint> precision_recall_f1(const ScoreSet& scores);

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

/// First sign change of FPR - FNR over the threshold sweep, both rates
/// interpolated linearly between the bracketing thresholds. When the rates
/// coincide over a whole interval the threshold is the interval's midpoint.
EerResult eer(const ScoreSet& scores);

/// scores[p][g] is probe p against gallery entry g. A probe is a hit iff
/// its true identity alone holds the maximum score; ties count as misses.
double rank1(std::span<const std::string> gallery_ids, std::span<const std::string> probe_ids,
             const std::vector<std::vector<double>>& scores);

/// Scores every probe image against every gallery image with the model.
double rank1(std::span<const std::pair<std::string, chaos01::FeatureImage>> gallery,
             std::span<const std::pair<std::string, chaos01::FeatureImage>> probes, const net::SiameseModel& model);

struct MetricsReport {
    double eer = 0.0;
    double eer_threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc_roc = 0.0;
    std::optional<double> rank1;
};

MetricsReport evaluate(const ScoreSet& scores, std::optional<double> rank1 = std::nullopt);

/// Keys eer, eer_threshold, precision, recall, f1, auc_roc, rank1 (null
/// when absent).
nlohmann::json to_json(const MetricsReport& report);

/// threshold,fpr,tpr
void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);
/// threshold,precision,recall,f1
void write_pr_csv(const std::vector<PrPoint>& curve, const std::filesystem::path& path);

}  // namespace ppgauth::eval
