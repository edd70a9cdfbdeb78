#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "ppgauth/binary_io.hpp"
#include "ppgauth/errors.hpp"
#include "ppgauth/eval.hpp"
#include "ppgauth/net/data.hpp"

namespace ppgauth::eval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(const ScoreSet& s) {
    if (s.genuine.empty() || s.impostor.empty())
        throw ParameterError("eval", "score set needs at least one genuine and one impostor score");
    for (const auto* v : {&s.genuine, &s.impostor})
        for (double x : *v)
            if (std::isnan(x)) throw ParameterError("eval", "score set contains NaN");
}

/// Rates over the threshold sweep using sorted copies, O(n log n).
struct Sweep {
    std::vector<double> gen, imp;
    explicit Sweep(const ScoreSet& s) : gen(s.genuine), imp(s.impostor) {
        std::sort(gen.begin(), gen.end());
        std::sort(imp.begin(), imp.end());
    }
    // count of values >= t
    static std::size_t at_least(const std::vector<double>& v, double t) {
        return static_cast<std::size_t>(v.end() - std::lower_bound(v.begin(), v.end(), t));
    }
    Rates at(double t) const {
        Rates r;
        r.threshold = t;
        r.tp = at_least(gen, t);
        r.fn = gen.size() - r.tp;
        r.fp = at_least(imp, t);
        r.tn = imp.size() - r.fp;
        r.tpr = static_cast<double>(r.tp) / static_cast<double>(gen.size());
        r.fnr = static_cast<double>(r.fn) / static_cast<double>(gen.size());
        r.fpr = static_cast<double>(r.fp) / static_cast<double>(imp.size());
        return r;
    }
};

PrfAt prf(const Rates& r) {
    const double accepted = static_cast<double>(r.tp + r.fp);
    const double p = accepted > 0 ? static_cast<double>(r.tp) / accepted : 1.0;
    const double rec = r.tpr;
    const double f1 = p + rec > 0 ? 2 * p * rec / (p + rec) : 0.0;
    return {p, rec, f1};
}

}  // namespace

std::vector<double> thresholds(const ScoreSet& scores) {
    require(scores);
    std::vector<double> t;
    t.reserve(scores.genuine.size() + scores.impostor.size() + 2);
    t.push_back(-kInf);
    t.insert(t.end(), scores.genuine.begin(), scores.genuine.end());
    t.insert(t.end(), scores.impostor.begin(), scores.impostor.end());
    t.push_back(kInf);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

Rates rates_at(const ScoreSet& scores, double threshold) {
    require(scores);
    return Sweep(scores).at(threshold);
}

RocCurve roc(const ScoreSet& scores) {
    const auto ts = thresholds(scores);
    const Sweep sweep(scores);
    RocCurve curve;
    for (auto it = ts.rbegin(); it != ts.rend(); ++it) {
        const Rates r = sweep.at(*it);
        curve.points.push_back({*it, r.fpr, r.tpr});
    }
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        curve.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return curve;
}

PrfAt precision_recall_f1_at(const ScoreSet& scores, double threshold) {
    return prf(rates_at(scores, threshold));
}

std::vector<PrPoint> precision_recall_f1(const ScoreSet& scores) {
    const auto ts = thresholds(scores);
    const Sweep sweep(scores);
    std::vector<PrPoint> out;
    out.reserve(ts.size());
    for (double t : ts) {
        const auto m = prf(sweep.at(t));
        out.push_back({t, m.precision, m.recall, m.f1});
    }
    return out;
}

EerResult eer(const ScoreSet& scores) {
    const auto ts = thresholds(scores);
    const Sweep sweep(scores);
    std::vector<Rates> r;
    r.reserve(ts.size());
    for (double t : ts) r.push_back(sweep.at(t));
    // FPR - FNR falls from 1 at -inf to -1 at +inf.
    std::size_t k = 1;
    while (r[k].fpr - r[k].fnr > 0) ++k;
    const Rates& lo = r[k - 1];
    const Rates& hi = r[k];
    const double d_lo = lo.fpr - lo.fnr;
    const double d_hi = hi.fpr - hi.fnr;
    if (d_hi == 0.0) {
        std::size_t last = k;
        while (last + 1 < r.size() && r[last + 1].fpr - r[last + 1].fnr == 0.0) ++last;
        const double a = lo.threshold, b = r[last].threshold;
        const double t = std::isfinite(a) ? (std::isfinite(b) ? (a + b) / 2.0 : a) : b;
        return {hi.fpr, t};
    }
    const double lambda = d_lo / (d_lo - d_hi);
    const double rate = lo.fpr + lambda * (hi.fpr - lo.fpr);
    double t;
    if (std::isfinite(lo.threshold) && std::isfinite(hi.threshold))
        t = lo.threshold + lambda * (hi.threshold - lo.threshold);
    else
        t = std::isfinite(hi.threshold) ? hi.threshold : lo.threshold;
    return {rate, t};
}

double rank1(std::span<const std::string> gallery_ids, std::span<const std::string> probe_ids,
             const std::vector<std::vector<double>>& scores) {
    if (gallery_ids.empty()) throw ParameterError("eval", "rank-1 needs a non-empty gallery");
    if (probe_ids.empty()) throw ParameterError("eval", "rank-1 needs at least one probe");
    if (scores.size() != probe_ids.size()) throw ShapeError("eval", "one score row per probe expected");
    std::size_t hits = 0;
    for (std::size_t p = 0; p < probe_ids.size(); ++p) {
        if (std::find(gallery_ids.begin(), gallery_ids.end(), probe_ids[p]) == gallery_ids.end())
            throw ParameterError("eval", "probe label '" + probe_ids[p] + "' is not in the gallery");
        const auto& row = scores[p];
        if (row.size() != gallery_ids.size()) throw ShapeError("eval", "one score per gallery entry expected");
        const double best = *std::max_element(row.begin(), row.end());
        std::size_t winners = 0;
        bool correct = false;
        for (std::size_t g = 0; g < row.size(); ++g)
            if (row[g] == best) {
                ++winners;
                correct = correct || gallery_ids[g] == probe_ids[p];
            }
        if (correct && winners == 1) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(probe_ids.size());
}

double rank1(std::span<const std::pair<std::string, chaos01::FeatureImage>> gallery,
             std::span<const std::pair<std::string, chaos01::FeatureImage>> probes, const net::SiameseModel& model) {
    const int hw = model.config().input_hw;
    std::vector<chaos01::FeatureImage> gi, pi;
    std::vector<std::string> gid, pid;
    for (const auto& [id, img] : gallery) {
        gid.push_back(id);
        gi.push_back(img);
    }
    for (const auto& [id, img] : probes) {
        pid.push_back(id);
        pi.push_back(img);
    }
    if (gi.empty() || pi.empty()) throw ParameterError("eval", "rank-1 needs gallery and probes");
    const auto eg = model.embed(net::images_to_batch<float>(gi, hw));
    const auto ep = model.embed(net::images_to_batch<float>(pi, hw));
    const std::size_t f = eg.item_size();
    std::vector<std::vector<double>> scores(pi.size(), std::vector<double>(gi.size()));
    for (std::size_t p = 0; p < pi.size(); ++p)
        for (std::size_t g = 0; g < gi.size(); ++g) {
            net::Tensor a({1, eg.dim(1), eg.dim(2), eg.dim(3)}), b(a.shape);
            std::copy_n(ep.data() + p * f, f, a.data());
            std::copy_n(eg.data() + g * f, f, b.data());
            scores[p][g] = model.score_embeddings(a, b)[0];
        }
    return rank1(gid, pid, scores);
}

MetricsReport evaluate(const ScoreSet& scores, std::optional<double> rank1) {
    MetricsReport m;
    const auto e = eer(scores);
    m.eer = e.eer;
    m.eer_threshold = e.threshold;
    const auto p = precision_recall_f1_at(scores, e.threshold);
    m.precision = p.precision;
    m.recall = p.recall;
    m.f1 = p.f1;
    m.auc_roc = roc(scores).auc;
    m.rank1 = rank1;
    return m;
}

nlohmann::json to_json(const MetricsReport& m) {
    nlohmann::json j{{"eer", m.eer},     {"eer_threshold", m.eer_threshold}, {"precision", m.precision},
                     {"recall", m.recall}, {"f1", m.f1},                     {"auc_roc", m.auc_roc}};
    j["rank1"] = m.rank1 ? nlohmann::json(*m.rank1) : nlohmann::json(nullptr);
    return j;
}

namespace {

std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
    std::string text = "threshold,fpr,tpr\n";
    for (const auto& p : curve.points) text += num(p.threshold) + "," + num(p.fpr) + "," + num(p.tpr) + "\n";
    io::write_text_atomic(path, text, "eval");
}

void write_pr_csv(const std::vector<PrPoint>& curve, const std::filesystem::path& path) {
    std::string text = "threshold,precision,recall,f1\n";
    for (const auto& p : curve)
        text += num(p.threshold) + "," + num(p.precision) + "," + num(p.recall) + "," + num(p.f1) + "\n";
    io::write_text_atomic(path, text, "eval");
}

}  // namespace ppgauth::eval
