#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "ppgauth/errors.hpp"
#include "ppgauth/eval.hpp"

using namespace ppgauth;
using namespace ppgauth::eval;

namespace {

// Rates on a dense threshold grid, same first-crossing interpolation.
double dense_eer(const ScoreSet& s) {
    double lo = 1e300, hi = -1e300;
    for (const auto* v : {&s.genuine, &s.impostor})
        for (double x : *v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    const int steps = 10000;
    double pf = 0, pn = 0;
    for (int j = 0; j <= steps; ++j) {
        const double t = lo - 1e-3 + (hi - lo + 2e-3) * j / steps;
        double fp = 0, fn = 0;
        for (double x : s.impostor) fp += x >= t;
        for (double x : s.genuine) fn += x < t;
        const double f = fp / static_cast<double>(s.impostor.size());
        const double n = fn / static_cast<double>(s.genuine.size());
        if (f - n <= 0) {
            if (f == n || j == 0) return f;
            const double d0 = pf - pn, d1 = f - n;
            const double lambda = d0 / (d0 - d1);
            return pf + lambda * (f - pf);
        }
        pf = f;
        pn = n;
    }
    return pf;
}

double pairwise_auc(const ScoreSet& s) {
    double sum = 0;
    for (double g : s.genuine)
        for (double i : s.impostor) sum += g > i ? 1.0 : g == i ? 0.5 : 0.0;
    return sum / static_cast<double>(s.genuine.size() * s.impostor.size());
}

ScoreSet random_set(std::mt19937_64& rng, bool coarse) {
    std::uniform_int_distribution<int> count(1, 32);
    std::normal_distribution<double> g(0.0, 1.0);
    ScoreSet s;
    const double shift = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    const int ng = count(rng), ni = count(rng);
    auto squash = [&](double z) {
        const double v = 1.0 / (1.0 + std::exp(-z));
        return coarse ? std::round(v * 20.0) / 20.0 : v;
    };
    for (int i = 0; i < ng; ++i) s.genuine.push_back(squash(g(rng) + shift));
    for (int i = 0; i < ni; ++i) s.impostor.push_back(squash(g(rng)));
    return s;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("ROC areas") {
    CHECK(roc({{0.9, 0.8, 0.7}, {0.1, 0.2, 0.3}}).auc == 1.0);
    CHECK(roc({{0.2, 0.5, 0.5, 0.9}, {0.9, 0.5, 0.2, 0.5}}).auc == 0.5);
    // 12 of the 16 genuine/impostor pairs are ordered correctly.
    const ScoreSet mixed{{0.9, 0.7, 0.6, 0.4}, {0.8, 0.5, 0.3, 0.1}};
    CHECK(pairwise_auc(mixed) == 0.75);
    CHECK(roc(mixed).auc == 0.75);
}

TEST_CASE("ROC thresholds and monotonicity") {
    const auto c = roc({{0.9, 0.7, 0.6, 0.4}, {0.8, 0.5, 0.3, 0.1}});
    REQUIRE(c.points.size() == 10);
    CHECK(c.points.front().threshold == std::numeric_limits<double>::infinity());
    CHECK(c.points.back().threshold == -std::numeric_limits<double>::infinity());
    CHECK(c.points.front().tpr == 0.0);
    CHECK(c.points.back().fpr == 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        CHECK(c.points[i].threshold < c.points[i - 1].threshold);
        CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
        CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
    }
}

TEST_CASE("precision, recall and F1") {
    const ScoreSet sep{{0.9, 0.8, 0.7}, {0.1, 0.2, 0.3}};
    const auto at_eer = precision_recall_f1_at(sep, eer(sep).threshold);
    CHECK(at_eer.precision == 1.0);
    CHECK(at_eer.recall == 1.0);
    CHECK(at_eer.f1 == 1.0);

    const auto all = precision_recall_f1_at(sep, 0.0);
    CHECK(all.recall == 1.0);
    CHECK(all.precision == 0.5);

    const auto half = precision_recall_f1_at({{0.8, 0.4}, {0.6, 0.2}}, 0.5);
    CHECK(half.precision == 0.5);
    CHECK(half.recall == 0.5);
    CHECK(half.f1 == 0.5);

    const auto none = precision_recall_f1_at(sep, 2.0);
    CHECK(none.precision == 1.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    const auto curve = precision_recall_f1(sep);
    CHECK(curve.size() == roc(sep).points.size());
}

TEST_CASE("worked EER examples") {
    const auto a = eer({{0.9, 0.8, 0.7}, {0.1, 0.2, 0.3}});
    CHECK(a.eer == 0.0);
    CHECK(a.threshold > 0.3);
    CHECK(a.threshold <= 0.7);

    const auto b = eer({{0.8, 0.4}, {0.6, 0.2}});
    CHECK(b.eer == 0.5);
    CHECK(b.threshold > 0.4);
    CHECK(b.threshold <= 0.6);

    const auto c = eer({{0.9, 0.7, 0.6, 0.4}, {0.8, 0.5, 0.3, 0.1}});
    CHECK(c.eer == 0.25);
    CHECK(c.threshold == doctest::Approx(0.55));
}

TEST_CASE("empty score sets are rejected") {
    CHECK_THROWS_AS(eer({{}, {0.1}}), ParameterError);
    CHECK_THROWS_AS(roc({{0.1}, {}}), ParameterError);
    CHECK_THROWS_AS(precision_recall_f1({{}, {}}), ParameterError);
}

TEST_CASE("EER agrees with a dense threshold sweep") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = random_set(rng, trial % 2 == 1);
        CHECK(std::abs(eer(s).eer - dense_eer(s)) <= 5e-3);
    }
}

TEST_CASE("trapezoid AUC equals the pairwise estimator") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = random_set(rng, trial % 2 == 1);
        CHECK(std::abs(roc(s).auc - pairwise_auc(s)) <= 1e-9);
    }
}

TEST_CASE("metrics are invariant under increasing transforms") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto s = random_set(rng, trial % 2 == 0);
        ScoreSet t = s;
        for (auto* v : {&t.genuine, &t.impostor})
            for (double& x : *v) x = std::pow(x, 3.0) * 0.5 + 0.1;
        CHECK(eer(t).eer == doctest::Approx(eer(s).eer).epsilon(1e-12));
        CHECK(roc(t).auc == doctest::Approx(roc(s).auc).epsilon(1e-12));
    }
    const std::vector<std::string> gallery{"a", "b", "c"}, probes{"a", "b", "c", "a"};
    std::vector<std::vector<double>> scores{{0.9, 0.1, 0.3}, {0.2, 0.4, 0.5}, {0.1, 0.2, 0.8}, {0.7, 0.6, 0.2}};
    const double base = rank1(gallery, probes, scores);
    for (auto& row : scores)
        for (double& x : row) x = std::exp(4.0 * x);
    CHECK(rank1(gallery, probes, scores) == base);
}

TEST_CASE("rank-1 accuracy") {
    const std::vector<std::string> gallery{"a", "b"};
    CHECK(rank1(gallery, std::vector<std::string>{"a", "b", "a"},
                {{0.9, 0.1}, {0.3, 0.2}, {0.8, 0.7}}) == doctest::Approx(2.0 / 3.0));
    // A tie at the top is a miss.
    CHECK(rank1(gallery, std::vector<std::string>{"a"}, {{0.5, 0.5}}) == 0.0);
    CHECK(rank1(std::vector<std::string>{"a"}, std::vector<std::string>{"a", "a"}, {{0.1}, {0.9}}) == 1.0);
    CHECK_THROWS_AS(rank1(gallery, std::vector<std::string>{"z"}, {{0.1, 0.2}}), ParameterError);
}

TEST_CASE("report and curve files") {
    const ScoreSet s{{0.9, 0.7, 0.6, 0.4}, {0.8, 0.5, 0.3, 0.1}};
    const auto r = evaluate(s);
    CHECK(r.eer == 0.25);
    CHECK(r.auc_roc == 0.75);
    CHECK_FALSE(r.rank1.has_value());
    const auto j = to_json(r);
    for (const char* k : {"eer", "eer_threshold", "precision", "recall", "f1", "auc_roc", "rank1"})
        CHECK(j.contains(k));
    CHECK(j["rank1"].is_null());
    CHECK(to_json(evaluate(s, 0.75))["rank1"] == 0.75);

    const auto dir = std::filesystem::temp_directory_path() / "ppgauth_eval_io";
    std::filesystem::create_directories(dir);
    write_roc_csv(roc(s), dir / "roc.csv");
    write_pr_csv(precision_recall_f1(s), dir / "pr.csv");
    std::ifstream roc_in(dir / "roc.csv"), pr_in(dir / "pr.csv");
    std::string line;
    std::getline(roc_in, line);
    CHECK(line == "threshold,fpr,tpr");
    std::getline(roc_in, line);
    CHECK(line == "inf,0,0");
    std::getline(pr_in, line);
    CHECK(line == "threshold,precision,recall,f1");
    std::filesystem::remove_all(dir);
}

}
