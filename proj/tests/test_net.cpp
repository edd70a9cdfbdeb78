#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "ppgauth/errors.hpp"
#include "ppgauth/net/data.hpp"
#include "ppgauth/net/model.hpp"
#include "ppgauth/net/model_io.hpp"
#include "ppgauth/net/train.hpp"

using namespace ppgauth;
using namespace ppgauth::net;

namespace {

template <class T>
BasicTensor<T> random_tensor(std::vector<int> shape, std::uint64_t seed, double sparsity = 0.0) {
    BasicTensor<T> t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : t.values) v = sparsity > 0.0 ? T(u(rng) < sparsity ? 1 : 0) : T(g(rng));
    return t;
}

template <class T>
void fill(Param<T>& p, std::uint64_t seed, double offset = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.5);
    for (auto& v : p.value.values) v = T(offset + g(rng));
}

// Sum of w_i y_i with fixed weights, so dL/dy = w.
struct Probe {
    std::vector<double> w;
    double operator()(const BasicTensor<double>& y) {
        if (w.empty()) {
            std::mt19937_64 rng(99);
            std::normal_distribution<double> g(0.0, 1.0);
            for (std::size_t i = 0; i < y.size(); ++i) w.push_back(g(rng));
        }
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
        return s;
    }
    BasicTensor<double> grad(const std::vector<int>& shape) const {
        BasicTensor<double> d(shape);
        d.values = w;
        return d;
    }
};

// Checks input and parameter gradients of a smooth layer by central differences.
void check_layer(Module<double>& m, BasicTensor<double> x) {
    std::vector<Param<double>*> params;
    m.collect(params);
    Probe probe;
    const auto y = m.forward(x);
    probe(y);
    for (auto* p : params) p->grad.values.assign(p->grad.size(), 0.0);
    const auto dx = m.backward(probe.grad(y.shape));
    const double h = 1e-5;
    for (std::size_t i = 0; i < x.size(); i += 7) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double up = probe(m.forward(x));
        x[i] = x0 - h;
        const double down = probe(m.forward(x));
        x[i] = x0;
        CHECK(dx[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
    }
    for (auto* p : params) {
        if (!p->trainable) continue;
        for (std::size_t i = 0; i < p->value.size(); i += 3) {
            const double w0 = p->value[i];
            p->value[i] = w0 + h;
            const double up = probe(m.forward(x));
            p->value[i] = w0 - h;
            const double down = probe(m.forward(x));
            p->value[i] = w0;
            CHECK(p->grad[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
        }
    }
}

SegmentDataset small_dataset(std::size_t subjects, std::uint64_t seed) {
    const auto reg = signal::default_registry(subjects);
    std::vector<signal::PpgRecord> records;
    for (const auto& p : reg) records.push_back(signal::synth_ppg(p, 60.0, seed));
    return build_dataset(records, signal::PreprocessMode::Band05_8Norm, {12.0, 30, seed});
}

TrainConfig quick_train(int epochs, int steps) {
    TrainConfig c;
    c.learning_rate = 1e-3;
    c.epochs = epochs;
    c.steps_per_epoch = steps;
    c.val_pairs = 20;
    c.seed = 4;
    return c;
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("convolution matches direct summation") {
    Conv2d<double> conv("c", 2, 3, {3, 5, 2, 1, 2}, true);
    std::vector<Param<double>*> ps;
    conv.collect(ps);
    for (std::size_t i = 0; i < ps.size(); ++i) fill(*ps[i], i + 1);
    const auto& w = ps[0]->value;
    const auto& b = ps[1]->value;
    const auto x = random_tensor<double>({2, 2, 7, 9}, 5);
    const auto y = conv.infer(x);
    REQUIRE(y.shape == std::vector<int>{2, 3, 4, 5});
    for (int n = 0; n < 2; ++n)
        for (int o = 0; o < 3; ++o)
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 5; ++c) {
                    double s = b[static_cast<std::size_t>(o)];
                    for (int i = 0; i < 2; ++i)
                        for (int kh = 0; kh < 3; ++kh)
                            for (int kw = 0; kw < 5; ++kw) {
                                const int rr = r * 2 - 1 + kh, cc = c * 2 - 2 + kw;
                                if (rr < 0 || rr >= 7 || cc < 0 || cc >= 9) continue;
                                s += w[static_cast<std::size_t>(((o * 2 + i) * 3 + kh) * 5 + kw)] *
                                     x[static_cast<std::size_t>(((n * 2 + i) * 7 + rr) * 9 + cc)];
                            }
                    CHECK(y[static_cast<std::size_t>(((n * 3 + o) * 4 + r) * 5 + c)] == doctest::Approx(s));
                }
}

TEST_CASE("max pooling picks window maxima") {
    MaxPool2d<double> pool(3, 2);
    const auto x = random_tensor<double>({1, 2, 7, 7}, 6);
    const auto y = pool.infer(x);
    REQUIRE(y.shape == std::vector<int>{1, 2, 3, 3});
    for (int ch = 0; ch < 2; ++ch)
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double m = -1e300;
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        m = std::max(m, x[static_cast<std::size_t>((ch * 7 + r * 2 + i) * 7 + c * 2 + j)]);
                CHECK(y[static_cast<std::size_t>((ch * 3 + r) * 3 + c)] == m);
            }
}

TEST_CASE("layer gradients match finite differences") {
    SUBCASE("strided conv") {
        Conv2d<double> conv("c", 2, 3, {3, 3, 2, 1, 1}, true);
        std::vector<Param<double>*> ps;
        conv.collect(ps);
        for (std::size_t i = 0; i < ps.size(); ++i) fill(*ps[i], i + 10);
        check_layer(conv, random_tensor<double>({2, 2, 6, 6}, 7));
    }
    SUBCASE("factorised conv") {
        Conv2d<double> conv("c", 3, 2, ConvGeometry::same(1, 5), false);
        std::vector<Param<double>*> ps;
        conv.collect(ps);
        fill(*ps[0], 3);
        check_layer(conv, random_tensor<double>({1, 3, 5, 6}, 8));
    }
    SUBCASE("batch norm in training mode") {
        BatchNorm2d<double> bn("bn", 3);
        std::vector<Param<double>*> ps;
        bn.collect(ps);
        fill(*ps[0], 1, 1.0);
        fill(*ps[1], 2);
        check_layer(bn, random_tensor<double>({4, 3, 3, 3}, 9));
    }
}

TEST_CASE("batch norm inference uses running statistics") {
    BatchNorm2d<double> bn("bn", 2);
    std::vector<Param<double>*> ps;
    bn.collect(ps);
    REQUIRE(ps.size() == 4);
    ps[0]->value.values = {2.0, 0.5};
    ps[1]->value.values = {0.1, -0.3};
    ps[2]->value.values = {1.0, -2.0};
    ps[3]->value.values = {4.0, 0.25};
    CHECK_FALSE(ps[2]->trainable);
    const auto x = random_tensor<double>({1, 2, 2, 2}, 3);
    const auto y = bn.infer(x);
    for (int ch = 0; ch < 2; ++ch)
        for (int i = 0; i < 4; ++i) {
            const auto k = static_cast<std::size_t>(ch * 4 + i);
            const auto c = static_cast<std::size_t>(ch);
            const double want = ps[0]->value[c] * (x[k] - ps[2]->value[c]) / std::sqrt(ps[3]->value[c] + 1e-3) +
                                ps[1]->value[c];
            CHECK(y[k] == doctest::Approx(want));
        }
}

TEST_CASE("paper config geometry") {
    const auto g = geometry(ModelConfig::paper());
    CHECK(g.embedding == Shape3{1792, 8, 8});
    CHECK(g.flatten == 114688);
    CHECK(g.stem == Shape3{256, 35, 35});
    CHECK(g.reduction_a == Shape3{896, 17, 17});
    CHECK(g.reduction_b == Shape3{1792, 8, 8});
}

TEST_CASE("mini and tiny configs") {
    const SiameseModel mini(ModelConfig::mini());
    CHECK(mini.geometry().embedding == Shape3{160, 2, 2});
    CHECK(mini.geometry().flatten == 640);
    std::size_t n = 0;
    for (const auto* p : mini.params()) n += p->value.size();
    CHECK(n == 128025);
    CHECK_NOTHROW(geometry(ModelConfig::tiny()));
}

TEST_CASE("inconsistent configs are rejected") {
    auto c = ModelConfig::mini();
    c.input_hw = 40;
    CHECK_THROWS_AS(geometry(c), ConfigError);
    c = ModelConfig::mini();
    c.kernel_b = 4;
    CHECK_THROWS_AS(SiameseModel{c}, ConfigError);
    CHECK_THROWS_AS(ModelConfig::preset("huge"), ConfigError);
    CHECK_THROWS_AS(model_config_from_json({{"name", "mini"}, {"depth", 3}}), ConfigError);
    const auto j = to_json(ModelConfig::mini());
    CHECK(model_config_from_json(j) == ModelConfig::mini());
}

TEST_CASE("scores are symmetric, bounded and self-similar") {
    SiameseModel model(ModelConfig::mini());
    model.dense_bias().value[0] = 0.3f;
    const double self = sigmoid(static_cast<double>(0.3f));
    for (std::uint64_t t = 0; t < 100; t += 10) {
        const auto a = random_tensor<float>({10, 3, 128, 128}, t, 0.05);
        const auto b = random_tensor<float>({10, 3, 128, 128}, t + 1000, 0.05);
        const auto ab = model.score(a, b), ba = model.score(b, a), aa = model.score(a, a);
        for (std::size_t i = 0; i < ab.size(); ++i) {
            CHECK(ab[i] == ba[i]);
            CHECK(ab[i] >= 0.0);
            CHECK(ab[i] <= 1.0);
            CHECK(aa[i] == doctest::Approx(self).epsilon(1e-12));
        }
    }
}

TEST_CASE("embedding is deterministic and finite") {
    const SiameseModel model(ModelConfig::mini());
    const auto x = random_tensor<float>({2, 3, 128, 128}, 17, 0.05);
    CHECK(model.embed(x).values == model.embed(x).values);
    const auto z = model.embed(Tensor({1, 3, 128, 128}));
    for (float v : z.values) REQUIRE(std::isfinite(v));
    CHECK_THROWS_AS(model.embed(Tensor({1, 3, 64, 64})), ShapeError);
}

TEST_CASE("one weight set serves both branches") {
    SiameseModel model(ModelConfig::mini());
    std::set<std::string> names;
    for (const auto* p : model.params()) CHECK(names.insert(p->name).second);
    const auto a = random_tensor<float>({1, 3, 128, 128}, 1, 0.05);
    const auto b = random_tensor<float>({1, 3, 128, 128}, 2, 0.05);
    const auto before = model.embed(a);
    for (auto& v : model.params()[0]->value.values) v *= 1.5f;
    CHECK(model.embed(a).values != before.values);
    const auto ab = model.score(a, b), ba = model.score(b, a);
    CHECK(ab[0] == ba[0]);
}

TEST_CASE("cross-entropy values") {
    CHECK(bce_loss(0.5, 1.0) == doctest::Approx(std::log(2.0)));
    CHECK(bce_loss(0.9, 0.0) == doctest::Approx(-std::log(0.1)));
    CHECK(bce_loss(1.0, 1.0) <= 1.2e-7);
    CHECK(bce_loss(0.0, 0.0) <= 1.2e-7);
    CHECK(bce_loss({0.5, 0.9}, {1.0, 0.0}) == doctest::Approx((std::log(2.0) - std::log(0.1)) / 2));
    const auto g = bce_logit_grad({0.0, 2.0, 40.0}, {1.0, 0.0, 1.0});
    CHECK(g[0] == doctest::Approx(-0.5 / 3));
    CHECK(g[1] == doctest::Approx(sigmoid(2.0) / 3));
    CHECK(g[2] == 0.0);
}

TEST_CASE("gradients vanish without a learning signal") {
    BasicSiamese<double> model(ModelConfig::tiny());
    const auto a = random_tensor<double>({2, 3, 16, 16}, 1);
    const auto b = random_tensor<double>({2, 3, 16, 16}, 2);
    model.zero_grad();
    const auto z = model.forward_logits(a, b);
    // Saturate the head so that both predictions sit on their targets.
    std::vector<double> targets;
    for (double v : z) targets.push_back(v > model.dense_bias().value[0] ? 1.0 : 0.0);
    std::vector<double> far(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) far[i] = targets[i] > 0.5 ? 40.0 : -40.0;
    model.backward_logits(bce_logit_grad(far, targets));
    for (const auto* p : model.params())
        for (double g : p->grad.values) REQUIRE(std::abs(g) <= 1e-6);
}

TEST_CASE("dense bias gradient is the mean prediction error") {
    BasicSiamese<double> model(ModelConfig::tiny());
    const auto a = random_tensor<double>({3, 3, 16, 16}, 4);
    const auto b = random_tensor<double>({3, 3, 16, 16}, 5);
    const std::vector<double> t{1.0, 0.0, 1.0};
    model.zero_grad();
    const auto z = model.forward_logits(a, b);
    model.backward_logits(bce_logit_grad(z, t));
    double mean = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) mean += (sigmoid(z[i]) - t[i]) / 3.0;
    CHECK(model.dense_bias().grad[0] == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("grad check on the tiny config") {
    const auto r = grad_check(ModelConfig::tiny(), 1);
    CHECK(r.max_rel_error <= 1e-3);
    CHECK(r.sampled >= 50);
    CHECK(r.kinds == std::set<std::string>{"batchnorm", "conv", "dense", "residual"});
}

TEST_CASE("Adam with zero gradient leaves weights unchanged") {
    SiameseModel model(ModelConfig::tiny());
    model.zero_grad();
    std::vector<std::vector<float>> before;
    for (const auto* p : model.params()) before.push_back(p->value.values);
    Adam<float> opt(1e-3);
    for (int i = 0; i < 3; ++i) opt.step(model.params());
    const auto after = model.params();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i]->value.values == before[i]);
}

TEST_CASE("one Adam step lowers the loss of its pair") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto cfg = ModelConfig::tiny();
        cfg.rng_seed = seed;
        SiameseModel model(cfg);
        const auto a = random_tensor<float>({1, 3, 16, 16}, seed + 100, 0.2);
        const auto b = random_tensor<float>({1, 3, 16, 16}, seed + 200, 0.2);
        const std::vector<double> t{static_cast<double>(seed % 2)};
        auto loss = [&] {
            const auto z = model.forward_logits(a, b);
            return bce_loss(sigmoid(z[0]), t[0]);
        };
        model.zero_grad();
        const auto z = model.forward_logits(a, b);
        const double before = bce_loss(sigmoid(z[0]), t[0]);
        model.backward_logits(bce_logit_grad(z, t));
        Adam<float> opt(1e-4);
        opt.step(model.params());
        wins += loss() < before;
    }
    CHECK(wins >= 18);
}

TEST_CASE("dataset windows and splits") {
    const auto data = small_dataset(8, 3);
    REQUIRE(data.size() == 8);
    for (const auto& s : data) {
        CHECK(s.segments.size() == 150);
        CHECK(s.window.size() == 150);
    }

    const auto dd = split_data(data, SplitMode::DataDisjoint, {}, 1);
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(dd.train[i].subject_id == data[i].subject_id);
        CHECK(dd.train[i].segments.size() == 90);
        CHECK(dd.val[i].segments.size() + dd.test[i].segments.size() == 60);
        std::set<std::size_t> tw(dd.train[i].window.begin(), dd.train[i].window.end());
        for (std::size_t w : dd.test[i].window) CHECK(tw.count(w) == 0);
        for (std::size_t w : dd.val[i].window) CHECK(tw.count(w) == 0);
    }

    const auto ud = split_data(data, SplitMode::UserDisjoint, {}, 1);
    CHECK(ud.train.size() == 5);
    CHECK(ud.test.size() == 3);
    std::set<std::string> train_ids;
    for (const auto& s : ud.train) train_ids.insert(s.subject_id);
    for (const auto& s : ud.test) CHECK(train_ids.count(s.subject_id) == 0);

    const auto again = split_data(data, SplitMode::UserDisjoint, {}, 1);
    for (std::size_t i = 0; i < ud.test.size(); ++i) CHECK(again.test[i].subject_id == ud.test[i].subject_id);
    CHECK(parse_split_mode("user-disjoint") == SplitMode::UserDisjoint);
    CHECK_THROWS_AS(parse_split_mode("both"), ParameterError);
}

TEST_CASE("user-disjoint split of 40 subjects") {
    SegmentDataset data(40);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i].subject_id = "S" + std::to_string(i);
        data[i].segments.resize(20);
        for (std::size_t w = 0; w < 20; ++w) data[i].window.push_back(w / 4);
    }
    const auto s = split_data(data, SplitMode::UserDisjoint, {}, 2);
    CHECK(s.train.size() == 24);
    CHECK(s.test.size() == 16);
}

TEST_CASE("pair generator") {
    const auto data = small_dataset(2, 5);
    ImageSpec spec{32, chaos01::channel_params({})};
    PairGenerator a(data, spec, 7), b(data, spec, 7);
    std::size_t positives = 0, total = 0;
    for (int i = 0; i < 40; ++i) {
        const auto x = a.next(5), y = b.next(5);
        CHECK(x.images_a.values == y.images_a.values);
        CHECK(x.labels == y.labels);
        CHECK(x.images_a.shape == std::vector<int>{5, 3, 32, 32});
        for (double l : x.labels) positives += l > 0.5;
        total += x.labels.size();
    }
    const double frac = static_cast<double>(positives) / static_cast<double>(total);
    CHECK(frac >= 0.45);
    CHECK(frac <= 0.55);

    SegmentDataset one(1, data[0]);
    CHECK_THROWS_AS(PairGenerator(one, spec, 1), InsufficientDataError);
    auto thin = data;
    thin[1].segments.resize(2);
    thin[1].window.resize(2);
    CHECK_THROWS_AS(PairGenerator(thin, spec, 1), InsufficientDataError);
}

TEST_CASE("OR downsampling keeps every set pixel visible") {
    std::vector<std::uint8_t> plane(299 * 299, 0);
    plane[150 * 299 + 7] = 1;
    const auto d = downsample_or(plane, 299, 128);
    CHECK(std::count(d.begin(), d.end(), 1) == 1);
    CHECK(downsample_or(plane, 299, 299) == plane);
}

TEST_CASE("training lowers the loss and restores the best epoch") {
    const auto data = small_dataset(2, 6);
    const auto split = split_data(data, SplitMode::DataDisjoint, {}, 6);
    ImageSpec spec{128, chaos01::channel_params({})};
    SiameseModel model(ModelConfig::mini());
    const auto cfg = quick_train(10, 6);
    const auto h = train(model, split.train, split.val, spec, cfg);
    REQUIRE(h.epochs.size() >= 2);
    CHECK(h.epochs.back().train_loss < h.epochs.front().train_loss);
    const auto val = make_pairs(split.val, spec, cfg.val_pairs, cfg.seed ^ 0x7a1dULL);
    CHECK(pair_loss(model, val) == h.best_val_loss);
    CHECK(h.epochs[static_cast<std::size_t>(h.best_epoch - 1)].val_loss == h.best_val_loss);
}

TEST_CASE("training is reproducible") {
    const auto data = small_dataset(2, 6);
    const auto split = split_data(data, SplitMode::DataDisjoint, {}, 6);
    ImageSpec spec{16, chaos01::channel_params({})};
    auto run = [&] {
        SiameseModel model(ModelConfig::tiny());
        const auto h = train(model, split.train, split.val, spec, quick_train(3, 4));
        return std::pair{history_json(h), encode_model(model)};
    };
    const auto a = run(), b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("divergence names the epoch") {
    const auto data = small_dataset(2, 6);
    const auto split = split_data(data, SplitMode::DataDisjoint, {}, 6);
    ImageSpec spec{16, chaos01::channel_params({})};
    SiameseModel model(ModelConfig::tiny());
    model.dense_weight().value[0] = std::numeric_limits<float>::quiet_NaN();
    try {
        train(model, split.train, split.val, spec, quick_train(2, 2));
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    }
}

TEST_CASE("train config parsing") {
    CHECK(train_config_from_json({{"epochs", 3}}).epochs == 3);
    CHECK_THROWS_AS(train_config_from_json({{"epoch", 3}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"learning_rate", -1.0}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"batch_size", "five"}}), ConfigError);
}

TEST_CASE("model files round-trip and detect corruption") {
    SiameseModel model(ModelConfig::mini());
    model.metadata["note"] = "x";
    const auto bytes = encode_model(model);
    const auto back = decode_model(bytes);
    CHECK(back.config() == model.config());
    CHECK(back.metadata == model.metadata);
    CHECK(version_hash(back) == version_hash(model));
    CHECK(encode_model(back) == bytes);

    // Metadata does not enter the hash.
    auto other = decode_model(bytes);
    other.metadata["note"] = "y";
    CHECK(version_hash(other) == version_hash(model));
    other.dense_bias().value[0] += 1.0f;
    CHECK(version_hash(other) != version_hash(model));

    auto flipped = bytes;
    flipped[flipped.size() - 40] ^= 0x01;
    CHECK_THROWS_AS(decode_model(flipped), FormatError);
    auto truncated = bytes;
    truncated.resize(truncated.size() / 2);
    CHECK_THROWS_AS(decode_model(truncated), FormatError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(decode_model(magic), FormatError);
    auto version = bytes;
    version[4] = 9;
    CHECK_THROWS_AS(decode_model(version), FormatError);

    const auto path = std::filesystem::temp_directory_path() / "ppgauth_model_test.snm";
    save_model(model, path);
    CHECK(encode_model(load_model(path)) == bytes);
    std::filesystem::remove(path);
}

}
