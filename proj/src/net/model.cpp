#include "ppgauth/net/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace ppgauth::net {

ModelConfig ModelConfig::paper() {
    return ModelConfig{};
}

ModelConfig ModelConfig::mini() {
    ModelConfig c;
    c.name = "mini";
    c.input_hw = 128;
    c.stem = {8, 8, 16, 20, 32, 48};
    c.blocks_a = c.blocks_b = c.blocks_c = 2;
    c.width_a = 8;
    c.reduction_a = {16, 16, 24, 32};
    c.width_b = 16;
    c.kernel_b = 7;
    c.reduction_b = {16, 24, 16, 16};
    c.width_c = 24;
    c.kernel_c = 3;
    return c;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.name = "tiny";
    c.input_hw = 16;
    c.reducing_stem = false;
    c.stem = {4, 4, 4, 4, 6, 8};
    c.blocks_a = 1;
    c.blocks_b = 0;
    c.blocks_c = 1;
    c.width_a = 4;
    c.reduction_a = {4, 4, 4, 6};
    c.width_b = 4;
    c.kernel_b = 3;
    c.reduction_b = {4, 4, 4, 4};
    c.width_c = 4;
    c.kernel_c = 3;
    return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
    if (name == "paper") return paper();
    if (name == "mini") return mini();
    if (name == "tiny") return tiny();
    throw ConfigError("net", "unknown model preset '" + name + "' (expected paper, mini or tiny)");
}

nlohmann::json to_json(const ModelConfig& c) {
    return {
        {"name", c.name},
        {"input_hw", c.input_hw},
        {"reducing_stem", c.reducing_stem},
        {"stem", c.stem},
        {"blocks_a", c.blocks_a},
        {"blocks_b", c.blocks_b},
        {"blocks_c", c.blocks_c},
        {"width_a", c.width_a},
        {"reduction_a", {{"k", c.reduction_a.k}, {"l", c.reduction_a.l}, {"m", c.reduction_a.m}, {"n", c.reduction_a.n}}},
        {"width_b", c.width_b},
        {"kernel_b", c.kernel_b},
        {"reduction_b", {{"w", c.reduction_b.w}, {"a", c.reduction_b.a}, {"b", c.reduction_b.b}, {"d", c.reduction_b.d}}},
        {"width_c", c.width_c},
        {"kernel_c", c.kernel_c},
        {"scale_a", c.scale_a},
        {"scale_b", c.scale_b},
        {"scale_c", c.scale_c},
        {"rng_seed", c.rng_seed},
    };
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError("net", where + " must be a JSON object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("net", "unknown key '" + it.key() + "' in " + where);
}

template <class V>
void read_key(const nlohmann::json& j, const char* key, V& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<V>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("net", where + "." + key + " has the wrong type");
    }
}

void validate(const ModelConfig& c) {
    auto positive = [](int v, const char* what) {
        if (v < 1) throw ConfigError("net", std::string(what) + " must be at least 1");
    };
    positive(c.input_hw, "input_hw");
    for (int w : c.stem) positive(w, "stem width");
    for (int w : {c.width_a, c.width_b, c.width_c, c.reduction_a.k, c.reduction_a.l, c.reduction_a.m,
                  c.reduction_a.n, c.reduction_b.w, c.reduction_b.a, c.reduction_b.b, c.reduction_b.d})
        positive(w, "block width");
    if (c.blocks_a < 0 || c.blocks_b < 0 || c.blocks_c < 0)
        throw ConfigError("net", "block counts must be non-negative");
    for (int k : {c.kernel_b, c.kernel_c})
        if (k < 1 || k % 2 == 0) throw ConfigError("net", "factorised kernels must be odd and positive");
    for (double s : {c.scale_a, c.scale_b, c.scale_c})
        if (!std::isfinite(s)) throw ConfigError("net", "residual scales must be finite");
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j) {
    const std::string where = "model";
    reject_unknown(j,
                   {"name", "input_hw", "reducing_stem", "stem", "blocks_a", "blocks_b", "blocks_c", "width_a",
                    "reduction_a", "width_b", "kernel_b", "reduction_b", "width_c", "kernel_c", "scale_a",
                    "scale_b", "scale_c", "rng_seed"},
                   where);
    std::string name = "paper";
    read_key(j, "name", name, where);
    ModelConfig c = ModelConfig::preset(name);
    read_key(j, "input_hw", c.input_hw, where);
    read_key(j, "reducing_stem", c.reducing_stem, where);
    read_key(j, "stem", c.stem, where);
    read_key(j, "blocks_a", c.blocks_a, where);
    read_key(j, "blocks_b", c.blocks_b, where);
    read_key(j, "blocks_c", c.blocks_c, where);
    read_key(j, "width_a", c.width_a, where);
    read_key(j, "width_b", c.width_b, where);
    read_key(j, "kernel_b", c.kernel_b, where);
    read_key(j, "width_c", c.width_c, where);
    read_key(j, "kernel_c", c.kernel_c, where);
    read_key(j, "scale_a", c.scale_a, where);
    read_key(j, "scale_b", c.scale_b, where);
    read_key(j, "scale_c", c.scale_c, where);
    read_key(j, "rng_seed", c.rng_seed, where);
    if (j.contains("reduction_a")) {
        const auto& r = j.at("reduction_a");
        reject_unknown(r, {"k", "l", "m", "n"}, "model.reduction_a");
        read_key(r, "k", c.reduction_a.k, "model.reduction_a");
        read_key(r, "l", c.reduction_a.l, "model.reduction_a");
        read_key(r, "m", c.reduction_a.m, "model.reduction_a");
        read_key(r, "n", c.reduction_a.n, "model.reduction_a");
    }
    if (j.contains("reduction_b")) {
        const auto& r = j.at("reduction_b");
        reject_unknown(r, {"w", "a", "b", "d"}, "model.reduction_b");
        read_key(r, "w", c.reduction_b.w, "model.reduction_b");
        read_key(r, "a", c.reduction_b.a, "model.reduction_b");
        read_key(r, "b", c.reduction_b.b, "model.reduction_b");
        read_key(r, "d", c.reduction_b.d, "model.reduction_b");
    }
    validate(c);
    return c;
}

// --- encoder construction --------------------------------------------------------

namespace {

template <class T>
using SeqPtr = std::unique_ptr<Sequential<T>>;

template <class T>
SeqPtr<T> chain(std::vector<SeqPtr<T>> parts) {
    auto seq = std::make_unique<Sequential<T>>();
    for (auto& p : parts) seq->add(std::move(p));
    return seq;
}

ConvGeometry row_kernel(int k) { return {1, k, 1, 0, k / 2}; }
ConvGeometry col_kernel(int k) { return {k, 1, 1, k / 2, 0}; }

template <class T>
std::unique_ptr<Module<T>> block_a(const std::string& name, int channels, int w, double scale) {
    auto cat = std::make_unique<Concat<T>>();
    cat->add(conv_bn_relu<T>(name + ".b0", channels, w, ConvGeometry::valid(1)));
    {
        std::vector<SeqPtr<T>> p;
        p.push_back(conv_bn_relu<T>(name + ".b1.0", channels, w, ConvGeometry::valid(1)));
        p.push_back(conv_bn_relu<T>(name + ".b1.1", w, w, ConvGeometry::same(3, 3)));
        cat->add(chain<T>(std::move(p)));
    }
    {
        std::vector<SeqPtr<T>> p;
        p.push_back(conv_bn_relu<T>(name + ".b2.0", channels, w, ConvGeometry::valid(1)));
        p.push_back(conv_bn_relu<T>(name + ".b2.1", w, w, ConvGeometry::same(3, 3)));
        p.push_back(conv_bn_relu<T>(name + ".b2.2", w, w, ConvGeometry::same(3, 3)));
        cat->add(chain<T>(std::move(p)));
    }
    return std::make_unique<Residual<T>>(name, std::move(cat), 3 * w, channels, scale);
}

/// Two-branch block with a factorised k x k convolution (the B and C blocks).
template <class T>
std::unique_ptr<Module<T>> block_factorised(const std::string& name, int channels, int w, int k, double scale) {
    auto cat = std::make_unique<Concat<T>>();
    cat->add(conv_bn_relu<T>(name + ".b0", channels, w, ConvGeometry::valid(1)));
    std::vector<SeqPtr<T>> p;
    p.push_back(conv_bn_relu<T>(name + ".b1.0", channels, w, ConvGeometry::valid(1)));
    p.push_back(conv_bn_relu<T>(name + ".b1.1", w, w, row_kernel(k)));
    p.push_back(conv_bn_relu<T>(name + ".b1.2", w, w, col_kernel(k)));
    cat->add(chain<T>(std::move(p)));
    return std::make_unique<Residual<T>>(name, std::move(cat), 2 * w, channels, scale);
}

template <class T>
std::unique_ptr<Module<T>> reduction_a(int channels, const ReductionAWidths& r) {
    auto cat = std::make_unique<Concat<T>>();
    cat->add(std::make_unique<MaxPool2d<T>>(3, 2));
    cat->add(conv_bn_relu<T>("red_a.b1", channels, r.n, ConvGeometry::valid(3, 2)));
    std::vector<SeqPtr<T>> p;
    p.push_back(conv_bn_relu<T>("red_a.b2.0", channels, r.k, ConvGeometry::valid(1)));
    p.push_back(conv_bn_relu<T>("red_a.b2.1", r.k, r.l, ConvGeometry::same(3, 3)));
    p.push_back(conv_bn_relu<T>("red_a.b2.2", r.l, r.m, ConvGeometry::valid(3, 2)));
    cat->add(chain<T>(std::move(p)));
    return cat;
}

template <class T>
std::unique_ptr<Module<T>> reduction_b(int channels, const ReductionBWidths& r) {
    auto cat = std::make_unique<Concat<T>>();
    cat->add(std::make_unique<MaxPool2d<T>>(3, 2));
    {
        std::vector<SeqPtr<T>> p;
        p.push_back(conv_bn_relu<T>("red_b.b1.0", channels, r.w, ConvGeometry::valid(1)));
        p.push_back(conv_bn_relu<T>("red_b.b1.1", r.w, r.a, ConvGeometry::valid(3, 2)));
        cat->add(chain<T>(std::move(p)));
    }
    {
        std::vector<SeqPtr<T>> p;
        p.push_back(conv_bn_relu<T>("red_b.b2.0", channels, r.w, ConvGeometry::valid(1)));
        p.push_back(conv_bn_relu<T>("red_b.b2.1", r.w, r.b, ConvGeometry::valid(3, 2)));
        cat->add(chain<T>(std::move(p)));
    }
    {
        std::vector<SeqPtr<T>> p;
        p.push_back(conv_bn_relu<T>("red_b.b3.0", channels, r.w, ConvGeometry::valid(1)));
        p.push_back(conv_bn_relu<T>("red_b.b3.1", r.w, r.w, ConvGeometry::same(3, 3)));
        p.push_back(conv_bn_relu<T>("red_b.b3.2", r.w, r.d, ConvGeometry::valid(3, 2)));
        cat->add(chain<T>(std::move(p)));
    }
    return cat;
}

template <class T>
std::unique_ptr<Sequential<T>> build_stem(const ModelConfig& c) {
    const auto& w = c.stem;
    auto seq = std::make_unique<Sequential<T>>();
    const bool r = c.reducing_stem;
    const auto same3 = ConvGeometry::same(3, 3);
    seq->add(conv_bn_relu<T>("stem.0", 3, w[0], r ? ConvGeometry::valid(3, 2) : same3));
    seq->add(conv_bn_relu<T>("stem.1", w[0], w[1], r ? ConvGeometry::valid(3) : same3));
    seq->add(conv_bn_relu<T>("stem.2", w[1], w[2], same3));
    if (r) seq->add(std::make_unique<MaxPool2d<T>>(3, 2));
    seq->add(conv_bn_relu<T>("stem.3", w[2], w[3], ConvGeometry::valid(1)));
    seq->add(conv_bn_relu<T>("stem.4", w[3], w[4], r ? ConvGeometry::valid(3) : same3));
    seq->add(conv_bn_relu<T>("stem.5", w[4], w[5], r ? ConvGeometry::valid(3, 2) : same3));
    return seq;
}

template <class T>
std::unique_ptr<Sequential<T>> build_encoder(const ModelConfig& c, Geometry& g) {
    auto enc = std::make_unique<Sequential<T>>();
    auto stage = [&](std::unique_ptr<Module<T>> m, Shape3& shape) {
        shape = m->output_shape(shape);
        enc->add(std::move(m));
    };
    Shape3 s = c.input_shape();
    stage(build_stem<T>(c), s);
    g.stem = s;
    for (int i = 0; i < c.blocks_a; ++i)
        stage(block_a<T>("a." + std::to_string(i), s.channels, c.width_a, c.scale_a), s);
    stage(reduction_a<T>(s.channels, c.reduction_a), s);
    g.reduction_a = s;
    for (int i = 0; i < c.blocks_b; ++i)
        stage(block_factorised<T>("b." + std::to_string(i), s.channels, c.width_b, c.kernel_b, c.scale_b), s);
    stage(reduction_b<T>(s.channels, c.reduction_b), s);
    g.reduction_b = s;
    for (int i = 0; i < c.blocks_c; ++i)
        stage(block_factorised<T>("c." + std::to_string(i), s.channels, c.width_c, c.kernel_c, c.scale_c), s);
    g.embedding = s;
    g.flatten = s.count();
    return enc;
}

}  // namespace

Geometry geometry(const ModelConfig& config) {
    validate(config);
    Geometry g;
    build_encoder<float>(config, g);
    return g;
}

// --- Siamese model ---------------------------------------------------------------

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_loss(double pred, double target) {
    const double p = std::clamp(pred, kBceEpsilon, 1.0 - kBceEpsilon);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double bce_loss(const std::vector<double>& preds, const std::vector<double>& targets) {
    if (preds.size() != targets.size() || preds.empty())
        throw ShapeError("net", "loss needs equally sized, non-empty prediction and target lists");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) sum += bce_loss(preds[i], targets[i]);
    return sum / static_cast<double>(preds.size());
}

std::vector<double> bce_logit_grad(const std::vector<double>& logits, const std::vector<double>& targets) {
    if (logits.size() != targets.size() || logits.empty())
        throw ShapeError("net", "loss needs equally sized, non-empty logit and target lists");
    std::vector<double> dz(logits.size());
    const double n = static_cast<double>(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = sigmoid(logits[i]);
        const bool clamped = p < kBceEpsilon || p > 1.0 - kBceEpsilon;
        dz[i] = clamped ? 0.0 : (p - targets[i]) / n;
    }
    return dz;
}

template <class T>
BasicSiamese<T>::BasicSiamese(const ModelConfig& config)
    : config_(config),
      encoder_((validate(config), build_encoder<T>(config, geometry_))),
      dense_w_("dense.weight", {static_cast<int>(geometry_.flatten)}, Init::FanInNormal,
               static_cast<int>(geometry_.flatten)),
      dense_b_("dense.bias", {1}, Init::Zeros, 1) {
    initialize();
}

template <class T>
void BasicSiamese<T>::initialize() {
    std::mt19937_64 rng(config_.rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Param<T>* p : params()) {
        switch (p->init) {
            case Init::Zeros:
                std::fill(p->value.values.begin(), p->value.values.end(), T(0));
                break;
            case Init::Ones:
                std::fill(p->value.values.begin(), p->value.values.end(), T(1));
                break;
            case Init::HeNormal:
            case Init::FanInNormal: {
                const double gain = p->init == Init::HeNormal ? 2.0 : 1.0;
                const double sd = std::sqrt(gain / static_cast<double>(p->fan_in));
                for (auto& v : p->value.values) v = static_cast<T>(sd * normal(rng));
                break;
            }
        }
    }
    zero_grad();
}

template <class T>
std::vector<Param<T>*> BasicSiamese<T>::params() {
    std::vector<Param<T>*> out;
    encoder_->collect(out);
    out.push_back(&dense_w_);
    out.push_back(&dense_b_);
    return out;
}

template <class T>
std::vector<const Param<T>*> BasicSiamese<T>::params() const {
    auto all = const_cast<BasicSiamese<T>*>(this)->params();
    return {all.begin(), all.end()};
}

template <class T>
void BasicSiamese<T>::zero_grad() {
    for (Param<T>* p : params()) std::fill(p->grad.values.begin(), p->grad.values.end(), T(0));
}

namespace {

void check_images(const std::vector<int>& shape, const Shape3& in) {
    if (shape.size() != 4 || shape[0] < 1 || shape[1] != in.channels || shape[2] != in.height ||
        shape[3] != in.width)
        throw ShapeError("net", "expected images (N," + std::to_string(in.channels) + "," +
                                    std::to_string(in.height) + "," + std::to_string(in.width) + "), got " +
                                    shape_string(shape));
}

}  // namespace

template <class T>
BasicTensor<T> BasicSiamese<T>::embed(const BasicTensor<T>& images) const {
    check_images(images.shape, config_.input_shape());
    return encoder_->infer(images);
}

template <class T>
std::vector<double> BasicSiamese<T>::score_embeddings(const BasicTensor<T>& ea, const BasicTensor<T>& eb) const {
    if (ea.shape != eb.shape || ea.rank() < 1 || ea.item_size() != geometry_.flatten)
        throw ShapeError("net", "embeddings " + shape_string(ea.shape) + " and " + shape_string(eb.shape) +
                                    " cannot be compared");
    const std::size_t f = geometry_.flatten;
    std::vector<double> out(static_cast<std::size_t>(ea.dim(0)));
    for (std::size_t i = 0; i < out.size(); ++i) {
        double z = dense_b_.value[0];
        const T* a = ea.data() + i * f;
        const T* b = eb.data() + i * f;
        for (std::size_t j = 0; j < f; ++j) z += static_cast<double>(dense_w_.value[j]) * std::abs(a[j] - b[j]);
        out[i] = sigmoid(z);
    }
    return out;
}

template <class T>
std::vector<double> BasicSiamese<T>::score(const BasicTensor<T>& a, const BasicTensor<T>& b) const {
    if (a.shape != b.shape) throw ShapeError("net", "pair batches differ in shape");
    return score_embeddings(embed(a), embed(b));
}

template <class T>
std::vector<double> BasicSiamese<T>::forward_logits(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    check_images(a.shape, config_.input_shape());
    if (a.shape != b.shape) throw ShapeError("net", "pair batches differ in shape");
    pairs_ = static_cast<std::size_t>(a.dim(0));
    std::vector<int> shape = a.shape;
    shape[0] *= 2;
    BasicTensor<T> both(shape);
    std::copy(a.values.begin(), a.values.end(), both.values.begin());
    std::copy(b.values.begin(), b.values.end(), both.values.begin() + static_cast<std::ptrdiff_t>(a.size()));
    emb_ = encoder_->forward(both);
    const std::size_t f = geometry_.flatten;
    std::vector<double> z(pairs_);
    for (std::size_t i = 0; i < pairs_; ++i) {
        double acc = dense_b_.value[0];
        const T* ea = emb_.data() + i * f;
        const T* eb = emb_.data() + (pairs_ + i) * f;
        for (std::size_t j = 0; j < f; ++j) acc += static_cast<double>(dense_w_.value[j]) * std::abs(ea[j] - eb[j]);
        z[i] = acc;
    }
    return z;
}

template <class T>
void BasicSiamese<T>::backward_logits(const std::vector<double>& dz) {
    if (dz.size() != pairs_ || emb_.values.empty())
        throw ShapeError("net", "backward needs one gradient per pair of the preceding forward");
    const std::size_t f = geometry_.flatten;
    BasicTensor<T> de(emb_.shape);
    for (std::size_t i = 0; i < pairs_; ++i) {
        const T* ea = emb_.data() + i * f;
        const T* eb = emb_.data() + (pairs_ + i) * f;
        T* da = de.data() + i * f;
        T* db = de.data() + (pairs_ + i) * f;
        const T g = static_cast<T>(dz[i]);
        for (std::size_t j = 0; j < f; ++j) {
            const T diff = ea[j] - eb[j];
            dense_w_.grad[j] += g * std::abs(diff);
            const T sgn = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
            da[j] = g * dense_w_.value[j] * sgn;
            db[j] = -da[j];
        }
        dense_b_.grad[0] += g;
    }
    emb_ = {};
    encoder_->backward(de);
}

template <class T>
std::vector<std::uint8_t> BasicSiamese<T>::kinks() const {
    std::vector<std::uint8_t> out;
    encoder_->kinks(out);
    const std::size_t f = geometry_.flatten;
    for (std::size_t i = 0; i < pairs_ && !emb_.values.empty(); ++i)
        for (std::size_t j = 0; j < f; ++j) {
            const T d = emb_[i * f + j] - emb_[(pairs_ + i) * f + j];
            out.push_back(d > T(0) ? 2 : (d < T(0) ? 0 : 1));
        }
    return out;
}

template class BasicSiamese<float>;
template class BasicSiamese<double>;

}  // namespace ppgauth::net
