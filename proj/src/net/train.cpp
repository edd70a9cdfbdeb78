#include "ppgauth/net/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <limits>
#include <set>

#include "ppgauth/errors.hpp"

namespace ppgauth::net {

void validate(const TrainConfig& c) {
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate))
        throw ConfigError("net", "learning_rate must be positive");
    if (c.epochs < 1 || c.batch_size < 1 || c.early_stop_patience < 1 || c.steps_per_epoch < 1 || c.val_pairs < 2)
        throw ConfigError("net", "epochs, batch_size, early_stop_patience and steps_per_epoch must be positive, "
                                 "val_pairs at least 2");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
            {"batch_size", c.batch_size},       {"early_stop_patience", c.early_stop_patience},
            {"steps_per_epoch", c.steps_per_epoch}, {"val_pairs", c.val_pairs},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("net", "train must be a JSON object");
    static const std::set<std::string> keys{"learning_rate",   "epochs",    "batch_size", "early_stop_patience",
                                            "steps_per_epoch", "val_pairs", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) throw ConfigError("net", "unknown key '" + it.key() + "' in train");
    TrainConfig c;
    try {
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
        c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
        c.val_pairs = j.value("val_pairs", c.val_pairs);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("net", std::string("train: ") + e.what());
    }
    validate(c);
    return c;
}

template <class T>
void Adam<T>::step(const std::vector<Param<T>*>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i]->value.size(), 0.0);
            v_[i].assign(params[i]->value.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw ShapeError("net", "optimizer bound to a different parameter list");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param<T>& p = *params[i];
        if (!p.trainable) continue;
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            m[k] = b1_ * m[k] + (1.0 - b1_) * g;
            v[k] = b2_ * v[k] + (1.0 - b2_) * g * g;
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            p.value[k] = static_cast<T>(p.value[k] - lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

template class Adam<float>;
template class Adam<double>;

nlohmann::json history_json(const TrainHistory& h) {
    auto arr = nlohmann::json::array();
    for (const auto& e : h.epochs)
        arr.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    return arr;
}

namespace {

constexpr int kScoreChunk = 16;

Tensor slice(const Tensor& t, int first, int count) {
    std::vector<int> shape = t.shape;
    shape[0] = count;
    Tensor out(shape);
    const std::size_t item = t.item_size();
    std::copy_n(t.data() + item * static_cast<std::size_t>(first), item * static_cast<std::size_t>(count), out.data());
    return out;
}

std::vector<std::vector<float>> snapshot(SiameseModel& model) {
    std::vector<std::vector<float>> out;
    for (auto* p : model.params()) out.push_back(p->value.values);
    return out;
}

void restore(SiameseModel& model, const std::vector<std::vector<float>>& snap) {
    auto params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.values = snap[i];
}

}  // namespace

std::vector<double> pair_scores(const SiameseModel& model, const PairBatch& pairs) {
    const int n = pairs.images_a.dim(0);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; i += kScoreChunk) {
        const int k = std::min(kScoreChunk, n - i);
        auto s = model.score(slice(pairs.images_a, i, k), slice(pairs.images_b, i, k));
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

double pair_loss(const SiameseModel& model, const PairBatch& pairs) {
    return bce_loss(pair_scores(model, pairs), pairs.labels);
}

TrainHistory train(SiameseModel& model, const SegmentDataset& train_data, const SegmentDataset& val_data,
                   const ImageSpec& spec, const TrainConfig& config,
                   const std::function<void(const EpochRecord&)>& on_epoch) {
    validate(config);
    if (spec.input_hw != model.config().input_hw)
        throw ConfigError("net", "image size " + std::to_string(spec.input_hw) + " does not match the model input " +
                                     std::to_string(model.config().input_hw));
    PairGenerator gen(train_data, spec, config.seed);
    const PairBatch val = make_pairs(val_data, spec, config.val_pairs, config.seed ^ 0x7a1dULL);
    Adam<float> opt(config.learning_rate);
    const auto params = model.params();

    TrainHistory history;
    history.best_val_loss = std::numeric_limits<double>::infinity();
    auto best = snapshot(model);
    int waited = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double sum = 0.0;
        for (int step = 0; step < config.steps_per_epoch; ++step) {
            const PairBatch batch = gen.next(config.batch_size);
            model.zero_grad();
            const auto z = model.forward_logits(batch.images_a, batch.images_b);
            std::vector<double> preds(z.size());
            std::transform(z.begin(), z.end(), preds.begin(), sigmoid);
            const double loss = bce_loss(preds, batch.labels);
            if (!std::isfinite(loss))
                throw TrainingError("net", "training diverged in epoch " + std::to_string(epoch) +
                                               " (loss is not finite)");
            model.backward_logits(bce_logit_grad(z, batch.labels));
            opt.step(params);
            sum += loss;
        }
        EpochRecord rec{epoch, sum / config.steps_per_epoch, pair_loss(model, val)};
        if (!std::isfinite(rec.val_loss))
            throw TrainingError("net", "training diverged in epoch " + std::to_string(epoch) +
                                           " (validation loss is not finite)");
        history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (rec.val_loss < history.best_val_loss) {
            history.best_val_loss = rec.val_loss;
            history.best_epoch = epoch;
            best = snapshot(model);
            waited = 0;
        } else if (++waited >= config.early_stop_patience) {
            history.stopped_early = epoch < config.epochs;
            break;
        }
    }
    restore(model, best);
    model.zero_grad();
    return history;
}

// --- gradient check --------------------------------------------------------------

namespace {

std::string kind_of(const std::string& name) {
    if (name.rfind("dense.", 0) == 0) return "dense";
    if (name.find(".project.") != std::string::npos) return "residual";
    if (name.find(".bn.") != std::string::npos) return "batchnorm";
    return "conv";
}

}  // namespace

GradCheckResult grad_check(const ModelConfig& config, std::uint64_t seed, std::size_t per_record) {
    ModelConfig cfg = config;
    cfg.rng_seed = seed;
    BasicSiamese<double> model(cfg);
    std::mt19937_64 rng(seed ^ 0x9c4eULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int hw = cfg.input_hw;
    BasicTensor<double> a({2, 3, hw, hw}), b({2, 3, hw, hw});
    for (auto& v : a.values) v = normal(rng);
    for (auto& v : b.values) v = normal(rng);
    const std::vector<double> labels{1.0, 0.0};

    auto loss = [&](std::vector<std::uint8_t>& pattern) {
        const auto z = model.forward_logits(a, b);
        pattern = model.kinks();
        std::vector<double> p(z.size());
        std::transform(z.begin(), z.end(), p.begin(), sigmoid);
        return bce_loss(p, labels);
    };

    model.zero_grad();
    std::vector<std::uint8_t> base, up_pattern, down_pattern;
    const auto z0 = model.forward_logits(a, b);
    base = model.kinks();
    model.backward_logits(bce_logit_grad(z0, labels));

    GradCheckResult result;
    constexpr double h = 1e-3;
    constexpr std::size_t kAttempts = 64;
    for (Param<double>* p : model.params()) {
        if (!p->trainable) continue;
        std::size_t accepted = 0;
        for (std::size_t attempt = 0; attempt < kAttempts && accepted < per_record; ++attempt) {
            std::uniform_int_distribution<std::size_t> pick(0, p->value.size() - 1);
            const std::size_t i = pick(rng);
            const double w0 = p->value[i];
            p->value[i] = w0 + h;
            const double up = loss(up_pattern);
            p->value[i] = w0 - h;
            const double down = loss(down_pattern);
            p->value[i] = w0;
            if (up_pattern != base || down_pattern != base) {
                ++result.rejected;
                continue;
            }
            ++accepted;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p->grad[i];
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            result.max_rel_error = std::max(result.max_rel_error, rel);
            ++result.sampled;
            result.kinds.insert(kind_of(p->name));
        }
    }
    return result;
}

}  // namespace ppgauth::net
