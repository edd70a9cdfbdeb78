#pragma once

// Siamese Inception-ResNet encoder with an L1-similarity sigmoid head.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgauth/net/layers.hpp"

namespace ppgauth::net {

struct ReductionAWidths {
    int k = 192, l = 192, m = 256, n = 384;
    friend bool operator==(const ReductionAWidths&, const ReductionAWidths&) = default;
};

struct ReductionBWidths {
    int w = 256, a = 384, b = 256, d = 256;
    friend bool operator==(const ReductionBWidths&, const ReductionBWidths&) = default;
};

struct ModelConfig {
    std::string name = "paper";
    int input_hw = 299;
    /// false replaces the stem's strided/valid convolutions and its pool with
    /// stride-1 "same" convolutions, used by the grad-check config.
    bool reducing_stem = true;
    std::array<int, 6> stem{32, 32, 64, 80, 192, 256};
    int blocks_a = 5, blocks_b = 10, blocks_c = 5;
    int width_a = 32;
    ReductionAWidths reduction_a;
    int width_b = 128;
    int kernel_b = 7;
    ReductionBWidths reduction_b;
    int width_c = 192;
    int kernel_c = 3;
    double scale_a = 0.17, scale_b = 0.10, scale_c = 0.20;
    std::uint64_t rng_seed = 0;

    /// 299 input, 5/10/5 blocks: encoder output (1792, 8, 8).
    static ModelConfig paper();
    /// 128 input, 2/2/2 blocks, narrow widths: encoder output (160, 2, 2).
    static ModelConfig mini();
    /// 16 input, one A and one C block, for gradient checks.
    static ModelConfig tiny();
    /// "paper", "mini" or "tiny".
    static ModelConfig preset(const std::string& name);

    Shape3 input_shape() const { return {3, input_hw, input_hw}; }
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& config);
/// Missing keys keep the defaults of the named preset (or `paper`); unknown
/// keys are rejected with ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Shapes and sizes implied by a config. Throws ConfigError when the
/// convolution arithmetic does not close.
struct Geometry {
    Shape3 stem;
    Shape3 reduction_a;
    Shape3 reduction_b;
    Shape3 embedding;
    std::size_t flatten = 0;
};
Geometry geometry(const ModelConfig& config);

/// A shared encoder applied to both inputs, z = b + w . |e(a) - e(b)|, and a
/// sigmoid. Both branches run through the one encoder instance, so there is
/// no second weight copy.
template <class T>
class BasicSiamese {
public:
    explicit BasicSiamese(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    const Geometry& geometry() const { return geometry_; }

    /// Inference-mode encoder: (N, 3, H, W) -> (N, C, h, w).
    BasicTensor<T> embed(const BasicTensor<T>& images) const;
    /// Inference-mode scores for N pairs.
    std::vector<double> score(const BasicTensor<T>& a, const BasicTensor<T>& b) const;
    /// Head applied to precomputed embeddings.
    std::vector<double> score_embeddings(const BasicTensor<T>& ea, const BasicTensor<T>& eb) const;

    /// Training forward: both batches pass through the encoder together, so
    /// batch-norm statistics are taken over all 2N images. Returns logits.
    std::vector<double> forward_logits(const BasicTensor<T>& a, const BasicTensor<T>& b);
    /// Accumulates gradients given dL/dz for each pair of the last forward.
    void backward_logits(const std::vector<double>& dz);

    /// Branch pattern of the last training forward: every ReLU mask, pooling
    /// winner and the sign of each |e(a) - e(b)| term. Finite differences are
    /// only exact between points that share it.
    std::vector<std::uint8_t> kinks() const;

    /// Every weight record in a fixed order: encoder parameters and
    /// batch-norm running statistics, then the dense weight and bias.
    std::vector<Param<T>*> params();
    std::vector<const Param<T>*> params() const;
    void zero_grad();

    Param<T>& dense_weight() { return dense_w_; }
    Param<T>& dense_bias() { return dense_b_; }
    const Param<T>& dense_weight() const { return dense_w_; }
    const Param<T>& dense_bias() const { return dense_b_; }

    /// Free-form provenance: run config, validation threshold, ...
    nlohmann::json metadata = nlohmann::json::object();

private:
    void initialize();

    ModelConfig config_;
    Geometry geometry_;
    std::unique_ptr<Sequential<T>> encoder_;
    Param<T> dense_w_;
    Param<T> dense_b_;
    BasicTensor<T> emb_;
    std::size_t pairs_ = 0;
};

using SiameseModel = BasicSiamese<float>;

extern template class BasicSiamese<float>;
extern template class BasicSiamese<double>;

/// Copies values (not gradients) of every record from `src` into `dst`.
template <class T, class U>
void copy_weights(const BasicSiamese<T>& src, BasicSiamese<U>& dst) {
    auto s = src.params();
    auto d = dst.params();
    if (s.size() != d.size()) throw ShapeError("net", "models have different layouts");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i]->value.shape != d[i]->value.shape) throw ShapeError("net", "record " + s[i]->name + " differs");
        d[i]->value.values.assign(s[i]->value.values.begin(), s[i]->value.values.end());
    }
}

double sigmoid(double z);

/// Binary cross-entropy with the prediction clamped to [1e-7, 1 - 1e-7].
double bce_loss(double pred, double target);
double bce_loss(const std::vector<double>& preds, const std::vector<double>& targets);
/// dL/dz of the batch-mean loss for a sigmoid output; zero where the clamp
/// is active.
std::vector<double> bce_logit_grad(const std::vector<double>& logits, const std::vector<double>& targets);

inline constexpr double kBceEpsilon = 1e-7;

}  // namespace ppgauth::net
