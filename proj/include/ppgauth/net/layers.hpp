#pragma once

// Layer kernels with explicit backward passes. Every module offers a pure
// `infer` (batch-norm uses running statistics, nothing is cached) and a
// training pair `forward`/`backward` that caches what the gradient needs.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ppgauth/net/tensor.hpp"

namespace ppgauth::net {

enum class Init : std::uint8_t { Zeros, Ones, HeNormal, FanInNormal };

template <class T>
struct Param {
    std::string name;
    BasicTensor<T> value;
    BasicTensor<T> grad;
    bool trainable = true;
    Init init = Init::Zeros;
    int fan_in = 1;

    Param(std::string n, std::vector<int> shape, Init how, int fan, bool train = true)
        : name(std::move(n)), value(shape), grad(shape), trainable(train), init(how), fan_in(fan) {}
};

template <class T>
class Module {
public:
    virtual ~Module() = default;
    virtual BasicTensor<T> infer(const BasicTensor<T>& x) const = 0;
    virtual BasicTensor<T> forward(const BasicTensor<T>& x) = 0;
    virtual BasicTensor<T> backward(const BasicTensor<T>& dy) = 0;
    virtual void collect(std::vector<Param<T>*>& out) { (void)out; }
    /// Throws ConfigError when the geometry does not fit the input.
    virtual Shape3 output_shape(const Shape3& in) const = 0;
    /// Appends the branch taken at every non-differentiable point of the last
    /// training forward (ReLU masks, pooling winners).
    virtual void kinks(std::vector<std::uint8_t>& out) const { (void)out; }
};

struct ConvGeometry {
    int kernel_h = 1, kernel_w = 1;
    int stride = 1;
    int pad_h = 0, pad_w = 0;

    static ConvGeometry valid(int k, int stride = 1) { return {k, k, stride, 0, 0}; }
    static ConvGeometry same(int kh, int kw) { return {kh, kw, 1, kh / 2, kw / 2}; }
};

template <class T>
class Conv2d final : public Module<T> {
public:
    Conv2d(const std::string& name, int in_channels, int out_channels, ConvGeometry geom, bool bias,
           Init init = Init::HeNormal);

    BasicTensor<T> infer(const BasicTensor<T>& x) const override;
    BasicTensor<T> forward(const BasicTensor<T>& x) override;
    BasicTensor<T> backward(const BasicTensor<T>& dy) override;
    void collect(std::vector<Param<T>*>& out) override;
    Shape3 output_shape(const Shape3& in) const override;

private:
    BasicTensor<T> run(const BasicTensor<T>& x) const;
    bool pointwise() const;

    int in_, out_;
    ConvGeometry g_;
    Param<T> weight_;
    std::unique_ptr<Param<T>> bias_;
    BasicTensor<T> input_;
};

template <class T>
class BatchNorm2d final : public Module<T> {
public:
    BatchNorm2d(const std::string& name, int channels, double eps = 1e-3, double momentum = 0.9);

    BasicTensor<T> infer(const BasicTensor<T>& x) const override;
    BasicTensor<T> forward(const BasicTensor<T>& x) override;
    BasicTensor<T> backward(const BasicTensor<T>& dy) override;
    void collect(std::vector<Param<T>*>& out) override;
    Shape3 output_shape(const Shape3& in) const override { return in; }

private:
    int channels_;
    double eps_, momentum_;
    Param<T> gamma_, beta_, running_mean_, running_var_;
    BasicTensor<T> xhat_;
    std::vector<double> inv_std_;
};

template <class T>
class ReLU final : public Module<T> {
public:
    BasicTensor<T> infer(const BasicTensor<T>& x) const override;
    BasicTensor<T> forward(const BasicTensor<T>& x) override;
    BasicTensor<T> backward(const BasicTensor<T>& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return in; }
    void kinks(std::vector<std::uint8_t>& out) const override;

private:
    BasicTensor<T> output_;
};

/// Max pooling without padding.
template <class T>
class MaxPool2d final : public Module<T> {
public:
    MaxPool2d(int kernel, int stride) : k_(kernel), s_(stride) {}

    BasicTensor<T> infer(const BasicTensor<T>& x) const override;
    BasicTensor<T> forward(const BasicTensor<T>& x) override;
    BasicTensor<T> backward(const BasicTensor<T>& dy) override;
    Shape3 output_shape(const Shape3& in) const override;
    void kinks(std::vector<std::uint8_t>& out) const override;

private:
    BasicTensor<T> run(const BasicTensor<T>& x, std::vector<std::size_t>* argmax) const;

    int k_, s_;
    std::vector<int> in_shape_;
    std::vector<std::size_t> argmax_;
};

template <class T>
class Sequential final : public Module<T> {
public:
    Sequential& add(std::unique_ptr<Module<T>> m) {
        layers_.push_back(std::move(m));
        return *this;
    }
    bool empty() const { return layers_.empty(); }

    BasicTensor<T> infer(const BasicTensor<T>& x) const override;
    BasicTensor<T> forward(const BasicTensor<T>& x) override;
    BasicTensor<T> backward(const BasicTensor<T>& dy) override;
    void collect(std::vector<Param<T>*>& out) override;
    Shape3 output_shape(const Shape3& in) const override;
    void kinks(std::vector<std::uint8_t>& out) const override;

private:
    std::vector<std::unique_ptr<Module<T>>> layers_;
};

/// Applies every branch to the same input and stacks the results along the
/// channel axis.
template <class T>
class Concat final : public Module<T> {
public:
    Concat& add(std::unique_ptr<Module<T>> branch) {
        branches_.push_back(std::move(branch));
        return *this;
    }

    BasicTensor<T> infer(const BasicTensor<T>& x) const override;
    BasicTensor<T> forward(const BasicTensor<T>& x) override;
    BasicTensor<T> backward(const BasicTensor<T>& dy) override;
    void collect(std::vector<Param<T>*>& out) override;
    Shape3 output_shape(const Shape3& in) const override;
    void kinks(std::vector<std::uint8_t>& out) const override;

private:
    std::vector<std::unique_ptr<Module<T>>> branches_;
    std::vector<int> branch_channels_;
};

/// y = relu(x + scale * project(branches(x))) with a biased 1x1 projection
/// back to the input width.
template <class T>
class Residual final : public Module<T> {
public:
    Residual(const std::string& name, std::unique_ptr<Concat<T>> branches, int branch_channels,
             int channels, double scale);

    BasicTensor<T> infer(const BasicTensor<T>& x) const override;
    BasicTensor<T> forward(const BasicTensor<T>& x) override;
    BasicTensor<T> backward(const BasicTensor<T>& dy) override;
    void collect(std::vector<Param<T>*>& out) override;
    Shape3 output_shape(const Shape3& in) const override;
    void kinks(std::vector<std::uint8_t>& out) const override;

private:
    std::unique_ptr<Concat<T>> branches_;
    Conv2d<T> project_;
    double scale_;
    int channels_;
    BasicTensor<T> output_;
};

/// conv (no bias) -> batch norm -> relu
template <class T>
std::unique_ptr<Sequential<T>> conv_bn_relu(const std::string& name, int in, int out, ConvGeometry g);

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class ReLU<float>;
extern template class ReLU<double>;
extern template class MaxPool2d<float>;
extern template class MaxPool2d<double>;
extern template class Sequential<float>;
extern template class Sequential<double>;
extern template class Concat<float>;
extern template class Concat<double>;
extern template class Residual<float>;
extern template class Residual<double>;

}  // namespace ppgauth::net
