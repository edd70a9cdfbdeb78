#include "ppgauth/net/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace ppgauth::net {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_rank4(const std::vector<int>& shape, const char* who) {
    if (shape.size() != 4)
        throw ShapeError("net", std::string(who) + " expects (N,C,H,W), got " + shape_string(shape));
}

int conv_out(int in, int k, int stride, int pad) {
    const int span = in + 2 * pad - k;
    return span < 0 ? 0 : span / stride + 1;
}

template <class T>
void im2col(const T* x, int c, int h, int w, const ConvGeometry& g, int ho, int wo, T* col) {
    const std::size_t plane = static_cast<std::size_t>(ho) * wo;
    for (int ch = 0; ch < c; ++ch) {
        const T* xc = x + static_cast<std::size_t>(ch) * h * w;
        for (int ki = 0; ki < g.kernel_h; ++ki)
            for (int kj = 0; kj < g.kernel_w; ++kj) {
                T* row = col + ((static_cast<std::size_t>(ch) * g.kernel_h + ki) * g.kernel_w + kj) * plane;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * g.stride - g.pad_h + ki;
                    T* out = row + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(out, out + wo, T(0));
                        continue;
                    }
                    const T* xr = xc + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * g.stride - g.pad_w + kj;
                        out[ox] = (ix >= 0 && ix < w) ? xr[ix] : T(0);
                    }
                }
            }
    }
}

template <class T>
void col2im(const T* col, int c, int h, int w, const ConvGeometry& g, int ho, int wo, T* x) {
    const std::size_t plane = static_cast<std::size_t>(ho) * wo;
    for (int ch = 0; ch < c; ++ch) {
        T* xc = x + static_cast<std::size_t>(ch) * h * w;
        for (int ki = 0; ki < g.kernel_h; ++ki)
            for (int kj = 0; kj < g.kernel_w; ++kj) {
                const T* row = col + ((static_cast<std::size_t>(ch) * g.kernel_h + ki) * g.kernel_w + kj) * plane;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * g.stride - g.pad_h + ki;
                    if (iy < 0 || iy >= h) continue;
                    const T* in = row + static_cast<std::size_t>(oy) * wo;
                    T* xr = xc + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * g.stride - g.pad_w + kj;
                        if (ix >= 0 && ix < w) xr[ix] += in[ox];
                    }
                }
            }
    }
}

}  // namespace

std::string shape_string(const std::vector<int>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + ")";
}

// --- Conv2d ------------------------------------------------------------------

template <class T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, ConvGeometry geom, bool bias,
                  Init init)
    : in_(in_channels),
      out_(out_channels),
      g_(geom),
      weight_(name + ".weight", {out_channels, in_channels, geom.kernel_h, geom.kernel_w}, init,
              in_channels * geom.kernel_h * geom.kernel_w) {
    if (in_channels < 1 || out_channels < 1 || geom.kernel_h < 1 || geom.kernel_w < 1 || geom.stride < 1)
        throw ConfigError("net", name + ": invalid convolution geometry");
    if (bias) bias_ = std::make_unique<Param<T>>(name + ".bias", std::vector<int>{out_channels}, Init::Zeros, 1);
}

template <class T>
bool Conv2d<T>::pointwise() const {
    return g_.kernel_h == 1 && g_.kernel_w == 1 && g_.stride == 1 && g_.pad_h == 0 && g_.pad_w == 0;
}

template <class T>
Shape3 Conv2d<T>::output_shape(const Shape3& in) const {
    if (in.channels != in_)
        throw ConfigError("net", weight_.name + ": expects " + std::to_string(in_) + " channels, got " +
                                     std::to_string(in.channels));
    Shape3 out{out_, conv_out(in.height, g_.kernel_h, g_.stride, g_.pad_h),
               conv_out(in.width, g_.kernel_w, g_.stride, g_.pad_w)};
    if (out.height < 1 || out.width < 1)
        throw ConfigError("net", weight_.name + ": input " + std::to_string(in.height) + "x" +
                                     std::to_string(in.width) + " too small for the kernel");
    return out;
}

template <class T>
BasicTensor<T> Conv2d<T>::run(const BasicTensor<T>& x) const {
    require_rank4(x.shape, "conv");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const Shape3 os = output_shape({x.dim(1), h, w});
    const int ho = os.height, wo = os.width;
    const int k = in_ * g_.kernel_h * g_.kernel_w;
    const int p = ho * wo;
    BasicTensor<T> y({n, out_, ho, wo});
    // Products run on Eigen-owned storage only: Eigen's vectorised paths peel
    // by address, so operands at arbitrary offsets round differently per run.
    const RowMat<T> wm = Eigen::Map<const RowMat<T>>(weight_.value.data(), out_, k);
    RowMat<T> cm(k, p), ym(out_, p);
    for (int i = 0; i < n; ++i) {
        const T* xi = x.data() + x.item_size() * i;
        if (pointwise())
            std::copy_n(xi, cm.size(), cm.data());
        else
            im2col(xi, in_, h, w, g_, ho, wo, cm.data());
        ym.noalias() = wm * cm;
        if (bias_)
            for (int o = 0; o < out_; ++o) ym.row(o).array() += bias_->value[o];
        std::copy_n(ym.data(), ym.size(), y.data() + y.item_size() * i);
    }
    return y;
}

template <class T>
BasicTensor<T> Conv2d<T>::infer(const BasicTensor<T>& x) const {
    return run(x);
}

template <class T>
BasicTensor<T> Conv2d<T>::forward(const BasicTensor<T>& x) {
    input_ = x;
    return run(x);
}

template <class T>
BasicTensor<T> Conv2d<T>::backward(const BasicTensor<T>& dy) {
    const int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
    const int ho = dy.dim(2), wo = dy.dim(3);
    const int k = in_ * g_.kernel_h * g_.kernel_w;
    const int p = ho * wo;
    BasicTensor<T> dx(input_.shape);
    const RowMat<T> wm = Eigen::Map<const RowMat<T>>(weight_.value.data(), out_, k);
    RowMat<T> dw = RowMat<T>::Zero(out_, k), cm(k, p), dcm(k, p), dym(out_, p);
    for (int i = 0; i < n; ++i) {
        const T* xi = input_.data() + input_.item_size() * i;
        T* dxi = dx.data() + dx.item_size() * i;
        std::copy_n(dy.data() + dy.item_size() * i, dym.size(), dym.data());
        if (pointwise())
            std::copy_n(xi, cm.size(), cm.data());
        else
            im2col(xi, in_, h, w, g_, ho, wo, cm.data());
        dw.noalias() += dym * cm.transpose();
        dcm.noalias() = wm.transpose() * dym;
        if (pointwise())
            std::copy_n(dcm.data(), dcm.size(), dxi);
        else
            col2im(dcm.data(), in_, h, w, g_, ho, wo, dxi);
        if (bias_)
            for (int o = 0; o < out_; ++o) bias_->grad[o] += dym.row(o).sum();
    }
    Eigen::Map<RowMat<T>>(weight_.grad.data(), out_, k) += dw;
    input_ = {};
    return dx;
}

template <class T>
void Conv2d<T>::collect(std::vector<Param<T>*>& out) {
    out.push_back(&weight_);
    if (bias_) out.push_back(bias_.get());
}

// --- BatchNorm2d ---------------------------------------------------------------

template <class T>
BatchNorm2d<T>::BatchNorm2d(const std::string& name, int channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_(name + ".gamma", {channels}, Init::Ones, 1),
      beta_(name + ".beta", {channels}, Init::Zeros, 1),
      running_mean_(name + ".running_mean", {channels}, Init::Zeros, 1, false),
      running_var_(name + ".running_var", {channels}, Init::Ones, 1, false) {}

template <class T>
BasicTensor<T> BatchNorm2d<T>::infer(const BasicTensor<T>& x) const {
    require_rank4(x.shape, "batch norm");
    BasicTensor<T> y(x.shape);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    for (int c = 0; c < channels_; ++c) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_.value[c]) + eps_);
        const T a = static_cast<T>(gamma_.value[c] * inv);
        const T b = static_cast<T>(beta_.value[c] - gamma_.value[c] * running_mean_.value[c] * inv);
        for (int i = 0; i < x.dim(0); ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * hw;
            for (std::size_t j = 0; j < hw; ++j) y[off + j] = a * x[off + j] + b;
        }
    }
    return y;
}

template <class T>
BasicTensor<T> BatchNorm2d<T>::forward(const BasicTensor<T>& x) {
    require_rank4(x.shape, "batch norm");
    const int n = x.dim(0);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const double m = static_cast<double>(n) * static_cast<double>(hw);
    BasicTensor<T> y(x.shape);
    xhat_ = BasicTensor<T>(x.shape);
    inv_std_.assign(static_cast<std::size_t>(channels_), 0.0);
    for (int c = 0; c < channels_; ++c) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * hw;
            for (std::size_t j = 0; j < hw; ++j) sum += x[off + j];
        }
        const double mean = sum / m;
        double sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                const double d = x[off + j] - mean;
                sq += d * d;
            }
        }
        const double var = sq / m;
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[static_cast<std::size_t>(c)] = inv;
        const double g = gamma_.value[c], b = beta_.value[c];
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                const double xh = (x[off + j] - mean) * inv;
                xhat_[off + j] = static_cast<T>(xh);
                y[off + j] = static_cast<T>(g * xh + b);
            }
        }
        const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
        running_mean_.value[c] = static_cast<T>(momentum_ * running_mean_.value[c] + (1.0 - momentum_) * mean);
        running_var_.value[c] = static_cast<T>(momentum_ * running_var_.value[c] + (1.0 - momentum_) * unbiased);
    }
    return y;
}

template <class T>
BasicTensor<T> BatchNorm2d<T>::backward(const BasicTensor<T>& dy) {
    const int n = dy.dim(0);
    const std::size_t hw = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
    const double m = static_cast<double>(n) * static_cast<double>(hw);
    BasicTensor<T> dx(dy.shape);
    for (int c = 0; c < channels_; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                sum_dy += dy[off + j];
                sum_dy_xh += static_cast<double>(dy[off + j]) * xhat_[off + j];
            }
        }
        gamma_.grad[c] += static_cast<T>(sum_dy_xh);
        beta_.grad[c] += static_cast<T>(sum_dy);
        const double k = gamma_.value[c] * inv_std_[static_cast<std::size_t>(c)] / m;
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * hw;
            for (std::size_t j = 0; j < hw; ++j)
                dx[off + j] = static_cast<T>(k * (m * dy[off + j] - sum_dy - xhat_[off + j] * sum_dy_xh));
        }
    }
    xhat_ = {};
    return dx;
}

template <class T>
void BatchNorm2d<T>::collect(std::vector<Param<T>*>& out) {
    out.insert(out.end(), {&gamma_, &beta_, &running_mean_, &running_var_});
}

// --- ReLU ----------------------------------------------------------------------

template <class T>
BasicTensor<T> ReLU<T>::infer(const BasicTensor<T>& x) const {
    BasicTensor<T> y = x;
    for (auto& v : y.values) v = v > T(0) ? v : T(0);
    return y;
}

template <class T>
BasicTensor<T> ReLU<T>::forward(const BasicTensor<T>& x) {
    output_ = infer(x);
    return output_;
}

template <class T>
BasicTensor<T> ReLU<T>::backward(const BasicTensor<T>& dy) {
    BasicTensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(output_[i] > T(0))) dx[i] = T(0);
    output_ = {};
    return dx;
}

template <class T>
void ReLU<T>::kinks(std::vector<std::uint8_t>& out) const {
    for (const T v : output_.values) out.push_back(v > T(0));
}

// --- MaxPool2d -----------------------------------------------------------------

template <class T>
Shape3 MaxPool2d<T>::output_shape(const Shape3& in) const {
    Shape3 out{in.channels, conv_out(in.height, k_, s_, 0), conv_out(in.width, k_, s_, 0)};
    if (out.height < 1 || out.width < 1)
        throw ConfigError("net", "max pool: input " + std::to_string(in.height) + "x" +
                                     std::to_string(in.width) + " too small");
    return out;
}

template <class T>
BasicTensor<T> MaxPool2d<T>::run(const BasicTensor<T>& x, std::vector<std::size_t>* argmax) const {
    require_rank4(x.shape, "max pool");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const Shape3 os = output_shape({c, h, w});
    BasicTensor<T> y({n, c, os.height, os.width});
    if (argmax) argmax->assign(y.size(), 0);
    std::size_t o = 0;
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * h * w;
            for (int oy = 0; oy < os.height; ++oy)
                for (int ox = 0; ox < os.width; ++ox, ++o) {
                    std::size_t best = base + static_cast<std::size_t>(oy * s_) * w + ox * s_;
                    for (int ky = 0; ky < k_; ++ky)
                        for (int kx = 0; kx < k_; ++kx) {
                            const std::size_t idx = base + static_cast<std::size_t>(oy * s_ + ky) * w + ox * s_ + kx;
                            if (x[idx] > x[best]) best = idx;
                        }
                    y[o] = x[best];
                    if (argmax) (*argmax)[o] = best;
                }
        }
    return y;
}

template <class T>
BasicTensor<T> MaxPool2d<T>::infer(const BasicTensor<T>& x) const {
    return run(x, nullptr);
}

template <class T>
BasicTensor<T> MaxPool2d<T>::forward(const BasicTensor<T>& x) {
    in_shape_ = x.shape;
    return run(x, &argmax_);
}

template <class T>
BasicTensor<T> MaxPool2d<T>::backward(const BasicTensor<T>& dy) {
    BasicTensor<T> dx(in_shape_);
    for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax_[o]] += dy[o];
    argmax_.clear();
    return dx;
}

template <class T>
void MaxPool2d<T>::kinks(std::vector<std::uint8_t>& out) const {
    for (const std::size_t i : argmax_) {
        const auto* b = reinterpret_cast<const std::uint8_t*>(&i);
        out.insert(out.end(), b, b + sizeof i);
    }
}

// --- Sequential ----------------------------------------------------------------

template <class T>
BasicTensor<T> Sequential<T>::infer(const BasicTensor<T>& x) const {
    BasicTensor<T> y = x;
    for (const auto& l : layers_) y = l->infer(y);
    return y;
}

template <class T>
BasicTensor<T> Sequential<T>::forward(const BasicTensor<T>& x) {
    BasicTensor<T> y = x;
    for (auto& l : layers_) y = l->forward(y);
    return y;
}

template <class T>
BasicTensor<T> Sequential<T>::backward(const BasicTensor<T>& dy) {
    BasicTensor<T> d = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
    return d;
}

template <class T>
void Sequential<T>::collect(std::vector<Param<T>*>& out) {
    for (auto& l : layers_) l->collect(out);
}

template <class T>
void Sequential<T>::kinks(std::vector<std::uint8_t>& out) const {
    for (const auto& l : layers_) l->kinks(out);
}

template <class T>
Shape3 Sequential<T>::output_shape(const Shape3& in) const {
    Shape3 s = in;
    for (const auto& l : layers_) s = l->output_shape(s);
    return s;
}

// --- Concat --------------------------------------------------------------------

namespace {

template <class T>
BasicTensor<T> stack_channels(const std::vector<BasicTensor<T>>& parts) {
    const int n = parts.front().dim(0), h = parts.front().dim(2), w = parts.front().dim(3);
    int c = 0;
    for (const auto& p : parts) {
        if (p.dim(0) != n || p.dim(2) != h || p.dim(3) != w)
            throw ShapeError("net", "concat branches disagree on spatial shape");
        c += p.dim(1);
    }
    BasicTensor<T> y({n, c, h, w});
    T* dst = y.data();
    for (int i = 0; i < n; ++i)
        for (const auto& p : parts) {
            const std::size_t len = p.item_size();
            std::copy_n(p.data() + len * i, len, dst);
            dst += len;
        }
    return y;
}

}  // namespace

template <class T>
BasicTensor<T> Concat<T>::infer(const BasicTensor<T>& x) const {
    std::vector<BasicTensor<T>> parts;
    parts.reserve(branches_.size());
    for (const auto& b : branches_) parts.push_back(b->infer(x));
    return stack_channels(parts);
}

template <class T>
BasicTensor<T> Concat<T>::forward(const BasicTensor<T>& x) {
    std::vector<BasicTensor<T>> parts;
    parts.reserve(branches_.size());
    branch_channels_.clear();
    for (auto& b : branches_) {
        parts.push_back(b->forward(x));
        branch_channels_.push_back(parts.back().dim(1));
    }
    return stack_channels(parts);
}

template <class T>
BasicTensor<T> Concat<T>::backward(const BasicTensor<T>& dy) {
    const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    BasicTensor<T> dx;
    std::size_t channel_offset = 0;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        const int cb = branch_channels_[b];
        BasicTensor<T> slice({n, cb, h, w});
        for (int i = 0; i < n; ++i)
            std::copy_n(dy.data() + dy.item_size() * i + channel_offset * hw, cb * hw,
                        slice.data() + slice.item_size() * i);
        channel_offset += static_cast<std::size_t>(cb);
        auto part = branches_[b]->backward(slice);
        if (dx.values.empty())
            dx = std::move(part);
        else
            for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += part[j];
    }
    return dx;
}

template <class T>
void Concat<T>::collect(std::vector<Param<T>*>& out) {
    for (auto& b : branches_) b->collect(out);
}

template <class T>
void Concat<T>::kinks(std::vector<std::uint8_t>& out) const {
    for (const auto& b : branches_) b->kinks(out);
}

template <class T>
Shape3 Concat<T>::output_shape(const Shape3& in) const {
    Shape3 out{0, 0, 0};
    for (const auto& b : branches_) {
        const Shape3 s = b->output_shape(in);
        if (out.channels == 0) {
            out = s;
        } else {
            if (s.height != out.height || s.width != out.width)
                throw ConfigError("net", "concat branches produce different spatial sizes");
            out.channels += s.channels;
        }
    }
    return out;
}

// --- Residual ------------------------------------------------------------------

template <class T>
Residual<T>::Residual(const std::string& name, std::unique_ptr<Concat<T>> branches, int branch_channels,
                      int channels, double scale)
    : branches_(std::move(branches)),
      project_(name + ".project", branch_channels, channels, ConvGeometry::valid(1), true, Init::FanInNormal),
      scale_(scale),
      channels_(channels) {}

template <class T>
Shape3 Residual<T>::output_shape(const Shape3& in) const {
    const Shape3 inner = project_.output_shape(branches_->output_shape(in));
    if (!(inner == in)) throw ConfigError("net", "residual branch changes the tensor shape");
    return in;
}

template <class T>
BasicTensor<T> Residual<T>::infer(const BasicTensor<T>& x) const {
    BasicTensor<T> y = project_.infer(branches_->infer(x));
    const T s = static_cast<T>(scale_);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const T v = x[i] + s * y[i];
        y[i] = v > T(0) ? v : T(0);
    }
    return y;
}

template <class T>
BasicTensor<T> Residual<T>::forward(const BasicTensor<T>& x) {
    BasicTensor<T> y = project_.forward(branches_->forward(x));
    const T s = static_cast<T>(scale_);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const T v = x[i] + s * y[i];
        y[i] = v > T(0) ? v : T(0);
    }
    output_ = y;
    return y;
}

template <class T>
BasicTensor<T> Residual<T>::backward(const BasicTensor<T>& dy) {
    BasicTensor<T> dpre = dy;
    for (std::size_t i = 0; i < dpre.size(); ++i)
        if (!(output_[i] > T(0))) dpre[i] = T(0);
    output_ = {};
    BasicTensor<T> dproj = dpre;
    const T s = static_cast<T>(scale_);
    for (auto& v : dproj.values) v *= s;
    auto dx = branches_->backward(project_.backward(dproj));
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dpre[i];
    return dx;
}

template <class T>
void Residual<T>::collect(std::vector<Param<T>*>& out) {
    branches_->collect(out);
    project_.collect(out);
}

template <class T>
void Residual<T>::kinks(std::vector<std::uint8_t>& out) const {
    branches_->kinks(out);
    for (const T v : output_.values) out.push_back(v > T(0));
}

template <class T>
std::unique_ptr<Sequential<T>> conv_bn_relu(const std::string& name, int in, int out, ConvGeometry g) {
    auto seq = std::make_unique<Sequential<T>>();
    seq->add(std::make_unique<Conv2d<T>>(name + ".conv", in, out, g, false));
    seq->add(std::make_unique<BatchNorm2d<T>>(name + ".bn", out));
    seq->add(std::make_unique<ReLU<T>>());
    return seq;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class ReLU<float>;
template class ReLU<double>;
template class MaxPool2d<float>;
template class MaxPool2d<double>;
template class Sequential<float>;
template class Sequential<double>;
template class Concat<float>;
template class Concat<double>;
template class Residual<float>;
template class Residual<double>;
template std::unique_ptr<Sequential<float>> conv_bn_relu<float>(const std::string&, int, int, ConvGeometry);
template std::unique_ptr<Sequential<double>> conv_bn_relu<double>(const std::string&, int, int, ConvGeometry);

}  // namespace ppgauth::net
