// Copyright 2026 The par Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "par/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "par/error.hpp"

namespace par::nn {
namespace {

void require_rank(const Tensor& x, int rank, const char* layer) {
    if (x.rank() != rank)
        throw Error(ErrorCode::ShapeMismatch, std::string(layer) + " expects rank " + std::to_string(rank) + ", got " +
                                                  x.shape_string());
}

void require_last(const Tensor& x, int channels, const char* layer) {
    if (x.rank() < 1 || x.dim(-1) != channels)
        throw Error(ErrorCode::ShapeMismatch, std::string(layer) + " expects last dim " + std::to_string(channels) +
                                                  ", got " + x.shape_string());
}

} // namespace

Parameter::Parameter(std::vector<int> shape, InitSpec spec, bool is_trainable)
    : value(shape), grad(shape), trainable(is_trainable), init(spec) {
    if (spec.kind == InitKind::ones) value.fill(1.0f);
    if (spec.kind == InitKind::constant) value.fill(spec.scale);
}

void Parameter::initialize(Rng& rng) {
    auto v = value.values();
    switch (init.kind) {
    case InitKind::zeros: std::fill(v.begin(), v.end(), 0.0f); break;
    case InitKind::ones: std::fill(v.begin(), v.end(), 1.0f); break;
    case InitKind::constant: std::fill(v.begin(), v.end(), init.scale); break;
    case InitKind::he_normal: {
        const double stddev = std::sqrt(2.0 / std::max(1.0f, init.scale));
        for (auto& x : v) x = static_cast<float>(rng.normal(0.0, stddev));
        break;
    }
    case InitKind::normal:
        for (auto& x : v) x = static_cast<float>(rng.normal(0.0, init.scale));
        break;
    case InitKind::uniform:
        for (auto& x : v) x = static_cast<float>(rng.uniform(-init.scale, init.scale));
        break;
    }
    grad.fill(0.0f);
}

// ---------------------------------------------------------------- Sequential

Sequential& Sequential::add(std::string name, LayerPtr layer) {
    layers_.emplace_back(std::move(name), std::move(layer));
    return *this;
}

Tensor Sequential::infer(const Tensor& x) const {
    Tensor h = x;
    for (const auto& [name, layer] : layers_) h = layer->infer(h);
    return h;
}

Tensor Sequential::forward(const Tensor& x) {
    Tensor h = x;
    for (auto& [name, layer] : layers_) h = layer->forward(h);
    return h;
}

Tensor Sequential::backward(const Tensor& grad) {
    Tensor g = grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->backward(g);
    return g;
}

void Sequential::visit(const std::string& prefix, const ParamVisitor& fn) {
    for (auto& [name, layer] : layers_) layer->visit(prefix + name + ".", fn);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, bool bias)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding), has_bias_(bias),
      weight_({kernel, kernel, in_channels, out_channels},
              {InitKind::he_normal, static_cast<float>(kernel * kernel * in_channels)}),
      bias_(bias ? std::vector<int>{out_channels} : std::vector<int>{0}, {InitKind::zeros}) {
    if (in_ <= 0 || out_ <= 0 || k_ <= 0 || stride_ <= 0 || pad_ < 0)
        throw Error(ErrorCode::InvalidArgument, "bad Conv2d geometry");
}

void Conv2d::im2col(const float* image, int H, int W, RowMatrixF& col) const {
    const int Ho = out_size(H), Wo = out_size(W);
    col.resize(static_cast<Eigen::Index>(Ho) * Wo, static_cast<Eigen::Index>(k_) * k_ * in_);
    const std::size_t chunk = static_cast<std::size_t>(in_) * sizeof(float);
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            float* row = col.data() + (static_cast<std::size_t>(oy) * Wo + ox) * col.cols();
            for (int ky = 0; ky < k_; ++ky) {
                const int iy = oy * stride_ - pad_ + ky;
                for (int kx = 0; kx < k_; ++kx) {
                    const int ix = ox * stride_ - pad_ + kx;
                    float* dst = row + (static_cast<std::size_t>(ky) * k_ + kx) * in_;
                    if (iy < 0 || iy >= H || ix < 0 || ix >= W) std::memset(dst, 0, chunk);
                    else std::memcpy(dst, image + (static_cast<std::size_t>(iy) * W + ix) * in_, chunk);
                }
            }
        }
    }
}

void Conv2d::col2im(const RowMatrixF& col, int H, int W, float* image) const {
    const int Ho = out_size(H), Wo = out_size(W);
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            const float* row = col.data() + (static_cast<std::size_t>(oy) * Wo + ox) * col.cols();
            for (int ky = 0; ky < k_; ++ky) {
                const int iy = oy * stride_ - pad_ + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < k_; ++kx) {
                    const int ix = ox * stride_ - pad_ + kx;
                    if (ix < 0 || ix >= W) continue;
                    const float* src = row + (static_cast<std::size_t>(ky) * k_ + kx) * in_;
                    float* dst = image + (static_cast<std::size_t>(iy) * W + ix) * in_;
                    for (int c = 0; c < in_; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

Tensor Conv2d::infer(const Tensor& x) const {
    require_rank(x, 4, "Conv2d");
    require_last(x, in_, "Conv2d");
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int Ho = out_size(H), Wo = out_size(W);
    if (Ho <= 0 || Wo <= 0) throw Error(ErrorCode::ShapeMismatch, "Conv2d input " + x.shape_string() + " too small");
    Tensor out({B, Ho, Wo, out_});
    const ConstMatrixMapF w(weight_.value.data(), static_cast<Eigen::Index>(k_) * k_ * in_, out_);
    if (k_ == 1 && stride_ == 1 && pad_ == 0) {
        out.rows_view().noalias() = x.rows_view() * w;
    } else {
        RowMatrixF col;
        const std::size_t in_stride = static_cast<std::size_t>(H) * W * in_;
        const std::size_t out_stride = static_cast<std::size_t>(Ho) * Wo * out_;
        for (int b = 0; b < B; ++b) {
            im2col(x.data() + b * in_stride, H, W, col);
            MatrixMapF ob(out.data() + b * out_stride, static_cast<Eigen::Index>(Ho) * Wo, out_);
            ob.noalias() = col * w;
        }
    }
    if (has_bias_) {
        const Eigen::Map<const Eigen::RowVectorXf> bias(bias_.value.data(), out_);
        out.rows_view().rowwise() += bias;
    }
    return out;
}

Tensor Conv2d::forward(const Tensor& x) {
    input_ = x;
    return infer(x);
}

Tensor Conv2d::backward(const Tensor& grad) {
    const int B = input_.dim(0), H = input_.dim(1), W = input_.dim(2);
    const int Ho = out_size(H), Wo = out_size(W);
    if (grad.shape() != std::vector<int>{B, Ho, Wo, out_}) throw Error(ErrorCode::ShapeMismatch, "Conv2d grad shape");
    Tensor dx(input_.shape());
    const ConstMatrixMapF w(weight_.value.data(), static_cast<Eigen::Index>(k_) * k_ * in_, out_);
    MatrixMapF dw(weight_.grad.data(), w.rows(), w.cols());
    if (has_bias_) {
        Eigen::Map<Eigen::RowVectorXf> db(bias_.grad.data(), out_);
        db += grad.rows_view().colwise().sum();
    }
    if (k_ == 1 && stride_ == 1 && pad_ == 0) {
        dw.noalias() += input_.rows_view().transpose() * grad.rows_view();
        dx.rows_view().noalias() = grad.rows_view() * w.transpose();
        return dx;
    }
    RowMatrixF col, dcol;
    const std::size_t in_stride = static_cast<std::size_t>(H) * W * in_;
    const std::size_t out_stride = static_cast<std::size_t>(Ho) * Wo * out_;
    for (int b = 0; b < B; ++b) {
        im2col(input_.data() + b * in_stride, H, W, col);
        const ConstMatrixMapF gb(grad.data() + b * out_stride, static_cast<Eigen::Index>(Ho) * Wo, out_);
        dw.noalias() += col.transpose() * gb;
        dcol.noalias() = gb * w.transpose();
        col2im(dcol, H, W, dx.data() + b * in_stride);
    }
    return dx;
}

void Conv2d::visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + "weight", weight_);
    if (has_bias_) fn(prefix + "bias", bias_);
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int channels, float momentum, float eps)
    : channels_(channels), momentum_(momentum), eps_(eps), gamma_({channels}, {InitKind::ones}),
      beta_({channels}, {InitKind::zeros}), running_mean_({channels}, {InitKind::zeros}, false),
      running_var_({channels}, {InitKind::ones}, false) {}

Tensor BatchNorm::infer(const Tensor& x) const {
    require_last(x, channels_, "BatchNorm");
    Tensor out(x.shape());
    const auto in = x.rows_view();
    auto o = out.rows_view();
    for (int c = 0; c < channels_; ++c) {
        const float scale = gamma_.value[c] / std::sqrt(running_var_.value[c] + eps_);
        const float shift = beta_.value[c] - running_mean_.value[c] * scale;
        o.col(c) = in.col(c) * scale;
        o.col(c).array() += shift;
    }
    return out;
}

Tensor BatchNorm::forward(const Tensor& x) {
    require_last(x, channels_, "BatchNorm");
    const auto in = x.rows_view();
    const auto n = in.rows();
    if (n < 1) throw Error(ErrorCode::ShapeMismatch, "BatchNorm on empty batch");
    xhat_ = Tensor(x.shape());
    inv_std_.assign(static_cast<std::size_t>(channels_), 0.0f);
    Tensor out(x.shape());
    auto xh = xhat_.rows_view();
    auto o = out.rows_view();
    for (int c = 0; c < channels_; ++c) {
        double sum = 0.0, sq = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) sum += in(i, c);
        const double mean = sum / static_cast<double>(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = in(i, c) - mean;
            sq += d * d;
        }
        const double var = sq / static_cast<double>(n);
        const auto inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
        inv_std_[static_cast<std::size_t>(c)] = inv;
        for (Eigen::Index i = 0; i < n; ++i) {
            const float h = static_cast<float>(in(i, c) - mean) * inv;
            xh(i, c) = h;
            o(i, c) = gamma_.value[c] * h + beta_.value[c];
        }
        const double unbiased = n > 1 ? sq / static_cast<double>(n - 1) : var;
        running_mean_.value[c] = static_cast<float>((1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean);
        running_var_.value[c] = static_cast<float>((1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
    }
    return out;
}

Tensor BatchNorm::backward(const Tensor& grad) {
    if (!grad.same_shape(xhat_)) throw Error(ErrorCode::ShapeMismatch, "BatchNorm grad shape");
    Tensor dx(grad.shape());
    const auto g = grad.rows_view();
    const auto xh = xhat_.rows_view();
    auto d = dx.rows_view();
    const auto n = g.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int c = 0; c < channels_; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            sum_g += g(i, c);
            sum_gx += static_cast<double>(g(i, c)) * xh(i, c);
        }
        beta_.grad[c] += static_cast<float>(sum_g);
        gamma_.grad[c] += static_cast<float>(sum_gx);
        const double k = gamma_.value[c] * inv_std_[static_cast<std::size_t>(c)];
        for (Eigen::Index i = 0; i < n; ++i)
            d(i, c) = static_cast<float>(k * (g(i, c) - inv_n * sum_g - xh(i, c) * inv_n * sum_gx));
    }
    return dx;
}

void BatchNorm::visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + "weight", gamma_);
    fn(prefix + "bias", beta_);
    fn(prefix + "running_mean", running_mean_);
    fn(prefix + "running_var", running_var_);
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(int channels, float eps)
    : channels_(channels), eps_(eps), gamma_({channels}, {InitKind::ones}), beta_({channels}, {InitKind::zeros}) {}

Tensor LayerNorm::normalize(const Tensor& x, Tensor* xhat, std::vector<float>* inv_std) const {
    require_last(x, channels_, "LayerNorm");
    Tensor out(x.shape());
    const auto in = x.rows_view();
    auto o = out.rows_view();
    const auto n = in.rows();
    if (xhat) *xhat = Tensor(x.shape());
    if (inv_std) inv_std->assign(static_cast<std::size_t>(n), 0.0f);
    for (Eigen::Index i = 0; i < n; ++i) {
        double sum = 0.0, sq = 0.0;
        for (int c = 0; c < channels_; ++c) sum += in(i, c);
        const double mean = sum / channels_;
        for (int c = 0; c < channels_; ++c) {
            const double dlt = in(i, c) - mean;
            sq += dlt * dlt;
        }
        const auto inv = static_cast<float>(1.0 / std::sqrt(sq / channels_ + eps_));
        if (inv_std) (*inv_std)[static_cast<std::size_t>(i)] = inv;
        for (int c = 0; c < channels_; ++c) {
            const float h = static_cast<float>(in(i, c) - mean) * inv;
            if (xhat) xhat->rows_view()(i, c) = h;
            o(i, c) = gamma_.value[c] * h + beta_.value[c];
        }
    }
    return out;
}

Tensor LayerNorm::infer(const Tensor& x) const { return normalize(x, nullptr, nullptr); }

Tensor LayerNorm::forward(const Tensor& x) { return normalize(x, &xhat_, &inv_std_); }

Tensor LayerNorm::backward(const Tensor& grad) {
    if (!grad.same_shape(xhat_)) throw Error(ErrorCode::ShapeMismatch, "LayerNorm grad shape");
    Tensor dx(grad.shape());
    const auto g = grad.rows_view();
    const auto xh = xhat_.rows_view();
    auto d = dx.rows_view();
    const double inv_c = 1.0 / channels_;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        double sum_gh = 0.0, sum_ghx = 0.0;
        for (int c = 0; c < channels_; ++c) {
            const double gh = static_cast<double>(g(i, c)) * gamma_.value[c];
            sum_gh += gh;
            sum_ghx += gh * xh(i, c);
            gamma_.grad[c] += g(i, c) * xh(i, c);
            beta_.grad[c] += g(i, c);
        }
        const double inv = inv_std_[static_cast<std::size_t>(i)];
        for (int c = 0; c < channels_; ++c) {
            const double gh = static_cast<double>(g(i, c)) * gamma_.value[c];
            d(i, c) = static_cast<float>(inv * (gh - inv_c * sum_gh - xh(i, c) * inv_c * sum_ghx));
        }
    }
    return dx;
}

void LayerNorm::visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + "weight", gamma_);
    fn(prefix + "bias", beta_);
}

// ---------------------------------------------------------------- activations

Tensor ReLU::infer(const Tensor& x) const {
    Tensor out = x;
    for (auto& v : out.values()) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor ReLU::forward(const Tensor& x) {
    output_ = infer(x);
    return output_;
}

Tensor ReLU::backward(const Tensor& grad) {
    if (!grad.same_shape(output_)) throw Error(ErrorCode::ShapeMismatch, "ReLU grad shape");
    Tensor dx = grad;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(output_[i] > 0.0f)) dx[i] = 0.0f;
    return dx;
}

Tensor GELU::infer(const Tensor& x) const {
    Tensor out = x;
    for (auto& v : out.values()) v = 0.5f * v * (1.0f + std::erf(v * static_cast<float>(std::numbers::sqrt2 / 2)));
    return out;
}

Tensor GELU::forward(const Tensor& x) {
    input_ = x;
    return infer(x);
}

Tensor GELU::backward(const Tensor& grad) {
    if (!grad.same_shape(input_)) throw Error(ErrorCode::ShapeMismatch, "GELU grad shape");
    Tensor dx = grad;
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < dx.size(); ++i) {
        const double x = input_[i];
        const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        dx[i] = static_cast<float>(grad[i] * (cdf + x * pdf));
    }
    return dx;
}

// ---------------------------------------------------------------- pooling

MaxPool2d::MaxPool2d(int kernel, int stride, int padding) : k_(kernel), stride_(stride), pad_(padding) {}

Tensor MaxPool2d::pool(const Tensor& x, std::vector<std::size_t>* argmax) const {
    require_rank(x, 4, "MaxPool2d");
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    const int Ho = (H + 2 * pad_ - k_) / stride_ + 1, Wo = (W + 2 * pad_ - k_) / stride_ + 1;
    if (Ho <= 0 || Wo <= 0) throw Error(ErrorCode::ShapeMismatch, "MaxPool2d input " + x.shape_string() + " too small");
    Tensor out({B, Ho, Wo, C});
    if (argmax) argmax->assign(out.size(), 0);
    std::size_t o = 0;
    for (int b = 0; b < B; ++b)
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox)
                for (int c = 0; c < C; ++c, ++o) {
                    float best = -std::numeric_limits<float>::infinity();
                    std::size_t best_idx = 0;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= W) continue;
                            const std::size_t idx = ((static_cast<std::size_t>(b) * H + iy) * W + ix) * C + c;
                            if (x[idx] > best) {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out[o] = best;
                    if (argmax) (*argmax)[o] = best_idx;
                }
    return out;
}

Tensor MaxPool2d::infer(const Tensor& x) const { return pool(x, nullptr); }

Tensor MaxPool2d::forward(const Tensor& x) {
    input_shape_ = x.shape();
    return pool(x, &argmax_);
}

Tensor MaxPool2d::backward(const Tensor& grad) {
    if (grad.size() != argmax_.size()) throw Error(ErrorCode::ShapeMismatch, "MaxPool2d grad shape");
    Tensor dx(input_shape_);
    for (std::size_t o = 0; o < grad.size(); ++o) dx[argmax_[o]] += grad[o];
    return dx;
}

Tensor GlobalAvgPool::infer(const Tensor& x) const {
    require_rank(x, 4, "GlobalAvgPool");
    const int B = x.dim(0), HW = x.dim(1) * x.dim(2), C = x.dim(3);
    Tensor out({B, C});
    for (int b = 0; b < B; ++b) {
        const ConstMatrixMapF m(x.data() + static_cast<std::size_t>(b) * HW * C, HW, C);
        Eigen::Map<Eigen::RowVectorXf> o(out.data() + static_cast<std::size_t>(b) * C, C);
        o = m.colwise().sum() / static_cast<float>(HW);
    }
    return out;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    input_shape_ = x.shape();
    return infer(x);
}

Tensor GlobalAvgPool::backward(const Tensor& grad) {
    Tensor dx(input_shape_);
    const int B = input_shape_[0], HW = input_shape_[1] * input_shape_[2], C = input_shape_[3];
    if (grad.shape() != std::vector<int>{B, C}) throw Error(ErrorCode::ShapeMismatch, "GlobalAvgPool grad shape");
    const float inv = 1.0f / static_cast<float>(HW);
    for (int b = 0; b < B; ++b) {
        MatrixMapF m(dx.data() + static_cast<std::size_t>(b) * HW * C, HW, C);
        const Eigen::Map<const Eigen::RowVectorXf> g(grad.data() + static_cast<std::size_t>(b) * C, C);
        m.rowwise() = g * inv;
    }
    return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, bool bias)
    : in_(in_features), out_(out_features), has_bias_(bias),
      weight_({in_features, out_features}, {InitKind::uniform, 1.0f / std::sqrt(static_cast<float>(in_features))}),
      bias_(bias ? std::vector<int>{out_features} : std::vector<int>{0},
            {InitKind::uniform, 1.0f / std::sqrt(static_cast<float>(in_features))}) {
    if (in_ <= 0 || out_ <= 0) throw Error(ErrorCode::InvalidArgument, "bad Linear geometry");
}

Tensor Linear::infer(const Tensor& x) const {
    require_last(x, in_, "Linear");
    std::vector<int> shape = x.shape();
    shape.back() = out_;
    Tensor out(shape);
    const ConstMatrixMapF w(weight_.value.data(), in_, out_);
    out.rows_view().noalias() = x.rows_view() * w;
    if (has_bias_) {
        const Eigen::Map<const Eigen::RowVectorXf> b(bias_.value.data(), out_);
        out.rows_view().rowwise() += b;
    }
    return out;
}

Tensor Linear::forward(const Tensor& x) {
    input_ = x;
    return infer(x);
}

Tensor Linear::backward(const Tensor& grad) {
    require_last(grad, out_, "Linear backward");
    const ConstMatrixMapF w(weight_.value.data(), in_, out_);
    MatrixMapF dw(weight_.grad.data(), in_, out_);
    dw.noalias() += input_.rows_view().transpose() * grad.rows_view();
    if (has_bias_) {
        Eigen::Map<Eigen::RowVectorXf> db(bias_.grad.data(), out_);
        db += grad.rows_view().colwise().sum();
    }
    Tensor dx(input_.shape());
    dx.rows_view().noalias() = grad.rows_view() * w.transpose();
    return dx;
}

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + "weight", weight_);
    if (has_bias_) fn(prefix + "bias", bias_);
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(float p, std::shared_ptr<Rng> rng) : p_(p), rng_(std::move(rng)) {
    if (!(p_ >= 0.0f && p_ < 1.0f)) throw Error(ErrorCode::InvalidArgument, "dropout probability must lie in [0, 1)");
    if (!rng_) rng_ = std::make_shared<Rng>(0);
}

Tensor Dropout::forward(const Tensor& x) {
    mask_.assign(x.size(), 1.0f);
    if (p_ == 0.0f) return x;
    const float keep = 1.0f / (1.0f - p_);
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        mask_[i] = rng_->uniform01() < p_ ? 0.0f : keep;
        out[i] *= mask_[i];
    }
    return out;
}

Tensor Dropout::backward(const Tensor& grad) {
    if (grad.size() != mask_.size()) throw Error(ErrorCode::ShapeMismatch, "Dropout grad shape");
    Tensor dx = grad;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
    return dx;
}

// ---------------------------------------------------------------- helpers

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    add_inplace(out, b);
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "add " + a.shape_string() + " + " + b.shape_string());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

} // namespace par::nn
