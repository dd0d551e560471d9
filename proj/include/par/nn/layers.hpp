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

#pragma once

// Layers with hand-written backward passes.
//
// infer() is the evaluation path: it is const and touches no member state, so
// one model may serve concurrent callers. forward() is the training path and
// caches whatever backward() needs; backward() accumulates parameter
// gradients and returns the gradient w.r.t. the layer input.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "par/random.hpp"
#include "par/tensor.hpp"

namespace par::nn {

enum class InitKind { zeros, ones, constant, he_normal, normal, uniform };

struct InitSpec {
    InitKind kind = InitKind::zeros;
    float scale = 0.0f; // constant: value, he_normal: fan-in, normal: stddev, uniform: bound
};

struct Parameter {
    Tensor value;
    Tensor grad;
    bool trainable = true; // false for running statistics
    InitSpec init;

    Parameter() = default;
    Parameter(std::vector<int> shape, InitSpec spec, bool is_trainable = true);

    void initialize(Rng& rng);
    void zero_grad() { grad.fill(0.0f); }
};

using ParamVisitor = std::function<void(const std::string& name, Parameter& param)>;

class Layer {
public:
    virtual ~Layer() = default;

    [[nodiscard]] virtual Tensor infer(const Tensor& x) const = 0;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad) = 0;
    virtual void visit(const std::string& /*prefix*/, const ParamVisitor& /*fn*/) {}
};

using LayerPtr = std::unique_ptr<Layer>;

class Sequential final : public Layer {
public:
    Sequential() = default;

    Sequential& add(std::string name, LayerPtr layer);
    template <typename T, typename... Args>
    T& emplace(std::string name, Args&&... args) {
        auto layer = std::make_unique<T>(std::forward<Args>(args)...);
        T& ref = *layer;
        add(std::move(name), std::move(layer));
        return ref;
    }

    [[nodiscard]] std::size_t size() const noexcept { return layers_.size(); }

    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;
    void visit(const std::string& prefix, const ParamVisitor& fn) override;

private:
    std::vector<std::pair<std::string, LayerPtr>> layers_;
};

/// NHWC convolution, weights laid out [kh, kw, in, out].
class Conv2d final : public Layer {
public:
    Conv2d(int in_channels, int out_channels, int kernel, int stride = 1, int padding = 0, bool bias = true);

    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;
    void visit(const std::string& prefix, const ParamVisitor& fn) override;

    Parameter& weight() noexcept { return weight_; }
    Parameter& bias() noexcept { return bias_; }
    [[nodiscard]] int out_channels() const noexcept { return out_; }

private:
    [[nodiscard]] int out_size(int n) const noexcept { return (n + 2 * pad_ - k_) / stride_ + 1; }
    void im2col(const float* image, int H, int W, RowMatrixF& col) const;
    void col2im(const RowMatrixF& col, int H, int W, float* image) const;

    int in_, out_, k_, stride_, pad_;
    bool has_bias_;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

/// Normalizes over every axis but the last (channels).
class BatchNorm final : public Layer {
public:
    explicit BatchNorm(int channels, float momentum = 0.1f, float eps = 1e-5f);

    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;
    void visit(const std::string& prefix, const ParamVisitor& fn) override;

private:
    int channels_;
    float momentum_, eps_;
    Parameter gamma_, beta_, running_mean_, running_var_;
    Tensor xhat_;
    std::vector<float> inv_std_;
};

/// Normalizes over the last axis.
class LayerNorm final : public Layer {
public:
    explicit LayerNorm(int channels, float eps = 1e-5f);

    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;
    void visit(const std::string& prefix, const ParamVisitor& fn) override;

private:
    Tensor normalize(const Tensor& x, Tensor* xhat, std::vector<float>* inv_std) const;

    int channels_;
    float eps_;
    Parameter gamma_, beta_;
    Tensor xhat_;
    std::vector<float> inv_std_;
};

class ReLU final : public Layer {
public:
    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;

private:
    Tensor output_;
};

/// Exact (erf) GELU.
class GELU final : public Layer {
public:
    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;

private:
    Tensor input_;
};

class MaxPool2d final : public Layer {
public:
    MaxPool2d(int kernel, int stride, int padding = 0);

    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;

private:
    Tensor pool(const Tensor& x, std::vector<std::size_t>* argmax) const;

    int k_, stride_, pad_;
    std::vector<int> input_shape_;
    std::vector<std::size_t> argmax_;
};

/// [B, H, W, C] -> [B, C] mean over the spatial grid.
class GlobalAvgPool final : public Layer {
public:
    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;

private:
    std::vector<int> input_shape_;
};

/// Affine map over the last axis, weights laid out [in, out].
class Linear final : public Layer {
public:
    Linear(int in_features, int out_features, bool bias = true);

    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;
    void visit(const std::string& prefix, const ParamVisitor& fn) override;

    Parameter& weight() noexcept { return weight_; }
    Parameter& bias() noexcept { return bias_; }
    [[nodiscard]] int in_features() const noexcept { return in_; }
    [[nodiscard]] int out_features() const noexcept { return out_; }

private:
    int in_, out_;
    bool has_bias_;
    Parameter weight_, bias_;
    Tensor input_;
};

/// Inverted dropout; identity in infer().
class Dropout final : public Layer {
public:
    Dropout(float p, std::shared_ptr<Rng> rng);

    [[nodiscard]] Tensor infer(const Tensor& x) const override { return x; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;

    [[nodiscard]] float probability() const noexcept { return p_; }

private:
    float p_;
    std::shared_ptr<Rng> rng_;
    std::vector<float> mask_;
};

/// Elementwise a + b with matching shapes.
Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);

} // namespace par::nn
