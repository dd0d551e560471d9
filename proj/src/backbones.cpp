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

#include "par/backbones.hpp"

#include <algorithm>

#include "par/error.hpp"
#include "par/nn/transformer.hpp"

namespace par {
namespace {

using nn::BatchNorm;
using nn::Conv2d;
using nn::GlobalAvgPool;
using nn::MaxPool2d;
using nn::ReLU;
using nn::Sequential;

class Bottleneck final : public nn::Layer {
public:
    Bottleneck(int in_channels, int width, int stride) {
        const int out = width * 4;
        main_.emplace<Conv2d>("conv1", in_channels, width, 1, 1, 0, false);
        main_.emplace<BatchNorm>("bn1", width);
        main_.emplace<ReLU>("relu1");
        main_.emplace<Conv2d>("conv2", width, width, 3, stride, 1, false);
        main_.emplace<BatchNorm>("bn2", width);
        main_.emplace<ReLU>("relu2");
        main_.emplace<Conv2d>("conv3", width, out, 1, 1, 0, false);
        main_.emplace<BatchNorm>("bn3", out);
        if (stride != 1 || in_channels != out) {
            downsample_ = std::make_unique<Sequential>();
            downsample_->emplace<Conv2d>("0", in_channels, out, 1, stride, 0, false);
            downsample_->emplace<BatchNorm>("1", out);
        }
    }

    [[nodiscard]] Tensor infer(const Tensor& x) const override {
        Tensor y = main_.infer(x);
        nn::add_inplace(y, downsample_ ? downsample_->infer(x) : x);
        return relu_.infer(y);
    }

    Tensor forward(const Tensor& x) override {
        Tensor y = main_.forward(x);
        nn::add_inplace(y, downsample_ ? downsample_->forward(x) : x);
        return relu_.forward(y);
    }

    Tensor backward(const Tensor& grad) override {
        const Tensor g = relu_.backward(grad);
        Tensor dx = main_.backward(g);
        nn::add_inplace(dx, downsample_ ? downsample_->backward(g) : g);
        return dx;
    }

    void visit(const std::string& prefix, const nn::ParamVisitor& fn) override {
        main_.visit(prefix, fn);
        if (downsample_) downsample_->visit(prefix + "downsample.", fn);
    }

private:
    Sequential main_;
    std::unique_ptr<Sequential> downsample_;
    ReLU relu_;
};

nn::LayerPtr make_tiny_cnn(const BackboneSpec& spec) {
    const int d = spec.feature_dim;
    auto net = std::make_unique<Sequential>();
    const int widths[3] = {d / 4, d / 2, d};
    int in = 3;
    for (int i = 0; i < 3; ++i) {
        const auto n = std::to_string(i + 1);
        net->emplace<Conv2d>("conv" + n, in, widths[i], 3, 1, 1, true);
        net->emplace<ReLU>("relu" + n);
        net->emplace<MaxPool2d>("pool" + n, 2, 2, 0);
        in = widths[i];
    }
    net->emplace<GlobalAvgPool>("gap");
    return net;
}

nn::LayerPtr make_resnet50() {
    auto net = std::make_unique<Sequential>();
    net->emplace<Conv2d>("conv1", 3, 64, 7, 2, 3, false);
    net->emplace<BatchNorm>("bn1", 64);
    net->emplace<ReLU>("relu");
    net->emplace<MaxPool2d>("maxpool", 3, 2, 1);
    const int blocks[4] = {3, 4, 6, 3};
    const int widths[4] = {64, 128, 256, 512};
    int in = 64;
    for (int s = 0; s < 4; ++s) {
        for (int b = 0; b < blocks[s]; ++b) {
            const int stride = (b == 0 && s > 0) ? 2 : 1;
            net->emplace<Bottleneck>("layer" + std::to_string(s + 1) + "." + std::to_string(b), in, widths[s], stride);
            in = widths[s] * 4;
        }
    }
    net->emplace<GlobalAvgPool>("avgpool");
    return net;
}

nn::LayerPtr make_beit(const BackboneSpec& spec) {
    const auto& a = spec.arch;
    const int d = spec.feature_dim;
    const nn::GridShape grid{spec.input_height / a.patch, spec.input_width / a.patch};
    auto net = std::make_unique<Sequential>();
    net->emplace<Conv2d>("patch_embed.proj", 3, d, a.patch, a.patch, 0, true);
    for (int i = 0; i < a.depths.front(); ++i)
        net->emplace<nn::TransformerBlock>("blocks." + std::to_string(i), d, a.heads.front(), grid, grid, 0, a.mlp_ratio,
                                           0.1f);
    net->emplace<GlobalAvgPool>("pool");
    net->emplace<nn::LayerNorm>("fc_norm", d, 1e-6f);
    return net;
}

nn::LayerPtr make_swin(const BackboneSpec& spec) {
    const auto& a = spec.arch;
    const int stages = static_cast<int>(a.depths.size());
    int dim = spec.feature_dim >> (stages - 1);
    nn::GridShape grid{spec.input_height / a.patch, spec.input_width / a.patch};
    auto net = std::make_unique<Sequential>();
    net->emplace<Conv2d>("patch_embed.proj", 3, dim, a.patch, a.patch, 0, true);
    net->emplace<nn::LayerNorm>("patch_embed.norm", dim);
    for (int s = 0; s < stages; ++s) {
        const int win = std::min({a.window, grid.height, grid.width});
        const bool can_shift = std::min(grid.height, grid.width) > a.window;
        const auto stage = "layers." + std::to_string(s) + ".";
        for (int b = 0; b < a.depths[static_cast<std::size_t>(s)]; ++b) {
            const int shift = (b % 2 == 1 && can_shift) ? win / 2 : 0;
            net->emplace<nn::TransformerBlock>(stage + "blocks." + std::to_string(b), dim,
                                               a.heads[static_cast<std::size_t>(s)], grid, nn::GridShape{win, win}, shift,
                                               a.mlp_ratio, 0.0f);
        }
        if (s + 1 < stages) {
            net->emplace<nn::PatchMerging>(stage + "downsample", dim);
            dim *= 2;
            grid = {grid.height / 2, grid.width / 2};
        }
    }
    net->emplace<nn::LayerNorm>("norm", dim);
    net->emplace<GlobalAvgPool>("pool");
    return net;
}

} // namespace

nn::LayerPtr make_backbone(const BackboneSpec& spec) {
    switch (spec.name) {
    case BackboneKind::tiny_cnn: return make_tiny_cnn(spec);
    case BackboneKind::resnet50: return make_resnet50();
    case BackboneKind::beit: return make_beit(spec);
    case BackboneKind::swin: return make_swin(spec);
    }
    throw Error(ErrorCode::UnknownBackbone, "unhandled backbone kind");
}

} // namespace par
