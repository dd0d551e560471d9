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

// Vision-transformer building blocks operating on token grids [B, H, W, C].

#include <vector>

#include "par/nn/layers.hpp"

namespace par::nn {

struct GridShape {
    int height = 0;
    int width = 0;
};

/// Multi-head self-attention inside non-overlapping windows with a learned
/// relative-position bias. A window covering the whole grid gives global
/// attention; a non-zero shift gives the cyclically shifted, masked variant.
class WindowAttention final : public Layer {
public:
    WindowAttention(int dim, int heads, GridShape grid, GridShape window, int shift);

    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;
    void visit(const std::string& prefix, const ParamVisitor& fn) override;

private:
    [[nodiscard]] Tensor attend(const Tensor& qkv, int windows, std::vector<RowMatrixF>* probs) const;
    [[nodiscard]] Tensor to_windows(const Tensor& x, int roll) const;
    [[nodiscard]] Tensor from_windows(const Tensor& tokens, int batch, int roll) const;

    int dim_, heads_, head_dim_;
    GridShape grid_, window_;
    int shift_;
    int tokens_per_window_;
    int windows_per_image_;
    float scale_;
    Linear qkv_, proj_;
    Parameter bias_table_;         // [(2wh-1)(2ww-1), heads]
    std::vector<int> rel_index_;   // T * T
    std::vector<int> region_;      // per window-ordered token, region label (shift only)

    // training caches
    Tensor qkv_out_;
    std::vector<RowMatrixF> probs_; // per (window, head)
    int batch_ = 0;
};

/// Pre-norm transformer block; optional per-channel layer scale.
class TransformerBlock final : public Layer {
public:
    TransformerBlock(int dim, int heads, GridShape grid, GridShape window, int shift, double mlp_ratio,
                     float layer_scale_init);

    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;
    void visit(const std::string& prefix, const ParamVisitor& fn) override;

private:
    int dim_;
    bool layer_scale_;
    LayerNorm norm1_, norm2_;
    WindowAttention attn_;
    Linear fc1_;
    GELU act_;
    Linear fc2_;
    Parameter gamma1_, gamma2_;
    Tensor attn_raw_, mlp_raw_;
};

/// 2x2 neighbourhood merge: [B, H, W, C] -> [B, H/2, W/2, 2C].
class PatchMerging final : public Layer {
public:
    explicit PatchMerging(int dim);

    [[nodiscard]] Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad) override;
    void visit(const std::string& prefix, const ParamVisitor& fn) override;

private:
    [[nodiscard]] Tensor gather(const Tensor& x) const;

    int dim_;
    LayerNorm norm_;
    Linear reduction_;
    std::vector<int> input_shape_;
};

} // namespace par::nn
