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

// Feature extractors mapping [B, H, W, 3] image batches to [B, D] features.
//
// tiny_cnn   three blocks of conv3x3(pad 1) -> ReLU -> maxpool2, widths
//            D/4, D/2, D (8, 16, 32 by default), then global average pool.
// resnet50   bottleneck ResNet, stages of 3/4/6/3 blocks, stride on the 3x3
//            conv, D = 2048.
// beit       patch embedding, pre-norm blocks with global attention,
//            relative position bias and layer scale, mean-pooled tokens
//            followed by LayerNorm. Defaults: patch 16, D 768, depth 12.
// swin       patch embedding (4x4), stages of shifted-window blocks joined by
//            patch merging, final LayerNorm and mean pool. Defaults: embed 96,
//            depths 2/2/6/2, window 7, D 768.

#include "par/model.hpp"
#include "par/nn/layers.hpp"

namespace par {

/// `spec` must already be resolved (see BackboneSpec::resolved).
nn::LayerPtr make_backbone(const BackboneSpec& spec);

} // namespace par
