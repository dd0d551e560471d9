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

#include "par/recipes.hpp"

#include "par/error.hpp"

namespace par {

const std::vector<std::string>& recipe_names() {
    static const std::vector<std::string> names{"beit_bce", "swin_bce", "resnet50_scaled", "tiny_cnn"};
    return names;
}

double default_learning_rate(BackboneKind kind) noexcept {
    return kind == BackboneKind::beit || kind == BackboneKind::swin ? 1e-5 : 1e-4;
}

Recipe make_recipe(std::string_view name, int num_attributes) {
    Recipe r;
    r.name = std::string(name);
    r.head.num_attributes = num_attributes;
    r.train.model_tag = r.name;
    if (name == "beit_bce") {
        r.backbone.name = BackboneKind::beit;
        r.train.loss.kind = LossKind::plain_bce;
        r.train.checkpoint_policy = CheckpointPolicy::min_val_loss;
    } else if (name == "swin_bce") {
        r.backbone.name = BackboneKind::swin;
        r.train.loss.kind = LossKind::plain_bce;
        r.train.checkpoint_policy = CheckpointPolicy::min_val_loss;
    } else if (name == "resnet50_scaled") {
        r.backbone.name = BackboneKind::resnet50;
        r.train.loss.kind = LossKind::scaled_bce_weighted;
        r.train.checkpoint_policy = CheckpointPolicy::max_val_mA;
    } else if (name == "tiny_cnn") {
        r.backbone.name = BackboneKind::tiny_cnn;
        r.backbone.input_height = r.backbone.input_width = 16;
        r.train.loss.kind = LossKind::scaled_bce_weighted;
        r.train.checkpoint_policy = CheckpointPolicy::min_val_loss;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown recipe '" + std::string(name) + "'");
    }
    r.train.optimizer.learning_rate = default_learning_rate(r.backbone.name);
    r.train.epochs = 15;
    r.head.validate();
    return r;
}

} // namespace par
