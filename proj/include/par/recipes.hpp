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

#include <string>
#include <string_view>
#include <vector>

#include "par/loss.hpp"
#include "par/model.hpp"
#include "par/training.hpp"

namespace par {

/// A backbone, head, loss and training schedule that belong together.
struct Recipe {
    std::string name;
    BackboneSpec backbone;
    ClassifierHeadSpec head;
    TrainRunConfig train;
};

/// "beit_bce", "swin_bce", "resnet50_scaled" or "tiny_cnn".
Recipe make_recipe(std::string_view name, int num_attributes);
const std::vector<std::string>& recipe_names();

/// 1e-5 for transformer backbones, 1e-4 otherwise.
double default_learning_rate(BackboneKind kind) noexcept;

} // namespace par
