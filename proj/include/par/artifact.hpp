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

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "par/dataset.hpp"
#include "par/loss.hpp"
#include "par/model.hpp"

namespace par {

// A trained model on disk: a directory holding `weights`, `schema.json`,
// `preprocess.json` and `recipe.json`.
struct ModelArtifact {
    FeatClassifier model;
    AttributeSchema schema;
    PreprocessSpec preprocess;
    std::optional<LossConfig> loss;
    std::string model_version;
    nlohmann::json recipe;
};

/// "<backbone>-<16 hex digits>" derived from the parameter bytes.
std::string model_version(FeatClassifier& model);

/// Writes into a sibling temp directory and renames it into place, so a crash
/// never leaves a half-written artifact. Returns the model version.
std::string save_artifact(FeatClassifier& model, const AttributeSchema& schema, const std::filesystem::path& dir,
                          const std::optional<LossConfig>& loss = std::nullopt,
                          const nlohmann::json& extra = nlohmann::json::object());

/// Throws InvalidArtifact when a file is missing or inconsistent; weights are loaded strictly.
ModelArtifact load_artifact(const std::filesystem::path& dir);

} // namespace par
