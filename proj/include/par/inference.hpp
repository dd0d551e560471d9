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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "par/artifact.hpp"
#include "par/error.hpp"
#include "par/image.hpp"

namespace par {

inline constexpr std::size_t kDefaultMaxImageBytes = 8u << 20;

struct AttributePrediction {
    std::string attribute;
    std::string group;
    double probability = 0.0;
    bool flagged = false;
};

struct PredictionResponse {
    std::string model_version;
    double threshold_used = 0.5;
    std::vector<AttributePrediction> predictions; // schema order, always all L
    double latency_ms = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
    static PredictionResponse from_json(const nlohmann::json& j);
};

/// Throws InvalidArgument unless 0 < threshold < 1.
void check_threshold(double threshold);

/// A loaded artifact. Immutable after construction; every method may be called concurrently.
class Predictor {
public:
    explicit Predictor(const std::filesystem::path& model_dir);
    explicit Predictor(ModelArtifact artifact);

    [[nodiscard]] const AttributeSchema& schema() const noexcept { return artifact_.schema; }
    [[nodiscard]] const std::string& model_version() const noexcept { return artifact_.model_version; }
    [[nodiscard]] const PreprocessSpec& preprocess_spec() const noexcept { return artifact_.preprocess; }
    [[nodiscard]] const FeatClassifier& model() const noexcept { return artifact_.model; }

    [[nodiscard]] Tensor preprocess_image(const Image& image) const;
    /// sigmoid(logits), one per attribute.
    [[nodiscard]] std::vector<double> probabilities(const Image& image) const;
    [[nodiscard]] PredictionResponse predict(const Image& image, double threshold) const;
    /// Decodes first. DecodeError on a corrupt payload, PayloadTooLarge above `max_bytes`.
    [[nodiscard]] PredictionResponse predict_bytes(std::span<const std::uint8_t> bytes, double threshold,
                                                   std::size_t max_bytes = kDefaultMaxImageBytes) const;

private:
    ModelArtifact artifact_;
};

PredictionResponse make_response(const AttributeSchema& schema, std::span<const double> probabilities,
                                 double threshold, std::string model_version, double latency_ms);

struct FilePrediction {
    std::filesystem::path path;
    std::optional<PredictionResponse> response;
    std::optional<ErrorCode> error;
    std::string message;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// A file yields one record; a directory yields one per regular file in lexicographic
/// order. Failures are recorded per file and never abort the batch.
std::vector<FilePrediction> predict_paths(const Predictor& predictor, const std::filesystem::path& path,
                                          double threshold, std::size_t max_bytes = kDefaultMaxImageBytes);

} // namespace par
