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

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "par/image.hpp"
#include "par/loss.hpp"
#include "par/nn/layers.hpp"
#include "par/random.hpp"
#include "par/tensor.hpp"

namespace par {

enum class BackboneKind { resnet50, beit, swin, tiny_cnn };

std::string_view to_string(BackboneKind kind) noexcept;
/// Throws UnknownBackbone.
BackboneKind parse_backbone(std::string_view name);

enum class WeightsOrigin { imagenet, rapv2, none };

std::string_view to_string(WeightsOrigin origin) noexcept;
WeightsOrigin parse_weights_origin(std::string_view name);

struct PretrainedWeightsRef {
    std::string uri_or_path;
    WeightsOrigin origin_tag = WeightsOrigin::none;
    bool strict_load = false;
};

/// Transformer geometry; zero / empty fields take the backbone's defaults.
struct TransformerArch {
    int patch = 0;
    std::vector<int> depths;
    std::vector<int> heads;
    int window = 0;
    double mlp_ratio = 4.0;
};

struct BackboneSpec {
    BackboneKind name = BackboneKind::tiny_cnn;
    int feature_dim = 0; // 0 picks the backbone default
    std::optional<PretrainedWeightsRef> pretrained;
    int input_height = 224;
    int input_width = 224;
    TransformerArch arch;

    /// Copy with every default filled in. Throws InvalidArgument on inconsistent geometry.
    [[nodiscard]] BackboneSpec resolved() const;

    [[nodiscard]] nlohmann::json to_json() const;
    static BackboneSpec from_json(const nlohmann::json& j);
};

struct ClassifierHeadSpec {
    int num_attributes = 1;
    float dropout_p = 0.5f;
    int hidden = 0; // 0: single fully connected layer

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static ClassifierHeadSpec from_json(const nlohmann::json& j);
};

enum class Mode { train, eval };

/// Feature-extractor backbone followed by a dropout + fully connected head.
/// Produces logits of shape [B, L] from NHWC batches of the spec's input size.
class FeatClassifier {
public:
    FeatClassifier(const BackboneSpec& backbone, const ClassifierHeadSpec& head, std::uint64_t seed = 0);

    FeatClassifier(FeatClassifier&&) noexcept = default;
    FeatClassifier& operator=(FeatClassifier&&) noexcept = default;

    /// Dispatches on mode(): train caches activations and applies dropout, eval does neither.
    Tensor forward(const Tensor& batch);
    Tensor backward(const Tensor& grad_logits);
    /// Eval-mode forward. Does not modify the model; safe for concurrent callers.
    [[nodiscard]] Tensor infer(const Tensor& batch) const;

    void set_mode(Mode mode) noexcept { mode_ = mode; }
    [[nodiscard]] Mode mode() const noexcept { return mode_; }

    [[nodiscard]] const BackboneSpec& backbone_spec() const noexcept { return backbone_spec_; }
    [[nodiscard]] const ClassifierHeadSpec& head_spec() const noexcept { return head_spec_; }
    [[nodiscard]] int num_attributes() const noexcept { return head_spec_.num_attributes; }

    /// Visits "backbone.*" then "head.*" parameters and buffers.
    void visit(const nn::ParamVisitor& fn);
    [[nodiscard]] std::vector<nn::Parameter*> trainable_parameters();
    [[nodiscard]] std::size_t parameter_count();
    void zero_grad();

    /// Re-draws every parameter from its initializer.
    void reinitialize(std::uint64_t seed);
    void reseed_dropout(std::uint64_t seed);
    Rng& init_rng() noexcept { return init_rng_; }

private:
    void check_input(const Tensor& batch) const;

    BackboneSpec backbone_spec_;
    ClassifierHeadSpec head_spec_;
    std::shared_ptr<Rng> dropout_rng_;
    Rng init_rng_;
    nn::LayerPtr backbone_;
    nn::Sequential head_;
    Mode mode_ = Mode::eval;
};

using StateDict = std::vector<std::pair<std::string, Tensor>>;

StateDict state_dict(FeatClassifier& model);
/// Binary blob: magic "PARWTS01", entry count, then (name, rank, dims, float32 data) records.
void save_weights(const StateDict& state, const std::filesystem::path& path);
/// Throws WeightsLoadError on a missing or corrupt file.
StateDict load_weights(const std::filesystem::path& path);

struct LoadReport {
    std::vector<std::string> matched;
    std::vector<std::string> skipped;        // checkpoint entries not used
    std::vector<std::string> reinitialized;  // model parameters freshly initialized

    /// "matched", "reinitialized", "partial" or "absent" for parameters under `prefix`.
    [[nodiscard]] std::string status(std::string_view prefix) const;
};

/// Strict: any missing, unexpected or mis-shaped entry throws StrictMismatch.
/// Otherwise unmatched model parameters are re-initialized and reported.
LoadReport load_state(FeatClassifier& model, const StateDict& state, bool strict);
LoadReport load_pretrained(FeatClassifier& model, const PretrainedWeightsRef& ref);

/// Builds the model and, when the backbone names pretrained weights, loads them.
FeatClassifier build_model(const BackboneSpec& backbone, const ClassifierHeadSpec& head, std::uint64_t seed = 0);

/// Resize and normalization constants recorded with a trained model.
struct PreprocessSpec {
    int height = 224;
    int width = 224;
    std::array<double, 3> mean{0.485, 0.456, 0.406};
    std::array<double, 3> stddev{0.229, 0.224, 0.225};

    static PreprocessSpec for_backbone(const BackboneSpec& spec);
    [[nodiscard]] nlohmann::json to_json() const;
    static PreprocessSpec from_json(const nlohmann::json& j);
    bool operator==(const PreprocessSpec&) const = default;
};

/// Bilinear resize (half-pixel centres, edge clamp) to the target size, then
/// (v / 255 - mean) / std per channel. Returns [H, W, 3].
Tensor preprocess(const Image& image, const PreprocessSpec& spec);
Tensor preprocess(const Image& image, const BackboneSpec& spec);

/// Row-major copies between float tensors [B, L] and double matrices.
Matrix to_matrix(const Tensor& t);
Tensor to_tensor(const Matrix& m);

} // namespace par
