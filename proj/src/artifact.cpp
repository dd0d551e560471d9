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

#include "par/artifact.hpp"

#include <cerrno>
#include <cstdio>
#include <fstream>
#include <system_error>

#include "par/error.hpp"
#include "par/random.hpp"

namespace par {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    out << text;
    out.flush();
    if (!out) throw Error(errno == ENOSPC ? ErrorCode::DiskFull : ErrorCode::IoError, "short write to " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidArtifact, "missing " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArtifact, path.string() + ": " + e.what());
    }
}

} // namespace

std::string model_version(FeatClassifier& model) {
    std::uint64_t h = fnv1a64("");
    model.visit([&](const std::string& name, nn::Parameter& p) {
        h = splitmix64(h ^ fnv1a64(name));
        const auto bytes = std::string_view(reinterpret_cast<const char*>(p.value.data()), p.value.size() * sizeof(float));
        h = splitmix64(h ^ fnv1a64(bytes));
    });
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(to_string(model.backbone_spec().name)) + "-" + hex;
}

std::string save_artifact(FeatClassifier& model, const AttributeSchema& schema, const fs::path& dir,
                          const std::optional<LossConfig>& loss, const json& extra) {
    if (schema.size() != static_cast<std::size_t>(model.num_attributes()))
        throw Error(ErrorCode::ShapeMismatch, "schema has " + std::to_string(schema.size()) + " attributes, model has " +
                                                  std::to_string(model.num_attributes()));
    const std::string version = model_version(model);
    const fs::path target = fs::absolute(dir);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + tmp.string() + ": " + ec.message());

    save_weights(state_dict(model), tmp / "weights");
    write_text(tmp / "schema.json", schema.to_json().dump(2) + "\n");
    write_text(tmp / "preprocess.json", PreprocessSpec::for_backbone(model.backbone_spec()).to_json().dump(2) + "\n");
    json recipe{{"model_version", version},
                {"backbone", model.backbone_spec().to_json()},
                {"head", model.head_spec().to_json()}};
    if (loss) recipe["loss"] = loss->to_json();
    for (const auto& [k, v] : extra.items()) recipe[k] = v;
    write_text(tmp / "recipe.json", recipe.dump(2) + "\n");

    fs::remove_all(target, ec);
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot move artifact into " + target.string() + ": " + ec.message());
    return version;
}

ModelArtifact load_artifact(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::InvalidArtifact, dir.string() + " is not a directory");
    const json recipe = read_json(dir / "recipe.json");
    AttributeSchema schema;
    PreprocessSpec prep;
    BackboneSpec backbone;
    ClassifierHeadSpec head;
    std::optional<LossConfig> loss;
    try {
        schema = AttributeSchema::from_json(read_json(dir / "schema.json"));
        prep = PreprocessSpec::from_json(read_json(dir / "preprocess.json"));
        backbone = BackboneSpec::from_json(recipe.at("backbone"));
        head = ClassifierHeadSpec::from_json(recipe.at("head"));
        if (recipe.contains("loss")) loss = LossConfig::from_json(recipe["loss"]);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArtifact, "recipe: " + std::string(e.what()));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArtifact) throw;
        throw Error(ErrorCode::InvalidArtifact, e.what());
    }
    if (schema.size() != static_cast<std::size_t>(head.num_attributes))
        throw Error(ErrorCode::InvalidArtifact, "schema and head disagree on the number of attributes");
    if (prep.height != backbone.input_height || prep.width != backbone.input_width)
        throw Error(ErrorCode::InvalidArtifact, "preprocess size disagrees with the backbone input size");

    // Pretrained references only matter when building from scratch.
    backbone.pretrained.reset();
    FeatClassifier model(backbone, head, 0);
    try {
        load_state(model, load_weights(dir / "weights"), true);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidArtifact, e.what());
    }
    model.set_mode(Mode::eval);
    std::string version = recipe.value("model_version", std::string());
    if (version.empty()) version = model_version(model);
    return ModelArtifact{std::move(model), std::move(schema), prep, std::move(loss), std::move(version), recipe};
}

} // namespace par
