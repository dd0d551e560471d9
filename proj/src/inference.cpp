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

#include "par/inference.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iterator>

#include "par/loss.hpp"

namespace par {

namespace fs = std::filesystem;
using nlohmann::json;

json PredictionResponse::to_json() const {
    json preds = json::array();
    for (const auto& p : predictions)
        preds.push_back(
            {{"attribute", p.attribute}, {"group", p.group}, {"probability", p.probability}, {"flagged", p.flagged}});
    return {{"model_version", model_version},
            {"threshold_used", threshold_used},
            {"predictions", preds},
            {"latency_ms", latency_ms}};
}

PredictionResponse PredictionResponse::from_json(const json& j) {
    PredictionResponse r;
    r.model_version = j.at("model_version").get<std::string>();
    r.threshold_used = j.at("threshold_used").get<double>();
    r.latency_ms = j.value("latency_ms", 0.0);
    for (const auto& p : j.at("predictions"))
        r.predictions.push_back({p.at("attribute").get<std::string>(), p.at("group").get<std::string>(),
                                 p.at("probability").get<double>(), p.at("flagged").get<bool>()});
    return r;
}

void check_threshold(double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw Error(ErrorCode::InvalidArgument, "threshold must lie strictly between 0 and 1");
}

Predictor::Predictor(const fs::path& model_dir) : Predictor(load_artifact(model_dir)) {}

Predictor::Predictor(ModelArtifact artifact) : artifact_(std::move(artifact)) { artifact_.model.set_mode(Mode::eval); }

Tensor Predictor::preprocess_image(const Image& image) const { return preprocess(image, artifact_.preprocess); }

std::vector<double> Predictor::probabilities(const Image& image) const {
    const Tensor x = preprocess_image(image);
    const Tensor batch = x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
    const Tensor logits = artifact_.model.infer(batch);
    std::vector<double> out(logits.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = sigmoid(logits[j]);
    return out;
}

PredictionResponse make_response(const AttributeSchema& schema, std::span<const double> probabilities,
                                 double threshold, std::string model_version, double latency_ms) {
    check_threshold(threshold);
    PredictionResponse r;
    r.model_version = std::move(model_version);
    r.threshold_used = threshold;
    r.latency_ms = latency_ms;
    r.predictions.reserve(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j)
        r.predictions.push_back({schema.attribute(j), schema.group_of(j), probabilities[j], probabilities[j] >= threshold});
    return r;
}

PredictionResponse Predictor::predict(const Image& image, double threshold) const {
    check_threshold(threshold);
    const auto start = std::chrono::steady_clock::now();
    const auto probs = probabilities(image);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return make_response(schema(), probs, threshold, model_version(), ms);
}

PredictionResponse Predictor::predict_bytes(std::span<const std::uint8_t> bytes, double threshold,
                                            std::size_t max_bytes) const {
    check_threshold(threshold);
    if (bytes.size() > max_bytes)
        throw Error(ErrorCode::PayloadTooLarge,
                    std::to_string(bytes.size()) + " bytes exceeds the " + std::to_string(max_bytes) + " byte limit");
    const auto start = std::chrono::steady_clock::now();
    const auto probs = probabilities(decode_image(bytes));
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return make_response(schema(), probs, threshold, model_version(), ms);
}

json FilePrediction::to_json() const {
    json j{{"path", path.string()}};
    if (response) {
        j.update(response->to_json());
    } else {
        j["error"] = error ? std::string(to_string(*error)) : "Error";
        j["message"] = message;
    }
    return j;
}

std::vector<FilePrediction> predict_paths(const Predictor& predictor, const fs::path& path, double threshold,
                                          std::size_t max_bytes) {
    check_threshold(threshold);
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file()) files.push_back(entry.path());
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    } else {
        files.push_back(path);
    }
    std::vector<FilePrediction> out;
    for (const auto& file : files) {
        FilePrediction rec;
        rec.path = file;
        try {
            std::ifstream in(file, std::ios::binary);
            if (!in) throw Error(ErrorCode::MissingImage, "cannot open " + file.string());
            const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
            rec.response = predictor.predict_bytes(bytes, threshold, max_bytes);
        } catch (const Error& e) {
            rec.error = e.code();
            rec.message = e.what();
        }
        out.push_back(std::move(rec));
    }
    return out;
}

} // namespace par
