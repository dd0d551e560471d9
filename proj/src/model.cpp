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

#include "par/model.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "par/backbones.hpp"
#include "par/error.hpp"

namespace par {

using nlohmann::json;

std::string_view to_string(BackboneKind kind) noexcept {
    switch (kind) {
    case BackboneKind::resnet50: return "resnet50";
    case BackboneKind::beit: return "beit";
    case BackboneKind::swin: return "swin";
    case BackboneKind::tiny_cnn: return "tiny_cnn";
    }
    return "tiny_cnn";
}

BackboneKind parse_backbone(std::string_view name) {
    if (name == "resnet50") return BackboneKind::resnet50;
    if (name == "beit") return BackboneKind::beit;
    if (name == "swin") return BackboneKind::swin;
    if (name == "tiny_cnn") return BackboneKind::tiny_cnn;
    throw Error(ErrorCode::UnknownBackbone, "'" + std::string(name) + "'");
}

std::string_view to_string(WeightsOrigin origin) noexcept {
    switch (origin) {
    case WeightsOrigin::imagenet: return "imagenet";
    case WeightsOrigin::rapv2: return "rapv2";
    case WeightsOrigin::none: return "none";
    }
    return "none";
}

WeightsOrigin parse_weights_origin(std::string_view name) {
    if (name == "imagenet") return WeightsOrigin::imagenet;
    if (name == "rapv2") return WeightsOrigin::rapv2;
    if (name == "none") return WeightsOrigin::none;
    throw Error(ErrorCode::InvalidArgument, "unknown weights origin '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- specs

BackboneSpec BackboneSpec::resolved() const {
    BackboneSpec s = *this;
    auto fail = [&](const std::string& what) {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(name)) + ": " + what);
    };
    if (s.input_height <= 0 || s.input_width <= 0) fail("input size must be positive");
    if (s.feature_dim < 0) fail("feature_dim must be positive");
    auto& a = s.arch;
    switch (s.name) {
    case BackboneKind::tiny_cnn:
        if (s.feature_dim == 0) s.feature_dim = 32;
        if (s.feature_dim % 4 != 0) fail("feature_dim must be a multiple of 4");
        if (s.input_height < 8 || s.input_width < 8) fail("input must be at least 8x8");
        break;
    case BackboneKind::resnet50:
        if (s.feature_dim == 0) s.feature_dim = 2048;
        if (s.feature_dim != 2048) fail("feature_dim is fixed at 2048");
        if (s.input_height < 32 || s.input_width < 32) fail("input must be at least 32x32");
        break;
    case BackboneKind::beit:
        if (a.patch == 0) a.patch = 16;
        if (s.feature_dim == 0) s.feature_dim = 768;
        if (a.depths.empty()) a.depths = {12};
        if (a.heads.empty()) a.heads = {std::max(1, s.feature_dim / 64)};
        if (a.depths.size() != 1 || a.heads.size() != 1) fail("takes a single depth and head count");
        if (a.depths[0] < 1) fail("depth must be positive");
        if (s.input_height % a.patch || s.input_width % a.patch) fail("input size must be a multiple of the patch size");
        if (s.feature_dim % a.heads[0]) fail("heads must divide feature_dim");
        break;
    case BackboneKind::swin: {
        if (a.patch == 0) a.patch = 4;
        if (a.window == 0) a.window = 7;
        if (a.depths.empty()) a.depths = {2, 2, 6, 2};
        const int stages = static_cast<int>(a.depths.size());
        if (s.feature_dim == 0) s.feature_dim = 96 << (stages - 1);
        const int embed = s.feature_dim >> (stages - 1);
        if (embed < 1 || (embed << (stages - 1)) != s.feature_dim) fail("feature_dim must be embed * 2^(stages-1)");
        if (a.heads.empty())
            for (int i = 0; i < stages; ++i) a.heads.push_back(std::max(1, (embed << i) / 32));
        if (static_cast<int>(a.heads.size()) != stages) fail("needs one head count per stage");
        if (s.input_height % a.patch || s.input_width % a.patch) fail("input size must be a multiple of the patch size");
        int gh = s.input_height / a.patch, gw = s.input_width / a.patch;
        for (int i = 0; i < stages; ++i) {
            const int win = std::min({a.window, gh, gw});
            if (gh % win || gw % win) fail("window must tile the token grid at stage " + std::to_string(i));
            if ((embed << i) % a.heads[static_cast<std::size_t>(i)]) fail("heads must divide the stage width");
            if (i + 1 < stages) {
                if (gh % 2 || gw % 2) fail("token grid must be even before patch merging");
                gh /= 2;
                gw /= 2;
            }
        }
        break;
    }
    }
    if (!(s.arch.mlp_ratio > 0.0)) fail("mlp_ratio must be positive");
    return s;
}

json BackboneSpec::to_json() const {
    json j{{"name", to_string(name)},
           {"feature_dim", feature_dim},
           {"input_size", {input_height, input_width}},
           {"arch",
            {{"patch", arch.patch},
             {"depths", arch.depths},
             {"heads", arch.heads},
             {"window", arch.window},
             {"mlp_ratio", arch.mlp_ratio}}}};
    if (pretrained)
        j["pretrained"] = {{"uri_or_path", pretrained->uri_or_path},
                           {"origin_tag", to_string(pretrained->origin_tag)},
                           {"strict_load", pretrained->strict_load}};
    return j;
}

BackboneSpec BackboneSpec::from_json(const json& j) {
    BackboneSpec s;
    try {
        s.name = parse_backbone(j.at("name").get<std::string>());
        s.feature_dim = j.value("feature_dim", 0);
        if (j.contains("input_size")) {
            s.input_height = j["input_size"].at(0).get<int>();
            s.input_width = j["input_size"].at(1).get<int>();
        }
        if (j.contains("arch")) {
            const auto& a = j["arch"];
            s.arch.patch = a.value("patch", 0);
            s.arch.depths = a.value("depths", std::vector<int>{});
            s.arch.heads = a.value("heads", std::vector<int>{});
            s.arch.window = a.value("window", 0);
            s.arch.mlp_ratio = a.value("mlp_ratio", 4.0);
        }
        if (j.contains("pretrained") && !j["pretrained"].is_null()) {
            const auto& p = j["pretrained"];
            s.pretrained = PretrainedWeightsRef{p.at("uri_or_path").get<std::string>(),
                                                parse_weights_origin(p.value("origin_tag", std::string("none"))),
                                                p.value("strict_load", false)};
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArtifact, std::string("backbone spec: ") + e.what());
    }
    return s;
}

void ClassifierHeadSpec::validate() const {
    if (num_attributes < 1) throw Error(ErrorCode::InvalidArgument, "head needs at least one attribute");
    if (!(dropout_p >= 0.0f && dropout_p < 1.0f)) throw Error(ErrorCode::InvalidArgument, "dropout_p must lie in [0, 1)");
    if (hidden < 0) throw Error(ErrorCode::InvalidArgument, "hidden width must be >= 0");
}

json ClassifierHeadSpec::to_json() const {
    return {{"num_attributes", num_attributes}, {"dropout_p", dropout_p}, {"hidden", hidden}};
}

ClassifierHeadSpec ClassifierHeadSpec::from_json(const json& j) {
    ClassifierHeadSpec h;
    try {
        h.num_attributes = j.at("num_attributes").get<int>();
        h.dropout_p = j.value("dropout_p", 0.5f);
        h.hidden = j.value("hidden", 0);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArtifact, std::string("head spec: ") + e.what());
    }
    return h;
}

// ---------------------------------------------------------------- FeatClassifier

FeatClassifier::FeatClassifier(const BackboneSpec& backbone, const ClassifierHeadSpec& head, std::uint64_t seed)
    : backbone_spec_(backbone.resolved()), head_spec_(head), dropout_rng_(std::make_shared<Rng>(derive_seed(seed, 1))),
      init_rng_(derive_seed(seed, 2)) {
    head_spec_.validate();
    backbone_ = make_backbone(backbone_spec_);
    int in = backbone_spec_.feature_dim;
    head_.emplace<nn::Dropout>("dropout", head_spec_.dropout_p, dropout_rng_);
    if (head_spec_.hidden > 0) {
        head_.emplace<nn::Linear>("hidden", in, head_spec_.hidden);
        head_.emplace<nn::ReLU>("hidden_relu");
        head_.emplace<nn::Dropout>("hidden_dropout", head_spec_.dropout_p, dropout_rng_);
        in = head_spec_.hidden;
    }
    head_.emplace<nn::Linear>("fc", in, head_spec_.num_attributes);
    reinitialize(seed);
}

void FeatClassifier::check_input(const Tensor& batch) const {
    if (batch.rank() != 4 || batch.dim(1) != backbone_spec_.input_height || batch.dim(2) != backbone_spec_.input_width ||
        batch.dim(3) != 3 || batch.dim(0) < 1)
        throw Error(ErrorCode::ShapeMismatch, "expected [B," + std::to_string(backbone_spec_.input_height) + "," +
                                                  std::to_string(backbone_spec_.input_width) + ",3], got " +
                                                  batch.shape_string());
}

Tensor FeatClassifier::forward(const Tensor& batch) {
    if (mode_ == Mode::eval) return infer(batch);
    check_input(batch);
    return head_.forward(backbone_->forward(batch));
}

Tensor FeatClassifier::backward(const Tensor& grad_logits) {
    if (mode_ != Mode::train) throw Error(ErrorCode::InvalidArgument, "backward requires train mode");
    return backbone_->backward(head_.backward(grad_logits));
}

Tensor FeatClassifier::infer(const Tensor& batch) const {
    check_input(batch);
    return head_.infer(backbone_->infer(batch));
}

void FeatClassifier::visit(const nn::ParamVisitor& fn) {
    backbone_->visit("backbone.", fn);
    head_.visit("head.", fn);
}

std::vector<nn::Parameter*> FeatClassifier::trainable_parameters() {
    std::vector<nn::Parameter*> out;
    visit([&](const std::string&, nn::Parameter& p) {
        if (p.trainable && p.value.size() > 0) out.push_back(&p);
    });
    return out;
}

std::size_t FeatClassifier::parameter_count() {
    std::size_t n = 0;
    for (auto* p : trainable_parameters()) n += p->value.size();
    return n;
}

void FeatClassifier::zero_grad() {
    visit([](const std::string&, nn::Parameter& p) { p.zero_grad(); });
}

void FeatClassifier::reinitialize(std::uint64_t seed) {
    init_rng_ = Rng(derive_seed(seed, 2));
    visit([&](const std::string&, nn::Parameter& p) { p.initialize(init_rng_); });
}

void FeatClassifier::reseed_dropout(std::uint64_t seed) { *dropout_rng_ = Rng(derive_seed(seed, 1)); }

// ---------------------------------------------------------------- weights

StateDict state_dict(FeatClassifier& model) {
    StateDict out;
    model.visit([&](const std::string& name, nn::Parameter& p) { out.emplace_back(name, p.value); });
    return out;
}

namespace {

constexpr char kMagic[8] = {'P', 'A', 'R', 'W', 'T', 'S', '0', '1'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw Error(ErrorCode::WeightsLoadError, "truncated weights file " + path.string());
    return v;
}

} // namespace

void save_weights(const StateDict& state, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + ": " + std::strerror(errno));
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(state.size()));
    for (const auto& [name, t] : state) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape()) put<std::int32_t>(out, d);
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    out.flush();
    if (!out) throw Error(errno == ENOSPC ? ErrorCode::DiskFull : ErrorCode::IoError, "short write to " + path.string());
}

StateDict load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::WeightsLoadError, "cannot open weights file " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw Error(ErrorCode::WeightsLoadError, path.string() + " is not a weights file");
    const auto count = take<std::uint32_t>(in, path);
    StateDict out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = take<std::uint32_t>(in, path);
        if (len > 4096) throw Error(ErrorCode::WeightsLoadError, "corrupt entry name in " + path.string());
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw Error(ErrorCode::WeightsLoadError, "truncated weights file " + path.string());
        const auto rank = take<std::uint32_t>(in, path);
        if (rank > 8) throw Error(ErrorCode::WeightsLoadError, "corrupt rank for " + name);
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            d = take<std::int32_t>(in, path);
            if (d < 0) throw Error(ErrorCode::WeightsLoadError, "corrupt shape for " + name);
        }
        Tensor t(shape);
        if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float))))
            throw Error(ErrorCode::WeightsLoadError, "truncated data for " + name);
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

std::string LoadReport::status(std::string_view prefix) const {
    auto count = [&](const std::vector<std::string>& names) {
        return std::count_if(names.begin(), names.end(), [&](const std::string& n) { return n.starts_with(prefix); });
    };
    const auto m = count(matched), r = count(reinitialized);
    if (m == 0 && r == 0) return "absent";
    if (r == 0) return "matched";
    if (m == 0) return "reinitialized";
    return "partial";
}

LoadReport load_state(FeatClassifier& model, const StateDict& state, bool strict) {
    std::unordered_map<std::string, const Tensor*> entries;
    for (const auto& [name, t] : state) entries.emplace(name, &t);
    LoadReport report;
    std::vector<std::string> problems;
    std::vector<std::pair<nn::Parameter*, const Tensor*>> assignments;
    std::vector<nn::Parameter*> to_reinit;
    model.visit([&](const std::string& name, nn::Parameter& p) {
        const auto it = entries.find(name);
        if (it == entries.end()) {
            problems.push_back("missing " + name);
            report.reinitialized.push_back(name);
            to_reinit.push_back(&p);
            return;
        }
        if (!it->second->same_shape(p.value)) {
            problems.push_back("shape of " + name + ": checkpoint " + it->second->shape_string() + " vs model " +
                               p.value.shape_string());
            report.skipped.push_back(name);
            report.reinitialized.push_back(name);
            to_reinit.push_back(&p);
        } else {
            report.matched.push_back(name);
            assignments.emplace_back(&p, it->second);
        }
        entries.erase(it);
    });
    for (const auto& [name, t] : state)
        if (entries.contains(name)) {
            problems.push_back("unexpected " + name);
            report.skipped.push_back(name);
        }
    if (strict && !problems.empty()) {
        std::string msg = std::to_string(problems.size()) + " mismatches; first: " + problems.front();
        throw Error(ErrorCode::StrictMismatch, msg);
    }
    for (auto [p, t] : assignments) {
        p->value = *t;
        p->zero_grad();
    }
    for (auto* p : to_reinit) p->initialize(model.init_rng());
    return report;
}

LoadReport load_pretrained(FeatClassifier& model, const PretrainedWeightsRef& ref) {
    if (ref.uri_or_path.empty()) throw Error(ErrorCode::WeightsLoadError, "empty weights reference");
    std::filesystem::path path(ref.uri_or_path);
    if (ref.uri_or_path.starts_with("file://")) path = ref.uri_or_path.substr(7);
    else if (ref.uri_or_path.find("://") != std::string::npos)
        throw Error(ErrorCode::WeightsLoadError, "only local files are supported: " + ref.uri_or_path);
    if (std::filesystem::is_directory(path)) path /= "weights";
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::WeightsLoadError, "weights not found: " + path.string());
    return load_state(model, load_weights(path), ref.strict_load);
}

FeatClassifier build_model(const BackboneSpec& backbone, const ClassifierHeadSpec& head, std::uint64_t seed) {
    FeatClassifier model(backbone, head, seed);
    if (backbone.pretrained) load_pretrained(model, *backbone.pretrained);
    return model;
}

// ---------------------------------------------------------------- preprocessing

PreprocessSpec PreprocessSpec::for_backbone(const BackboneSpec& spec) {
    PreprocessSpec p;
    p.height = spec.input_height;
    p.width = spec.input_width;
    return p;
}

json PreprocessSpec::to_json() const {
    return {{"input_size", {height, width}}, {"mean", mean}, {"std", stddev}, {"interpolation", "bilinear"}};
}

PreprocessSpec PreprocessSpec::from_json(const json& j) {
    PreprocessSpec p;
    try {
        p.height = j.at("input_size").at(0).get<int>();
        p.width = j.at("input_size").at(1).get<int>();
        p.mean = j.at("mean").get<std::array<double, 3>>();
        p.stddev = j.at("std").get<std::array<double, 3>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArtifact, std::string("preprocess spec: ") + e.what());
    }
    return p;
}

Tensor preprocess(const Image& image, const PreprocessSpec& spec) {
    require_rgb(image);
    const int H = spec.height, W = spec.width;
    if (H <= 0 || W <= 0) throw Error(ErrorCode::InvalidArgument, "preprocess target size must be positive");
    Tensor out({H, W, 3});
    const double sy = static_cast<double>(image.height) / H, sx = static_cast<double>(image.width) / W;
    for (int y = 0; y < H; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
        const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < W; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
            const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
                const double bottom = (1.0 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
                const double v = ((1.0 - wy) * top + wy * bottom) / 255.0;
                out[(static_cast<std::size_t>(y) * W + x) * 3 + c] =
                    static_cast<float>((v - spec.mean[static_cast<std::size_t>(c)]) / spec.stddev[static_cast<std::size_t>(c)]);
            }
        }
    }
    return out;
}

Tensor preprocess(const Image& image, const BackboneSpec& spec) {
    return preprocess(image, PreprocessSpec::for_backbone(spec));
}

Matrix to_matrix(const Tensor& t) {
    if (t.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "expected a [B, L] tensor, got " + t.shape_string());
    Matrix m(t.dim(0), t.dim(1));
    for (std::size_t i = 0; i < t.size(); ++i) m.data()[i] = t[i];
    return m;
}

Tensor to_tensor(const Matrix& m) {
    Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(m.data()[i]);
    return t;
}

} // namespace par
