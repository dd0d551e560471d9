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

#include <gtest/gtest.h>

#include <fstream>
#include <cmath>

#include "par/artifact.hpp"
#include "par/error.hpp"
#include "par/loss.hpp"
#include "par/model.hpp"
#include "par/random.hpp"
#include "synthetic.hpp"

using namespace par;

namespace {

Tensor random_batch(int B, int H, int W, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t({B, H, W, 3});
    for (auto& v : t.values()) v = static_cast<float>(rng.normal());
    return t;
}

BackboneSpec tiny(int size = 16) {
    BackboneSpec s;
    s.name = BackboneKind::tiny_cnn;
    s.input_height = s.input_width = size;
    return s;
}

BackboneSpec small_beit() {
    BackboneSpec s;
    s.name = BackboneKind::beit;
    s.input_height = s.input_width = 32;
    s.feature_dim = 16;
    s.arch.patch = 8;
    s.arch.depths = {2};
    s.arch.heads = {2};
    return s;
}

BackboneSpec small_swin() {
    BackboneSpec s;
    s.name = BackboneKind::swin;
    s.input_height = s.input_width = 32;
    s.feature_dim = 32;
    s.arch.patch = 4;
    s.arch.depths = {2, 2};
    s.arch.window = 4;
    return s;
}

ClassifierHeadSpec head(int L, float p = 0.5f) {
    ClassifierHeadSpec h;
    h.num_attributes = L;
    h.dropout_p = p;
    return h;
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no par::Error thrown";
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST(Model, TinyCnnShapeContract) {
    auto m = build_model(tiny(), head(5), 1);
    EXPECT_GT(m.parameter_count(), 0u);
    for (int B : {1, 2, 4, 7}) {
        const Tensor y = m.infer(random_batch(B, 16, 16, B));
        EXPECT_EQ(y.shape(), (std::vector<int>{B, 5}));
    }
    EXPECT_EQ(m.backbone_spec().feature_dim, 32);
}

TEST(Model, TransformerAdaptersShapeContract) {
    for (const auto& spec : {small_beit(), small_swin()}) {
        auto m = build_model(spec, head(4), 2);
        for (int B : {1, 2, 7}) EXPECT_EQ(m.infer(random_batch(B, 32, 32, B)).shape(), (std::vector<int>{B, 4}));
        m.set_mode(Mode::train);
        const Tensor y = m.forward(random_batch(2, 32, 32, 9));
        const Tensor dx = m.backward(Tensor(y.shape(), 1.0f));
        EXPECT_EQ(dx.shape(), (std::vector<int>{2, 32, 32, 3}));
    }
}

TEST(Model, DefaultTransformerSpecsResolve) {
    BackboneSpec beit;
    beit.name = BackboneKind::beit;
    const auto rb = beit.resolved();
    EXPECT_EQ(rb.feature_dim, 768);
    EXPECT_EQ(rb.arch.patch, 16);
    EXPECT_EQ(rb.arch.depths, std::vector<int>{12});
    BackboneSpec swin;
    swin.name = BackboneKind::swin;
    const auto rs = swin.resolved();
    EXPECT_EQ(rs.feature_dim, 768);
    EXPECT_EQ(rs.arch.depths, (std::vector<int>{2, 2, 6, 2}));
    EXPECT_EQ(rs.arch.heads, (std::vector<int>{3, 6, 12, 24}));
    swin.input_height = 100;
    EXPECT_EQ(code_of([&] { (void)swin.resolved(); }), ErrorCode::InvalidArgument);
}

TEST(Model, Resnet50ShapeContract) {
    BackboneSpec s;
    s.name = BackboneKind::resnet50;
    auto m = build_model(s, head(30), 3);
    EXPECT_EQ(m.backbone_spec().feature_dim, 2048);
    EXPECT_EQ(m.infer(random_batch(2, 224, 224, 1)).shape(), (std::vector<int>{2, 30}));
    // Roughly 23.5M backbone weights plus the head.
    EXPECT_GT(m.parameter_count(), 23'000'000u);
    EXPECT_LT(m.parameter_count(), 24'000'000u);
}

TEST(Model, WrongInputShapeRejected) {
    auto m = build_model(tiny(), head(5), 1);
    EXPECT_EQ(code_of([&] { (void)m.infer(random_batch(1, 20, 16, 1)); }), ErrorCode::ShapeMismatch);
}

TEST(Model, SpecValidation) {
    EXPECT_EQ(code_of([] { (void)parse_backbone("vgg"); }), ErrorCode::UnknownBackbone);
    EXPECT_EQ(code_of([] { build_model(tiny(), head(0)); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { build_model(tiny(), head(3, 1.0f)); }), ErrorCode::InvalidArgument);
    auto bad = tiny();
    bad.feature_dim = -4;
    EXPECT_EQ(code_of([&] { build_model(bad, head(3)); }), ErrorCode::InvalidArgument);
    const auto j = small_swin().to_json();
    EXPECT_EQ(BackboneSpec::from_json(j).to_json(), j);
}

TEST(Model, EvalIsDeterministicTrainDropoutIsNot) {
    auto m = build_model(tiny(), head(5, 0.9f), 4);
    const Tensor x = random_batch(3, 16, 16, 5);
    EXPECT_EQ(m.infer(x), m.infer(x));
    m.set_mode(Mode::eval);
    EXPECT_EQ(m.forward(x), m.forward(x));

    auto d = build_model(tiny(), head(5, 0.5f), 4);
    d.set_mode(Mode::train);
    int differing = 0;
    for (int t = 0; t < 20; ++t) differing += !(d.forward(x) == d.forward(x));
    EXPECT_EQ(differing, 20);
}

TEST(Model, SingleStepDescends) {
    auto m = build_model(tiny(), head(5, 0.0f), 6);
    const Tensor x = random_batch(1, 16, 16, 7);
    Matrix y(1, 5);
    y << 1, 0, 1, 1, 0;
    m.set_mode(Mode::train);
    m.zero_grad();
    const auto before = bce_with_logits(to_matrix(m.forward(x)), y);
    m.backward(to_tensor(before.grad));
    for (auto* p : m.trainable_parameters())
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= 1e-2f * p->grad[i];
    const auto after = bce_with_logits(to_matrix(m.forward(x)), y);
    EXPECT_LT(after.loss, before.loss);
}

TEST(Weights, SaveLoadReproducesLogits) {
    synth::TempDir dir("weights");
    auto a = build_model(small_swin(), head(3), 1);
    save_weights(state_dict(a), dir / "w.bin");
    auto b = build_model(small_swin(), head(3), 99);
    const Tensor x = random_batch(2, 32, 32, 3);
    EXPECT_FALSE(a.infer(x) == b.infer(x));
    const auto report = load_state(b, load_weights(dir / "w.bin"), true);
    EXPECT_TRUE(report.reinitialized.empty());
    EXPECT_EQ(a.infer(x), b.infer(x));
}

TEST(Weights, PartialLoadReinitializesHead) {
    synth::TempDir dir("partial");
    auto donor = build_model(tiny(), head(5), 1);
    StateDict backbone_only;
    for (auto& [name, t] : state_dict(donor))
        if (name.starts_with("backbone.")) backbone_only.emplace_back(name, t);
    save_weights(backbone_only, dir / "bb.bin");

    auto spec = tiny();
    spec.pretrained = PretrainedWeightsRef{(dir / "bb.bin").string(), WeightsOrigin::rapv2, false};
    auto m = build_model(spec, head(7), 2);
    const auto report = load_pretrained(m, *spec.pretrained);
    EXPECT_EQ(report.status("backbone."), "matched");
    EXPECT_EQ(report.status("head."), "reinitialized");
    EXPECT_EQ(report.reinitialized.size(), 2u);

    spec.pretrained->strict_load = true;
    EXPECT_EQ(code_of([&] { build_model(spec, head(7), 2); }), ErrorCode::StrictMismatch);
}

TEST(Weights, StrictRejectsWrongWidth) {
    synth::TempDir dir("strict");
    auto wide = tiny();
    wide.feature_dim = 64;
    auto donor = build_model(wide, head(5), 1);
    save_weights(state_dict(donor), dir / "w.bin");
    auto m = build_model(tiny(), head(5), 1);
    EXPECT_EQ(code_of([&] { load_pretrained(m, {(dir / "w.bin").string(), WeightsOrigin::imagenet, true}); }),
              ErrorCode::StrictMismatch);
    const auto report = load_pretrained(m, {(dir / "w.bin").string(), WeightsOrigin::imagenet, false});
    EXPECT_FALSE(report.skipped.empty());
    EXPECT_EQ(code_of([&] { load_pretrained(m, {(dir / "nope.bin").string(), WeightsOrigin::none, false}); }),
              ErrorCode::WeightsLoadError);
    std::ofstream(dir / "junk.bin") << "not weights";
    EXPECT_EQ(code_of([&] { (void)load_weights(dir / "junk.bin"); }), ErrorCode::WeightsLoadError);
}

TEST(Preprocess, ResizeAndNormalize) {
    PreprocessSpec spec;
    const auto big = synth::random_image(448, 448, 1);
    const Tensor t = preprocess(big, spec);
    EXPECT_EQ(t.shape(), (std::vector<int>{224, 224, 3}));

    // A constant image equal to the channel means normalizes to zero.
    spec.height = spec.width = 8;
    spec.mean = {100.0 / 255.0, 50.0 / 255.0, 200.0 / 255.0};
    Image flat(10, 6, 3);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 6; ++x) {
            flat.at(y, x, 0) = 100;
            flat.at(y, x, 1) = 50;
            flat.at(y, x, 2) = 200;
        }
    const Tensor normalized = preprocess(flat, spec);
    for (float v : normalized.values()) EXPECT_NEAR(v, 0.0f, 1e-6f);
    EXPECT_EQ(code_of([] { (void)preprocess(Image{}, PreprocessSpec{}); }), ErrorCode::InvalidImage);
}

TEST(Preprocess, GradientImageMatchesTwoStepOracle) {
    Image img(8, 8, 3);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(30 * x + 3 * y + 20 * c);
    PreprocessSpec spec;
    spec.height = 5;
    spec.width = 12;
    const Tensor t = preprocess(img, spec);
    // Step 1: half-pixel-centre bilinear resize. Step 2: scale and normalize.
    for (int oy = 0; oy < 5; ++oy)
        for (int ox = 0; ox < 12; ++ox) {
            const double sy = std::clamp((oy + 0.5) * 8.0 / 5.0 - 0.5, 0.0, 7.0);
            const double sx = std::clamp((ox + 0.5) * 8.0 / 12.0 - 0.5, 0.0, 7.0);
            const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
            const int y1 = std::min(7, y0 + 1), x1 = std::min(7, x0 + 1);
            for (int c = 0; c < 3; ++c) {
                const double v = (1 - (sy - y0)) * ((1 - (sx - x0)) * img.at(y0, x0, c) + (sx - x0) * img.at(y0, x1, c)) +
                                 (sy - y0) * ((1 - (sx - x0)) * img.at(y1, x0, c) + (sx - x0) * img.at(y1, x1, c));
                const double expect = (v / 255.0 - spec.mean[static_cast<std::size_t>(c)]) / spec.stddev[static_cast<std::size_t>(c)];
                EXPECT_NEAR(t[static_cast<std::size_t>((oy * 12 + ox) * 3 + c)], expect, 1e-6);
            }
        }
}

TEST(Artifact, SaveLoadRoundTrip) {
    synth::TempDir dir("artifact");
    auto m = build_model(tiny(), head(5), 3);
    const auto schema = synth::toy_schema();
    const auto loss = make_loss_config(LossKind::scaled_bce_weighted, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});
    const auto version = save_artifact(m, schema, dir / "model", loss);
    for (const char* f : {"weights", "schema.json", "preprocess.json", "recipe.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / "model" / f)) << f;
    const auto back = load_artifact(dir / "model");
    EXPECT_EQ(back.model_version, version);
    EXPECT_EQ(back.schema, schema);
    EXPECT_EQ(back.preprocess, PreprocessSpec::for_backbone(m.backbone_spec()));
    EXPECT_EQ(back.loss->weights->source_ratios, loss.weights->source_ratios);
    const Tensor x = random_batch(2, 16, 16, 4);
    EXPECT_EQ(back.model.infer(x), m.infer(x));

    EXPECT_EQ(code_of([&] { save_artifact(m, AttributeSchema::flat({"a"}), dir / "bad"); }), ErrorCode::ShapeMismatch);
    std::filesystem::remove(dir / "model" / "schema.json");
    EXPECT_EQ(code_of([&] { (void)load_artifact(dir / "model"); }), ErrorCode::InvalidArtifact);
    EXPECT_EQ(code_of([&] { (void)load_artifact(dir / "missing"); }), ErrorCode::InvalidArtifact);
}
