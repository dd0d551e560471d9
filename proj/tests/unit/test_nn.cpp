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

#include <cmath>
#include <functional>

#include "par/nn/layers.hpp"
#include "par/nn/transformer.hpp"
#include "par/random.hpp"

using namespace par;
using namespace par::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<float>(rng.normal(0.0, scale));
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

// f(x) = <forward(x), g>; compares backward() against central differences on
// sampled input entries and sampled entries of every trainable parameter.
void check_layer_gradients(Layer& layer, const Tensor& x0, Rng& rng, int samples = 12, double h = 1e-2,
                           double tol = 2e-2) {
    Tensor x = x0;
    const Tensor y = layer.forward(x);
    const Tensor g = random_tensor(y.shape(), rng);
    layer.visit("", [](const std::string&, Parameter& p) { p.zero_grad(); });
    (void)layer.forward(x);
    const Tensor dx = layer.backward(g);
    ASSERT_TRUE(dx.same_shape(x));

    auto f = [&] { return dot(layer.forward(x), g); };
    auto close = [&](double analytic, double numeric, const std::string& what) {
        ASSERT_NEAR(analytic, numeric, tol * std::max(1.0, std::abs(numeric))) << what;
    };
    for (int s = 0; s < samples; ++s) {
        const auto i = rng.below(x.size());
        const float keep = x[i];
        x[i] = keep + static_cast<float>(h);
        const double up = f();
        x[i] = keep - static_cast<float>(h);
        const double down = f();
        x[i] = keep;
        close(dx[i], (up - down) / (2 * h), "input " + std::to_string(i));
    }
    std::vector<std::pair<std::string, Parameter*>> params;
    layer.visit("", [&](const std::string& name, Parameter& p) {
        if (p.trainable) params.emplace_back(name, &p);
    });
    for (auto& [name, p] : params) {
        const Tensor grad = p->grad;
        for (int s = 0; s < std::min<int>(samples, static_cast<int>(p->value.size())); ++s) {
            const auto i = rng.below(p->value.size());
            const float keep = p->value[i];
            p->value[i] = keep + static_cast<float>(h);
            const double up = f();
            p->value[i] = keep - static_cast<float>(h);
            const double down = f();
            p->value[i] = keep;
            close(grad[i], (up - down) / (2 * h), name + "[" + std::to_string(i) + "]");
        }
    }
}

void init_all(Layer& layer, std::uint64_t seed) {
    Rng rng(seed);
    layer.visit("", [&](const std::string&, Parameter& p) { p.initialize(rng); });
}

} // namespace

TEST(Tensor, ShapesAndStacking) {
    Tensor a({2, 3}, 1.5f);
    EXPECT_EQ(a.size(), 6u);
    EXPECT_EQ(a.dim(-1), 3);
    EXPECT_THROW((void)a.reshaped({4, 2}), std::exception);
    const Tensor b = a.reshaped({3, 2});
    EXPECT_EQ(b.shape(), (std::vector<int>{3, 2}));
    const std::vector<Tensor> items{Tensor({2, 2}, 1.0f), Tensor({2, 2}, 2.0f)};
    const Tensor s = stack(items);
    EXPECT_EQ(s.shape(), (std::vector<int>{2, 2, 2}));
    EXPECT_EQ(slice_batch(s, 1)[3], 2.0f);
}

TEST(Conv2d, MatchesDirectConvolution) {
    Rng rng(1);
    Conv2d conv(2, 3, 3, 2, 1, true);
    init_all(conv, 2);
    const Tensor x = random_tensor({2, 5, 6, 2}, rng);
    const Tensor y = conv.infer(x);
    ASSERT_EQ(y.shape(), (std::vector<int>{2, 3, 3, 3}));
    Tensor w, b;
    conv.visit("", [&](const std::string& n, Parameter& p) { (n == "weight" ? w : b) = p.value; });
    // HWIO weights.
    for (int n = 0; n < 2; ++n)
        for (int oy = 0; oy < 3; ++oy)
            for (int ox = 0; ox < 3; ++ox)
                for (int o = 0; o < 3; ++o) {
                    double acc = b[static_cast<std::size_t>(o)];
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx)
                            for (int i = 0; i < 2; ++i) {
                                const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                                if (iy < 0 || iy >= 5 || ix < 0 || ix >= 6) continue;
                                acc += x[static_cast<std::size_t>(((n * 5 + iy) * 6 + ix) * 2 + i)] *
                                       w[static_cast<std::size_t>(((ky * 3 + kx) * 2 + i) * 3 + o)];
                            }
                    EXPECT_NEAR(y[static_cast<std::size_t>(((n * 3 + oy) * 3 + ox) * 3 + o)], acc, 1e-4);
                }
}

TEST(Gradients, Conv2d) {
    Rng rng(3);
    Conv2d conv(3, 4, 3, 1, 1, true);
    init_all(conv, 4);
    check_layer_gradients(conv, random_tensor({2, 5, 5, 3}, rng), rng);
    Conv2d strided(2, 3, 3, 2, 0, false);
    init_all(strided, 5);
    check_layer_gradients(strided, random_tensor({1, 7, 6, 2}, rng), rng);
    Conv2d pointwise(4, 2, 1, 1, 0, true);
    init_all(pointwise, 6);
    check_layer_gradients(pointwise, random_tensor({2, 3, 3, 4}, rng), rng);
}

TEST(Gradients, LinearAndNorms) {
    Rng rng(7);
    Linear lin(5, 4);
    init_all(lin, 1);
    check_layer_gradients(lin, random_tensor({3, 5}, rng), rng);
    BatchNorm bn(3);
    init_all(bn, 1);
    check_layer_gradients(bn, random_tensor({4, 2, 2, 3}, rng), rng);
    LayerNorm ln(6);
    init_all(ln, 1);
    check_layer_gradients(ln, random_tensor({2, 3, 6}, rng), rng);
}

TEST(Gradients, Activations) {
    Rng rng(8);
    GELU gelu;
    SCOPED_TRACE("gelu");
    check_layer_gradients(gelu, random_tensor({4, 5}, rng), rng);
    ReLU relu;
    SCOPED_TRACE("relu");
    // keep inputs clear of the kink so central differences are valid
    auto away = random_tensor({4, 5}, rng);
    for (auto& v : away.values()) v += v >= 0 ? 0.1f : -0.1f;
    check_layer_gradients(relu, away, rng);
    MaxPool2d pool(3, 2, 1);
    SCOPED_TRACE("pool");
    check_layer_gradients(pool, random_tensor({2, 5, 5, 2}, rng), rng);
    GlobalAvgPool gap;
    SCOPED_TRACE("gap");
    check_layer_gradients(gap, random_tensor({2, 3, 4, 5}, rng), rng);
}

TEST(Gradients, WindowAttentionGlobalAndShifted) {
    Rng rng(9);
    WindowAttention global(8, 2, {4, 4}, {4, 4}, 0);
    init_all(global, 2);
    check_layer_gradients(global, random_tensor({2, 4, 4, 8}, rng), rng, 16, 1e-2, 3e-2);
    WindowAttention shifted(8, 2, {4, 4}, {2, 2}, 1);
    init_all(shifted, 3);
    check_layer_gradients(shifted, random_tensor({1, 4, 4, 8}, rng), rng, 16, 1e-2, 3e-2);
}

TEST(Gradients, TransformerBlockAndMerging) {
    Rng rng(10);
    TransformerBlock block(8, 2, {4, 4}, {2, 2}, 1, 2.0, 0.1f);
    init_all(block, 4);
    check_layer_gradients(block, random_tensor({1, 4, 4, 8}, rng), rng, 16, 1e-2, 3e-2);
    PatchMerging merge(4);
    init_all(merge, 5);
    check_layer_gradients(merge, random_tensor({2, 4, 4, 4}, rng), rng);
}

TEST(WindowAttention, ShiftMaskBlocksCrossRegionMixing) {
    // With a shift, a token in the wrapped corner window must ignore tokens from other regions:
    // perturbing a far-away token of a different region leaves its output unchanged.
    Rng rng(11);
    WindowAttention attn(4, 1, {4, 4}, {2, 2}, 1);
    init_all(attn, 6);
    Tensor x = random_tensor({1, 4, 4, 4}, rng);
    const Tensor base = attn.infer(x);
    // Tokens (0,0) and (3,3) share the rolled corner window but belong to different regions.
    for (int c = 0; c < 4; ++c) x[static_cast<std::size_t>((3 * 4 + 3) * 4 + c)] += 5.0f;
    const Tensor moved = attn.infer(x);
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(moved[static_cast<std::size_t>(c)], base[static_cast<std::size_t>(c)], 1e-4);
}

TEST(Dropout, InferIsIdentityTrainDrops) {
    auto rng = std::make_shared<Rng>(3);
    Dropout d(0.5f, rng);
    Rng data(4);
    const Tensor x = random_tensor({8, 16}, data);
    EXPECT_EQ(d.infer(x), x);
    const Tensor y = d.forward(x);
    int zeros = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0f) ++zeros;
        else EXPECT_NEAR(y[i], 2.0f * x[i], 1e-6);
    }
    EXPECT_GT(zeros, 30);
    EXPECT_LT(zeros, 98);
}

TEST(BatchNorm, RunningStatisticsTrackBatches) {
    BatchNorm bn(2, 1.0f);
    init_all(bn, 1);
    Tensor x({4, 2}, std::vector<float>{1, 10, 3, 20, 5, 30, 7, 40});
    (void)bn.forward(x);
    Tensor mean, var;
    bn.visit("", [&](const std::string& n, Parameter& p) {
        if (n == "running_mean") mean = p.value;
        if (n == "running_var") var = p.value;
    });
    EXPECT_NEAR(mean[0], 4.0, 1e-5);
    EXPECT_NEAR(mean[1], 25.0, 1e-5);
    EXPECT_NEAR(var[0], 20.0 / 3.0, 1e-4); // unbiased
    const Tensor y = bn.infer(x);
    EXPECT_NEAR(y[0], (1.0 - 4.0) / std::sqrt(20.0 / 3.0 + 1e-5), 1e-4);
}
