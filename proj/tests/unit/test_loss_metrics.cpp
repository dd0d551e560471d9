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

#include "par/error.hpp"
#include "par/loss.hpp"
#include "par/metrics.hpp"
#include "par/random.hpp"
#include "synthetic.hpp"

using namespace par;

namespace {

Matrix random_logits(Rng& rng, int B, int L, double scale = 3.0) {
    Matrix m(B, L);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
    return m;
}

Matrix random_targets(Rng& rng, int B, int L) {
    Matrix m(B, L);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    return m;
}

std::vector<double> random_ratios(Rng& rng, int L) {
    std::vector<double> r(static_cast<std::size_t>(L));
    for (auto& v : r) v = rng.uniform(0.05, 0.95);
    return r;
}

// Textbook form: -[y log p + (1 - y) log(1 - p)], p = 1 / (1 + e^-z), summed directly.
double naive_bce(const Matrix& z, const Matrix& y, const std::vector<double>* wp, const std::vector<double>* wn) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            const double p = 1.0 / (1.0 + std::exp(-z(i, j)));
            const double a = wp ? (*wp)[static_cast<std::size_t>(j)] : 1.0;
            const double b = wn ? (*wn)[static_cast<std::size_t>(j)] : 1.0;
            total += -(a * y(i, j) * std::log(p) + b * (1.0 - y(i, j)) * std::log(1.0 - p));
        }
    return total / static_cast<double>(z.size());
}

void expect_gradient_matches(const LossConfig& cfg, const Matrix& z, const Matrix& y) {
    const auto analytic = compute_loss(cfg, z, y).grad;
    const double h = 1e-4;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        Matrix zp = z, zm = z;
        zp.data()[i] += h;
        zm.data()[i] -= h;
        const double fd = (compute_loss(cfg, zp, y).loss - compute_loss(cfg, zm, y).loss) / (2 * h);
        ASSERT_NEAR(analytic.data()[i], fd, 1e-5) << to_string(cfg.kind) << " element " << i;
    }
}

// Confusion counts by explicit per-cell branching, independent of the library's vectorised path.
double brute_force_mA(const Matrix& prob, const Matrix& y, double thr) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < prob.cols(); ++j) {
        long tp = 0, fn = 0, tn = 0, fp = 0;
        for (Eigen::Index i = 0; i < prob.rows(); ++i) {
            const bool pred = prob(i, j) >= thr;
            const bool truth = y(i, j) == 1.0;
            if (truth && pred) ++tp;
            else if (truth) ++fn;
            else if (pred) ++fp;
            else ++tn;
        }
        const double pos = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn);
        const double neg = tn + fp == 0 ? 1.0 : static_cast<double>(tn) / (tn + fp);
        sum += 0.5 * (pos + neg);
    }
    return sum / static_cast<double>(prob.cols());
}

} // namespace

TEST(ClassWeights, ClosedForms) {
    const std::vector<double> r{0.5, 0.0, 0.1, 0.9};
    const auto w = compute_class_weights(r);
    EXPECT_DOUBLE_EQ(w.w_pos[0], 1.0);
    EXPECT_DOUBLE_EQ(w.w_neg[0], 1.0);
    EXPECT_NEAR(w.w_pos[1], 1.6487212707001282, 1e-12);
    EXPECT_NEAR(w.w_neg[1], 0.6065306597126334, 1e-12);
    EXPECT_NEAR(w.w_pos[2], std::exp(0.4), 1e-12);
    EXPECT_NEAR(w.w_pos[3], std::exp(-0.4), 1e-12);
    EXPECT_GT(w.w_pos[2], w.w_pos[0]);
    EXPECT_GT(w.w_pos[0], w.w_pos[3]);
}

TEST(Loss, PlainBceAtZero) {
    Matrix z(1, 1), y(1, 1);
    z << 0.0;
    y << 1.0;
    EXPECT_NEAR(bce_with_logits(z, y).loss, std::log(2.0), 1e-12);
}

TEST(Loss, MatchesDirectSummation) {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const auto z = random_logits(rng, 8, 5, 2.0);
        const auto y = random_targets(rng, 8, 5);
        const auto r = random_ratios(rng, 5);
        const auto w = compute_class_weights(r);
        EXPECT_NEAR(bce_with_logits(z, y).loss, naive_bce(z, y, nullptr, nullptr), 1e-7);
        EXPECT_NEAR(bce_with_logits(z, y, &w).loss, naive_bce(z, y, &w.w_pos, &w.w_neg), 1e-7);
        // Logit shift: move the logits first, then plain BCE.
        Matrix shifted = z;
        for (Eigen::Index j = 0; j < 5; ++j)
            shifted.col(j).array() += std::log((1.0 - r[static_cast<std::size_t>(j)]) / r[static_cast<std::size_t>(j)]);
        EXPECT_NEAR(logit_shift_bce(z, y, r).loss, naive_bce(shifted, y, nullptr, nullptr), 1e-7);
    }
}

TEST(Loss, LogitShiftClosedForm) {
    Matrix z(1, 1), y(1, 1);
    z << 0.0;
    y << 1.0;
    const std::vector<double> r{0.1};
    EXPECT_NEAR(logit_shift_bce(z, y, r).loss, std::log(10.0 / 9.0), 1e-12);
    const std::vector<double> half{0.5};
    EXPECT_NEAR(logit_shift_bce(z, y, half).loss, std::log(2.0), 1e-15);
}

TEST(Loss, LogitShiftRejectsDegenerateRatios) {
    Matrix z = Matrix::Zero(2, 2), y = Matrix::Zero(2, 2);
    for (double bad : {0.0, 1.0}) {
        const std::vector<double> r{0.3, bad};
        try {
            (void)logit_shift_bce(z, y, r);
            FAIL() << "expected DegenerateRatio";
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::DegenerateRatio);
        }
    }
}

TEST(Loss, BalancedWeightsReduceToPlain) {
    Rng rng(2);
    const std::vector<double> half(6, 0.5);
    const auto weighted = make_loss_config(LossKind::scaled_bce_weighted, half);
    const auto shift = make_loss_config(LossKind::scaled_bce_logit_shift, half);
    for (int t = 0; t < 1000; ++t) {
        const auto z = random_logits(rng, 7, 6);
        const auto y = random_targets(rng, 7, 6);
        const double plain = bce_with_logits(z, y).loss;
        ASSERT_NEAR(compute_loss(weighted, z, y).loss, plain, 1e-9);
        ASSERT_NEAR(compute_loss(shift, z, y).loss, plain, 1e-9);
    }
}

TEST(Loss, GradientsMatchFiniteDifferences) {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto z = random_logits(rng, 4, 6);
        const auto y = random_targets(rng, 4, 6);
        const auto r = random_ratios(rng, 6);
        expect_gradient_matches(LossConfig{}, z, y);
        expect_gradient_matches(make_loss_config(LossKind::scaled_bce_weighted, r), z, y);
        expect_gradient_matches(make_loss_config(LossKind::scaled_bce_logit_shift, r), z, y);
    }
}

TEST(Loss, StableAtExtremeLogitsAndVanishesAtOptimum) {
    Matrix z(2, 2), y(2, 2);
    z << 800.0, -800.0, -800.0, 800.0;
    y << 1.0, 0.0, 0.0, 1.0;
    const auto v = bce_with_logits(z, y);
    EXPECT_TRUE(std::isfinite(v.loss));
    EXPECT_LT(v.loss, 1e-300);
    EXPECT_TRUE(v.grad.allFinite());
    y << 0.0, 1.0, 1.0, 0.0;
    const auto wrong = bce_with_logits(z, y);
    EXPECT_NEAR(wrong.loss, 800.0, 1e-9);
    EXPECT_TRUE(wrong.grad.allFinite());
}

TEST(Loss, NonNegative) {
    Rng rng(4);
    const auto cfg = make_loss_config(LossKind::scaled_bce_weighted, random_ratios(rng, 3));
    for (int t = 0; t < 200; ++t) EXPECT_GE(compute_loss(cfg, random_logits(rng, 5, 3), random_targets(rng, 5, 3)).loss, 0.0);
}

TEST(Loss, RarePositiveMissesCostMore) {
    // Label 0 is rare (r = 0.1); its positive is misclassified, everything else is right.
    const std::vector<double> r{0.1, 0.5};
    Matrix z(2, 2), y(2, 2);
    z << -3.0, 3.0, -3.0, -3.0;
    y << 1.0, 1.0, 0.0, 0.0;
    const auto cfg = make_loss_config(LossKind::scaled_bce_weighted, r);
    EXPECT_GT(compute_loss(cfg, z, y).loss, bce_with_logits(z, y).loss);
}

TEST(Loss, ConfigValidationAndJson) {
    LossConfig c;
    c.kind = LossKind::scaled_bce_weighted;
    EXPECT_THROW(c.validate(3), Error);
    c = make_loss_config(LossKind::scaled_bce_weighted, std::vector<double>{0.2, 0.4});
    EXPECT_THROW(c.validate(3), Error);
    EXPECT_NO_THROW(c.validate(2));
    const auto back = LossConfig::from_json(c.to_json());
    EXPECT_EQ(back.kind, c.kind);
    EXPECT_EQ(back.weights->w_pos, c.weights->w_pos);
    EXPECT_EQ(parse_loss_kind("scaled_bce"), LossKind::scaled_bce_weighted);
    EXPECT_EQ(parse_loss_kind("bce"), LossKind::plain_bce);
    EXPECT_THROW(parse_loss_kind("focal"), Error);
}

TEST(Metrics, HandConfusionExample) {
    Matrix p(4, 2), y(4, 2);
    p << 1, 0, 1, 1, 0, 1, 0, 0;
    y << 1, 0, 0, 1, 0, 1, 1, 0;
    const auto r = mean_accuracy(p, y);
    EXPECT_DOUBLE_EQ(r.per_label_accuracy()[0], 0.5);
    EXPECT_DOUBLE_EQ(r.per_label_accuracy()[1], 1.0);
    EXPECT_DOUBLE_EQ(r.mA, 0.75);
}

TEST(Metrics, PerfectAndPerfectlyWrong) {
    Rng rng(5);
    Matrix y = random_targets(rng, 50, 4);
    y.row(0).setOnes();
    y.row(1).setZero();
    EXPECT_EQ(mean_accuracy(y, y).mA, 1.0);
    const Matrix inv = (1.0 - y.array()).matrix();
    EXPECT_EQ(mean_accuracy(inv, y).mA, 0.0);
}

TEST(Metrics, VacuousRecallCountsAsOne) {
    Matrix p(3, 1), y(3, 1);
    p << 0.1, 0.2, 0.9;
    y << 0, 0, 0;
    // No positives: pos recall 0/0 -> 1; neg recall 2/3.
    EXPECT_NEAR(mean_accuracy(p, y).mA, 0.5 * (1.0 + 2.0 / 3.0), 1e-15);
}

TEST(Metrics, MatchesBruteForceAndPrethresholding) {
    Rng rng(6);
    for (int t = 0; t < 200; ++t) {
        Matrix p(60, 7);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform01();
        const auto y = random_targets(rng, 60, 7);
        const double thr = t % 2 ? 0.5 : rng.uniform(0.1, 0.9);
        const auto r = mean_accuracy(p, y, thr);
        ASSERT_NEAR(r.mA, brute_force_mA(p, y, thr), 1e-12);
        const Matrix hard = (p.array() >= thr).cast<double>().matrix();
        ASSERT_NEAR(mean_accuracy(hard, y, 0.5).mA, r.mA, 1e-15);
        ASSERT_NEAR(mean_accuracy_from_counts(r.counts).mA, r.mA, 1e-15);
    }
}

TEST(Metrics, ShapeMismatch) {
    try {
        (void)mean_accuracy(Matrix::Zero(3, 2), Matrix::Zero(3, 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

TEST(MetricLog, JsonLinesRoundTrip) {
    synth::TempDir dir("metrics");
    const auto path = dir / "m.jsonl";
    append_metric_record(path, {1, "train", 0.7, std::nullopt, {}, 1e-3});
    append_metric_record(path, {1, "val", 0.6, 0.81, {0.8, 0.82}, std::nullopt});
    const auto back = read_metric_log(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].split, "train");
    EXPECT_EQ(*back[0].learning_rate, 1e-3);
    EXPECT_FALSE(back[0].mA.has_value());
    EXPECT_EQ(*back[1].mA, 0.81);
    EXPECT_EQ(back[1].per_label, (std::vector<double>{0.8, 0.82}));
}
