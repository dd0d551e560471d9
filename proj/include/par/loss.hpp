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

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace par {

/// Batch-major (B x L) matrix used for logits, probabilities and targets.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-attribute multipliers for the positive and negative BCE terms.
struct ClassWeights {
    std::vector<double> w_pos;
    std::vector<double> w_neg;
    std::vector<double> source_ratios;

    [[nodiscard]] std::size_t size() const noexcept { return w_pos.size(); }
};

/// w_pos = exp(0.5 - r), w_neg = exp(r - 0.5). A balanced attribute (r = 0.5)
/// gets unit weights, so the weighted loss reduces to plain BCE.
ClassWeights compute_class_weights(std::span<const double> ratios);

enum class LossKind { plain_bce, scaled_bce_weighted, scaled_bce_logit_shift };

std::string_view to_string(LossKind kind) noexcept;
/// Accepts the enum names plus "bce" and "scaled_bce" (the weighted variant).
LossKind parse_loss_kind(std::string_view name);

struct LossConfig {
    LossKind kind = LossKind::plain_bce;
    std::optional<ClassWeights> weights; // required unless kind == plain_bce

    /// Throws InvalidArgument when weights are missing or sized differently from L.
    void validate(std::size_t num_attributes) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static LossConfig from_json(const nlohmann::json& j);
};

/// Builds a LossConfig from training-set positive ratios.
LossConfig make_loss_config(LossKind kind, std::span<const double> ratios);

struct LossValue {
    double loss = 0.0;
    Matrix grad; // d loss / d logits, same shape as the logits
};

/// Mean over B*L of the (optionally weighted) binary cross-entropy, evaluated
/// as softplus terms straight from the logits.
LossValue bce_with_logits(const Matrix& logits, const Matrix& targets, const ClassWeights* weights = nullptr);

/// Shifts logits by log((1 - r) / r) per attribute, then plain BCE.
/// Throws DegenerateRatio when some r is 0 or 1.
LossValue logit_shift_bce(const Matrix& logits, const Matrix& targets, std::span<const double> ratios);

LossValue compute_loss(const LossConfig& config, const Matrix& logits, const Matrix& targets);

/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

} // namespace par
