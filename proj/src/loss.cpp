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

#include "par/loss.hpp"

#include <cmath>
#include <string>

#include "par/error.hpp"

namespace par {
namespace {

void check_inputs(const Matrix& logits, const Matrix& targets) {
    if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
        throw Error(ErrorCode::ShapeMismatch, "logits " + std::to_string(logits.rows()) + "x" +
                                                  std::to_string(logits.cols()) + " vs targets " +
                                                  std::to_string(targets.rows()) + "x" + std::to_string(targets.cols()));
    if (logits.size() == 0) throw Error(ErrorCode::ShapeMismatch, "empty batch");
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
        const double y = targets.data()[i];
        if (y != 0.0 && y != 1.0) throw Error(ErrorCode::NonBinaryTarget, "target value " + std::to_string(y));
    }
}

} // namespace

double softplus(double x) noexcept {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) noexcept {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

ClassWeights compute_class_weights(std::span<const double> ratios) {
    ClassWeights w;
    w.source_ratios.assign(ratios.begin(), ratios.end());
    w.w_pos.reserve(ratios.size());
    w.w_neg.reserve(ratios.size());
    for (double r : ratios) {
        if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::InvalidArgument, "positive ratio outside [0,1]");
        w.w_pos.push_back(std::exp(0.5 - r));
        w.w_neg.push_back(std::exp(r - 0.5));
    }
    return w;
}

std::string_view to_string(LossKind kind) noexcept {
    switch (kind) {
    case LossKind::plain_bce: return "plain_bce";
    case LossKind::scaled_bce_weighted: return "scaled_bce_weighted";
    case LossKind::scaled_bce_logit_shift: return "scaled_bce_logit_shift";
    }
    return "plain_bce";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "plain_bce" || name == "bce") return LossKind::plain_bce;
    if (name == "scaled_bce_weighted" || name == "scaled_bce") return LossKind::scaled_bce_weighted;
    if (name == "scaled_bce_logit_shift") return LossKind::scaled_bce_logit_shift;
    throw Error(ErrorCode::InvalidArgument, "unknown loss kind '" + std::string(name) + "'");
}

void LossConfig::validate(std::size_t num_attributes) const {
    if (kind == LossKind::plain_bce) {
        if (weights && weights->size() != num_attributes)
            throw Error(ErrorCode::InvalidArgument, "class weights sized for a different schema");
        return;
    }
    if (!weights) throw Error(ErrorCode::InvalidArgument, std::string(to_string(kind)) + " needs class weights");
    if (weights->size() != num_attributes || weights->w_neg.size() != num_attributes ||
        weights->source_ratios.size() != num_attributes)
        throw Error(ErrorCode::InvalidArgument, "class weights sized for a different schema");
}

nlohmann::json LossConfig::to_json() const {
    nlohmann::json j{{"kind", to_string(kind)}};
    if (weights) j["positive_ratios"] = weights->source_ratios;
    return j;
}

LossConfig LossConfig::from_json(const nlohmann::json& j) {
    LossConfig c;
    c.kind = parse_loss_kind(j.at("kind").get<std::string>());
    if (j.contains("positive_ratios")) c.weights = compute_class_weights(j["positive_ratios"].get<std::vector<double>>());
    return c;
}

LossConfig make_loss_config(LossKind kind, std::span<const double> ratios) {
    LossConfig c;
    c.kind = kind;
    if (kind != LossKind::plain_bce) c.weights = compute_class_weights(ratios);
    return c;
}

LossValue bce_with_logits(const Matrix& logits, const Matrix& targets, const ClassWeights* weights) {
    check_inputs(logits, targets);
    const auto B = logits.rows(), L = logits.cols();
    if (weights && static_cast<Eigen::Index>(weights->size()) != L)
        throw Error(ErrorCode::ShapeMismatch, "class weights have " + std::to_string(weights->size()) + " entries, batch has " +
                                                  std::to_string(L) + " labels");
    const double inv = 1.0 / static_cast<double>(B * L);
    LossValue out;
    out.grad.resize(B, L);
    double total = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index j = 0; j < L; ++j) {
            const double z = logits(i, j), y = targets(i, j);
            const double wp = weights ? weights->w_pos[static_cast<std::size_t>(j)] : 1.0;
            const double wn = weights ? weights->w_neg[static_cast<std::size_t>(j)] : 1.0;
            // -log sigma(z) = softplus(-z), -log(1 - sigma(z)) = softplus(z)
            total += wp * y * softplus(-z) + wn * (1.0 - y) * softplus(z);
            out.grad(i, j) = inv * (-wp * y * sigmoid(-z) + wn * (1.0 - y) * sigmoid(z));
        }
    }
    out.loss = total * inv;
    return out;
}

LossValue logit_shift_bce(const Matrix& logits, const Matrix& targets, std::span<const double> ratios) {
    check_inputs(logits, targets);
    if (static_cast<Eigen::Index>(ratios.size()) != logits.cols())
        throw Error(ErrorCode::ShapeMismatch, "ratio vector length differs from label count");
    Matrix shifted = logits;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const double r = ratios[static_cast<std::size_t>(j)];
        if (!(r > 0.0 && r < 1.0))
            throw Error(ErrorCode::DegenerateRatio, "attribute " + std::to_string(j) + " has positive ratio " + std::to_string(r));
        shifted.col(j).array() += std::log((1.0 - r) / r);
    }
    // the shift is additive, so d/dz equals d/dz'
    return bce_with_logits(shifted, targets, nullptr);
}

LossValue compute_loss(const LossConfig& config, const Matrix& logits, const Matrix& targets) {
    config.validate(static_cast<std::size_t>(logits.cols()));
    switch (config.kind) {
    case LossKind::plain_bce: return bce_with_logits(logits, targets, nullptr);
    case LossKind::scaled_bce_weighted: return bce_with_logits(logits, targets, &*config.weights);
    case LossKind::scaled_bce_logit_shift: return logit_shift_bce(logits, targets, config.weights->source_ratios);
    }
    throw Error(ErrorCode::InvalidArgument, "unhandled loss kind");
}

} // namespace par
