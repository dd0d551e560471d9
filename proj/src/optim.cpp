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

#include "par/optim.hpp"

#include <cmath>

#include "par/error.hpp"

namespace par {

Adam::Adam(std::vector<nn::Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0 && config_.beta2 >= 0.0 && config_.beta2 < 1.0))
        throw Error(ErrorCode::InvalidArgument, "Adam betas must lie in [0, 1)");
    for (auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.0f);
        v_.emplace_back(p->value.size(), 0.0f);
    }
}

void Adam::step() {
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double step = config_.learning_rate / c1;
    const double root_c2 = std::sqrt(c2);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        float* w = params_[k]->value.data();
        const float* g = params_[k]->grad.data();
        float* m = m_[k].data();
        float* v = v_[k].data();
        const std::size_t n = params_[k]->value.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = g[i];
            const double mi = b1 * m[i] + (1.0 - b1) * gi;
            const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            w[i] = static_cast<float>(w[i] - step * mi / (std::sqrt(vi) / root_c2 + config_.eps));
        }
    }
}

void SchedulerSpec::validate() const {
    if (kind == SchedulerKind::none) return;
    if (step_every < 1) throw Error(ErrorCode::InvalidArgument, "step_every must be >= 1");
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
}

double SchedulerSpec::learning_rate(double base, int epoch) const {
    if (kind == SchedulerKind::none) return base;
    return base * std::pow(gamma, (epoch - 1) / step_every);
}

nlohmann::json SchedulerSpec::to_json() const {
    return {{"kind", kind == SchedulerKind::none ? "none" : "step_decay"}, {"step_every", step_every}, {"gamma", gamma}};
}

SchedulerSpec SchedulerSpec::from_json(const nlohmann::json& j) {
    SchedulerSpec s;
    const auto kind = j.value("kind", std::string("none"));
    if (kind == "none") s.kind = SchedulerKind::none;
    else if (kind == "step_decay") s.kind = SchedulerKind::step_decay;
    else throw Error(ErrorCode::InvalidArgument, "unknown scheduler '" + kind + "'");
    s.step_every = j.value("step_every", 1);
    s.gamma = j.value("gamma", 1.0);
    s.validate();
    return s;
}

} // namespace par
