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

#include <vector>

#include <nlohmann/json.hpp>

#include "par/nn/layers.hpp"

namespace par {

struct AdamConfig {
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<nn::Parameter*> params, AdamConfig config);

    /// One update from the accumulated gradients. Does not clear them.
    void step();
    void set_learning_rate(double lr) noexcept { config_.learning_rate = lr; }
    [[nodiscard]] double learning_rate() const noexcept { return config_.learning_rate; }
    [[nodiscard]] long steps() const noexcept { return t_; }

private:
    std::vector<nn::Parameter*> params_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    AdamConfig config_;
    long t_ = 0;
};

enum class SchedulerKind { none, step_decay };

struct SchedulerSpec {
    SchedulerKind kind = SchedulerKind::none;
    int step_every = 1;
    double gamma = 1.0;

    void validate() const;
    /// Learning rate for a 1-based epoch: base * gamma^floor((epoch - 1) / step_every).
    [[nodiscard]] double learning_rate(double base, int epoch) const;
    [[nodiscard]] nlohmann::json to_json() const;
    static SchedulerSpec from_json(const nlohmann::json& j);
};

} // namespace par
