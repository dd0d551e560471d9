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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "par/data_source.hpp"
#include "par/dataset.hpp"
#include "par/loss.hpp"
#include "par/metrics.hpp"
#include "par/model.hpp"
#include "par/optim.hpp"

namespace par {

enum class CheckpointPolicy { min_val_loss, max_val_mA };

std::string_view to_string(CheckpointPolicy policy) noexcept;
CheckpointPolicy parse_checkpoint_policy(std::string_view name);

struct TrainRunConfig {
    int epochs = 15;
    AdamConfig optimizer;
    int batch_size = 32;
    /// Class weights may be left empty; they are then taken from the training set.
    LossConfig loss;
    std::optional<SchedulerSpec> scheduler;
    CheckpointPolicy checkpoint_policy = CheckpointPolicy::min_val_loss;
    std::uint64_t seed = 0;
    std::string device_tag = "cpu";
    std::string model_tag;
    double threshold = 0.5;
    /// Where metrics.jsonl, best_model/, loss curves and run_report.json go. Empty keeps everything in memory.
    std::filesystem::path out_dir;

    /// Throws InvalidArgument.
    void validate() const;
    [[nodiscard]] double learning_rate_for(int epoch) const;
    [[nodiscard]] nlohmann::json to_json() const;
    static TrainRunConfig from_json(const nlohmann::json& j);
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_mA = 0.0;
    double wall_seconds = 0.0;
    double learning_rate = 0.0;
    bool operator==(const EpochMetrics&) const = default;
};

struct RunReport {
    TrainRunConfig config;
    std::vector<EpochMetrics> history;
    int best_epoch = 0;
    double total_seconds = 0.0;
    std::string device_tag;
    std::string artifact_path;

    [[nodiscard]] const EpochMetrics& best() const { return history.at(static_cast<std::size_t>(best_epoch - 1)); }
    [[nodiscard]] nlohmann::json to_json() const;
    static RunReport from_json(const nlohmann::json& j);
};

void save_run_report(const RunReport& report, const std::filesystem::path& path);
RunReport load_run_report(const std::filesystem::path& path);

struct EvalResult {
    double loss = 0.0;
    MetricReport metrics;
    Matrix probabilities;
};

/// Eval-mode pass over every sample, batched. Loss is the mean over all samples and labels.
EvalResult evaluate(const FeatClassifier& model, const SampleSource& data, const LossConfig& loss,
                    double threshold = 0.5, int batch_size = 32);

/// Runs exactly config.epochs epochs, validating after each one.
RunReport train_and_evaluate(const TrainRunConfig& config, const SampleSource& train_set, const SampleSource& val_set,
                             FeatClassifier& model, const AttributeSchema& schema);

/// 1-based epoch; ties go to the earliest epoch.
int select_checkpoint(std::span<const EpochMetrics> history, CheckpointPolicy policy);

enum class TableFormat { markdown, csv };

/// Columns: Model, mA Val, Train_Loss, Val_Loss, Epoch, Best_Epoch, Computation Time (seconds), Device Type.
std::string export_comparison(std::span<const RunReport> reports, TableFormat format);
const std::vector<std::string>& comparison_columns();

struct LossCurveFiles {
    std::filesystem::path csv;
    std::optional<std::filesystem::path> chart;
};

/// Writes `<stem>.csv` and a `<stem>.png` line chart of train and validation loss.
LossCurveFiles emit_loss_curves(std::span<const EpochMetrics> history, const std::filesystem::path& out_stem);
std::vector<EpochMetrics> read_loss_curves(const std::filesystem::path& csv_path);

} // namespace par
