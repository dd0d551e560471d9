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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "par/loss.hpp"

namespace par {

struct ConfusionCounts {
    std::vector<std::size_t> tp, fp, tn, fn;
    std::size_t samples = 0;

    [[nodiscard]] std::size_t num_labels() const noexcept { return tp.size(); }
};

/// `predictions` and `targets` are binary B x L matrices.
ConfusionCounts confusion_counts(const Matrix& predictions, const Matrix& targets);

/// Label-based mean accuracy. Recall of an absent class (0/0) counts as 1.
struct MetricReport {
    double mA = 0.0;
    std::vector<double> per_label_pos_recall;
    std::vector<double> per_label_neg_recall;
    double threshold = 0.5;
    ConfusionCounts counts;

    /// (pos_recall + neg_recall) / 2 per label.
    [[nodiscard]] std::vector<double> per_label_accuracy() const;
};

MetricReport mean_accuracy(const Matrix& probabilities, const Matrix& targets, double threshold = 0.5);
MetricReport mean_accuracy_from_counts(const ConfusionCounts& counts, double threshold = 0.5);

/// One line of the JSON-lines metric log.
struct MetricRecord {
    int epoch = 0;
    std::string split; // "train" or "val"
    double loss = 0.0;
    std::optional<double> mA;
    std::vector<double> per_label;
    std::optional<double> learning_rate;
};

/// Appends one record; creates the file when missing. Throws DiskFull / IoError.
void append_metric_record(const std::filesystem::path& path, const MetricRecord& record);
std::vector<MetricRecord> read_metric_log(const std::filesystem::path& path);

} // namespace par
