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

#include "par/metrics.hpp"

#include <cerrno>
#include <fstream>

#include <nlohmann/json.hpp>

#include "par/error.hpp"

namespace par {

ConfusionCounts confusion_counts(const Matrix& predictions, const Matrix& targets) {
    if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
        throw Error(ErrorCode::ShapeMismatch, "predictions and targets differ in shape");
    if (predictions.rows() < 1) throw Error(ErrorCode::ShapeMismatch, "need at least one sample");
    const auto B = predictions.rows();
    const auto L = static_cast<std::size_t>(predictions.cols());
    ConfusionCounts c;
    c.samples = static_cast<std::size_t>(B);
    c.tp.assign(L, 0);
    c.fp.assign(L, 0);
    c.tn.assign(L, 0);
    c.fn.assign(L, 0);
    for (Eigen::Index i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            const double p = predictions(i, static_cast<Eigen::Index>(j));
            const double y = targets(i, static_cast<Eigen::Index>(j));
            if ((p != 0.0 && p != 1.0) || (y != 0.0 && y != 1.0))
                throw Error(ErrorCode::NonBinaryTarget, "confusion counts need binary inputs");
            if (y == 1.0) (p == 1.0 ? c.tp : c.fn)[j]++;
            else (p == 1.0 ? c.fp : c.tn)[j]++;
        }
    }
    return c;
}

std::vector<double> MetricReport::per_label_accuracy() const {
    std::vector<double> out(per_label_pos_recall.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = 0.5 * (per_label_pos_recall[j] + per_label_neg_recall[j]);
    return out;
}

MetricReport mean_accuracy_from_counts(const ConfusionCounts& counts, double threshold) {
    MetricReport r;
    r.threshold = threshold;
    r.counts = counts;
    const auto L = counts.num_labels();
    double sum = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
        const auto P = counts.tp[j] + counts.fn[j];
        const auto N = counts.tn[j] + counts.fp[j];
        const double pos = P ? static_cast<double>(counts.tp[j]) / static_cast<double>(P) : 1.0;
        const double neg = N ? static_cast<double>(counts.tn[j]) / static_cast<double>(N) : 1.0;
        r.per_label_pos_recall.push_back(pos);
        r.per_label_neg_recall.push_back(neg);
        sum += 0.5 * (pos + neg);
    }
    r.mA = L ? sum / static_cast<double>(L) : 0.0;
    return r;
}

MetricReport mean_accuracy(const Matrix& probabilities, const Matrix& targets, double threshold) {
    if (probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols())
        throw Error(ErrorCode::ShapeMismatch, "probabilities and targets differ in shape");
    Matrix predictions(probabilities.rows(), probabilities.cols());
    for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
        const double p = probabilities.data()[i];
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "probability outside [0,1]");
        predictions.data()[i] = p >= threshold ? 1.0 : 0.0;
    }
    return mean_accuracy_from_counts(confusion_counts(predictions, targets), threshold);
}

void append_metric_record(const std::filesystem::path& path, const MetricRecord& record) {
    nlohmann::json j{{"epoch", record.epoch}, {"split", record.split}, {"loss", record.loss}};
    j["mA"] = record.mA ? nlohmann::json(*record.mA) : nlohmann::json(nullptr);
    j["per_label"] = record.per_label;
    if (record.learning_rate) j["learning_rate"] = *record.learning_rate;
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error(ErrorCode::IoError, "cannot open metric log " + path.string());
    out << j.dump() << '\n';
    out.flush();
    if (!out) throw Error(errno == ENOSPC ? ErrorCode::DiskFull : ErrorCode::IoError, "write to " + path.string());
}

std::vector<MetricRecord> read_metric_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open metric log " + path.string());
    std::vector<MetricRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            MetricRecord r;
            r.epoch = j.at("epoch").get<int>();
            r.split = j.at("split").get<std::string>();
            r.loss = j.at("loss").get<double>();
            if (j.contains("mA") && !j["mA"].is_null()) r.mA = j["mA"].get<double>();
            if (j.contains("per_label")) r.per_label = j["per_label"].get<std::vector<double>>();
            if (j.contains("learning_rate")) r.learning_rate = j["learning_rate"].get<double>();
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedManifest, "metric log " + path.string() + ": " + e.what());
        }
    }
    return out;
}

} // namespace par
