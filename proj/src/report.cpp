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

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "par/error.hpp"
#include "par/training.hpp"

namespace par {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_file(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(errno == ENOSPC ? ErrorCode::DiskFull : ErrorCode::IoError, "short write to " + path.string());
}

json metrics_to_json(const EpochMetrics& m) {
    return {{"epoch", m.epoch},           {"train_loss", m.train_loss}, {"val_loss", m.val_loss},
            {"val_mA", m.val_mA},         {"wall_seconds", m.wall_seconds}, {"learning_rate", m.learning_rate}};
}

EpochMetrics metrics_from_json(const json& j) {
    EpochMetrics m;
    m.epoch = j.at("epoch").get<int>();
    m.train_loss = j.at("train_loss").get<double>();
    m.val_loss = j.at("val_loss").get<double>();
    m.val_mA = j.at("val_mA").get<double>();
    m.wall_seconds = j.value("wall_seconds", 0.0);
    m.learning_rate = j.value("learning_rate", 0.0);
    return m;
}

} // namespace

json RunReport::to_json() const {
    json h = json::array();
    for (const auto& m : history) h.push_back(metrics_to_json(m));
    return {{"config", config.to_json()},     {"history", h},
            {"best_epoch", best_epoch},       {"total_seconds", total_seconds},
            {"device_tag", device_tag},       {"artifact_path", artifact_path}};
}

RunReport RunReport::from_json(const json& j) {
    RunReport r;
    try {
        r.config = TrainRunConfig::from_json(j.at("config"));
        for (const auto& m : j.at("history")) r.history.push_back(metrics_from_json(m));
        r.best_epoch = j.at("best_epoch").get<int>();
        r.total_seconds = j.at("total_seconds").get<double>();
        r.device_tag = j.value("device_tag", r.config.device_tag);
        r.artifact_path = j.value("artifact_path", std::string());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("run report: ") + e.what());
    }
    if (r.history.empty() || r.best_epoch < 1 || r.best_epoch > static_cast<int>(r.history.size()))
        throw Error(ErrorCode::InvalidArgument, "run report has an inconsistent history");
    return r;
}

void save_run_report(const RunReport& report, const fs::path& path) {
    write_file(path, report.to_json().dump(2) + "\n");
}

RunReport load_run_report(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return RunReport::from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

const std::vector<std::string>& comparison_columns() {
    static const std::vector<std::string> cols{"Model",  "mA Val",     "Train_Loss", "Val_Loss", "Epoch",
                                               "Best_Epoch", "Computation Time (seconds)", "Device Type"};
    return cols;
}

std::string export_comparison(std::span<const RunReport> reports, TableFormat format) {
    if (reports.empty()) throw Error(ErrorCode::InvalidArgument, "no reports to compare");
    const auto& cols = comparison_columns();
    std::ostringstream out;
    auto tag = [](const RunReport& r, std::size_t i) {
        return r.config.model_tag.empty() ? "run" + std::to_string(i + 1) : r.config.model_tag;
    };
    if (format == TableFormat::csv) {
        for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << csv_field(cols[c]);
        out << "\n";
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const auto& r = reports[i];
            out << csv_field(tag(r, i)) << ',' << num(r.best().val_mA) << ',' << num(r.history.back().train_loss) << ','
                << num(r.history.back().val_loss) << ',' << r.history.size() << ',' << r.best_epoch << ','
                << num(r.total_seconds) << ',' << csv_field(r.device_tag) << "\n";
        }
        return out.str();
    }
    out << "|";
    for (const auto& c : cols) out << ' ' << c << " |";
    out << "\n|";
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c == 0 || c == cols.size() - 1 ? " --- |" : " ---: |");
    out << "\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        out << "| " << tag(r, i) << " | " << fixed(r.best().val_mA, 4) << " | " << fixed(r.history.back().train_loss, 4)
            << " | " << fixed(r.history.back().val_loss, 4) << " | " << r.history.size() << " | " << r.best_epoch
            << " | " << fixed(r.total_seconds, 2) << " | " << r.device_tag << " |\n";
    }
    return out.str();
}

namespace {

cv::Mat render_chart(std::span<const EpochMetrics> history) {
    const int W = 800, H = 500, left = 80, right = 30, top = 40, bottom = 60;
    cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& m : history) {
        lo = std::min({lo, m.train_loss, m.val_loss});
        hi = std::max({hi, m.train_loss, m.val_loss});
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo = std::max(0.0, lo - pad);
    hi += pad;
    const int n = static_cast<int>(history.size());
    auto px = [&](int epoch) {
        const double t = n == 1 ? 0.5 : static_cast<double>(epoch - history.front().epoch) / (n - 1);
        return left + static_cast<int>(std::lround(t * (W - left - right)));
    };
    auto py = [&](double v) { return top + static_cast<int>(std::lround((hi - v) / (hi - lo) * (H - top - bottom))); };

    const cv::Scalar axis(60, 60, 60), grid(225, 225, 225);
    for (int k = 0; k <= 5; ++k) {
        const double v = lo + (hi - lo) * k / 5.0;
        const int y = py(v);
        cv::line(img, {left, y}, {W - right, y}, grid, 1);
        cv::putText(img, fixed(v, 3), {8, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1, cv::LINE_AA);
    }
    const int step = std::max(1, n / 10);
    for (int i = 0; i < n; i += step) {
        const int x = px(history[static_cast<std::size_t>(i)].epoch);
        cv::line(img, {x, H - bottom}, {x, H - bottom + 5}, axis, 1);
        cv::putText(img, std::to_string(history[static_cast<std::size_t>(i)].epoch), {x - 6, H - bottom + 20},
                    cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1, cv::LINE_AA);
    }
    cv::line(img, {left, top}, {left, H - bottom}, axis, 1);
    cv::line(img, {left, H - bottom}, {W - right, H - bottom}, axis, 1);
    cv::putText(img, "epoch", {W / 2 - 20, H - 15}, cv::FONT_HERSHEY_SIMPLEX, 0.5, axis, 1, cv::LINE_AA);
    cv::putText(img, "Train & validation loss", {left, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.6, axis, 1, cv::LINE_AA);

    auto series = [&](double EpochMetrics::*field, const cv::Scalar& colour, const std::string& label, int row) {
        std::vector<cv::Point> pts;
        for (const auto& m : history) pts.emplace_back(px(m.epoch), py(m.*field));
        if (pts.size() > 1) cv::polylines(img, pts, false, colour, 2, cv::LINE_AA);
        for (const auto& p : pts) cv::circle(img, p, 3, colour, cv::FILLED, cv::LINE_AA);
        const int ly = top + 10 + row * 20;
        cv::line(img, {W - right - 140, ly}, {W - right - 110, ly}, colour, 2);
        cv::putText(img, label, {W - right - 100, ly + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.45, axis, 1, cv::LINE_AA);
    };
    // OpenCV colours are BGR.
    series(&EpochMetrics::train_loss, cv::Scalar(180, 119, 31), "train", 0);
    series(&EpochMetrics::val_loss, cv::Scalar(14, 127, 255), "validation", 1);
    return img;
}

} // namespace

LossCurveFiles emit_loss_curves(std::span<const EpochMetrics> history, const fs::path& out_stem) {
    if (history.empty()) throw Error(ErrorCode::InvalidArgument, "empty history");
    LossCurveFiles files;
    files.csv = fs::path(out_stem).replace_extension(".csv");
    std::ostringstream csv;
    csv << "epoch,train_loss,val_loss,val_mA,learning_rate\n";
    for (const auto& m : history)
        csv << m.epoch << ',' << num(m.train_loss) << ',' << num(m.val_loss) << ',' << num(m.val_mA) << ','
            << num(m.learning_rate) << "\n";
    write_file(files.csv, csv.str());

    std::vector<uchar> png;
    if (cv::imencode(".png", render_chart(history), png)) {
        const auto chart = fs::path(out_stem).replace_extension(".png");
        write_file(chart, std::string(png.begin(), png.end()));
        files.chart = chart;
    }
    return files;
}

std::vector<EpochMetrics> read_loss_curves(const fs::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + csv_path.string());
    std::string line;
    std::getline(in, line);
    std::vector<EpochMetrics> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochMetrics m;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &m.epoch, &m.train_loss, &m.val_loss, &m.val_mA,
                        &m.learning_rate) < 3)
            throw Error(ErrorCode::InvalidArgument, "malformed loss-curve row: " + line);
        out.push_back(m);
    }
    return out;
}

} // namespace par
