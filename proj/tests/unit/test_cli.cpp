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

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "par/dataset.hpp"
#include "par/training.hpp"
#include "synthetic.hpp"

using namespace par;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int exit_code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(PAR_CLI) + " --log-level warn " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::vector<json> json_lines(const std::string& text) {
    std::vector<json> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

} // namespace

TEST(Cli, AugmentTrainEvaluateReportPredict) {
    synth::TempDir dir("cli");
    const auto toy = synth::make_toy_dataset(40, 16, 21);
    const auto manifest = synth::write_toy_manifest(toy, dir / "data");
    const std::string d = dir.path().string();

    auto aug = run("augment --manifest " + manifest.string() + " --out " + d + "/aug --replicas 2 --seed 3");
    ASSERT_EQ(aug.exit_code, 0);
    ManifestOptions opts;
    opts.schema = toy.schema;
    const auto augmented = load_manifest(dir / "aug" / "manifest.csv", opts);
    EXPECT_EQ(augmented.size(), 120u);

    auto train = run("train --manifest " + d + "/aug/manifest.csv --backbone tiny_cnn --loss scaled_bce --epochs 2 "
                     "--lr 3e-3 --batch-size 16 --policy max_val_mA --seed 4 --out " + d + "/run");
    ASSERT_EQ(train.exit_code, 0) << train.out;
    EXPECT_NE(train.out.find("mA Val"), std::string::npos);
    const auto report = load_run_report(dir / "run" / "run_report.json");
    EXPECT_EQ(report.history.size(), 2u);
    // Validation holds source images only.
    const auto split = json::parse(std::ifstream(dir / "run" / "split.json"));
    EXPECT_EQ(split.at("val").size(), 8u);

    auto eval = run("evaluate --model " + d + "/run/best_model --manifest " + manifest.string());
    ASSERT_EQ(eval.exit_code, 0);
    const auto ej = json::parse(eval.out);
    EXPECT_EQ(ej.at("samples"), 40);
    EXPECT_GE(ej.at("mA").get<double>(), 0.0);

    auto rep = run("report --runs " + d + "/run " + d + "/run --format csv");
    ASSERT_EQ(rep.exit_code, 0);
    EXPECT_EQ(std::count(rep.out.begin(), rep.out.end(), '\n'), 3);

    auto plot = run("plot --run " + d + "/run --out " + d + "/curves");
    ASSERT_EQ(plot.exit_code, 0);
    EXPECT_TRUE(fs::exists(dir / "curves.png"));
    EXPECT_EQ(read_loss_curves(dir / "curves.csv").size(), 2u);

    auto single = run("predict --model " + d + "/run/best_model --image " + d + "/data/images/img00000.png --threshold 0.4");
    ASSERT_EQ(single.exit_code, 0);
    const auto recs = json_lines(single.out);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].at("predictions").size(), 5u);
    EXPECT_EQ(recs[0].at("threshold_used"), 0.4);

    fs::create_directories(dir / "batch");
    fs::copy_file(dir / "data/images/img00001.png", dir / "batch/a.png");
    fs::copy_file(dir / "data/images/img00002.png", dir / "batch/b.png");
    std::ofstream(dir / "batch/c.png") << "broken";
    auto batch = run("predict --model " + d + "/run/best_model --image " + d + "/batch");
    EXPECT_EQ(batch.exit_code, 2);
    const auto lines = json_lines(batch.out);
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_TRUE(lines[0].contains("predictions"));
    EXPECT_TRUE(lines[1].contains("predictions"));
    EXPECT_EQ(lines[2].at("error"), "DecodeError");

    EXPECT_EQ(run("train --manifest " + d + "/nope.csv --out " + d + "/x").exit_code, 1);
}

TEST(Cli, ConfigFileTraining) {
    synth::TempDir dir("cli_cfg");
    const auto toy = synth::make_toy_dataset(30, 16, 5);
    const auto manifest = synth::write_toy_manifest(toy, dir / "data");
    json cfg{{"epochs", 1},
             {"learning_rate", 1e-3},
             {"batch_size", 8},
             {"loss", {{"kind", "bce"}}},
             {"checkpoint_policy", "min_val_loss"},
             {"model_tag", "from_config"},
             {"backbone", {{"name", "tiny_cnn"}, {"feature_dim", 8}, {"input_size", {16, 16}}}}};
    std::ofstream(dir / "cfg.json") << cfg.dump();
    auto r = run("train --manifest " + manifest.string() + " --config " + (dir / "cfg.json").string() + " --out " +
                 (dir / "run").string());
    ASSERT_EQ(r.exit_code, 0);
    const auto report = load_run_report(dir / "run" / "run_report.json");
    EXPECT_EQ(report.config.model_tag, "from_config");
    EXPECT_EQ(report.config.loss.kind, LossKind::plain_bce);
    EXPECT_EQ(report.history.size(), 1u);
}
