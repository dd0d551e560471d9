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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "par/artifact.hpp"
#include "par/augmentation.hpp"
#include "par/dataset.hpp"
#include "par/error.hpp"
#include "par/inference.hpp"
#include "par/loss.hpp"
#include "par/metrics.hpp"
#include "par/random.hpp"
#include "par/server.hpp"
#include "par/training.hpp"
#include "par/data_source.hpp"
#include "par/model.hpp"
#include "synthetic.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

using namespace par;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

template <typename... Args>
std::string format(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

// Shared between criteria 5, 7 and 8.
struct ToyRun {
    synth::TempDir dir{"acceptance"};
    std::optional<RunReport> report;
    AttributeSchema schema;
};
ToyRun toy;

DatasetManifest synthetic_manifest(std::size_t n, std::uint64_t seed) {
    DatasetManifest m;
    m.schema = reference_schema();
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        LabeledSample s;
        s.sample_id = format("img%04zu", i);
        s.image_path = s.sample_id + ".png";
        for (std::size_t j = 0; j < m.schema.size(); ++j) s.labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
        m.samples.push_back(std::move(s));
    }
    return m;
}

std::string criterion1() {
    const auto m = synthetic_manifest(600, 1);
    const auto a = split_dataset(m, 0.2, 42);
    const auto b = split_dataset(m, 0.2, 42);
    const auto c = split_dataset(m, 0.2, 43);
    require(a.train.size() == 480 && a.val.size() == 120,
            format("split sizes %zu/%zu", a.train.size(), a.val.size()));
    std::set<std::string> seen(a.train.begin(), a.train.end());
    for (const auto& id : a.val) require(seen.insert(id).second, "sample in both splits: " + id);
    require(seen.size() == 600, "split does not cover the manifest");
    require(a == b, "same seed gave a different split");
    require(a.val != c.val, "different seeds gave the same split");
    return "600 -> 480/120, disjoint, seed-deterministic";
}

std::string criterion2() {
    const std::size_t n = 600;
    std::vector<Image> images;
    std::vector<LabeledSample> samples;
    for (std::size_t i = 0; i < n; ++i) {
        images.push_back(synth::random_image(32, 32, i));
        samples.push_back({format("src%03zu", i), "", {static_cast<std::uint8_t>(i % 2), 1}, "", 0});
    }
    const ImageLoader loader = [&](const LabeledSample& s) { return images[std::stoul(s.sample_id.substr(3))]; };
    AugmentationConfig cfg;
    cfg.seed = 2024;
    const auto first = augment_dataset(samples, cfg, loader);
    const auto second = augment_dataset(samples, cfg, loader);
    require(first.size() == 7200, format("%zu augmented outputs", first.size()));
    for (std::size_t i = 0; i < first.size(); ++i) {
        require(first[i].pixels.data == second[i].pixels.data && first[i].params == second[i].params,
                format("replica %zu differs between runs", i));
        require(first[i].labels == samples[i / 12].labels, "replica labels differ from parent");
    }
    for (int k = 0; k < 10000; ++k) {
        const auto p = sample_affine(cfg, format("p%d", k % 600), 1 + k / 600, 32, 32);
        require(p.within(cfg, 32, 32),
                format("draw %d out of range", k));
    }
    return "7200 replicas, 10000 draws in range, rerun byte-identical";
}

Matrix random_matrix(Rng& rng, int r, int c, double scale) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
    return m;
}

Matrix random_targets(Rng& rng, int r, int c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(0.35) ? 1.0 : 0.0;
    return m;
}

std::string criterion3() {
    Rng rng(3);
    double worst_reduction = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const int B = 1 + static_cast<int>(rng.below(16)), L = 1 + static_cast<int>(rng.below(10));
        const auto z = random_matrix(rng, B, L, 4.0);
        const auto y = random_targets(rng, B, L);
        const auto cfg = make_loss_config(LossKind::scaled_bce_weighted, std::vector<double>(static_cast<std::size_t>(L), 0.5));
        const double diff = std::abs(compute_loss(cfg, z, y).loss - bce_with_logits(z, y).loss);
        worst_reduction = std::max(worst_reduction, diff);
    }
    require(worst_reduction <= 1e-9, format("weighted vs plain differs by %.3g", worst_reduction));

    double worst_grad = 0.0;
    const double h = 1e-4;
    for (int t = 0; t < 100; ++t) {
        const auto z = random_matrix(rng, 4, 6, 3.0);
        const auto y = random_targets(rng, 4, 6);
        std::vector<double> r(6);
        for (auto& v : r) v = rng.uniform(0.05, 0.95);
        for (const auto& cfg : {LossConfig{}, make_loss_config(LossKind::scaled_bce_weighted, r),
                                make_loss_config(LossKind::scaled_bce_logit_shift, r)}) {
            const auto g = compute_loss(cfg, z, y).grad;
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                Matrix zp = z, zm = z;
                zp.data()[i] += h;
                zm.data()[i] -= h;
                const double fd = (compute_loss(cfg, zp, y).loss - compute_loss(cfg, zm, y).loss) / (2 * h);
                worst_grad = std::max(worst_grad, std::abs(fd - g.data()[i]));
            }
        }
    }
    require(worst_grad <= 1e-5, format("gradient error %.3g", worst_grad));
    return format("reduction error %.2g, worst gradient error %.2g", worst_reduction, worst_grad);
}

double brute_force_mA(const Matrix& p, const Matrix& y) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        long tp = 0, fn = 0, tn = 0, fp = 0;
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const bool pred = p(i, j) >= 0.5, truth = y(i, j) > 0.5;
            tp += truth && pred;
            fn += truth && !pred;
            tn += !truth && !pred;
            fp += !truth && pred;
        }
        const double pos = tp + fn ? static_cast<double>(tp) / (tp + fn) : 1.0;
        const double neg = tn + fp ? static_cast<double>(tn) / (tn + fp) : 1.0;
        sum += (pos + neg) / 2.0;
    }
    return sum / static_cast<double>(p.cols());
}

std::string criterion4() {
    Rng rng(4);
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
        Matrix p(200, 8);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform01();
        const auto y = random_targets(rng, 200, 8);
        worst = std::max(worst, std::abs(mean_accuracy(p, y).mA - brute_force_mA(p, y)));
        require(mean_accuracy(y, y).mA == 1.0, "perfect predictions did not give exactly 1.0");
    }
    require(worst <= 1e-9, format("mA differs from brute force by %.3g", worst));
    return format("500 pairs, worst difference %.2g, perfect = 1.0", worst);
}

std::string criterion5() {
    const auto data = synth::make_toy_dataset(1000, 16, 5);
    toy.schema = data.schema;
    DatasetManifest m;
    m.schema = data.schema;
    for (std::size_t i = 0; i < data.images.size(); ++i) m.samples.push_back({std::to_string(i), "", data.labels[i], "", 0});
    const auto split = split_dataset(m, 0.2, 5);
    BackboneSpec spec;
    spec.name = BackboneKind::tiny_cnn;
    spec.input_height = spec.input_width = 16;
    const auto prep = PreprocessSpec::for_backbone(spec);
    auto source = [&](const std::vector<std::string>& ids) {
        std::vector<Tensor> images;
        std::vector<std::vector<std::uint8_t>> labels;
        for (const auto& id : ids) {
            images.push_back(preprocess(data.images[std::stoul(id)], prep));
            labels.push_back(data.labels[std::stoul(id)]);
        }
        return InMemorySource(std::move(images), std::move(labels));
    };
    const auto train = source(split.train), val = source(split.val);

    TrainRunConfig cfg;
    cfg.epochs = 15;
    cfg.batch_size = 32;
    cfg.optimizer.learning_rate = 3e-3;
    cfg.loss.kind = LossKind::scaled_bce_weighted;
    cfg.seed = 11;
    cfg.model_tag = "tiny_cnn";
    cfg.out_dir = toy.dir / "toy_run";
    ClassifierHeadSpec head;
    head.num_attributes = 5;
    head.dropout_p = 0.1f;
    auto model = build_model(spec, head, cfg.seed);
    const auto report = train_and_evaluate(cfg, train, val, model, data.schema);
    toy.report = report;

    require(report.history.size() == 15, format("history has %zu entries", report.history.size()));
    const double first = report.history.front().train_loss, last = report.history.back().train_loss;
    require(last < 0.1 * first, format("train loss %.4f -> %.4f (ratio %.3f)", first, last, last / first));
    require(report.best().val_mA >= 0.95, format("best val mA %.4f", report.best().val_mA));

    const auto art = load_artifact(cfg.out_dir / "best_model");
    const auto again = evaluate(art.model, val, *art.loss, cfg.threshold, cfg.batch_size);
    const double dl = std::abs(again.loss - report.best().val_loss), dm = std::abs(again.metrics.mA - report.best().val_mA);
    require(dl <= 1e-6 && dm <= 1e-6, format("reloaded checkpoint drifts: loss %.3g, mA %.3g", dl, dm));
    return format("train loss %.4f -> %.4f, best val mA %.4f at epoch %d", first, last, report.best().val_mA,
               report.best_epoch);
}

std::string criterion6() {
    Rng rng(6);
    for (int t = 0; t < 1000; ++t) {
        std::vector<EpochMetrics> h;
        const int n = 1 + static_cast<int>(rng.below(40));
        for (int e = 1; e <= n; ++e) {
            EpochMetrics m;
            m.epoch = e;
            m.val_loss = static_cast<double>(rng.below(10)) / 10.0;
            m.val_mA = static_cast<double>(rng.below(10)) / 10.0;
            h.push_back(m);
        }
        int lo = 0, hi = 0;
        for (int i = 0; i < n; ++i) {
            if (h[static_cast<std::size_t>(i)].val_loss < h[static_cast<std::size_t>(lo)].val_loss) lo = i;
            if (h[static_cast<std::size_t>(i)].val_mA > h[static_cast<std::size_t>(hi)].val_mA) hi = i;
        }
        require(select_checkpoint(h, CheckpointPolicy::min_val_loss) == lo + 1, format("history %d min_val_loss", t));
        require(select_checkpoint(h, CheckpointPolicy::max_val_mA) == hi + 1, format("history %d max_val_mA", t));
    }
    return "1000 random histories agree with the linear scan";
}

std::vector<std::string> csv_cells(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted && c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
            cur += '"';
            ++i;
        } else if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string criterion7() {
    require(toy.report.has_value(), "needs the toy run from criterion 5");
    std::vector<RunReport> reports{*toy.report, *toy.report, *toy.report};
    reports[1].config.model_tag = "tiny_cnn, copy";
    reports[1].total_seconds *= 3.0;
    reports[2].config.model_tag = "tiny_cnn \"third\"";
    reports[2].device_tag = "cpu-avx2";
    reports[2].best_epoch = 1;

    const auto md = export_comparison(reports, TableFormat::markdown);
    for (const char* col : {"mA Val", "Train_Loss", "Val_Loss", "Epoch", "Computation Time", "Device Type"})
        require(md.find(col) != std::string::npos, std::string("markdown lacks column ") + col);

    std::istringstream csv(export_comparison(reports, TableFormat::csv));
    std::string line;
    std::getline(csv, line);
    require(csv_cells(line) == comparison_columns(), "CSV header differs");
    for (const auto& r : reports) {
        require(static_cast<bool>(std::getline(csv, line)), "CSV has too few rows");
        const auto c = csv_cells(line);
        require(c.size() == 8, "CSV row has " + std::to_string(c.size()) + " cells");
        require(c[0] == r.config.model_tag && std::stod(c[1]) == r.best().val_mA &&
                    std::stod(c[2]) == r.history.back().train_loss && std::stod(c[3]) == r.history.back().val_loss &&
                    std::stoul(c[4]) == r.history.size() && std::stoi(c[5]) == r.best_epoch &&
                    std::stod(c[6]) == r.total_seconds && c[7] == r.device_tag,
                "CSV row does not round-trip: " + line);
    }
    require(!std::getline(csv, line), "CSV has extra rows");
    return "three rows, all comparison columns, CSV round-trips exactly";
}

std::string criterion8() {
    require(toy.report.has_value(), "needs the toy artifact from criterion 5");
    ServiceConfig cfg;
    cfg.host = "127.0.0.1";
    cfg.port = 0;
    cfg.model_dir = toy.report->artifact_path;
    cfg.worker_threads = 8;
    InferenceServer server(cfg);
    server.start();
    const int port = server.port();

    const auto png = encode_png(synth::random_image(48, 24, 8));
    const std::string bytes(png.begin(), png.end());
    auto post = [&](const std::string& query) {
        httplib::Client cli("127.0.0.1", port);
        cli.set_read_timeout(30);
        auto res = cli.Post("/predict" + query, httplib::MultipartFormDataItems{{"image", bytes, "f.png", "image/png"}});
        if (!res) throw Failure("POST /predict" + query + ": " + httplib::to_string(res.error()));
        if (res->status != 200) throw Failure(format("POST /predict%s: HTTP %d %s", query.c_str(), res->status, res->body.c_str()));
        return json::parse(res->body);
    };

    const auto serial = post("");
    const auto preds = serial.at("predictions");
    require(preds.size() == toy.schema.size(), "prediction count differs from L");
    for (std::size_t j = 0; j < preds.size(); ++j) {
        require(preds[j].at("attribute") == toy.schema.attribute(j), "predictions not in schema order");
        const double p = preds[j].at("probability");
        require(p >= 0.0 && p <= 1.0, "probability outside [0, 1]");
    }
    const auto low = post("?threshold=0.05"), high = post("?threshold=0.95");
    for (std::size_t j = 0; j < preds.size(); ++j) {
        const double p = preds[j].at("probability");
        require(low["predictions"][j]["probability"] == p && high["predictions"][j]["probability"] == p,
                "threshold changed a probability");
        require(low["predictions"][j]["flagged"] == (p >= 0.05) && high["predictions"][j]["flagged"] == (p >= 0.95),
                "flags inconsistent with threshold");
    }

    std::vector<std::future<json>> futures;
    for (int i = 0; i < 50; ++i) futures.push_back(std::async(std::launch::async, post, std::string()));
    for (auto& f : futures) {
        const auto r = f.get();
        for (std::size_t j = 0; j < preds.size(); ++j)
            require(r["predictions"][j]["probability"].get<double>() == preds[j]["probability"].get<double>(),
                    "concurrent answer differs from the serial one");
    }
    server.stop();
    return "L probabilities in schema order; 50 concurrent requests bitwise equal";
}

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<std::string()> run;
};

} // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<Criterion> criteria{
        {1, "split arithmetic", 1.0, criterion1},
        {2, "augmentation volume and bounds", 120.0, criterion2},
        {3, "loss oracles", 60.0, criterion3},
        {4, "mA oracle", 30.0, criterion4},
        {5, "toy end-to-end training", 300.0, criterion5},
        {6, "checkpoint policy", 5.0, criterion6},
        {7, "report format", 60.0, criterion7},
        {8, "service round-trip", 60.0, criterion8},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = c.run();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && secs > c.budget_seconds) {
            ok = false;
            detail = format("took %.2fs, budget %.0fs", secs, c.budget_seconds);
        }
        failed += !ok;
        std::printf("%s criterion %d (%s): %s [%.2fs]\n", ok ? "PASS" : "FAIL", c.id, c.title, detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
