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

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "par/artifact.hpp"
#include "par/augmentation.hpp"
#include "par/data_source.hpp"
#include "par/dataset.hpp"
#include "par/error.hpp"
#include "par/inference.hpp"
#include "par/model.hpp"
#include "par/recipes.hpp"
#include "par/server.hpp"
#include "par/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw par::Error(par::ErrorCode::IoError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw par::Error(par::ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

par::DatasetManifest open_manifest(const fs::path& path, const std::string& schema_path) {
    par::ManifestOptions opts;
    if (!schema_path.empty()) {
        opts.schema = par::load_schema(schema_path);
    } else if (path.extension() == ".csv" && fs::exists(path.parent_path() / "schema.json")) {
        // CSV headers carry attribute names but not groups.
        opts.schema = par::load_schema(path.parent_path() / "schema.json");
    }
    return par::load_manifest(path, opts);
}

// Keeps only source images, dropping augmentation replicas.
par::DatasetManifest originals_only(par::DatasetManifest m) {
    std::erase_if(m.samples, [](const par::LabeledSample& s) { return s.replica_index != 0; });
    return m;
}

struct AugmentArgs {
    std::string manifest, schema, out;
    int replicas = 12;
    std::uint64_t seed = 0;
    int workers = 1;
};

int run_augment(const AugmentArgs& a) {
    const auto manifest = open_manifest(a.manifest, a.schema);
    par::AugmentationConfig cfg;
    cfg.replicas_per_image = a.replicas;
    cfg.seed = a.seed;
    const auto start = std::chrono::steady_clock::now();
    auto out = par::augment_manifest_to_disk(manifest, cfg, a.out, a.workers);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    par::save_manifest(out, fs::path(a.out) / "manifest.csv");
    par::save_schema(out.schema, fs::path(a.out) / "schema.json");
    spdlog::info("wrote {} samples ({} sources x {} replicas + originals) in {:.2f}s", out.samples.size(),
                 manifest.samples.size(), a.replicas, secs);
    std::cout << (fs::path(a.out) / "manifest.csv").string() << "\n";
    return 0;
}

struct TrainArgs {
    std::string manifest, val_manifest, schema, config, recipe, out;
    std::string backbone = "tiny_cnn", loss = "scaled_bce_weighted", policy = "min_val_loss";
    std::string pretrained, origin = "imagenet", scheduler = "none", device_tag, model_tag;
    int epochs = 15, batch_size = 32, feature_dim = 0, input_size = 0, hidden = 0, step_every = 5;
    double lr = 1e-4, dropout = 0.5, val_fraction = 0.2, gamma = 0.1;
    std::uint64_t seed = 0, split_seed = 0;
    bool strict = false, no_cache = false, val_replicas = false;
};

int run_train(const TrainArgs& a, const CLI::App& cmd) {
    auto given = [&](const char* name) { return cmd.count(name) > 0; };

    // Precedence: recipe, then config file, then explicit flags.
    par::BackboneSpec backbone;
    par::ClassifierHeadSpec head;
    par::TrainRunConfig cfg;
    const auto manifest = open_manifest(a.manifest, a.schema);
    const int L = static_cast<int>(manifest.schema.size());
    if (!a.recipe.empty()) {
        const auto r = par::make_recipe(a.recipe, L);
        backbone = r.backbone;
        head = r.head;
        cfg = r.train;
    } else {
        backbone.name = par::parse_backbone(a.backbone);
        if (backbone.name == par::BackboneKind::tiny_cnn) backbone.input_height = backbone.input_width = 16;
        cfg.optimizer.learning_rate = par::default_learning_rate(backbone.name);
        cfg.loss.kind = par::parse_loss_kind(a.loss);
    }
    if (!a.config.empty()) {
        const json j = read_json_file(a.config);
        cfg = par::TrainRunConfig::from_json(j);
        if (j.contains("backbone")) backbone = par::BackboneSpec::from_json(j["backbone"]);
        if (j.contains("head")) head = par::ClassifierHeadSpec::from_json(j["head"]);
    }
    head.num_attributes = L;
    if (given("--backbone")) backbone.name = par::parse_backbone(a.backbone);
    if (given("--feature-dim")) backbone.feature_dim = a.feature_dim;
    if (given("--input-size")) backbone.input_height = backbone.input_width = a.input_size;
    if (given("--pretrained"))
        backbone.pretrained = par::PretrainedWeightsRef{a.pretrained, par::parse_weights_origin(a.origin), a.strict};
    if (given("--dropout")) head.dropout_p = static_cast<float>(a.dropout);
    if (given("--hidden")) head.hidden = a.hidden;
    if (given("--loss")) cfg.loss = par::LossConfig{par::parse_loss_kind(a.loss), std::nullopt};
    if (given("--epochs")) cfg.epochs = a.epochs;
    if (given("--lr")) cfg.optimizer.learning_rate = a.lr;
    if (given("--batch-size")) cfg.batch_size = a.batch_size;
    if (given("--policy")) cfg.checkpoint_policy = par::parse_checkpoint_policy(a.policy);
    if (given("--seed")) cfg.seed = a.seed;
    if (given("--device-tag")) cfg.device_tag = a.device_tag;
    if (given("--model-tag")) cfg.model_tag = a.model_tag;
    if (given("--scheduler")) {
        if (a.scheduler == "none") cfg.scheduler.reset();
        else if (a.scheduler == "step_decay") cfg.scheduler = par::SchedulerSpec{par::SchedulerKind::step_decay, a.step_every, a.gamma};
        else throw par::Error(par::ErrorCode::InvalidArgument, "unknown scheduler '" + a.scheduler + "'");
    }
    if (cfg.model_tag.empty()) cfg.model_tag = std::string(par::to_string(backbone.name));
    cfg.out_dir = a.out;
    cfg.validate();

    par::DatasetManifest train_m, val_m;
    if (!a.val_manifest.empty()) {
        train_m = manifest;
        val_m = open_manifest(a.val_manifest, a.schema);
    } else {
        const auto split = par::split_dataset(manifest, a.val_fraction, a.split_seed);
        train_m = par::select_samples(manifest, split.train);
        val_m = par::select_samples(manifest, split.val);
        if (!a.val_replicas) val_m = originals_only(std::move(val_m));
        std::vector<std::string> val_ids;
        for (const auto& sample : val_m.samples) val_ids.push_back(sample.sample_id);
        json split_json{{"seed", split.seed}, {"train", split.train}, {"val", val_ids}};
        fs::create_directories(a.out);
        std::ofstream(fs::path(a.out) / "split.json") << split_json.dump(2) << "\n";
    }
    spdlog::info("train {} samples, val {} samples, {} attributes", train_m.size(), val_m.size(), L);

    auto model = par::build_model(backbone, head, cfg.seed);
    spdlog::info("{} backbone, {} trainable parameters", par::to_string(backbone.name), model.parameter_count());
    const auto prep = par::PreprocessSpec::for_backbone(model.backbone_spec());
    const par::ManifestSource train_src(std::move(train_m), prep, !a.no_cache);
    const par::ManifestSource val_src(std::move(val_m), prep, !a.no_cache);
    const auto report = par::train_and_evaluate(cfg, train_src, val_src, model, manifest.schema);
    std::cout << par::export_comparison(std::span(&report, 1), par::TableFormat::markdown);
    return 0;
}

int run_evaluate(const std::string& model_dir, const std::string& manifest_path, double threshold, int batch_size) {
    auto artifact = par::load_artifact(model_dir);
    par::ManifestOptions opts;
    opts.schema = artifact.schema;
    const auto manifest = par::load_manifest(manifest_path, opts);
    const par::ManifestSource src(manifest, artifact.preprocess, false);
    const par::LossConfig loss = artifact.loss.value_or(par::LossConfig{});
    const auto result = par::evaluate(artifact.model, src, loss, threshold, batch_size);
    json per_label = json::object();
    const auto acc = result.metrics.per_label_accuracy();
    for (std::size_t j = 0; j < acc.size(); ++j) per_label[artifact.schema.attribute(j)] = acc[j];
    std::cout << json{{"model_version", artifact.model_version},
                      {"samples", manifest.size()},
                      {"loss", result.loss},
                      {"mA", result.metrics.mA},
                      {"threshold", threshold},
                      {"per_label_accuracy", per_label}}
                     .dump(2)
              << "\n";
    return 0;
}

fs::path report_path(const fs::path& p) { return fs::is_directory(p) ? p / "run_report.json" : p; }

int run_report(const std::vector<std::string>& runs, const std::string& format, const std::string& out) {
    std::vector<par::RunReport> reports;
    for (const auto& r : runs) reports.push_back(par::load_run_report(report_path(r)));
    const auto fmt = format == "csv" ? par::TableFormat::csv : par::TableFormat::markdown;
    const auto table = par::export_comparison(reports, fmt);
    if (out.empty()) {
        std::cout << table;
    } else {
        std::ofstream f(out);
        f << table;
        if (!f) throw par::Error(par::ErrorCode::IoError, "cannot write " + out);
    }
    return 0;
}

int run_plot(const std::string& run, const std::string& out) {
    const auto report = par::load_run_report(report_path(run));
    const fs::path stem = out.empty() ? report_path(run).parent_path() / "loss_curves" : fs::path(out);
    const auto files = par::emit_loss_curves(report.history, stem);
    std::cout << files.csv.string() << "\n";
    if (files.chart) std::cout << files.chart->string() << "\n";
    return 0;
}

int run_serve(par::ServiceConfig cfg) {
    // Block the stop signals in every thread; the main thread collects them with sigwait.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    par::InferenceServer server(std::move(cfg));
    server.start();
    std::cout << "listening on port " << server.port() << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    spdlog::info("signal {}, shutting down", sig);
    server.stop();
    return 0;
}

int run_predict(const std::string& model_dir, const std::string& image, double threshold, bool pretty) {
    par::check_threshold(threshold);
    const par::Predictor predictor(model_dir);
    const auto records = par::predict_paths(predictor, image, threshold);
    std::size_t failed = 0;
    for (const auto& r : records) {
        if (r.error) {
            ++failed;
            std::cerr << r.path.string() << ": " << r.message << "\n";
        }
        std::cout << r.to_json().dump(pretty ? 2 : -1) << "\n";
    }
    if (failed == 0) return 0;
    return failed == records.size() ? 1 : 2;
}

} // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("par");
    spdlog::set_default_logger(logger);

    CLI::App app{"Pedestrian attribute recognition toolkit"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    AugmentArgs aug;
    auto* augment = app.add_subcommand("augment", "Write seeded affine replicas of every source image");
    augment->add_option("--manifest", aug.manifest, "Input manifest (CSV or JSON)")->required();
    augment->add_option("--schema", aug.schema, "Schema JSON, if the manifest does not carry one");
    augment->add_option("--out", aug.out, "Output directory")->required();
    augment->add_option("--replicas", aug.replicas, "Replicas per source image")->capture_default_str();
    augment->add_option("--seed", aug.seed, "Augmentation seed")->capture_default_str();
    augment->add_option("--workers", aug.workers, "Worker threads")->capture_default_str();

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train a model and keep the best checkpoint");
    train->add_option("--manifest", tr.manifest, "Training manifest")->required();
    train->add_option("--val-manifest", tr.val_manifest, "Separate validation manifest (skips the split)");
    train->add_option("--schema", tr.schema, "Schema JSON");
    train->add_option("--config", tr.config, "JSON run config; flags given on the command line override it");
    train->add_option("--recipe", tr.recipe, "Preset: beit_bce, swin_bce, resnet50_scaled or tiny_cnn");
    train->add_option("--out", tr.out, "Run directory")->required();
    train->add_option("--backbone", tr.backbone, "resnet50, beit, swin or tiny_cnn");
    train->add_option("--feature-dim", tr.feature_dim, "Backbone feature width");
    train->add_option("--input-size", tr.input_size, "Square input size in pixels");
    train->add_option("--pretrained", tr.pretrained, "Weights file or artifact directory");
    train->add_option("--origin", tr.origin, "imagenet, rapv2 or none");
    train->add_flag("--strict", tr.strict, "Fail on any missing or mismatched weight");
    train->add_option("--dropout", tr.dropout, "Head dropout probability");
    train->add_option("--hidden", tr.hidden, "Hidden width of the head (0 for a single linear layer)");
    train->add_option("--loss", tr.loss, "bce, scaled_bce_weighted or scaled_bce_logit_shift");
    train->add_option("--epochs", tr.epochs);
    train->add_option("--lr", tr.lr);
    train->add_option("--batch-size", tr.batch_size);
    train->add_option("--policy", tr.policy, "min_val_loss or max_val_mA");
    train->add_option("--scheduler", tr.scheduler, "none or step_decay");
    train->add_option("--step-every", tr.step_every)->capture_default_str();
    train->add_option("--gamma", tr.gamma)->capture_default_str();
    train->add_option("--seed", tr.seed);
    train->add_option("--split-seed", tr.split_seed)->capture_default_str();
    train->add_option("--val-fraction", tr.val_fraction)->capture_default_str();
    train->add_flag("--val-replicas", tr.val_replicas, "Keep augmentation replicas in the validation split");
    train->add_flag("--no-cache", tr.no_cache, "Decode images on every access instead of caching them");
    train->add_option("--device-tag", tr.device_tag);
    train->add_option("--model-tag", tr.model_tag);

    std::string ev_model, ev_manifest;
    double ev_threshold = 0.5;
    int ev_batch = 32;
    auto* evaluate = app.add_subcommand("evaluate", "Loss and mA of a saved model on a manifest");
    evaluate->add_option("--model", ev_model, "Model directory")->required();
    evaluate->add_option("--manifest", ev_manifest)->required();
    evaluate->add_option("--threshold", ev_threshold)->capture_default_str();
    evaluate->add_option("--batch-size", ev_batch)->capture_default_str();

    std::vector<std::string> runs;
    std::string rep_format = "markdown", rep_out;
    auto* report = app.add_subcommand("report", "Comparison table over finished runs");
    report->add_option("--runs", runs, "Run directories or run_report.json files")->required();
    report->add_option("--format", rep_format)->check(CLI::IsMember({"markdown", "csv"}))->capture_default_str();
    report->add_option("--out", rep_out, "Write to a file instead of stdout");

    std::string plot_run, plot_out;
    auto* plot = app.add_subcommand("plot", "Loss-curve CSV and chart for a run");
    plot->add_option("--run", plot_run, "Run directory or run_report.json")->required();
    plot->add_option("--out", plot_out, "Output stem (default <run>/loss_curves)");

    par::ServiceConfig svc;
    std::string svc_model, svc_token;
    bool no_cors = false;
    auto* serve = app.add_subcommand("serve", "HTTP prediction service");
    serve->add_option("--model", svc_model, "Model directory")->required();
    serve->add_option("--host", svc.host)->capture_default_str();
    serve->add_option("--port", svc.port)->capture_default_str();
    serve->add_option("--threshold", svc.default_threshold)->capture_default_str();
    serve->add_option("--max-image-bytes", svc.max_image_bytes)->capture_default_str();
    serve->add_option("--cors-origin", svc.cors_origin)->capture_default_str();
    serve->add_flag("--no-cors", no_cors);
    serve->add_option("--token", svc_token, "Require this value in the X-Par-Token header");
    serve->add_option("--threads", svc.worker_threads)->capture_default_str();

    std::string pr_model, pr_image;
    double pr_threshold = 0.5;
    bool pr_pretty = false;
    auto* predict = app.add_subcommand("predict", "Predict attributes for an image or a directory of images");
    predict->add_option("--model", pr_model, "Model directory")->required();
    predict->add_option("--image", pr_image, "Image file or directory")->required();
    predict->add_option("--threshold", pr_threshold)->capture_default_str();
    predict->add_flag("--pretty", pr_pretty, "Indent JSON output");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*augment) return run_augment(aug);
        if (*train) return run_train(tr, *train);
        if (*evaluate) return run_evaluate(ev_model, ev_manifest, ev_threshold, ev_batch);
        if (*report) return run_report(runs, rep_format, rep_out);
        if (*plot) return run_plot(plot_run, plot_out);
        if (*serve) {
            svc.model_dir = svc_model;
            svc.cors_allowed = !no_cors;
            if (!svc_token.empty()) svc.auth_token = svc_token;
            return run_serve(std::move(svc));
        }
        if (*predict) return run_predict(pr_model, pr_image, pr_threshold, pr_pretty);
    } catch (const par::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
