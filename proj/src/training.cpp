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

#include "par/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "par/artifact.hpp"
#include "par/error.hpp"
#include "par/random.hpp"

namespace par {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(CheckpointPolicy policy) noexcept {
    return policy == CheckpointPolicy::min_val_loss ? "min_val_loss" : "max_val_mA";
}

CheckpointPolicy parse_checkpoint_policy(std::string_view name) {
    if (name == "min_val_loss") return CheckpointPolicy::min_val_loss;
    if (name == "max_val_mA" || name == "max_val_ma") return CheckpointPolicy::max_val_mA;
    throw Error(ErrorCode::InvalidArgument, "unknown checkpoint policy '" + std::string(name) + "'");
}

void TrainRunConfig::validate() const {
    if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
    if (!(optimizer.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0, 1)");
    if (scheduler) scheduler->validate();
}

double TrainRunConfig::learning_rate_for(int epoch) const {
    return scheduler ? scheduler->learning_rate(optimizer.learning_rate, epoch) : optimizer.learning_rate;
}

json TrainRunConfig::to_json() const {
    json j{{"epochs", epochs},
           {"learning_rate", optimizer.learning_rate},
           {"beta1", optimizer.beta1},
           {"beta2", optimizer.beta2},
           {"eps", optimizer.eps},
           {"batch_size", batch_size},
           {"loss", loss.to_json()},
           {"scheduler", scheduler ? scheduler->to_json() : json(nullptr)},
           {"checkpoint_policy", to_string(checkpoint_policy)},
           {"seed", seed},
           {"device_tag", device_tag},
           {"model_tag", model_tag},
           {"threshold", threshold}};
    if (!out_dir.empty()) j["out_dir"] = out_dir.string();
    return j;
}

TrainRunConfig TrainRunConfig::from_json(const json& j) {
    TrainRunConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.optimizer.learning_rate = j.value("learning_rate", c.optimizer.learning_rate);
        c.optimizer.beta1 = j.value("beta1", c.optimizer.beta1);
        c.optimizer.beta2 = j.value("beta2", c.optimizer.beta2);
        c.optimizer.eps = j.value("eps", c.optimizer.eps);
        c.batch_size = j.value("batch_size", c.batch_size);
        if (j.contains("loss")) {
            const auto& l = j["loss"];
            c.loss = l.is_string() ? LossConfig{parse_loss_kind(l.get<std::string>()), std::nullopt} : LossConfig::from_json(l);
        }
        if (j.contains("scheduler") && !j["scheduler"].is_null()) c.scheduler = SchedulerSpec::from_json(j["scheduler"]);
        if (j.contains("checkpoint_policy"))
            c.checkpoint_policy = parse_checkpoint_policy(j["checkpoint_policy"].get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.device_tag = j.value("device_tag", c.device_tag);
        c.model_tag = j.value("model_tag", c.model_tag);
        c.threshold = j.value("threshold", c.threshold);
        if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

EvalResult evaluate(const FeatClassifier& model, const SampleSource& data, const LossConfig& loss, double threshold,
                    int batch_size) {
    const std::size_t n = data.size();
    if (n == 0) throw Error(ErrorCode::EmptyDataset, "evaluation set is empty");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
    const auto L = static_cast<Eigen::Index>(model.num_attributes());
    if (data.num_attributes() != static_cast<std::size_t>(L))
        throw Error(ErrorCode::ShapeMismatch, "dataset and model disagree on the number of attributes");
    EvalResult out;
    out.probabilities.resize(static_cast<Eigen::Index>(n), L);
    Matrix all_targets(static_cast<Eigen::Index>(n), L);
    double loss_sum = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Matrix targets;
        const Tensor batch = make_batch(data, idx, &targets);
        const Matrix logits = to_matrix(model.infer(batch));
        loss_sum += compute_loss(loss, logits, targets).loss * static_cast<double>(idx.size());
        const auto rows = static_cast<Eigen::Index>(idx.size());
        out.probabilities.middleRows(static_cast<Eigen::Index>(start), rows) =
            logits.unaryExpr([](double z) { return sigmoid(z); });
        all_targets.middleRows(static_cast<Eigen::Index>(start), rows) = targets;
    }
    out.loss = loss_sum / static_cast<double>(n);
    out.metrics = mean_accuracy(out.probabilities, all_targets, threshold);
    return out;
}

int select_checkpoint(std::span<const EpochMetrics> history, CheckpointPolicy policy) {
    if (history.empty()) throw Error(ErrorCode::InvalidArgument, "empty history");
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        const bool better = policy == CheckpointPolicy::min_val_loss ? history[i].val_loss < history[best].val_loss
                                                                     : history[i].val_mA > history[best].val_mA;
        if (better) best = i;
    }
    return history[best].epoch;
}

RunReport train_and_evaluate(const TrainRunConfig& config, const SampleSource& train_set, const SampleSource& val_set,
                             FeatClassifier& model, const AttributeSchema& schema) {
    config.validate();
    if (train_set.size() == 0) throw Error(ErrorCode::EmptyDataset, "training set is empty");
    if (val_set.size() == 0) throw Error(ErrorCode::EmptyDataset, "validation set is empty");
    const std::size_t L = schema.size();
    if (static_cast<std::size_t>(model.num_attributes()) != L || train_set.num_attributes() != L ||
        val_set.num_attributes() != L)
        throw Error(ErrorCode::ShapeMismatch, "model, schema and datasets disagree on the number of attributes");

    LossConfig loss = config.loss;
    if (loss.kind != LossKind::plain_bce && !loss.weights) loss = make_loss_config(loss.kind, positive_ratios(train_set));
    loss.validate(L);

    RunReport report;
    report.config = config;
    report.config.loss = loss;
    report.device_tag = config.device_tag;

    const bool persist = !config.out_dir.empty();
    fs::path metrics_path, best_dir;
    if (persist) {
        fs::create_directories(config.out_dir);
        metrics_path = config.out_dir / "metrics.jsonl";
        best_dir = config.out_dir / "best_model";
        fs::remove(metrics_path);
        report.artifact_path = best_dir.string();
    }

    model.reseed_dropout(config.seed);
    Adam adam(model.trainable_parameters(), config.optimizer);
    const auto run_start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_set.size());
    const auto bs = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        const double lr = config.learning_rate_for(epoch);
        adam.set_learning_rate(lr);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(config.seed, "epoch", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(std::span<std::size_t>(order));

        model.set_mode(Mode::train);
        double loss_sum = 0.0;
        for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
            const std::span<const std::size_t> idx(order.data() + start, std::min(bs, order.size() - start));
            Matrix targets;
            const Tensor batch = make_batch(train_set, idx, &targets);
            model.zero_grad();
            const Matrix logits = to_matrix(model.forward(batch));
            LossValue lv = compute_loss(loss, logits, targets);
            if (!std::isfinite(lv.loss))
                throw Error(ErrorCode::NonFiniteLoss,
                            "training loss is " + std::to_string(lv.loss) + " at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(b + 1));
            model.backward(to_tensor(lv.grad));
            adam.step();
            loss_sum += lv.loss * static_cast<double>(idx.size());
        }
        model.set_mode(Mode::eval);

        EpochMetrics m;
        m.epoch = epoch;
        m.learning_rate = lr;
        m.train_loss = loss_sum / static_cast<double>(order.size());
        const EvalResult val = evaluate(model, val_set, loss, config.threshold, config.batch_size);
        if (!std::isfinite(val.loss))
            throw Error(ErrorCode::NonFiniteLoss, "validation loss is not finite at epoch " + std::to_string(epoch));
        m.val_loss = val.loss;
        m.val_mA = val.metrics.mA;
        m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        report.history.push_back(m);

        if (persist) {
            append_metric_record(metrics_path, {epoch, "train", m.train_loss, std::nullopt, {}, lr});
            append_metric_record(metrics_path,
                                 {epoch, "val", m.val_loss, m.val_mA, val.metrics.per_label_accuracy(), std::nullopt});
        }
        const int best = select_checkpoint(report.history, config.checkpoint_policy);
        if (persist && best == epoch)
            save_artifact(model, schema, best_dir, loss,
                          json{{"epoch", epoch}, {"val_loss", m.val_loss}, {"val_mA", m.val_mA},
                               {"checkpoint_policy", to_string(config.checkpoint_policy)},
                               {"batch_size", config.batch_size}, {"threshold", config.threshold}});
        spdlog::info("epoch {}/{}: train_loss {:.6f} val_loss {:.6f} val_mA {:.4f} lr {:.3g}{}", epoch, config.epochs,
                     m.train_loss, m.val_loss, m.val_mA, lr, best == epoch ? " *" : "");
    }

    report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
    report.best_epoch = select_checkpoint(report.history, config.checkpoint_policy);
    if (persist) {
        emit_loss_curves(report.history, config.out_dir / "loss_curves");
        save_run_report(report, config.out_dir / "run_report.json");
    }
    return report;
}

} // namespace par
