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

#include "par/server.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

// 50+ clients may connect at once; the library default backlog is 5.
#define CPPHTTPLIB_LISTEN_BACKLOG 256
#include <httplib.h>
#include <spdlog/spdlog.h>

namespace par {

using nlohmann::json;

namespace {

constexpr std::size_t kLatencyWindow = 4096;

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::DecodeError:
    case ErrorCode::InvalidImage:
    case ErrorCode::InvalidArgument: return 400;
    case ErrorCode::PayloadTooLarge: return 413;
    case ErrorCode::ModelNotLoaded: return 503;
    default: return 500;
    }
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"error", code}, {"message", message}});
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

} // namespace

void ServiceConfig::validate() const {
    if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "port must lie in [0, 65535]");
    check_threshold(default_threshold);
    if (max_image_bytes == 0) throw Error(ErrorCode::InvalidArgument, "max_image_bytes must be positive");
    if (worker_threads < 1) throw Error(ErrorCode::InvalidArgument, "worker_threads must be >= 1");
}

json ServiceMetrics::to_json() const {
    return {{"requests", requests}, {"predictions", predictions}, {"errors", errors},
            {"latency_ms", {{"p50", p50_ms}, {"p95", p95_ms}}}};
}

InferenceServer::InferenceServer(ServiceConfig config) : config_(std::move(config)) {
    config_.validate();
    predictor_ = std::make_shared<const Predictor>(config_.model_dir);
    install_routes();
}

InferenceServer::InferenceServer(ServiceConfig config, std::shared_ptr<const Predictor> predictor)
    : config_(std::move(config)), predictor_(std::move(predictor)) {
    config_.validate();
    install_routes();
}

InferenceServer::~InferenceServer() { stop(); }

void InferenceServer::record_latency(double ms) {
    std::lock_guard lock(latency_mutex_);
    if (latencies_.size() < kLatencyWindow) {
        latencies_.push_back(ms);
    } else {
        latencies_[latency_next_] = ms;
        latency_next_ = (latency_next_ + 1) % kLatencyWindow;
    }
}

ServiceMetrics InferenceServer::metrics() const {
    ServiceMetrics m;
    m.requests = requests_.load();
    m.predictions = predictions_.load();
    m.errors = errors_.load();
    std::vector<double> snapshot;
    {
        std::lock_guard lock(latency_mutex_);
        snapshot = latencies_;
    }
    m.p50_ms = percentile(snapshot, 0.50);
    m.p95_ms = percentile(snapshot, 0.95);
    return m;
}

void InferenceServer::install_routes() {
    server_ = std::make_unique<httplib::Server>();
    auto& svr = *server_;
    const int workers = config_.worker_threads;
    svr.new_task_queue = [workers] { return new httplib::ThreadPool(static_cast<std::size_t>(workers)); };
    // Leave room for multipart framing so the byte cap is enforced on the image itself.
    // httplib's default also sets SO_REUSEPORT, which would let a second server share the port.
    svr.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    svr.set_payload_max_length(config_.max_image_bytes + (64u << 10));

    svr.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        requests_.fetch_add(1, std::memory_order_relaxed);
        if (config_.cors_allowed) {
            res.set_header("Access-Control-Allow-Origin", config_.cors_origin);
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Par-Token");
        }
        if (req.method == "OPTIONS") {
            res.status = 204;
            return httplib::Server::HandlerResponse::Handled;
        }
        if (config_.auth_token && req.get_header_value("X-Par-Token") != *config_.auth_token) {
            errors_.fetch_add(1, std::memory_order_relaxed);
            send_error(res, 401, "Unauthorized", "missing or wrong X-Par-Token header");
            return httplib::Server::HandlerResponse::Handled;
        }
        return httplib::Server::HandlerResponse::Unhandled;
    });

    svr.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        if (!predictor_) return send_error(res, 503, "ModelNotLoaded", "no model loaded");
        send_json(res, 200, {{"status", "ok"}, {"model_version", predictor_->model_version()}});
    });

    svr.Get("/schema", [this](const httplib::Request&, httplib::Response& res) {
        if (!predictor_) return send_error(res, 503, "ModelNotLoaded", "no model loaded");
        send_json(res, 200, predictor_->schema().to_json());
    });

    svr.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, metrics().to_json());
    });

    svr.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
        const auto start = std::chrono::steady_clock::now();
        try {
            if (!predictor_) throw Error(ErrorCode::ModelNotLoaded, "no model loaded");
            double threshold = config_.default_threshold;
            if (req.has_param("threshold")) {
                const auto text = req.get_param_value("threshold");
                std::size_t used = 0;
                try {
                    threshold = std::stod(text, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used == 0 || used != text.size())
                    throw Error(ErrorCode::InvalidArgument, "threshold '" + text + "' is not a number");
            }
            if (!req.has_file("image")) throw Error(ErrorCode::InvalidArgument, "multipart field 'image' is required");
            const auto file = req.get_file_value("image");
            const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(file.content.data()),
                                                      file.content.size());
            auto response = predictor_->predict_bytes(bytes, threshold, config_.max_image_bytes);
            response.latency_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            record_latency(response.latency_ms);
            predictions_.fetch_add(1, std::memory_order_relaxed);
            send_json(res, 200, response.to_json());
        } catch (const Error& e) {
            errors_.fetch_add(1, std::memory_order_relaxed);
            send_error(res, http_status(e.code()), to_string(e.code()), e.what());
        }
    });

    svr.set_error_handler([this](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        errors_.fetch_add(1, std::memory_order_relaxed);
        if (res.status == 413)
            send_error(res, 413, "PayloadTooLarge", "request body exceeds the configured limit");
        else if (res.status == 404)
            send_error(res, 404, "NotFound", "no such endpoint");
        else
            send_error(res, res.status, "HttpError", "request failed with status " + std::to_string(res.status));
    });

    svr.set_exception_handler([this](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        errors_.fetch_add(1, std::memory_order_relaxed);
        std::string what = "unknown error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send_error(res, 500, "InternalError", what);
    });
}

void InferenceServer::start() {
    if (thread_.joinable()) return;
    if (config_.port == 0) {
        bound_port_ = server_->bind_to_any_port(config_.host);
        if (bound_port_ <= 0) throw Error(ErrorCode::PortInUse, "cannot bind any port on " + config_.host);
    } else {
        if (!server_->bind_to_port(config_.host, config_.port))
            throw Error(ErrorCode::PortInUse, config_.host + ":" + std::to_string(config_.port));
        bound_port_ = config_.port;
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    spdlog::info("serving {} on {}:{}", predictor_ ? predictor_->model_version() : "<none>", config_.host, bound_port_);
}

void InferenceServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

void InferenceServer::wait() {
    if (thread_.joinable()) thread_.join();
}

} // namespace par
