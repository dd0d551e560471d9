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

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "par/inference.hpp"

namespace httplib {
class Server;
}

namespace par {

struct ServiceConfig {
    std::string host = "0.0.0.0";
    int port = 8080; // 0 picks a free port
    std::filesystem::path model_dir;
    double default_threshold = 0.5;
    std::size_t max_image_bytes = kDefaultMaxImageBytes;
    bool cors_allowed = true;
    std::string cors_origin = "*";
    /// When set, every request except OPTIONS must carry `X-Par-Token: <token>`.
    std::optional<std::string> auth_token;
    int worker_threads = 8;

    void validate() const;
};

struct ServiceMetrics {
    std::uint64_t requests = 0;
    std::uint64_t predictions = 0;
    std::uint64_t errors = 0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
};

class InferenceServer {
public:
    /// Loads the artifact from config.model_dir (InvalidArtifact on failure).
    explicit InferenceServer(ServiceConfig config);
    InferenceServer(ServiceConfig config, std::shared_ptr<const Predictor> predictor);
    ~InferenceServer();

    InferenceServer(const InferenceServer&) = delete;
    InferenceServer& operator=(const InferenceServer&) = delete;

    /// Binds and starts serving on a background thread. PortInUse when the bind fails.
    void start();
    void stop();
    /// Blocks until stop() is called from elsewhere.
    void wait();
    [[nodiscard]] int port() const noexcept { return bound_port_; }
    [[nodiscard]] ServiceMetrics metrics() const;

private:
    void install_routes();
    void record_latency(double ms);

    ServiceConfig config_;
    std::shared_ptr<const Predictor> predictor_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int bound_port_ = 0;

    std::atomic<std::uint64_t> requests_{0};
    std::atomic<std::uint64_t> predictions_{0};
    std::atomic<std::uint64_t> errors_{0};
    mutable std::mutex latency_mutex_;
    std::vector<double> latencies_; // ring buffer of recent /predict latencies
    std::size_t latency_next_ = 0;
};

} // namespace par
