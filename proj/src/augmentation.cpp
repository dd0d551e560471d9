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

#include "par/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include "par/error.hpp"
#include "par/random.hpp"

namespace par {

void AugmentationConfig::validate() const {
    if (rotation_deg < 0 || width_shift < 0 || height_shift < 0 || shear_intensity < 0 || zoom < 0)
        throw Error(ErrorCode::InvalidArgument, "augmentation half-ranges must be non-negative");
    if (zoom >= 1.0) throw Error(ErrorCode::InvalidArgument, "zoom half-range must be < 1");
    if (replicas_per_image < 0) throw Error(ErrorCode::InvalidArgument, "replicas_per_image must be >= 0");
}

bool AffineParams::within(const AugmentationConfig& c, int width, int height) const {
    return std::abs(angle_deg) <= c.rotation_deg && std::abs(dx) <= c.width_shift * width &&
           std::abs(dy) <= c.height_shift * height && std::abs(shear) <= c.shear_intensity &&
           scale >= 1.0 - c.zoom && scale <= 1.0 + c.zoom && (c.horizontal_flip || !flipped);
}

AffineParams sample_affine(const AugmentationConfig& config, std::string_view parent_id, int replica_index,
                           int width, int height) {
    Rng rng(derive_seed(config.seed, parent_id, static_cast<std::uint64_t>(replica_index)));
    AffineParams p;
    // Fixed draw order keeps old replicas stable when ranges change.
    p.angle_deg = rng.uniform(-config.rotation_deg, config.rotation_deg);
    p.dx = rng.uniform(-config.width_shift, config.width_shift) * width;
    p.dy = rng.uniform(-config.height_shift, config.height_shift) * height;
    p.shear = rng.uniform(-config.shear_intensity, config.shear_intensity);
    p.scale = rng.uniform(1.0 - config.zoom, 1.0 + config.zoom);
    const bool coin = rng.bernoulli(0.5);
    p.flipped = config.horizontal_flip && coin;
    return p;
}

std::array<double, 6> affine_matrix(const AffineParams& params, int width, int height) {
    const double theta = params.angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double k = params.shear, z = params.scale;
    // Sh * R * S
    const double a = z * (c + k * s);
    const double b = z * (-s + k * c);
    const double cc = z * s;
    const double d = z * c;
    const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
    const double tx = cx - a * cx - b * cy + params.dx;
    const double ty = cy - cc * cx - d * cy + params.dy;
    return {a, b, tx, cc, d, ty};
}

Image apply_affine(const Image& image, const AffineParams& params, FillMode) {
    require_rgb(image);
    const int W = image.width, H = image.height;
    const auto m = affine_matrix(params, W, H);
    const double det = m[0] * m[4] - m[1] * m[3];
    if (!(std::abs(det) > 0.0)) throw Error(ErrorCode::InvalidArgument, "singular affine transform");
    const double ia = m[4] / det, ib = -m[1] / det, ic = -m[3] / det, id = m[0] / det;

    Image out(H, W, 3);
    const double max_x = W - 1, max_y = H - 1;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double qx = x - m[2], qy = y - m[5];
            double sx = ia * qx + ib * qy;
            double sy = ic * qx + id * qy;
            if (params.flipped) sx = max_x - sx;
            // nearest fill: clamp the sampling point onto the border
            sx = std::clamp(sx, 0.0, max_x);
            sy = std::clamp(sy, 0.0, max_y);
            const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
            const double fx = sx - x0, fy = sy - y0;
            for (int ch = 0; ch < 3; ++ch) {
                const double top = (1.0 - fx) * image.at(y0, x0, ch) + fx * image.at(y0, x1, ch);
                const double bottom = (1.0 - fx) * image.at(y1, x0, ch) + fx * image.at(y1, x1, ch);
                const double v = (1.0 - fy) * top + fy * bottom;
                out.at(y, x, ch) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
            }
        }
    }
    return out;
}

std::string replica_id(std::string_view parent_id, int replica_index) {
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_aug%02d", replica_index);
    return std::string(parent_id) + suffix;
}

namespace {

template <typename Fn>
void parallel_for_samples(std::size_t n, int workers, Fn&& fn) {
    const auto threads = static_cast<std::size_t>(std::max(1, workers));
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < n; i += threads) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

std::string safe_filename(std::string_view id) {
    std::string out(id);
    for (auto& c : out)
        if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
    return out;
}

} // namespace

std::vector<AugmentedImage> augment_dataset(std::span<const LabeledSample> samples, const AugmentationConfig& config,
                                            const ImageLoader& loader, int workers) {
    config.validate();
    const auto R = static_cast<std::size_t>(config.replicas_per_image);
    std::vector<AugmentedImage> out(samples.size() * R);
    if (R == 0) return out;
    parallel_for_samples(samples.size(), workers, [&](std::size_t i) {
        const auto& s = samples[i];
        Image source;
        try {
            source = loader(s);
            require_rgb(source);
        } catch (const Error& e) {
            throw Error(e.code(), "sample '" + s.sample_id + "': " + e.what());
        }
        for (std::size_t k = 0; k < R; ++k) {
            auto& item = out[i * R + k];
            item.parent_id = s.sample_id;
            item.replica_index = static_cast<int>(k + 1);
            item.params = sample_affine(config, s.sample_id, item.replica_index, source.width, source.height);
            item.pixels = apply_affine(source, item.params, config.fill_mode);
            item.labels = s.labels;
        }
    });
    return out;
}

DatasetManifest augment_manifest_to_disk(const DatasetManifest& manifest, const AugmentationConfig& config,
                                         const std::filesystem::path& out_dir, int workers) {
    config.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

    const auto R = config.replicas_per_image;
    DatasetManifest out;
    out.schema = manifest.schema;
    out.source_tag = manifest.source_tag + "_aug";
    out.base_dir = out_dir;
    out.samples.resize(manifest.samples.size() * static_cast<std::size_t>(R + 1));

    const auto abs_out = fs::absolute(out_dir);
    parallel_for_samples(manifest.samples.size(), workers, [&](std::size_t i) {
        const auto& s = manifest.samples[i];
        Image source;
        try {
            source = read_image(manifest.resolve_image(s));
        } catch (const Error& e) {
            throw Error(e.code(), "sample '" + s.sample_id + "': " + e.what());
        }
        const auto base = i * static_cast<std::size_t>(R + 1);
        auto& original = out.samples[base];
        original = s;
        original.parent_id = s.sample_id;
        original.replica_index = 0;
        original.image_path = fs::absolute(manifest.resolve_image(s)).lexically_relative(abs_out).generic_string();
        for (int k = 1; k <= R; ++k) {
            const auto params = sample_affine(config, s.sample_id, k, source.width, source.height);
            const auto id = replica_id(s.sample_id, k);
            const auto rel = fs::path("images") / (safe_filename(id) + ".png");
            write_png(apply_affine(source, params, config.fill_mode), out_dir / rel);
            auto& replica = out.samples[base + static_cast<std::size_t>(k)];
            replica.sample_id = id;
            replica.image_path = rel.generic_string();
            replica.labels = s.labels;
            replica.parent_id = s.sample_id;
            replica.replica_index = k;
        }
    });
    return out;
}

} // namespace par
