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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "par/dataset.hpp"
#include "par/image.hpp"

namespace par {

enum class FillMode { nearest };

/// Geometric augmentation ranges. Every draw is uniform over [-range, +range]
/// (zoom: scale in [1 - zoom, 1 + zoom]).
struct AugmentationConfig {
    double rotation_deg = 25.0;
    double width_shift = 0.15;  // fraction of image width
    double height_shift = 0.15; // fraction of image height
    double shear_intensity = 0.5;
    double zoom = 0.5;
    bool horizontal_flip = true;
    FillMode fill_mode = FillMode::nearest;
    int replicas_per_image = 12;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument on negative ranges or zoom >= 1.
    void validate() const;
};

struct AffineParams {
    double angle_deg = 0.0;
    double dx = 0.0; // pixels
    double dy = 0.0; // pixels
    double shear = 0.0;
    double scale = 1.0;
    bool flipped = false;

    bool operator==(const AffineParams&) const = default;

    /// True when every field lies inside the ranges `config` allows for a width x height image.
    [[nodiscard]] bool within(const AugmentationConfig& config, int width, int height) const;
};

/// Draws replica parameters from a stream keyed by (config.seed, parent_id, replica_index).
/// The draw does not depend on call order or on any other replica.
AffineParams sample_affine(const AugmentationConfig& config, std::string_view parent_id, int replica_index,
                           int width, int height);

/// 2x3 forward matrix mapping source pixel coordinates to output coordinates
/// (after the optional flip): centre-anchored scale, then rotation, then
/// shear x' = x + s*y, then translation. Row-major {a, b, tx, c, d, ty}.
std::array<double, 6> affine_matrix(const AffineParams& params, int width, int height);

/// Warps with bilinear interpolation; samples falling outside the source take
/// the nearest edge pixel. Output has the input's dimensions.
Image apply_affine(const Image& image, const AffineParams& params, FillMode fill_mode = FillMode::nearest);

struct AugmentedImage {
    std::string parent_id;
    int replica_index = 1;
    Image pixels;
    AffineParams params;
    std::vector<std::uint8_t> labels; // copied from the parent
};

using ImageLoader = std::function<Image(const LabeledSample&)>;

/// Replica `k` (1-based) of every sample, in sample-major order: N * replicas_per_image items.
/// Originals are not part of the output. `workers` > 1 splits samples across threads; the
/// result does not depend on it.
std::vector<AugmentedImage> augment_dataset(std::span<const LabeledSample> samples, const AugmentationConfig& config,
                                            const ImageLoader& loader, int workers = 1);

/// Id used for replica `replica_index` of `parent_id`.
std::string replica_id(std::string_view parent_id, int replica_index);

/// Writes every replica as PNG under `out_dir` and returns a manifest holding the
/// originals (replica_index 0) followed by their replicas.
DatasetManifest augment_manifest_to_disk(const DatasetManifest& manifest, const AugmentationConfig& config,
                                         const std::filesystem::path& out_dir, int workers = 1);

} // namespace par
