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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace par {

/// 8-bit RGB image, row-major, channels interleaved.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int h, int w, int c = 3, std::uint8_t fill = 0)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

    [[nodiscard]] bool empty() const noexcept { return data.empty(); }

    std::uint8_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    [[nodiscard]] std::uint8_t at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const Image&) const = default;
};

/// Throws InvalidImage unless the image is non-empty, 3-channel and consistently sized.
void require_rgb(const Image& image);

/// Decodes PNG/JPEG/BMP bytes to RGB. Throws DecodeError.
Image decode_image(std::span<const std::uint8_t> bytes);
/// Throws MissingImage / DecodeError.
Image read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
/// Throws DiskFull / IoError.
void write_png(const Image& image, const std::filesystem::path& path);

} // namespace par
