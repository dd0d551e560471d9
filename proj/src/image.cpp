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

#include "par/image.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "par/error.hpp"

namespace par {
namespace {

Image from_bgr(const cv::Mat& bgr) {
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    Image out(rgb.rows, rgb.cols, 3);
    for (int y = 0; y < rgb.rows; ++y)
        std::memcpy(&out.data[static_cast<std::size_t>(y) * rgb.cols * 3], rgb.ptr<std::uint8_t>(y),
                    static_cast<std::size_t>(rgb.cols) * 3);
    return out;
}

} // namespace

void require_rgb(const Image& image) {
    if (image.height <= 0 || image.width <= 0 || image.empty())
        throw Error(ErrorCode::InvalidImage, "empty image");
    if (image.channels != 3)
        throw Error(ErrorCode::InvalidImage, "expected 3 channels, got " + std::to_string(image.channels));
    if (image.data.size() != static_cast<std::size_t>(image.height) * image.width * 3)
        throw Error(ErrorCode::InvalidImage, "pixel buffer does not match dimensions");
}

Image decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw Error(ErrorCode::DecodeError, "empty payload");
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr;
    try {
        bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw Error(ErrorCode::DecodeError, e.what());
    }
    if (bgr.empty() || bgr.channels() != 3 || bgr.depth() != CV_8U)
        throw Error(ErrorCode::DecodeError, "payload is not a decodable image");
    return from_bgr(bgr);
}

Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingImage, path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        throw Error(ErrorCode::DecodeError, path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    require_rgb(image);
    cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", bgr, out)) throw Error(ErrorCode::IoError, "PNG encoding failed");
    return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + ": " + std::strerror(errno));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(errno == ENOSPC ? ErrorCode::DiskFull : ErrorCode::IoError, "short write to " + path.string());
}

} // namespace par
