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
#include <string>
#include <vector>

#include "par/data_source.hpp"
#include "par/dataset.hpp"
#include "par/image.hpp"
#include "par/model.hpp"

namespace par::synth {

// Attribute j adds a fixed pattern on top of noise: the first three raise one
// colour channel each, the fourth adds horizontal stripes, the fifth vertical ones.
struct ToyDataset {
    AttributeSchema schema;
    std::vector<Image> images;
    std::vector<std::vector<std::uint8_t>> labels;
};

ToyDataset make_toy_dataset(int count, int size, std::uint64_t seed);

/// Five attributes in two groups.
AttributeSchema toy_schema();

/// Preprocessed in-memory source for `indices` of the toy set.
InMemorySource toy_source(const ToyDataset& data, const PreprocessSpec& spec, std::size_t begin, std::size_t end);

/// Writes images as PNG plus manifest.csv and schema.json; returns the manifest path.
std::filesystem::path write_toy_manifest(const ToyDataset& data, const std::filesystem::path& dir);

/// Random RGB image.
Image random_image(int height, int width, std::uint64_t seed);

/// A fresh directory under the system temp dir, removed by the destructor.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

private:
    std::filesystem::path path_;
};

} // namespace par::synth
