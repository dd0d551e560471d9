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
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "par/dataset.hpp"
#include "par/loss.hpp"
#include "par/model.hpp"
#include "par/tensor.hpp"

namespace par {

/// Indexed access to preprocessed [H, W, 3] images and their multi-hot labels.
class SampleSource {
public:
    virtual ~SampleSource() = default;
    [[nodiscard]] virtual std::size_t size() const = 0;
    [[nodiscard]] virtual std::size_t num_attributes() const = 0;
    [[nodiscard]] virtual Tensor image(std::size_t i) const = 0;
    [[nodiscard]] virtual std::span<const std::uint8_t> labels(std::size_t i) const = 0;
};

class InMemorySource final : public SampleSource {
public:
    InMemorySource(std::vector<Tensor> images, std::vector<std::vector<std::uint8_t>> labels);

    [[nodiscard]] std::size_t size() const override { return images_.size(); }
    [[nodiscard]] std::size_t num_attributes() const override { return labels_.empty() ? 0 : labels_[0].size(); }
    [[nodiscard]] Tensor image(std::size_t i) const override { return images_.at(i); }
    [[nodiscard]] std::span<const std::uint8_t> labels(std::size_t i) const override { return labels_.at(i); }

private:
    std::vector<Tensor> images_;
    std::vector<std::vector<std::uint8_t>> labels_;
};

/// Decodes manifest images on demand. With `cache` the preprocessed tensors are
/// kept after first use.
class ManifestSource final : public SampleSource {
public:
    ManifestSource(DatasetManifest manifest, PreprocessSpec spec, bool cache = true);

    [[nodiscard]] std::size_t size() const override { return manifest_.samples.size(); }
    [[nodiscard]] std::size_t num_attributes() const override { return manifest_.schema.size(); }
    [[nodiscard]] Tensor image(std::size_t i) const override;
    [[nodiscard]] std::span<const std::uint8_t> labels(std::size_t i) const override {
        return manifest_.samples.at(i).labels;
    }
    [[nodiscard]] const DatasetManifest& manifest() const noexcept { return manifest_; }

private:
    DatasetManifest manifest_;
    PreprocessSpec spec_;
    bool cache_;
    mutable std::mutex mutex_;
    mutable std::vector<std::optional<Tensor>> cached_;
};

/// Stacks the listed samples into a [B, H, W, 3] batch; fills `targets` (B x L) when given.
Tensor make_batch(const SampleSource& source, std::span<const std::size_t> indices, Matrix* targets = nullptr);

std::vector<double> positive_ratios(const SampleSource& source);

} // namespace par
