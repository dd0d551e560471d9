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

#include "par/data_source.hpp"

#include "par/error.hpp"
#include "par/image.hpp"

namespace par {

InMemorySource::InMemorySource(std::vector<Tensor> images, std::vector<std::vector<std::uint8_t>> labels)
    : images_(std::move(images)), labels_(std::move(labels)) {
    if (images_.size() != labels_.size())
        throw Error(ErrorCode::InvalidArgument, "image and label counts differ");
    for (const auto& l : labels_) {
        if (l.size() != labels_[0].size()) throw Error(ErrorCode::ShapeMismatch, "label vectors differ in length");
        for (auto v : l)
            if (v > 1) throw Error(ErrorCode::NonBinaryTarget, "labels must be 0 or 1");
    }
}

ManifestSource::ManifestSource(DatasetManifest manifest, PreprocessSpec spec, bool cache)
    : manifest_(std::move(manifest)), spec_(spec), cache_(cache), cached_(manifest_.samples.size()) {}

Tensor ManifestSource::image(std::size_t i) const {
    if (cache_) {
        std::lock_guard lock(mutex_);
        if (cached_.at(i)) return *cached_[i];
    }
    Tensor t = preprocess(read_image(manifest_.resolve_image(manifest_.samples.at(i))), spec_);
    if (cache_) {
        std::lock_guard lock(mutex_);
        cached_[i] = t;
    }
    return t;
}

Tensor make_batch(const SampleSource& source, std::span<const std::size_t> indices, Matrix* targets) {
    if (indices.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
    std::vector<Tensor> items;
    items.reserve(indices.size());
    for (auto i : indices) items.push_back(source.image(i));
    if (targets) {
        const auto L = source.num_attributes();
        targets->resize(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(L));
        for (std::size_t r = 0; r < indices.size(); ++r) {
            const auto labels = source.labels(indices[r]);
            for (std::size_t j = 0; j < L; ++j) (*targets)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = labels[j];
        }
    }
    return stack(items);
}

std::vector<double> positive_ratios(const SampleSource& source) {
    if (source.size() == 0) throw Error(ErrorCode::EmptyDataset, "no samples");
    std::vector<double> ratios(source.num_attributes(), 0.0);
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto labels = source.labels(i);
        for (std::size_t j = 0; j < ratios.size(); ++j) ratios[j] += labels[j];
    }
    for (auto& r : ratios) r /= static_cast<double>(source.size());
    return ratios;
}

} // namespace par
