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

#include "par/tensor.hpp"

#include <algorithm>
#include <cstring>

#include "par/error.hpp"

namespace par {

std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw Error(ErrorCode::ShapeMismatch, "negative dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape, float fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_))
        throw Error(ErrorCode::ShapeMismatch, "value count does not match shape " + shape_string());
}

Tensor Tensor::reshaped(std::vector<int> shape) const& {
    Tensor copy = *this;
    return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(std::vector<int> shape) && {
    if (shape_size(shape) != values_.size())
        throw Error(ErrorCode::ShapeMismatch, "cannot reshape " + shape_string());
    shape_ = std::move(shape);
    return std::move(*this);
}

MatrixMapF Tensor::rows_view() {
    const int cols = shape_.empty() ? 1 : shape_.back();
    return MatrixMapF(values_.data(), cols ? static_cast<Eigen::Index>(values_.size() / cols) : 0, cols);
}

ConstMatrixMapF Tensor::rows_view() const {
    const int cols = shape_.empty() ? 1 : shape_.back();
    return ConstMatrixMapF(values_.data(), cols ? static_cast<Eigen::Index>(values_.size() / cols) : 0, cols);
}

void Tensor::fill(float v) { std::fill(values_.begin(), values_.end(), v); }

std::string Tensor::shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + "]";
}

Tensor stack(std::span<const Tensor> items) {
    if (items.empty()) throw Error(ErrorCode::ShapeMismatch, "cannot stack zero tensors");
    std::vector<int> shape{static_cast<int>(items.size())};
    shape.insert(shape.end(), items.front().shape().begin(), items.front().shape().end());
    Tensor out(shape);
    const auto n = items.front().size();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].same_shape(items.front())) throw Error(ErrorCode::ShapeMismatch, "stack of unequal shapes");
        std::memcpy(out.data() + i * n, items[i].data(), n * sizeof(float));
    }
    return out;
}

Tensor slice_batch(const Tensor& batch, int index) {
    std::vector<int> shape(batch.shape().begin() + 1, batch.shape().end());
    Tensor out(shape);
    std::memcpy(out.data(), batch.data() + static_cast<std::size_t>(index) * out.size(), out.size() * sizeof(float));
    return out;
}

} // namespace par
