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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace par {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMapF = Eigen::Map<RowMatrixF>;
using ConstMatrixMapF = Eigen::Map<const RowMatrixF>;

/// Dense float tensor, row-major. Image batches are NHWC.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, float fill = 0.0f);
    Tensor(std::vector<int> shape, std::vector<float> values);

    [[nodiscard]] const std::vector<int>& shape() const noexcept { return shape_; }
    [[nodiscard]] int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis < 0 ? rank() + axis : axis)); }
    [[nodiscard]] int rank() const noexcept { return static_cast<int>(shape_.size()); }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    float* data() noexcept { return values_.data(); }
    [[nodiscard]] const float* data() const noexcept { return values_.data(); }
    std::span<float> values() noexcept { return values_; }
    [[nodiscard]] std::span<const float> values() const noexcept { return values_; }

    float& operator[](std::size_t i) { return values_[i]; }
    float operator[](std::size_t i) const { return values_[i]; }

    /// Same data, new shape with equal element count.
    [[nodiscard]] Tensor reshaped(std::vector<int> shape) const&;
    [[nodiscard]] Tensor reshaped(std::vector<int> shape) &&;

    /// View as a (size / last_dim) x last_dim matrix.
    MatrixMapF rows_view();
    [[nodiscard]] ConstMatrixMapF rows_view() const;

    void fill(float v);
    [[nodiscard]] bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    [[nodiscard]] std::string shape_string() const;

    bool operator==(const Tensor&) const = default;

private:
    std::vector<int> shape_;
    std::vector<float> values_;
};

std::size_t shape_size(const std::vector<int>& shape);

/// Concatenates equally-shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);
/// Item `index` along the leading axis.
Tensor slice_batch(const Tensor& batch, int index);

} // namespace par
