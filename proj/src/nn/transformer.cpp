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

#include "par/nn/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "par/error.hpp"

namespace par::nn {
namespace {

constexpr float kMaskValue = -100.0f;

int region_of(int pos, int size, int window, int shift) {
    if (pos < size - window) return 0;
    if (pos < size - shift) return 1;
    return 2;
}

} // namespace

// ---------------------------------------------------------------- WindowAttention

WindowAttention::WindowAttention(int dim, int heads, GridShape grid, GridShape window, int shift)
    : dim_(dim), heads_(heads), head_dim_(heads > 0 ? dim / heads : 0), grid_(grid), window_(window), shift_(shift),
      tokens_per_window_(window.height * window.width),
      windows_per_image_(window.height > 0 && window.width > 0
                             ? (grid.height / window.height) * (grid.width / window.width)
                             : 0),
      scale_(head_dim_ > 0 ? 1.0f / std::sqrt(static_cast<float>(head_dim_)) : 1.0f), qkv_(dim, 3 * dim),
      proj_(dim, dim),
      bias_table_({(2 * window.height - 1) * (2 * window.width - 1), heads}, {InitKind::normal, 0.02f}) {
    if (heads <= 0 || dim % heads != 0) throw Error(ErrorCode::InvalidArgument, "attention heads must divide dim");
    if (window.height <= 0 || window.width <= 0 || grid.height % window.height != 0 || grid.width % window.width != 0)
        throw Error(ErrorCode::InvalidArgument, "attention window must tile the token grid");
    if (shift < 0 || shift >= std::min(window.height, window.width))
        throw Error(ErrorCode::InvalidArgument, "window shift out of range");

    const int T = tokens_per_window_;
    rel_index_.resize(static_cast<std::size_t>(T) * T);
    for (int i = 0; i < T; ++i) {
        const int ri = i / window.width, ci = i % window.width;
        for (int j = 0; j < T; ++j) {
            const int rj = j / window.width, cj = j % window.width;
            rel_index_[static_cast<std::size_t>(i) * T + j] =
                (ri - rj + window.height - 1) * (2 * window.width - 1) + (ci - cj + window.width - 1);
        }
    }
    if (shift_ > 0) {
        region_.resize(static_cast<std::size_t>(windows_per_image_) * T);
        const int per_row = grid.width / window.width;
        for (int w = 0; w < windows_per_image_; ++w)
            for (int t = 0; t < T; ++t) {
                const int ys = (w / per_row) * window.height + t / window.width;
                const int xs = (w % per_row) * window.width + t % window.width;
                region_[static_cast<std::size_t>(w) * T + t] =
                    region_of(ys, grid.height, window.height, shift_) * 3 + region_of(xs, grid.width, window.width, shift_);
            }
    }
}

Tensor WindowAttention::to_windows(const Tensor& x, int roll) const {
    const int B = x.dim(0), H = grid_.height, W = grid_.width, C = x.dim(3);
    const int T = tokens_per_window_, per_row = W / window_.width;
    Tensor out({B * windows_per_image_, T, C});
    for (int b = 0; b < B; ++b)
        for (int w = 0; w < windows_per_image_; ++w)
            for (int t = 0; t < T; ++t) {
                const int ys = (w / per_row) * window_.height + t / window_.width;
                const int xs = (w % per_row) * window_.width + t % window_.width;
                const int y = (ys + roll) % H, xx = (xs + roll) % W;
                std::memcpy(out.data() + ((static_cast<std::size_t>(b) * windows_per_image_ + w) * T + t) * C,
                            x.data() + ((static_cast<std::size_t>(b) * H + y) * W + xx) * C, sizeof(float) * C);
            }
    return out;
}

Tensor WindowAttention::from_windows(const Tensor& tokens, int batch, int roll) const {
    const int H = grid_.height, W = grid_.width, C = tokens.dim(2);
    const int T = tokens_per_window_, per_row = W / window_.width;
    Tensor out({batch, H, W, C});
    for (int b = 0; b < batch; ++b)
        for (int w = 0; w < windows_per_image_; ++w)
            for (int t = 0; t < T; ++t) {
                const int ys = (w / per_row) * window_.height + t / window_.width;
                const int xs = (w % per_row) * window_.width + t % window_.width;
                const int y = (ys + roll) % H, xx = (xs + roll) % W;
                std::memcpy(out.data() + ((static_cast<std::size_t>(b) * H + y) * W + xx) * C,
                            tokens.data() + ((static_cast<std::size_t>(b) * windows_per_image_ + w) * T + t) * C,
                            sizeof(float) * C);
            }
    return out;
}

Tensor WindowAttention::attend(const Tensor& qkv, int windows, std::vector<RowMatrixF>* probs) const {
    const int T = tokens_per_window_, C = dim_, d = head_dim_;
    Tensor out({windows, T, C});
    if (probs) probs->assign(static_cast<std::size_t>(windows) * heads_, RowMatrixF());
    RowMatrixF scores(T, T);
    for (int bw = 0; bw < windows; ++bw) {
        const ConstMatrixMapF block(qkv.data() + static_cast<std::size_t>(bw) * T * 3 * C, T, 3 * C);
        MatrixMapF ob(out.data() + static_cast<std::size_t>(bw) * T * C, T, C);
        const int w = bw % windows_per_image_;
        for (int h = 0; h < heads_; ++h) {
            const auto q = block.middleCols(h * d, d);
            const auto k = block.middleCols(C + h * d, d);
            const auto v = block.middleCols(2 * C + h * d, d);
            scores.noalias() = (q * k.transpose()) * scale_;
            for (int i = 0; i < T; ++i) {
                float* row = scores.data() + static_cast<std::size_t>(i) * T;
                for (int j = 0; j < T; ++j) {
                    row[j] += bias_table_.value[static_cast<std::size_t>(rel_index_[static_cast<std::size_t>(i) * T + j]) * heads_ + h];
                    if (shift_ > 0 && region_[static_cast<std::size_t>(w) * T + i] != region_[static_cast<std::size_t>(w) * T + j])
                        row[j] += kMaskValue;
                }
                const float mx = *std::max_element(row, row + T);
                float sum = 0.0f;
                for (int j = 0; j < T; ++j) {
                    row[j] = std::exp(row[j] - mx);
                    sum += row[j];
                }
                const float inv = 1.0f / sum;
                for (int j = 0; j < T; ++j) row[j] *= inv;
            }
            ob.middleCols(h * d, d).noalias() = scores * v;
            if (probs) (*probs)[static_cast<std::size_t>(bw) * heads_ + h] = scores;
        }
    }
    return out;
}

Tensor WindowAttention::infer(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != grid_.height || x.dim(2) != grid_.width || x.dim(3) != dim_)
        throw Error(ErrorCode::ShapeMismatch, "WindowAttention input " + x.shape_string());
    const int B = x.dim(0);
    const Tensor tokens = to_windows(x, shift_);
    const Tensor qkv = qkv_.infer(tokens);
    const Tensor attended = attend(qkv, tokens.dim(0), nullptr);
    return from_windows(proj_.infer(attended), B, shift_);
}

Tensor WindowAttention::forward(const Tensor& x) {
    if (x.rank() != 4 || x.dim(1) != grid_.height || x.dim(2) != grid_.width || x.dim(3) != dim_)
        throw Error(ErrorCode::ShapeMismatch, "WindowAttention input " + x.shape_string());
    batch_ = x.dim(0);
    const Tensor tokens = to_windows(x, shift_);
    qkv_out_ = qkv_.forward(tokens);
    const Tensor attended = attend(qkv_out_, tokens.dim(0), &probs_);
    return from_windows(proj_.forward(attended), batch_, shift_);
}

Tensor WindowAttention::backward(const Tensor& grad) {
    const int T = tokens_per_window_, C = dim_, d = head_dim_;
    const Tensor d_out = proj_.backward(to_windows(grad, shift_));
    const int windows = d_out.dim(0);
    Tensor d_qkv({windows, T, 3 * C});
    RowMatrixF dp(T, T), ds(T, T);
    for (int bw = 0; bw < windows; ++bw) {
        const ConstMatrixMapF block(qkv_out_.data() + static_cast<std::size_t>(bw) * T * 3 * C, T, 3 * C);
        MatrixMapF dblock(d_qkv.data() + static_cast<std::size_t>(bw) * T * 3 * C, T, 3 * C);
        const ConstMatrixMapF dob(d_out.data() + static_cast<std::size_t>(bw) * T * C, T, C);
        for (int h = 0; h < heads_; ++h) {
            const RowMatrixF& p = probs_[static_cast<std::size_t>(bw) * heads_ + h];
            const auto q = block.middleCols(h * d, d);
            const auto k = block.middleCols(C + h * d, d);
            const auto v = block.middleCols(2 * C + h * d, d);
            const auto g = dob.middleCols(h * d, d);
            dblock.middleCols(2 * C + h * d, d).noalias() = p.transpose() * g;
            dp.noalias() = g * v.transpose();
            for (int i = 0; i < T; ++i) {
                float dot = 0.0f;
                for (int j = 0; j < T; ++j) dot += dp(i, j) * p(i, j);
                for (int j = 0; j < T; ++j) {
                    ds(i, j) = p(i, j) * (dp(i, j) - dot);
                    bias_table_.grad[static_cast<std::size_t>(rel_index_[static_cast<std::size_t>(i) * T + j]) * heads_ + h] += ds(i, j);
                }
            }
            dblock.middleCols(h * d, d).noalias() = (ds * k) * scale_;
            dblock.middleCols(C + h * d, d).noalias() = (ds.transpose() * q) * scale_;
        }
    }
    const Tensor d_tokens = qkv_.backward(d_qkv);
    return from_windows(d_tokens, batch_, shift_);
}

void WindowAttention::visit(const std::string& prefix, const ParamVisitor& fn) {
    qkv_.visit(prefix + "qkv.", fn);
    proj_.visit(prefix + "proj.", fn);
    fn(prefix + "relative_position_bias_table", bias_table_);
}

// ---------------------------------------------------------------- TransformerBlock

TransformerBlock::TransformerBlock(int dim, int heads, GridShape grid, GridShape window, int shift, double mlp_ratio,
                                   float layer_scale_init)
    : dim_(dim), layer_scale_(layer_scale_init > 0.0f), norm1_(dim, 1e-6f), norm2_(dim, 1e-6f),
      attn_(dim, heads, grid, window, shift), fc1_(dim, static_cast<int>(dim * mlp_ratio)),
      fc2_(static_cast<int>(dim * mlp_ratio), dim),
      gamma1_(layer_scale_ ? std::vector<int>{dim} : std::vector<int>{0}, {InitKind::constant, layer_scale_init}),
      gamma2_(layer_scale_ ? std::vector<int>{dim} : std::vector<int>{0}, {InitKind::constant, layer_scale_init}) {}

namespace {

Tensor scale_channels(const Tensor& x, const Parameter& gamma) {
    Tensor out = x;
    const Eigen::Map<const Eigen::RowVectorXf> g(gamma.value.data(), static_cast<Eigen::Index>(gamma.value.size()));
    out.rows_view().array().rowwise() *= g.array();
    return out;
}

} // namespace

Tensor TransformerBlock::infer(const Tensor& x) const {
    Tensor a = attn_.infer(norm1_.infer(x));
    if (layer_scale_) a = scale_channels(a, gamma1_);
    Tensor h = add(x, a);
    Tensor m = fc2_.infer(act_.infer(fc1_.infer(norm2_.infer(h))));
    if (layer_scale_) m = scale_channels(m, gamma2_);
    add_inplace(h, m);
    return h;
}

Tensor TransformerBlock::forward(const Tensor& x) {
    attn_raw_ = attn_.forward(norm1_.forward(x));
    Tensor h = add(x, layer_scale_ ? scale_channels(attn_raw_, gamma1_) : attn_raw_);
    mlp_raw_ = fc2_.forward(act_.forward(fc1_.forward(norm2_.forward(h))));
    add_inplace(h, layer_scale_ ? scale_channels(mlp_raw_, gamma2_) : mlp_raw_);
    return h;
}

Tensor TransformerBlock::backward(const Tensor& grad) {
    Tensor dm = grad;
    if (layer_scale_) {
        const auto g = grad.rows_view();
        const auto raw = mlp_raw_.rows_view();
        Eigen::Map<Eigen::RowVectorXf> dg(gamma2_.grad.data(), dim_);
        dg += (g.array() * raw.array()).colwise().sum().matrix();
        dm = scale_channels(grad, gamma2_);
    }
    Tensor dh = add(grad, norm2_.backward(fc1_.backward(act_.backward(fc2_.backward(dm)))));
    Tensor da = dh;
    if (layer_scale_) {
        const auto g = dh.rows_view();
        const auto raw = attn_raw_.rows_view();
        Eigen::Map<Eigen::RowVectorXf> dg(gamma1_.grad.data(), dim_);
        dg += (g.array() * raw.array()).colwise().sum().matrix();
        da = scale_channels(dh, gamma1_);
    }
    add_inplace(dh, norm1_.backward(attn_.backward(da)));
    return dh;
}

void TransformerBlock::visit(const std::string& prefix, const ParamVisitor& fn) {
    norm1_.visit(prefix + "norm1.", fn);
    attn_.visit(prefix + "attn.", fn);
    norm2_.visit(prefix + "norm2.", fn);
    fc1_.visit(prefix + "mlp.fc1.", fn);
    fc2_.visit(prefix + "mlp.fc2.", fn);
    if (layer_scale_) {
        fn(prefix + "gamma_1", gamma1_);
        fn(prefix + "gamma_2", gamma2_);
    }
}

// ---------------------------------------------------------------- PatchMerging

PatchMerging::PatchMerging(int dim) : dim_(dim), norm_(4 * dim), reduction_(4 * dim, 2 * dim, false) {}

Tensor PatchMerging::gather(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(3) != dim_ || x.dim(1) % 2 || x.dim(2) % 2)
        throw Error(ErrorCode::ShapeMismatch, "PatchMerging input " + x.shape_string());
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2), C = dim_;
    Tensor out({B, H / 2, W / 2, 4 * C});
    constexpr int dy[4] = {0, 1, 0, 1};
    constexpr int dx[4] = {0, 0, 1, 1};
    for (int b = 0; b < B; ++b)
        for (int y = 0; y < H / 2; ++y)
            for (int xx = 0; xx < W / 2; ++xx)
                for (int s = 0; s < 4; ++s)
                    std::memcpy(out.data() + (((static_cast<std::size_t>(b) * (H / 2) + y) * (W / 2) + xx) * 4 + s) * C,
                                x.data() + ((static_cast<std::size_t>(b) * H + 2 * y + dy[s]) * W + 2 * xx + dx[s]) * C,
                                sizeof(float) * C);
    return out;
}

Tensor PatchMerging::infer(const Tensor& x) const { return reduction_.infer(norm_.infer(gather(x))); }

Tensor PatchMerging::forward(const Tensor& x) {
    input_shape_ = x.shape();
    return reduction_.forward(norm_.forward(gather(x)));
}

Tensor PatchMerging::backward(const Tensor& grad) {
    const Tensor g = norm_.backward(reduction_.backward(grad));
    const int B = input_shape_[0], H = input_shape_[1], W = input_shape_[2], C = dim_;
    Tensor dx(input_shape_);
    constexpr int dy[4] = {0, 1, 0, 1};
    constexpr int dxo[4] = {0, 0, 1, 1};
    for (int b = 0; b < B; ++b)
        for (int y = 0; y < H / 2; ++y)
            for (int xx = 0; xx < W / 2; ++xx)
                for (int s = 0; s < 4; ++s)
                    std::memcpy(dx.data() + ((static_cast<std::size_t>(b) * H + 2 * y + dy[s]) * W + 2 * xx + dxo[s]) * C,
                                g.data() + (((static_cast<std::size_t>(b) * (H / 2) + y) * (W / 2) + xx) * 4 + s) * C,
                                sizeof(float) * C);
    return dx;
}

void PatchMerging::visit(const std::string& prefix, const ParamVisitor& fn) {
    norm_.visit(prefix + "norm.", fn);
    reduction_.visit(prefix + "reduction.", fn);
}

} // namespace par::nn
