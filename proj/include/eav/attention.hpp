#pragma once

#include <cstdint>
#include <optional>

#include "eav/tensor.hpp"

namespace eav {

/// Latent video tensor with axes (B, F, C, H, W).
struct VideoLatent {
    Tensor data;  // shape (B, F, C, H, W)

    std::size_t batch() const { return data.shape()[0]; }
    std::size_t frames() const { return data.shape()[1]; }
    std::size_t channels() const { return data.shape()[2]; }
    std::size_t height() const { return data.shape()[3]; }
    std::size_t width() const { return data.shape()[4]; }

    static VideoLatent wrap(Tensor t);
};

/// Projection weights for one temporal self-attention block.
/// w_q/w_k/w_v are (d_model, heads*d_k); w_o is (heads*d_k, d_model).
struct AttentionParams {
    std::size_t d_model = 0;
    std::size_t d_k = 0;
    std::size_t heads = 0;
    Tensor w_q, w_k, w_v, w_o;

    /// Seeded Gaussian init scaled by 1/sqrt(d_model).
    static AttentionParams seeded(std::uint64_t seed, std::size_t d_model,
                                  std::size_t d_k, std::size_t heads);
};

/// Row-stochastic frame x frame attention weights, shape (G, heads, F, F)
/// with G = B*H*W for temporal attention.
struct AttentionMap {
    Tensor weights;

    std::size_t groups() const { return weights.shape()[0]; }
    std::size_t heads() const { return weights.shape()[1]; }
    std::size_t frames() const { return weights.shape()[2]; }

    /// Mean over groups and heads; shape (F, F).
    Tensor aggregate() const;
};

struct AttentionResult {
    Tensor output;  // (G, F, C)
    AttentionMap map;
};

/// (B, F, C, H, W) -> (B*H*W, F, C). Group index is b*H*W + h*W + w.
Tensor to_frame_axis(const VideoLatent& z);

/// Inverse of to_frame_axis given the original spatial extents.
VideoLatent from_frame_axis(const Tensor& t, std::size_t batch,
                            std::size_t height, std::size_t width);

/// Temporal self-attention along the frame axis. Input shape (G, F, C) with
/// C = d_model. Per head, A = softmax(Q K^T / s) with s = sqrt(d_k) by
/// default or the override when given; output is the output-projected A*V.
AttentionResult temporal_attention(const Tensor& frame_tokens,
                                   const AttentionParams& params,
                                   std::optional<double> scale_override = {});

/// Temporal sub-view of a 3D full-attention block. Tokens of shape
/// (B, F*H*W, C), frame-major token order (f*H*W + h*W + w), are regrouped
/// to (B*H*W, F, C) and the frame x frame map is computed as in
/// temporal_attention. The map feeds CFI only; the 3D block's own full
/// attention output is what gets scaled.
AttentionMap temporal_subview_3d(const Tensor& tokens,
                                 const AttentionParams& params,
                                 std::size_t frames, std::size_t height,
                                 std::size_t width);

/// Full attention over all tokens of shape (B, N, C), treated as one
/// sequence per batch element. Map shape (B, heads, N, N).
AttentionResult full_attention(const Tensor& tokens,
                               const AttentionParams& params,
                               std::optional<double> scale_override = {});

}  // namespace eav
