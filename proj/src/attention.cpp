#include "eav/attention.hpp"

#include <cmath>

namespace eav {

VideoLatent VideoLatent::wrap(Tensor t) {
    if (t.shape().rank() != 5) {
        throw DimensionError("VideoLatent requires axes (B, F, C, H, W), got " +
                             t.shape().str());
    }
    for (std::size_t i = 0; i < 5; ++i) {
        if (t.shape()[i] == 0) {
            throw DimensionError("VideoLatent extents must be >= 1, got " +
                                 t.shape().str());
        }
    }
    return VideoLatent{std::move(t)};
}

AttentionParams AttentionParams::seeded(std::uint64_t seed,
                                        std::size_t d_model, std::size_t d_k,
                                        std::size_t heads) {
    Rng rng(seed);
    const double init_scale = 1.0 / std::sqrt(static_cast<double>(d_model));
    auto init = [&](const Shape& s) { return scale(gaussian(rng, s), init_scale); };
    AttentionParams p;
    p.d_model = d_model;
    p.d_k = d_k;
    p.heads = heads;
    p.w_q = init({d_model, heads * d_k});
    p.w_k = init({d_model, heads * d_k});
    p.w_v = init({d_model, heads * d_k});
    p.w_o = init({heads * d_k, d_model});
    return p;
}

Tensor AttentionMap::aggregate() const {
    const std::size_t g = groups();
    const std::size_t h = heads();
    const std::size_t f = frames();
    Tensor out = Tensor::zeros({f, f});
    const double* pw = weights.data().data();
    double* po = out.data().data();
    const std::size_t maps = g * h;
    for (std::size_t m = 0; m < maps; ++m) {
        const double* src = pw + m * f * f;
        for (std::size_t i = 0; i < f * f; ++i) po[i] += src[i];
    }
    for (std::size_t i = 0; i < f * f; ++i) po[i] /= static_cast<double>(maps);
    return out;
}

Tensor to_frame_axis(const VideoLatent& z) {
    // (B, F, C, H, W) -> (B, H, W, F, C) -> (B*H*W, F, C)
    Tensor p = permute(z.data, {0, 3, 4, 1, 2});
    return reshape(p, Shape{z.batch() * z.height() * z.width(), z.frames(),
                            z.channels()});
}

VideoLatent from_frame_axis(const Tensor& t, std::size_t batch,
                            std::size_t height, std::size_t width) {
    if (t.shape().rank() != 3 || t.shape()[0] != batch * height * width) {
        throw DimensionError("from_frame_axis: shape " + t.shape().str() +
                             " incompatible with B=" + std::to_string(batch) +
                             " H=" + std::to_string(height) +
                             " W=" + std::to_string(width));
    }
    const std::size_t frames = t.shape()[1];
    const std::size_t channels = t.shape()[2];
    Tensor grouped = reshape(t, Shape{batch, height, width, frames, channels});
    return VideoLatent::wrap(permute(grouped, {0, 3, 4, 1, 2}));
}

namespace {

/// Shared core: per-group, per-head scaled dot-product attention over a
/// (G, S, C) token tensor. Returns the concatenated head context projected
/// through w_o and the (G, heads, S, S) map.
AttentionResult sequence_attention(const Tensor& tokens,
                                   const AttentionParams& params,
                                   std::optional<double> scale_override) {
    if (tokens.shape().rank() != 3 || tokens.shape()[2] != params.d_model) {
        throw DimensionError("attention: expected tokens (G, S, C) with C=" +
                             std::to_string(params.d_model) + ", got " +
                             tokens.shape().str());
    }
    const std::size_t groups = tokens.shape()[0];
    const std::size_t seq = tokens.shape()[1];
    const std::size_t dk = params.d_k;
    const std::size_t heads = params.heads;
    const double denom =
        scale_override ? *scale_override : std::sqrt(static_cast<double>(dk));
    if (!(denom > 0.0)) {
        throw ParameterError("attention: scale override must be positive");
    }

    const Tensor q = matmul(tokens, params.w_q);  // (G, S, heads*dk)
    const Tensor k = matmul(tokens, params.w_k);
    const Tensor v = matmul(tokens, params.w_v);

    Tensor maps = Tensor::zeros({groups, heads, seq, seq});
    Tensor context = Tensor::zeros({groups, seq, heads * dk});

    const double* pq = q.data().data();
    const double* pk = k.data().data();
    const double* pv = v.data().data();
    double* pm = maps.data().data();
    double* pc = context.data().data();
    const std::size_t row_w = heads * dk;

    for (std::size_t g = 0; g < groups; ++g) {
        const double* qg = pq + g * seq * row_w;
        const double* kg = pk + g * seq * row_w;
        const double* vg = pv + g * seq * row_w;
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dk;
            Tensor logits = Tensor::zeros({seq, seq});
            double* pl = logits.data().data();
            for (std::size_t i = 0; i < seq; ++i) {
                const double* qi = qg + i * row_w + off;
                for (std::size_t j = 0; j < seq; ++j) {
                    const double* kj = kg + j * row_w + off;
                    double dot = 0.0;
                    for (std::size_t d = 0; d < dk; ++d) dot += qi[d] * kj[d];
                    pl[i * seq + j] = dot;
                }
            }
            Tensor a = softmax_rows(logits, denom);
            const double* pa = a.data().data();
            double* mdst = pm + ((g * heads + h) * seq * seq);
            for (std::size_t i = 0; i < seq * seq; ++i) mdst[i] = pa[i];

            for (std::size_t i = 0; i < seq; ++i) {
                double* ci = pc + g * seq * row_w + i * row_w + off;
                for (std::size_t j = 0; j < seq; ++j) {
                    const double aij = pa[i * seq + j];
                    const double* vj = vg + j * row_w + off;
                    for (std::size_t d = 0; d < dk; ++d) ci[d] += aij * vj[d];
                }
            }
        }
    }

    Tensor output = matmul(context, params.w_o);  // (G, S, d_model)
    return AttentionResult{std::move(output), AttentionMap{std::move(maps)}};
}

}  // namespace

AttentionResult temporal_attention(const Tensor& frame_tokens,
                                   const AttentionParams& params,
                                   std::optional<double> scale_override) {
    return sequence_attention(frame_tokens, params, scale_override);
}

AttentionMap temporal_subview_3d(const Tensor& tokens,
                                 const AttentionParams& params,
                                 std::size_t frames, std::size_t height,
                                 std::size_t width) {
    if (tokens.shape().rank() != 3) {
        throw DimensionError("temporal_subview_3d: expected (B, N, C), got " +
                             tokens.shape().str());
    }
    const std::size_t batch = tokens.shape()[0];
    const std::size_t n_tokens = tokens.shape()[1];
    const std::size_t channels = tokens.shape()[2];
    if (n_tokens != frames * height * width) {
        throw DimensionError(
            "temporal_subview_3d: token count " + std::to_string(n_tokens) +
            " does not factor as F*H*W = " + std::to_string(frames) + "*" +
            std::to_string(height) + "*" + std::to_string(width));
    }
    // (B, F, H, W, C) -> (B, H, W, F, C) -> (B*H*W, F, C)
    Tensor grouped = reshape(tokens, Shape{batch, frames, height, width, channels});
    Tensor by_site = permute(grouped, {0, 2, 3, 1, 4});
    Tensor frame_tokens =
        reshape(by_site, Shape{batch * height * width, frames, channels});
    return sequence_attention(frame_tokens, params, {}).map;
}

AttentionResult full_attention(const Tensor& tokens,
                               const AttentionParams& params,
                               std::optional<double> scale_override) {
    return sequence_attention(tokens, params, scale_override);
}

}  // namespace eav
