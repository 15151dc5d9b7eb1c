#include "eav/pipeline.hpp"

#include <chrono>
#include <cmath>

namespace eav {

NoiseSchedule NoiseSchedule::linear_alpha_bar(std::size_t steps, double start,
                                              double end) {
    if (steps < 1) throw ParameterError("schedule needs at least one step");
    if (!(start > 0.0) || !(end > 0.0) || start > 1.0 || end > start) {
        throw ParameterError("schedule requires 0 < end <= start <= 1");
    }
    NoiseSchedule s;
    s.alpha_bars.resize(steps);
    s.alphas.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const double frac =
            steps == 1 ? 1.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
        s.alpha_bars[t] = start + (end - start) * frac;
    }
    double prev = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
        s.alphas[t] = s.alpha_bars[t] / prev;
        prev = s.alpha_bars[t];
        if (!(s.alphas[t] > 0.0) || s.alphas[t] > 1.0) {
            throw ParameterError("derived alpha_t outside (0, 1]");
        }
    }
    return s;
}

BlockLayout layout_from_string(const std::string& name) {
    if (name == "temporal") return BlockLayout::temporal;
    if (name == "full_3d") return BlockLayout::full_3d;
    throw ConfigError("unknown layout: " + name);
}

std::string layout_name(BlockLayout layout) {
    return layout == BlockLayout::temporal ? "temporal" : "full_3d";
}

ToyDenoiser ToyDenoiser::seeded(std::uint64_t seed, std::size_t depth,
                                std::size_t d_model, std::size_t d_k,
                                std::size_t heads, BlockLayout layout) {
    ToyDenoiser model;
    model.layers.reserve(depth);
    Rng rng(seed ^ 0x746f79646974ULL);  // decorrelate from the sampling stream
    const double ff_scale = 1.0 / std::sqrt(static_cast<double>(d_model));
    for (std::size_t i = 0; i < depth; ++i) {
        DenoiserBlock block;
        block.layout = layout;
        block.attention =
            AttentionParams::seeded(rng.next_u64(), d_model, d_k, heads);
        Rng ff_rng(rng.next_u64());
        block.ff_w1 = scale(gaussian(ff_rng, {d_model, d_model}), ff_scale);
        block.ff_w2 = scale(gaussian(ff_rng, {d_model, d_model}), ff_scale);
        model.layers.push_back(std::move(block));
    }
    return model;
}

void RunSpec::validate() const {
    if (steps < 1) throw ParameterError("steps must be >= 1");
    if (batch < 1 || frames < 1 || channels < 1 || height < 1 || width < 1) {
        throw ParameterError("latent dimensions must be positive");
    }
    if (depth < 1) throw ParameterError("depth must be >= 1");
    if (d_k < 1 || heads < 1) throw ParameterError("d_k and heads must be >= 1");
    for (std::size_t layer : enhance.layer_mask) {
        if (layer >= depth) {
            throw ConfigError("layer_mask entry " + std::to_string(layer) +
                              " exceeds depth " + std::to_string(depth));
        }
    }
    if (!std::isfinite(enhance.tau)) throw ConfigError("tau must be finite");
}

VideoLatent forward_diffuse(const VideoLatent& x0, const NoiseSchedule& schedule,
                            std::size_t t, Rng& rng) {
    if (t < 1 || t > schedule.steps()) {
        throw ParameterError("forward_diffuse: step " + std::to_string(t) +
                             " outside 1.." + std::to_string(schedule.steps()));
    }
    Tensor x = x0.data;
    for (std::size_t s = 1; s <= t; ++s) {
        const double a = schedule.alphas[s - 1];
        const Tensor z = gaussian(rng, x.shape());
        const double wa = std::sqrt(a);
        const double wz = std::sqrt(1.0 - a);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = wa * x[i] + wz * z[i];
        }
    }
    return VideoLatent::wrap(std::move(x));
}

VideoLatent forward_diffuse_jump(const VideoLatent& x0,
                                 const NoiseSchedule& schedule, std::size_t t,
                                 Rng& rng) {
    if (t < 1 || t > schedule.steps()) {
        throw ParameterError("forward_diffuse_jump: step " + std::to_string(t) +
                             " outside 1.." + std::to_string(schedule.steps()));
    }
    const double abar = schedule.alpha_bars[t - 1];
    const Tensor z = gaussian(rng, x0.data.shape());
    Tensor x = x0.data;
    const double wa = std::sqrt(abar);
    const double wz = std::sqrt(1.0 - abar);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = wa * x[i] + wz * z[i];
    }
    return VideoLatent::wrap(std::move(x));
}

namespace {

Tensor feed_forward(const Tensor& x, const DenoiserBlock& block) {
    Tensor hidden = matmul(x, block.ff_w1);
    for (double& v : hidden.data()) v = std::tanh(v);
    Tensor out = matmul(hidden, block.ff_w2);
    return add(x, out);
}

/// Temporal block: frame-axis attention + enhancement + feed-forward.
Tensor temporal_block(const Tensor& latent5d, const DenoiserBlock& block,
                      const EnhanceConfig& enhance, std::size_t layer,
                      std::size_t step, TraceSink& trace, bool full_maps,
                      std::size_t batch, std::size_t height, std::size_t width) {
    const auto t0 = std::chrono::steady_clock::now();
    VideoLatent z = VideoLatent::wrap(latent5d);
    Tensor tokens = to_frame_axis(z);
    AttentionContext ctx{tokens, tokens, block.attention};
    StrategyResult res = apply_strategy(enhance, layer, ctx);

    const double applied =
        (enhance.layer_enabled(layer) && enhance.strategy == Strategy::enhance_block)
            ? res.report.cfi_enhanced
            : 1.0;

    Tensor out = feed_forward(res.output, block);
    const auto t1 = std::chrono::steady_clock::now();

    TraceRecord record;
    record.step = step;
    record.layer = layer;
    record.cfi = res.report.cfi;
    record.cfi_enhanced = res.report.cfi_enhanced;
    record.cfi_enhanced_groupwise = cfi_enhanced_groupwise(
        res.report, tokens.shape()[1], enhance.tau, enhance.clip_enabled);
    record.applied_scale = applied;
    record.norm_o_attn = l2_norm(res.o_attn);
    record.norm_o_scaled = l2_norm(scale(res.o_attn, applied));
    record.norm_h = l2_norm(tokens);
    record.attention_snapshot = res.attention.aggregate();
    if (full_maps) record.full_map = res.attention.weights;
    record.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    trace.append(std::move(record));

    return from_frame_axis(out, batch, height, width).data;
}

/// 3D full-attention block: token attention over F*H*W, temporal subview
/// map for CFI, Eq.-8-style scaling of the 3D attention output.
Tensor full_3d_block(const Tensor& latent5d, const DenoiserBlock& block,
                     const EnhanceConfig& enhance, std::size_t layer,
                     std::size_t step, TraceSink& trace, bool full_maps) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t batch = latent5d.shape()[0];
    const std::size_t frames = latent5d.shape()[1];
    const std::size_t channels = latent5d.shape()[2];
    const std::size_t height = latent5d.shape()[3];
    const std::size_t width = latent5d.shape()[4];

    // (B, F, C, H, W) -> (B, F, H, W, C) -> (B, F*H*W, C), frame-major tokens
    Tensor tokens = reshape(permute(latent5d, {0, 1, 3, 4, 2}),
                            Shape{batch, frames * height * width, channels});

    AttentionMap subview =
        temporal_subview_3d(tokens, block.attention, frames, height, width);
    CfiReport report = cfi(subview);
    report.layer = layer;
    report.step = step;
    report.cfi_enhanced =
        cfi_enhanced(report.cfi, frames, enhance.tau, enhance.clip_enabled);

    const Strategy strategy =
        enhance.layer_enabled(layer) ? enhance.strategy : Strategy::baseline;
    double applied = 1.0;
    AttentionResult full = [&] {
        switch (strategy) {
            case Strategy::enhance_block:
                applied = report.cfi_enhanced;
                return full_attention(tokens, block.attention);
            case Strategy::temp_attention_scaling: {
                if (!(enhance.tau > 0.0)) {
                    throw ConfigError("temp_attention_scaling requires tau > 0");
                }
                const double denom = enhance.tau *
                                     std::sqrt(static_cast<double>(block.attention.d_k));
                return full_attention(tokens, block.attention, denom);
            }
            case Strategy::cfi_attention_scaling: {
                if (!(report.cfi_enhanced > 0.0)) {
                    throw ConfigError(
                        "cfi_attention_scaling: CFI_enhanced must be positive");
                }
                const double denom = report.cfi_enhanced *
                                     std::sqrt(static_cast<double>(block.attention.d_k));
                return full_attention(tokens, block.attention, denom);
            }
            case Strategy::baseline:
            default:
                return full_attention(tokens, block.attention);
        }
    }();

    Tensor fused = fuse_residual(full.output, tokens, applied);
    Tensor out = feed_forward(fused, block);
    const auto t1 = std::chrono::steady_clock::now();

    TraceRecord record;
    record.step = step;
    record.layer = layer;
    record.cfi = report.cfi;
    record.cfi_enhanced = report.cfi_enhanced;
    record.cfi_enhanced_groupwise =
        cfi_enhanced_groupwise(report, frames, enhance.tau, enhance.clip_enabled);
    record.applied_scale = applied;
    record.norm_o_attn = l2_norm(full.output);
    record.norm_o_scaled = l2_norm(scale(full.output, applied));
    record.norm_h = l2_norm(tokens);
    record.attention_snapshot = subview.aggregate();
    if (full_maps) record.full_map = subview.weights;
    record.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    trace.append(std::move(record));

    // (B, F*H*W, C) -> (B, F, H, W, C) -> (B, F, C, H, W)
    return permute(reshape(out, Shape{batch, frames, height, width, channels}),
                   {0, 1, 4, 2, 3});
}

}  // namespace

VideoLatent denoise_step(const VideoLatent& x_t, std::size_t t,
                         const ToyDenoiser& model, const EnhanceConfig& enhance,
                         std::size_t total_steps, TraceSink& trace,
                         bool record_full_maps) {
    if (t < 1) throw ParameterError("denoise_step: t must be >= 1");
    Tensor h = x_t.data;
    const std::size_t batch = h.shape()[0];
    const std::size_t height = h.shape()[3];
    const std::size_t width = h.shape()[4];
    for (std::size_t layer = 0; layer < model.depth(); ++layer) {
        const DenoiserBlock& block = model.layers[layer];
        if (block.layout == BlockLayout::temporal) {
            h = temporal_block(h, block, enhance, layer, t, trace,
                               record_full_maps, batch, height, width);
        } else {
            h = full_3d_block(h, block, enhance, layer, t, trace,
                              record_full_maps);
        }
    }
    const double eta = 1.0 / static_cast<double>(total_steps);
    Tensor next = x_t.data;
    for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] -= eta * h[i];
    }
    return VideoLatent::wrap(std::move(next));
}

RunResult run(const RunSpec& spec) {
    spec.validate();
    const ToyDenoiser model = ToyDenoiser::seeded(
        spec.seed, spec.depth, spec.channels, spec.d_k, spec.heads, spec.layout);

    Rng rng(spec.seed);
    VideoLatent x = VideoLatent::wrap(gaussian(
        rng, {spec.batch, spec.frames, spec.channels, spec.height, spec.width}));

    TraceSink trace;
    for (std::size_t t = spec.steps; t >= 1; --t) {
        x = denoise_step(x, t, model, spec.enhance, spec.steps, trace,
                         spec.record_full_maps);
    }
    return RunResult{std::move(x), trace.records()};
}

}  // namespace eav
