#include "eav/enhance.hpp"

#include <cmath>

namespace eav {

Strategy strategy_from_string(const std::string& name) {
    if (name == "baseline") return Strategy::baseline;
    if (name == "enhance_block") return Strategy::enhance_block;
    if (name == "temp_attention_scaling") return Strategy::temp_attention_scaling;
    if (name == "cfi_attention_scaling") return Strategy::cfi_attention_scaling;
    throw ConfigError("unknown strategy: " + name);
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::baseline: return "baseline";
        case Strategy::enhance_block: return "enhance_block";
        case Strategy::temp_attention_scaling: return "temp_attention_scaling";
        case Strategy::cfi_attention_scaling: return "cfi_attention_scaling";
    }
    throw ConfigError("unknown strategy enum value");
}

CfiReport cfi(const AttentionMap& map) {
    const std::size_t groups = map.groups();
    const std::size_t heads = map.heads();
    const std::size_t f = map.frames();
    const std::size_t n_maps = groups * heads;

    CfiReport report;
    report.per_group_cfi = Tensor::zeros({n_maps});
    if (f < 2) {
        // Single frame: no off-diagonal mass, CFI = 0 by definition.
        report.cfi = 0.0;
        return report;
    }

    const double* pw = map.weights.data().data();
    double* pg = report.per_group_cfi.data().data();
    const double denom = static_cast<double>(f * (f - 1));
    double total = 0.0;
    for (std::size_t m = 0; m < n_maps; ++m) {
        const double* a = pw + m * f * f;
        double off = 0.0;
        for (std::size_t i = 0; i < f; ++i) {
            for (std::size_t j = 0; j < f; ++j) {
                if (i != j) off += a[i * f + j];
            }
        }
        pg[m] = off / denom;
        total += pg[m];
    }
    report.cfi = total / static_cast<double>(n_maps);
    return report;
}

double cfi_enhanced(double cfi_value, std::size_t frames, double tau,
                    bool clip_enabled) {
    const double value = (tau + static_cast<double>(frames)) * cfi_value;
    return clip_enabled ? std::max(value, 1.0) : value;
}

double cfi_enhanced_groupwise(const CfiReport& report, std::size_t frames,
                              double tau, bool clip_enabled) {
    if (report.per_group_cfi.size() == 0) {
        return cfi_enhanced(report.cfi, frames, tau, clip_enabled);
    }
    double sum = 0.0;
    for (double g : report.per_group_cfi.data()) {
        sum += cfi_enhanced(g, frames, tau, clip_enabled);
    }
    return sum / static_cast<double>(report.per_group_cfi.size());
}

Tensor fuse_residual(const Tensor& o_attn, const Tensor& h, double c) {
    if (o_attn.shape() != h.shape()) {
        throw DimensionError("fuse_residual: shape " + o_attn.shape().str() +
                             " vs " + h.shape().str());
    }
    Tensor out = h;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * o_attn[i];
    return out;
}

StrategyResult apply_strategy(const EnhanceConfig& config, std::size_t layer,
                              const AttentionContext& ctx) {
    const std::size_t frames = ctx.frame_tokens.shape()[1];
    const Strategy strategy =
        config.layer_enabled(layer) ? config.strategy : Strategy::baseline;

    switch (strategy) {
        case Strategy::baseline: {
            AttentionResult res = temporal_attention(ctx.frame_tokens, ctx.params);
            CfiReport report = cfi(res.map);
            // Diagnostic only on this path; nothing is applied.
            report.cfi_enhanced =
                cfi_enhanced(report.cfi, frames, config.tau, config.clip_enabled);
            Tensor out = fuse_residual(res.output, ctx.residual, 1.0);
            return StrategyResult{std::move(out), std::move(res.output),
                                  std::move(report), std::move(res.map)};
        }
        case Strategy::enhance_block: {
            AttentionResult res = temporal_attention(ctx.frame_tokens, ctx.params);
            CfiReport report = cfi(res.map);
            report.cfi_enhanced =
                cfi_enhanced(report.cfi, frames, config.tau, config.clip_enabled);
            Tensor out =
                fuse_residual(res.output, ctx.residual, report.cfi_enhanced);
            return StrategyResult{std::move(out), std::move(res.output),
                                  std::move(report), std::move(res.map)};
        }
        case Strategy::temp_attention_scaling: {
            if (!(config.tau > 0.0)) {
                throw ConfigError(
                    "temp_attention_scaling requires tau > 0, got tau = " +
                    std::to_string(config.tau));
            }
            const double denom =
                config.tau * std::sqrt(static_cast<double>(ctx.params.d_k));
            AttentionResult res =
                temporal_attention(ctx.frame_tokens, ctx.params, denom);
            CfiReport report = cfi(res.map);
            report.cfi_enhanced =
                cfi_enhanced(report.cfi, frames, config.tau, config.clip_enabled);
            Tensor out = fuse_residual(res.output, ctx.residual, 1.0);
            return StrategyResult{std::move(out), std::move(res.output),
                                  std::move(report), std::move(res.map)};
        }
        case Strategy::cfi_attention_scaling: {
            // Two passes: CFI_enhanced from the default-scale map feeds the
            // second softmax denominator.
            AttentionResult first =
                temporal_attention(ctx.frame_tokens, ctx.params);
            CfiReport report = cfi(first.map);
            report.cfi_enhanced =
                cfi_enhanced(report.cfi, frames, config.tau, config.clip_enabled);
            if (!(report.cfi_enhanced > 0.0)) {
                throw ConfigError(
                    "cfi_attention_scaling: CFI_enhanced must be positive to "
                    "scale logits, got " + std::to_string(report.cfi_enhanced));
            }
            const double denom = report.cfi_enhanced *
                                 std::sqrt(static_cast<double>(ctx.params.d_k));
            AttentionResult res =
                temporal_attention(ctx.frame_tokens, ctx.params, denom);
            Tensor out = fuse_residual(res.output, ctx.residual, 1.0);
            return StrategyResult{std::move(out), std::move(res.output),
                                  std::move(report), std::move(res.map)};
        }
    }
    throw ConfigError("unknown strategy enum value");
}

}  // namespace eav
